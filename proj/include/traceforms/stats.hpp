#pragma once

#include <traceforms/error.hpp>

#include <cmath>
#include <optional>
#include <vector>

namespace traceforms {

struct EstimatorReport {
    double estimate = 0.0;
    double std_error = 0.0;
    std::size_t n_events = 0;
    std::optional<double> exact_reference;
    std::optional<double> z_score;

    /// Attaches an exact value; z is left empty when the standard error is 0.
    EstimatorReport& with_exact(double exact) {
        exact_reference = exact;
        if (std_error > 0.0) {
            z_score = (estimate - exact) / std_error;
        } else {
            z_score.reset();
        }
        return *this;
    }
};

/// Ratio estimator sum(value) / sum(exposure) with a batch-means standard error.
class BatchMeans {
public:
    static constexpr std::size_t kDefaultBatches = 32;

    explicit BatchMeans(std::size_t n_batches = kDefaultBatches) : value_(n_batches, 0.0), exposure_(n_batches, 0.0) {
        if (n_batches < 2) throw InvalidInput("batch means needs at least two batches");
    }

    void add(std::size_t batch, double value, double exposure) {
        value_[batch] += value;
        exposure_[batch] += exposure;
    }

    [[nodiscard]] std::size_t batches() const { return value_.size(); }

    [[nodiscard]] double estimate() const {
        double v = 0.0, e = 0.0;
        for (std::size_t b = 0; b < value_.size(); ++b) {
            v += value_[b];
            e += exposure_[b];
        }
        return e > 0.0 ? v / e : 0.0;
    }

    /// Standard deviation of the per-batch ratios over sqrt(#batches); empty
    /// batches are skipped.
    [[nodiscard]] double std_error() const {
        std::vector<double> ratios;
        for (std::size_t b = 0; b < value_.size(); ++b) {
            if (exposure_[b] > 0.0) ratios.push_back(value_[b] / exposure_[b]);
        }
        if (ratios.size() < 2) return 0.0;
        double mean = 0.0;
        for (double r : ratios) mean += r;
        mean /= static_cast<double>(ratios.size());
        double ss = 0.0;
        for (double r : ratios) ss += (r - mean) * (r - mean);
        const double k = static_cast<double>(ratios.size());
        return std::sqrt(ss / (k - 1.0) / k);
    }

    /// Batch that item i of n equally weighted items falls into.
    [[nodiscard]] std::size_t batch_of(std::size_t i, std::size_t n) const {
        return static_cast<std::size_t>((static_cast<unsigned __int128>(i) * value_.size()) / n);
    }

private:
    std::vector<double> value_;
    std::vector<double> exposure_;
};

/// Mean and standard error of independent per-item values, via batch means.
[[nodiscard]] inline EstimatorReport mean_report(const std::vector<double>& values, std::size_t n_events) {
    BatchMeans bm;
    for (std::size_t i = 0; i < values.size(); ++i) bm.add(bm.batch_of(i, values.size()), values[i], 1.0);
    EstimatorReport r;
    r.estimate = bm.estimate();
    r.std_error = bm.std_error();
    r.n_events = n_events;
    return r;
}

} // namespace traceforms
