#pragma once

// Exact event-driven simulation of a finite symmetric chain, excursion
// decomposition relative to a trace set, and the time-changed path on it.

#include <traceforms/chain/chain.hpp>
#include <traceforms/rng.hpp>

#include <algorithm>
#include <limits>
#include <optional>
#include <variant>

namespace traceforms::mc {

using chain::SubsetSpec;
using chain::SymmetricChain;

inline constexpr std::size_t kDeath = std::numeric_limits<std::size_t>::max();
inline constexpr double kInf = std::numeric_limits<double>::infinity();

/// Per-state cumulative transition table; index `size()` of a row is death.
class JumpTable {
public:
    explicit JumpTable(const SymmetricChain& c) : n_(c.size()), total_(n_), offset_(n_ + 1, 0) {
        const auto& q = c.rates();
        for (std::size_t x = 0; x < n_; ++x) {
            const auto xi = static_cast<Eigen::Index>(x);
            double acc = 0.0;
            for (std::size_t y = 0; y < n_; ++y) {
                const double r = q(xi, static_cast<Eigen::Index>(y));
                if (y == x || r <= 0.0) continue;
                acc += r;
                cum_.push_back(acc);
                target_.push_back(y);
            }
            const double k = c.kill_rates()(xi);
            if (k > 0.0) {
                acc += k;
                cum_.push_back(acc);
                target_.push_back(kDeath);
            }
            total_[x] = acc;
            offset_[x + 1] = cum_.size();
        }
    }

    [[nodiscard]] std::size_t size() const { return n_; }
    [[nodiscard]] double total_rate(std::size_t x) const { return total_[x]; }

    /// Next state (or kDeath) from x given a uniform u in [0, 1).
    [[nodiscard]] std::size_t next(std::size_t x, double u) const {
        const auto b = cum_.begin() + static_cast<std::ptrdiff_t>(offset_[x]);
        const auto e = cum_.begin() + static_cast<std::ptrdiff_t>(offset_[x + 1]);
        auto it = std::upper_bound(b, e, u * total_[x]);
        if (it == e) --it;
        return target_[static_cast<std::size_t>(it - cum_.begin())];
    }

private:
    std::size_t n_;
    std::vector<double> total_;
    std::vector<std::size_t> offset_;
    std::vector<double> cum_;
    std::vector<std::size_t> target_;
};

/// Initial law: a fixed state, or a categorical law proportional to weights.
class StartLaw {
public:
    static StartLaw at(std::size_t x) {
        StartLaw s;
        s.fixed_ = x;
        return s;
    }
    static StartLaw weighted(const Vector& w) {
        if (w.size() == 0 || w.minCoeff() < 0.0 || !(w.sum() > 0.0)) {
            throw InvalidInput("start weights must be nonnegative with positive total");
        }
        StartLaw s;
        double acc = 0.0;
        for (Eigen::Index i = 0; i < w.size(); ++i) s.cum_.push_back(acc += w(i));
        return s;
    }
    /// Normalized symmetrizing measure m / m(E).
    static StartLaw stationary(const SymmetricChain& c) { return weighted(c.weights()); }

    [[nodiscard]] std::size_t sample(Rng& rng) const {
        if (fixed_) return *fixed_;
        const double u = rng.uniform() * cum_.back();
        auto it = std::upper_bound(cum_.begin(), cum_.end(), u);
        if (it == cum_.end()) --it;
        return static_cast<std::size_t>(it - cum_.begin());
    }

private:
    std::optional<std::size_t> fixed_;
    std::vector<double> cum_;
};

/// states[k] is occupied on [jump_times[k], jump_times[k+1]); jump_times[0] = 0.
/// The path is observed on [0, end_time]; end_time = death_time if it died.
struct PathRecord {
    std::size_t start_state = 0;
    std::vector<double> jump_times;
    std::vector<std::size_t> states;
    std::optional<double> death_time;
    double end_time = 0.0;
};

[[nodiscard]] inline PathRecord simulate_path(const JumpTable& table, std::size_t start, double horizon, Rng& rng) {
    if (!(horizon > 0.0)) throw InvalidInput("horizon must be positive");
    PathRecord p;
    p.start_state = start;
    p.jump_times.push_back(0.0);
    p.states.push_back(start);
    double t = 0.0;
    std::size_t x = start;
    for (;;) {
        const double rate = table.total_rate(x);
        if (rate <= 0.0) break;
        t += rng.exponential(rate);
        if (t >= horizon) break;
        const std::size_t y = table.next(x, rng.uniform());
        if (y == kDeath) {
            p.death_time = t;
            p.end_time = t;
            return p;
        }
        p.jump_times.push_back(t);
        p.states.push_back(y);
        x = y;
    }
    p.end_time = horizon;
    return p;
}

/// Continues a path past its horizon until the excursion open at end_time
/// returns to F or the chain dies. Paths that are in F at end_time, or have
/// not visited F yet, are left as they are.
inline void complete_open_excursion(const JumpTable& table, const SubsetSpec& f, PathRecord& p, Rng& rng) {
    if (p.death_time || f.contains(p.states.back())) return;
    if (std::none_of(p.states.begin(), p.states.end(), [&](std::size_t x) { return f.contains(x); })) return;
    double t = p.end_time;
    std::size_t x = p.states.back();
    for (;;) {
        t += rng.exponential(table.total_rate(x));
        const std::size_t y = table.next(x, rng.uniform());
        if (y == kDeath) {
            p.death_time = t;
            p.end_time = t;
            return;
        }
        p.jump_times.push_back(t);
        p.states.push_back(y);
        x = y;
        if (f.contains(y)) {
            p.end_time = t;
            return;
        }
    }
}

[[nodiscard]] inline PathRecord simulate_paths(const SymmetricChain& c, const StartLaw& start, double horizon, Rng& rng) {
    const JumpTable table(c);
    const std::size_t x = start.sample(rng);
    return simulate_path(table, x, horizon, rng);
}

/// One excursion into E0: the path is in E0 on (left, right). right is
/// infinite and post_state is kDeath when the chain dies during the excursion.
struct ExcursionRecord {
    double left = 0.0;
    double right = 0.0;
    std::size_t pre_state = 0;
    std::size_t post_state = 0;
};

/// Maximal E0-intervals after the first visit to F. States are full-chain
/// indices. Excursions still open at end_time are dropped.
[[nodiscard]] inline std::vector<ExcursionRecord> excursion_decompose(const PathRecord& p, const SubsetSpec& f) {
    std::vector<ExcursionRecord> out;
    bool seen_f = false;
    std::optional<ExcursionRecord> open;
    for (std::size_t k = 0; k < p.states.size(); ++k) {
        const std::size_t x = p.states[k];
        if (f.contains(x)) {
            if (open) {
                open->right = p.jump_times[k];
                open->post_state = x;
                out.push_back(*open);
                open.reset();
            }
            seen_f = true;
        } else if (seen_f && !open) {
            open = ExcursionRecord{p.jump_times[k], 0.0, p.states[k - 1], 0};
        }
    }
    if (open && p.death_time) {
        open->right = kInf;
        open->post_state = kDeath;
        out.push_back(*open);
    }
    return out;
}

/// Time change of X by A_t = int_0^t mu(X_s)/m(X_s) 1{X_s in F} ds. States of
/// the result are local indices into F; consecutive equal states are merged.
/// Empty if the path never visits F.
[[nodiscard]] inline std::optional<PathRecord> trace_path(const PathRecord& p, const SubsetSpec& f, const Vector& mu,
                                                          const Vector& m) {
    if (mu.size() != static_cast<Eigen::Index>(f.trace_set().size())) throw InvalidInput("mu must live on F");
    if (mu.minCoeff() <= 0.0) throw NonPositiveDensity("mu must be positive on F");
    PathRecord y;
    double clock = 0.0;
    bool started = false;
    for (std::size_t k = 0; k < p.states.size(); ++k) {
        const std::size_t x = p.states[k];
        if (!f.contains(x)) continue;
        const std::size_t a = f.local_index(x);
        const double until = k + 1 < p.states.size() ? p.jump_times[k + 1] : p.end_time;
        if (!started) {
            y.start_state = a;
            y.jump_times.push_back(0.0);
            y.states.push_back(a);
            started = true;
        } else if (y.states.back() != a) {
            y.jump_times.push_back(clock);
            y.states.push_back(a);
        }
        const auto ai = static_cast<Eigen::Index>(a);
        clock += (until - p.jump_times[k]) * mu(ai) / m(static_cast<Eigen::Index>(x));
    }
    if (!started) return std::nullopt;
    if (p.death_time) y.death_time = clock;
    y.end_time = clock;
    return y;
}

/// Jump counts and holding exposure of F-valued paths; column nf counts deaths.
struct EmpiricalGenerator {
    Matrix counts;
    Vector exposure;

    explicit EmpiricalGenerator(std::size_t nf)
        : counts(Matrix::Zero(static_cast<Eigen::Index>(nf), static_cast<Eigen::Index>(nf) + 1)),
          exposure(Vector::Zero(static_cast<Eigen::Index>(nf))) {}

    void add(const PathRecord& y) {
        for (std::size_t k = 0; k < y.states.size(); ++k) {
            const auto a = static_cast<Eigen::Index>(y.states[k]);
            const bool last = k + 1 == y.states.size();
            const double until = last ? y.end_time : y.jump_times[k + 1];
            exposure(a) += until - y.jump_times[k];
            if (!last) counts(a, static_cast<Eigen::Index>(y.states[k + 1])) += 1.0;
            else if (y.death_time) counts(a, counts.cols() - 1) += 1.0;
        }
    }

    [[nodiscard]] double total_jumps() const { return counts.sum(); }

    /// z-scores of count/exposure against target rates (off-diagonal rates and,
    /// in the last column, death rates), with Poisson standard errors. Entries
    /// with zero target and zero count get z = 0.
    [[nodiscard]] Matrix z_scores(const Matrix& rates, const Vector& death) const {
        Matrix z = Matrix::Zero(counts.rows(), counts.cols());
        for (Eigen::Index a = 0; a < counts.rows(); ++a) {
            for (Eigen::Index b = 0; b < counts.cols(); ++b) {
                if (b == a) continue;
                const double target = b == counts.rows() ? death(a) : rates(a, b);
                const double expected = target * exposure(a);
                if (expected <= 0.0) {
                    z(a, b) = counts(a, b) > 0.0 ? kInf : 0.0;
                    continue;
                }
                z(a, b) = (counts(a, b) - expected) / std::sqrt(expected);
            }
        }
        return z;
    }
};

} // namespace traceforms::mc
