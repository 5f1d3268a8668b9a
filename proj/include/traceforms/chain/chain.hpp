#pragma once

#include <traceforms/linalg.hpp>

#include <algorithm>
#include <cstddef>
#include <numeric>
#include <span>
#include <sstream>
#include <string>
#include <vector>

namespace traceforms::chain {

/// Finite continuous-time Markov chain, symmetric with respect to a weight
/// vector `m`, with optional killing. Only obtainable through validate_chain.
class SymmetricChain {
public:
    [[nodiscard]] std::size_t size() const { return static_cast<std::size_t>(m_.size()); }
    [[nodiscard]] const Vector& weights() const { return m_; }
    [[nodiscard]] const Matrix& rates() const { return q_; }
    /// k(x) = -sum_y Q(x, y).
    [[nodiscard]] const Vector& kill_rates() const { return kill_; }
    [[nodiscard]] const std::vector<std::string>& labels() const { return labels_; }
    [[nodiscard]] double total_weight() const { return m_.sum(); }
    [[nodiscard]] bool conservative() const { return kill_.maxCoeff() == 0.0; }

private:
    friend SymmetricChain validate_chain(const Matrix&, const Vector&, std::vector<std::string>);

    SymmetricChain(Matrix q, Vector m, Vector kill, std::vector<std::string> labels)
        : q_(std::move(q)), m_(std::move(m)), kill_(std::move(kill)), labels_(std::move(labels)) {}

    Matrix q_;
    Vector m_;
    Vector kill_;
    std::vector<std::string> labels_;
};

inline constexpr double kDetailedBalanceTol = 1e-12;

namespace detail {

inline std::vector<std::vector<std::size_t>> components(const Matrix& q) {
    const auto n = static_cast<std::size_t>(q.rows());
    std::vector<int> comp(n, -1);
    std::vector<std::vector<std::size_t>> out;
    for (std::size_t s = 0; s < n; ++s) {
        if (comp[s] >= 0) continue;
        const int id = static_cast<int>(out.size());
        out.emplace_back();
        std::vector<std::size_t> stack{s};
        comp[s] = id;
        while (!stack.empty()) {
            const std::size_t x = stack.back();
            stack.pop_back();
            out.back().push_back(x);
            for (std::size_t y = 0; y < n; ++y) {
                const bool edge = x != y && (q(static_cast<Eigen::Index>(x), static_cast<Eigen::Index>(y)) > 0 ||
                                             q(static_cast<Eigen::Index>(y), static_cast<Eigen::Index>(x)) > 0);
                if (edge && comp[y] < 0) {
                    comp[y] = id;
                    stack.push_back(y);
                }
            }
        }
        std::sort(out.back().begin(), out.back().end());
    }
    return out;
}

} // namespace detail

/// Validates a full rate table (diagonal included) against weights and
/// returns the chain. Every violation is listed in the exception message;
/// the exception type reflects the first failing category in the order
/// NegativeRate, SymmetryViolation, NotIrreducible.
inline SymmetricChain validate_chain(const Matrix& q, const Vector& m, std::vector<std::string> labels = {}) {
    const Eigen::Index n = q.rows();
    if (n == 0 || q.cols() != n) {
        throw InvalidInput("rate table must be square and nonempty");
    }
    if (m.size() != n) {
        throw InvalidInput("weight vector length " + std::to_string(m.size()) + " does not match " +
                           std::to_string(n) + " states");
    }
    for (Eigen::Index x = 0; x < n; ++x) {
        if (!(m(x) > 0.0) || !std::isfinite(m(x))) {
            throw InvalidInput("weight m(" + std::to_string(x) + ") must be positive and finite");
        }
    }
    if (labels.empty()) {
        for (Eigen::Index x = 0; x < n; ++x) labels.push_back(std::to_string(x));
    } else if (static_cast<Eigen::Index>(labels.size()) != n) {
        throw InvalidInput("label count does not match state count");
    }

    std::ostringstream negative;
    std::ostringstream asymmetric;
    Vector kill(n);
    for (Eigen::Index x = 0; x < n; ++x) {
        double off = 0.0;
        double scale = std::abs(q(x, x));
        for (Eigen::Index y = 0; y < n; ++y) {
            if (!std::isfinite(q(x, y))) {
                negative << " non-finite rate at (" << x << "," << y << ");";
                continue;
            }
            if (x == y) continue;
            if (q(x, y) < 0.0) {
                negative << " Q(" << x << "," << y << ") = " << q(x, y) << " < 0;";
            }
            off += q(x, y);
            scale = std::max(scale, std::abs(q(x, y)));
            if (y > x) {
                const double a = m(x) * q(x, y);
                const double b = m(y) * q(y, x);
                if (std::abs(a - b) > kDetailedBalanceTol * std::max(std::abs(a), std::abs(b))) {
                    asymmetric << " at (" << x << "," << y << "): m(" << x << ")Q(" << x << "," << y
                               << ") = " << a << " vs m(" << y << ")Q(" << y << "," << x << ") = " << b << ";";
                }
            }
        }
        const double row_sum = off + q(x, x);
        if (row_sum > kDetailedBalanceTol * std::max(scale, 1e-300)) {
            negative << " row " << x << " sums to " << row_sum << " > 0 (negative kill rate);";
        }
        kill(x) = std::max(0.0, -row_sum);
        if (kill(x) <= kDetailedBalanceTol * scale) kill(x) = 0.0;
    }

    const auto comps = detail::components(q);
    std::ostringstream disconnected;
    if (comps.size() > 1) {
        disconnected << " " << comps.size() << " components:";
        for (const auto& c : comps) {
            disconnected << " {";
            for (std::size_t i = 0; i < c.size(); ++i) disconnected << (i ? "," : "") << c[i];
            disconnected << "}";
        }
    }

    const std::string neg = negative.str();
    const std::string asym = asymmetric.str();
    const std::string disc = disconnected.str();
    std::string all;
    if (!neg.empty()) all += "NegativeRate:" + neg + "\n";
    if (!asym.empty()) all += "SymmetryViolation:" + asym + "\n";
    if (!disc.empty()) all += "NotIrreducible:" + disc + "\n";
    if (!neg.empty()) throw NegativeRate(all);
    if (!asym.empty()) throw SymmetryViolation(all);
    if (!disc.empty()) throw NotIrreducible(all);

    return SymmetricChain(q, m, kill, std::move(labels));
}

/// Builds a full rate table from off-diagonal jump rates and per-state kill rates.
[[nodiscard]] inline Matrix make_rate_matrix(const Matrix& jump_rates, const Vector& kill) {
    const Eigen::Index n = jump_rates.rows();
    if (jump_rates.cols() != n || kill.size() != n) {
        throw InvalidInput("make_rate_matrix: shape mismatch");
    }
    Matrix q = jump_rates;
    for (Eigen::Index x = 0; x < n; ++x) {
        q(x, x) = 0.0;
        q(x, x) = -(q.row(x).sum() + kill(x));
    }
    return q;
}

/// Nonempty proper subset F of the state space, with its complement E0.
class SubsetSpec {
public:
    SubsetSpec(std::size_t n_states, std::vector<std::size_t> trace_states) : n_(n_states) {
        std::sort(trace_states.begin(), trace_states.end());
        trace_states.erase(std::unique(trace_states.begin(), trace_states.end()), trace_states.end());
        if (trace_states.empty()) {
            throw InvalidInput("F must be nonempty");
        }
        if (trace_states.back() >= n_states) {
            throw InvalidInput("F contains state " + std::to_string(trace_states.back()) + " outside 0.." +
                               std::to_string(n_states - 1));
        }
        if (trace_states.size() == n_states) {
            throw InvalidInput("F must be a proper subset of the state space");
        }
        f_ = std::move(trace_states);
        member_.assign(n_states, false);
        local_.assign(n_states, 0);
        for (std::size_t i = 0; i < f_.size(); ++i) {
            member_[f_[i]] = true;
            local_[f_[i]] = i;
        }
        for (std::size_t x = 0; x < n_states; ++x) {
            if (!member_[x]) {
                local_[x] = e0_.size();
                e0_.push_back(x);
            }
        }
    }

    [[nodiscard]] std::size_t n_states() const { return n_; }
    [[nodiscard]] const std::vector<std::size_t>& trace_set() const { return f_; }
    [[nodiscard]] const std::vector<std::size_t>& complement() const { return e0_; }
    [[nodiscard]] bool contains(std::size_t x) const { return member_[x]; }
    /// Position of state x inside F (if x in F) or inside E0 (otherwise).
    [[nodiscard]] std::size_t local_index(std::size_t x) const { return local_[x]; }

private:
    std::size_t n_;
    std::vector<std::size_t> f_;
    std::vector<std::size_t> e0_;
    std::vector<bool> member_;
    std::vector<std::size_t> local_;
};

/// Gathers entries of `v` at `idx`.
[[nodiscard]] inline Vector gather(const Vector& v, std::span<const std::size_t> idx) {
    Vector out(static_cast<Eigen::Index>(idx.size()));
    for (std::size_t i = 0; i < idx.size(); ++i) out(static_cast<Eigen::Index>(i)) = v(static_cast<Eigen::Index>(idx[i]));
    return out;
}

[[nodiscard]] inline Matrix gather(const Matrix& a, std::span<const std::size_t> rows, std::span<const std::size_t> cols) {
    Matrix out(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(cols.size()));
    for (std::size_t i = 0; i < rows.size(); ++i)
        for (std::size_t j = 0; j < cols.size(); ++j)
            out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
                a(static_cast<Eigen::Index>(rows[i]), static_cast<Eigen::Index>(cols[j]));
    return out;
}

} // namespace traceforms::chain
