#pragma once

// Monte Carlo estimators of Feller data and related small-time limits for
// finite symmetric chains. Every estimator draws path i from Rng(stream, i)
// and reduces per-path results in index order, so the output does not depend
// on the executor.

#include <traceforms/executor.hpp>
#include <traceforms/linalg.hpp>
#include <traceforms/mc/paths.hpp>
#include <traceforms/stats.hpp>

namespace traceforms::mc {

inline constexpr std::size_t kMinEvents = 100;

struct CurvePoint {
    double t = 0.0;
    double value = 0.0;
    double std_error = 0.0;
};

struct FellerMcResult {
    EstimatorReport report;
    Matrix pair_counts;  // F x (F + death): completed excursions by (pre, post)
};

namespace detail {

inline void check_psi(const Matrix& psi, std::size_t nf) {
    const auto n = static_cast<Eigen::Index>(nf);
    if (psi.rows() != n || psi.cols() != n) throw InvalidInput("psi must be an F x F matrix");
    if (psi.diagonal().cwiseAbs().maxCoeff() != 0.0) throw InvalidInput("psi must vanish on the diagonal");
}

inline void check_grid(const std::vector<double>& t_grid) {
    if (t_grid.empty()) throw InvalidInput("t_grid must not be empty");
    for (double t : t_grid) {
        if (!(t > 0.0) || !std::isfinite(t)) throw InvalidInput("t_grid entries must be positive and finite");
    }
}

} // namespace detail

/// int psi dU for psi on F x F vanishing on the diagonal. Excursions are
/// counted at their left endpoint, weighted by psi(pre_state, post_state).
///
/// Conservative chains: m(E) times the long-run rate of such events, from
/// n_paths stationary runs of length `horizon`; excursions still open at the
/// horizon are dropped.
/// Killed chains: runs from m of length t = horizon whose last excursion is
/// followed to its end; the values (m(E)/t) E[sum psi] at t and t/2 are
/// combined by two-point Richardson.
template <Executor E = SequentialExecutor>
[[nodiscard]] FellerMcResult estimate_feller_mc(const SymmetricChain& c, const SubsetSpec& f, const Matrix& psi,
                                                double horizon, std::size_t n_paths, RngStream stream,
                                                const E& exec = {}) {
    const std::size_t nf = f.trace_set().size();
    detail::check_psi(psi, nf);
    if (!(horizon > 0.0)) throw InvalidInput("horizon must be positive");
    if (n_paths == 0) throw InvalidInput("n_paths must be positive");
    FellerMcResult out;
    out.pair_counts = Matrix::Zero(static_cast<Eigen::Index>(nf), static_cast<Eigen::Index>(nf) + 1);
    if (psi.cwiseAbs().maxCoeff() == 0.0) return out;

    const JumpTable table(c);
    const StartLaw start = StartLaw::stationary(c);
    const double mass = c.total_weight();
    const bool conservative = c.conservative();
    const std::size_t blocks = conservative ? (BatchMeans::kDefaultBatches + n_paths - 1) / n_paths : 1;

    struct PathResult {
        std::vector<double> block_sum;
        double half = 0.0;  // killed case: psi mass completed by horizon/2
        std::size_t events = 0;
        std::vector<std::pair<std::size_t, std::size_t>> pairs;
    };
    std::vector<PathResult> results(n_paths);
    exec.parallel_for(n_paths, [&](std::size_t i) {
        Rng rng(stream, i);
        auto path = simulate_path(table, start.sample(rng), horizon, rng);
        if (!conservative) complete_open_excursion(table, f, path, rng);
        PathResult r;
        r.block_sum.assign(blocks, 0.0);
        for (const auto& ex : excursion_decompose(path, f)) {
            const std::size_t a = f.local_index(ex.pre_state);
            const std::size_t b = ex.post_state == kDeath ? nf : f.local_index(ex.post_state);
            r.pairs.emplace_back(a, b);
            if (b == nf) continue;
            const double w = psi(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b));
            if (w == 0.0) continue;
            if (ex.left > horizon) continue;
            ++r.events;
            const auto blk = std::min(blocks - 1, static_cast<std::size_t>(ex.left / horizon * static_cast<double>(blocks)));
            r.block_sum[blk] += w;
            if (ex.left <= 0.5 * horizon) r.half += w;
        }
        results[i] = std::move(r);
    });

    std::size_t events = 0;
    for (const auto& r : results) {
        events += r.events;
        for (auto [a, b] : r.pairs) out.pair_counts(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) += 1.0;
    }
    if (events < kMinEvents) {
        throw InsufficientEvents("only " + std::to_string(events) + " psi-weighted excursions observed (need " +
                                 std::to_string(kMinEvents) + ")");
    }

    if (conservative) {
        BatchMeans bm;
        const double exposure = horizon / static_cast<double>(blocks);
        for (std::size_t i = 0; i < n_paths; ++i) {
            for (std::size_t k = 0; k < blocks; ++k) {
                bm.add(bm.batch_of(i * blocks + k, n_paths * blocks), mass * results[i].block_sum[k], exposure);
            }
        }
        out.report.estimate = bm.estimate();
        out.report.std_error = bm.std_error();
        out.report.n_events = events;
        return out;
    }

    std::vector<double> values(n_paths);
    for (std::size_t i = 0; i < n_paths; ++i) {
        const double full = results[i].block_sum[0];
        values[i] = mass * (4.0 * results[i].half - full) / horizon;
    }
    out.report = mean_report(values, events);
    return out;
}

struct SupplementaryResult {
    EstimatorReport report;
    std::vector<CurvePoint> curve;
};

/// sum_F f V estimated as the t -> 0 limit of (m(E)/t) E[f(X_{gamma-}); gamma <= t]
/// where gamma is a last exit from F followed by death in E0. Runs start from
/// m / m(E); the curve is fitted by least squares in t and read off at t = 0.
/// Conservative chains have V = 0 and return a zero report without sampling.
template <Executor E = SequentialExecutor>
[[nodiscard]] SupplementaryResult estimate_supplementary_mc(const SymmetricChain& c, const SubsetSpec& f,
                                                            const Vector& fvals, const std::vector<double>& t_grid,
                                                            std::size_t n_paths, RngStream stream, const E& exec = {},
                                                            std::size_t max_steps = 100'000'000) {
    if (fvals.size() != static_cast<Eigen::Index>(f.trace_set().size())) throw InvalidInput("f must live on F");
    detail::check_grid(t_grid);
    if (n_paths == 0) throw InvalidInput("n_paths must be positive");
    SupplementaryResult out;
    for (double t : t_grid) out.curve.push_back({t, 0.0, 0.0});
    if (c.conservative()) {
        out.report.exact_reference = 0.0;
        return out;
    }

    const JumpTable table(c);
    const StartLaw start = StartLaw::stationary(c);
    const double mass = c.total_weight();
    const double tmax = *std::max_element(t_grid.begin(), t_grid.end());

    struct Exit {
        double gamma = kInf;
        std::size_t pre = 0;  // local index in F
    };
    std::vector<Exit> exits(n_paths);
    exec.parallel_for(n_paths, [&](std::size_t i) {
        Rng rng(stream, i);
        std::size_t x = start.sample(rng);
        double t = 0.0;
        std::optional<Exit> pending;
        for (std::size_t step = 0;; ++step) {
            if (step == max_steps) throw MaxStepsExceeded("supplementary trial exceeded the step cap");
            if (pending ? pending->gamma > tmax : t > tmax) return;
            t += rng.exponential(table.total_rate(x));
            const std::size_t y = table.next(x, rng.uniform());
            if (y == kDeath) {
                if (pending && !f.contains(x)) exits[i] = *pending;
                return;
            }
            if (f.contains(x) && !f.contains(y)) pending = Exit{t, f.local_index(x)};
            if (f.contains(y)) pending.reset();
            x = y;
        }
    });

    // Intercept of the least-squares line through (t_k, v(t_k)) as a linear
    // functional of the v(t_k).
    const auto k = static_cast<double>(t_grid.size());
    double tbar = 0.0;
    for (double t : t_grid) tbar += t / k;
    double stt = 0.0;
    for (double t : t_grid) stt += (t - tbar) * (t - tbar);
    std::vector<double> coef;
    for (double t : t_grid) coef.push_back(stt > 0.0 ? 1.0 / k - tbar * (t - tbar) / stt : 1.0 / k);

    std::vector<double> intercept(n_paths, 0.0);
    std::vector<std::vector<double>> per_t(t_grid.size(), std::vector<double>(n_paths, 0.0));
    std::size_t events = 0;
    for (std::size_t i = 0; i < n_paths; ++i) {
        if (!std::isfinite(exits[i].gamma)) continue;
        const double w = fvals(static_cast<Eigen::Index>(exits[i].pre));
        if (w == 0.0) continue;
        ++events;
        for (std::size_t j = 0; j < t_grid.size(); ++j) {
            if (exits[i].gamma > t_grid[j]) continue;
            const double v = mass * w / t_grid[j];
            per_t[j][i] = v;
            intercept[i] += coef[j] * v;
        }
    }
    if (events < kMinEvents) {
        throw InsufficientEvents("only " + std::to_string(events) + " final exits from F observed (need " +
                                 std::to_string(kMinEvents) + ")");
    }
    for (std::size_t j = 0; j < t_grid.size(); ++j) {
        const auto r = mean_report(per_t[j], events);
        out.curve[j].value = r.estimate;
        out.curve[j].std_error = r.std_error;
    }
    out.report = mean_report(intercept, events);
    return out;
}

/// Exact (1/t) E_m[f(X_{gamma-}); gamma <= t] = (1/t) int_0^t sum_a f(a) V(a) P_a(zeta > s) ds.
[[nodiscard]] inline double supplementary_curve_exact(const SymmetricChain& c, const SubsetSpec& f, const Vector& v,
                                                      const Vector& fvals, double t) {
    const auto ei = exp_and_integral(c.rates(), t);
    const Vector survive = ei.integral * Vector::Ones(c.rates().rows());
    double sum = 0.0;
    for (std::size_t a = 0; a < f.trace_set().size(); ++a) {
        const auto ai = static_cast<Eigen::Index>(a);
        sum += fvals(ai) * v(ai) * survive(static_cast<Eigen::Index>(f.trace_set()[a]));
    }
    return sum / t;
}

/// Levy-system check E_x[sum_{s <= t} g(X_{s-}, X_s)] for a pair function g
/// given as an n x (n+1) matrix whose last column is the death state. The
/// exact value int_0^t (e^{sQ} N g)(x) ds is attached as exact_reference.
template <Executor E = SequentialExecutor>
[[nodiscard]] EstimatorReport levy_jump_check(const SymmetricChain& c, std::size_t x, const Matrix& g, double t,
                                              std::size_t n_paths, RngStream stream, const E& exec = {}) {
    const auto n = static_cast<Eigen::Index>(c.size());
    if (g.rows() != n || g.cols() != n + 1) throw InvalidInput("pair function must be n x (n+1)");
    if (x >= c.size()) throw InvalidInput("start state out of range");
    if (!(t > 0.0)) throw InvalidInput("t must be positive");
    if (n_paths == 0) throw InvalidInput("n_paths must be positive");

    Vector ng = Vector::Zero(n);
    for (Eigen::Index y = 0; y < n; ++y) {
        for (Eigen::Index z = 0; z < n; ++z) {
            if (z != y) ng(y) += c.rates()(y, z) * g(y, z);
        }
        ng(y) += c.kill_rates()(y) * g(y, n);
    }
    const double exact = (exp_and_integral(c.rates(), t).integral * ng)(static_cast<Eigen::Index>(x));

    const JumpTable table(c);
    std::vector<double> values(n_paths, 0.0);
    std::vector<std::size_t> counted(n_paths, 0);
    exec.parallel_for(n_paths, [&](std::size_t i) {
        Rng rng(stream, i);
        const auto p = simulate_path(table, x, t, rng);
        double sum = 0.0;
        std::size_t k = 0;
        for (std::size_t j = 1; j < p.states.size(); ++j) {
            const double w = g(static_cast<Eigen::Index>(p.states[j - 1]), static_cast<Eigen::Index>(p.states[j]));
            if (w != 0.0) ++k;
            sum += w;
        }
        if (p.death_time) {
            const double w = g(static_cast<Eigen::Index>(p.states.back()), n);
            if (w != 0.0) ++k;
            sum += w;
        }
        values[i] = sum;
        counted[i] = k;
    });
    std::size_t events = 0;
    for (auto k : counted) events += k;
    auto r = mean_report(values, events);
    r.with_exact(exact);
    return r;
}

/// (m(E)/t) E[A_t; zeta <= t] for A_t = int_0^t mu(X_s)/m(X_s) ds and runs
/// started from m / m(E); mu is a finite measure given by its masses.
template <Executor E = SequentialExecutor>
[[nodiscard]] std::vector<CurvePoint> killing_limit_curve(const SymmetricChain& c, const Vector& mu,
                                                          const std::vector<double>& t_grid, std::size_t n_paths,
                                                          RngStream stream, const E& exec = {}) {
    if (mu.size() != static_cast<Eigen::Index>(c.size())) throw InvalidInput("mu must be a full-state vector");
    if (mu.minCoeff() < 0.0 || !std::isfinite(mu.sum())) throw InvalidInput("mu must be a nonnegative finite measure");
    detail::check_grid(t_grid);
    if (n_paths == 0) throw InvalidInput("n_paths must be positive");
    std::vector<CurvePoint> out;
    for (double t : t_grid) out.push_back({t, 0.0, 0.0});
    if (c.conservative()) return out;

    const JumpTable table(c);
    const StartLaw start = StartLaw::stationary(c);
    const double mass = c.total_weight();
    const double tmax = *std::max_element(t_grid.begin(), t_grid.end());
    const Vector density = mu.cwiseQuotient(c.weights());

    struct Death {
        double zeta = kInf;
        double a = 0.0;
    };
    std::vector<Death> deaths(n_paths);
    exec.parallel_for(n_paths, [&](std::size_t i) {
        Rng rng(stream, i);
        const auto p = simulate_path(table, start.sample(rng), tmax, rng);
        if (!p.death_time) return;
        double a = 0.0;
        for (std::size_t k = 0; k < p.states.size(); ++k) {
            const double until = k + 1 < p.states.size() ? p.jump_times[k + 1] : p.end_time;
            a += (until - p.jump_times[k]) * density(static_cast<Eigen::Index>(p.states[k]));
        }
        deaths[i] = {*p.death_time, a};
    });

    for (std::size_t j = 0; j < t_grid.size(); ++j) {
        std::vector<double> values(n_paths, 0.0);
        std::size_t events = 0;
        for (std::size_t i = 0; i < n_paths; ++i) {
            if (deaths[i].zeta > t_grid[j]) continue;
            values[i] = mass * deaths[i].a / t_grid[j];
            ++events;
        }
        const auto r = mean_report(values, events);
        out[j].value = r.estimate;
        out[j].std_error = r.std_error;
    }
    return out;
}

/// Time-changed paths on F from stationary runs of X, accumulated into jump
/// counts and holding exposures in the A-clock of mu.
template <Executor E = SequentialExecutor>
[[nodiscard]] EmpiricalGenerator trace_generator_mc(const SymmetricChain& c, const SubsetSpec& f, const Vector& mu,
                                                    double horizon, std::size_t n_paths, RngStream stream,
                                                    const E& exec = {}) {
    const JumpTable table(c);
    const StartLaw start = StartLaw::stationary(c);
    std::vector<std::optional<PathRecord>> ys(n_paths);
    exec.parallel_for(n_paths, [&](std::size_t i) {
        Rng rng(stream, i);
        ys[i] = trace_path(simulate_path(table, start.sample(rng), horizon, rng), f, mu, c.weights());
    });
    EmpiricalGenerator g(f.trace_set().size());
    for (const auto& y : ys) {
        if (y) g.add(*y);
    }
    return g;
}

} // namespace traceforms::mc
