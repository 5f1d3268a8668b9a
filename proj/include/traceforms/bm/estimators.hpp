#pragma once

// Monte Carlo estimators built on the hitting samplers: escape probabilities
// in the annulus and the eps-shell estimate of the sphere Feller kernel.
//
// Work is cut into fixed chunks of kChunk samples; chunk c of pass k draws
// from Rng(stream, (k << 32) + c), so the result does not depend on the
// executor.

#include <traceforms/bm/samplers.hpp>
#include <traceforms/executor.hpp>
#include <traceforms/sphere/quadrature.hpp>
#include <traceforms/stats.hpp>

#include <cstdio>
#include <vector>

namespace traceforms::bm {

inline constexpr std::size_t kChunk = 4096;
inline constexpr std::size_t kMinBinEvents = 100;

namespace detail {

/// Runs body(rng, begin, end, acc) over chunks and returns the per-chunk
/// accumulators in chunk order.
template <typename Acc, Executor Exec, typename Body>
std::vector<Acc> run_chunks(std::size_t n, RngStream stream, std::uint64_t pass, const Exec& exec, Acc init,
                            Body&& body) {
    const std::size_t n_chunks = (n + kChunk - 1) / kChunk;
    std::vector<Acc> out(n_chunks, init);
    exec.parallel_for(n_chunks, [&](std::size_t c) {
        Rng rng(stream, (pass << 32) + c);
        const std::size_t begin = c * kChunk;
        body(rng, begin, std::min(n, begin + kChunk), out[c]);
    });
    return out;
}

inline EstimatorReport binomial_report(std::size_t successes, std::size_t trials) {
    EstimatorReport r;
    const double p = trials ? static_cast<double>(successes) / static_cast<double>(trials) : 0.0;
    r.estimate = p;
    r.std_error = trials ? std::sqrt(p * (1.0 - p) / static_cast<double>(trials)) : 0.0;
    r.n_events = successes;
    return r;
}

} // namespace detail

struct EscapeResult {
    EstimatorReport hit;     // fraction hitting S before the outer sphere; exact = annulus formula
    EstimatorReport escape;  // R-corrected escape to infinity; exact = 1 - (r/|x|)^{n-2}
    std::size_t walks = 0;
    std::size_t step_limit_hits = 0;
    double mean_steps = 0.0;
};

/// Walk-on-spheres escape estimate from x. Walks that exceed cfg.max_steps
/// are counted and dropped; more than a 1e-6 fraction of them is an error.
template <Executor Exec = SequentialExecutor>
[[nodiscard]] EscapeResult escape_probability_mc(const SphereSpec& s, const Vector& x, const ShellConfig& cfg,
                                                 std::size_t n_walks, RngStream stream, const Exec& exec = {}) {
    cfg.validate(s);
    if (n_walks == 0) throw InvalidInput("escape_probability_mc needs at least one walk");
    struct Acc {
        std::size_t hits = 0, escapes = 0, stuck = 0, steps = 0;
    };
    const double ret = std::pow(s.radius() / cfg.kill_radius, s.dim() - 2);
    auto parts = detail::run_chunks(n_walks, stream, 0, exec, Acc{}, [&](Rng& rng, std::size_t b, std::size_t e, Acc& acc) {
        for (std::size_t i = b; i < e; ++i) {
            try {
                const auto h = sample_hit_from_outside(s, x, cfg, rng);
                acc.steps += h.steps;
                if (!h.escaped) {
                    ++acc.hits;
                } else if (rng.uniform() >= ret) {
                    ++acc.escapes;
                }
            } catch (const MaxStepsExceeded&) {
                ++acc.stuck;
            }
        }
    });
    Acc total;
    for (const auto& a : parts) {
        total.hits += a.hits;
        total.escapes += a.escapes;
        total.stuck += a.stuck;
        total.steps += a.steps;
    }
    if (static_cast<double>(total.stuck) > 1e-6 * static_cast<double>(n_walks)) {
        throw MaxStepsExceeded(std::to_string(total.stuck) + " of " + std::to_string(n_walks) +
                               " walks exceeded the step limit");
    }
    const std::size_t done = n_walks - total.stuck;
    EscapeResult out;
    out.walks = done;
    out.step_limit_hits = total.stuck;
    out.mean_steps = static_cast<double>(total.steps) / static_cast<double>(std::max<std::size_t>(done, 1));
    out.hit = detail::binomial_report(total.hits, done);
    out.hit.with_exact(annulus_hit_probability(s, s.dist(x), cfg.kill_radius));
    out.escape = detail::binomial_report(total.escapes, done);
    out.escape.with_exact(sphere::escape_probability(s, x));
    return out;
}

/// Polar-angle bins in degrees, measured from the launch point.
struct AngularBin {
    double lo_deg = 0.0;
    double hi_deg = 0.0;
};

[[nodiscard]] inline std::vector<AngularBin> default_bins() {
    return {{0, 10}, {10, 30}, {30, 60}, {60, 90}, {90, 120}, {120, 150}, {150, 180}};
}

/// Surface measure of {eta in S : angle(xi, eta) in [lo, hi]}.
[[nodiscard]] inline double bin_area(const SphereSpec& s, const AngularBin& b, int n_gl = 64) {
    const int n = s.dim();
    const double lo = b.lo_deg * std::numbers::pi / 180.0, hi = b.hi_deg * std::numbers::pi / 180.0;
    if (n == 3) return 2.0 * std::numbers::pi * s.radius() * s.radius() * (std::cos(lo) - std::cos(hi));
    const auto gl = sphere::gauss_legendre(n_gl);
    double acc = 0.0;
    for (std::size_t k = 0; k < gl.x.size(); ++k) {
        const double th = 0.5 * (hi - lo) * gl.x[k] + 0.5 * (hi + lo);
        acc += gl.w[k] * std::pow(std::sin(th), n - 2);
    }
    return sphere::unit_sphere_area(n - 1) * std::pow(s.radius(), n - 1) * 0.5 * (hi - lo) * acc;
}

/// Average of (2/Omega_n)|xi - eta|^{-n} over the bin, by Gauss-Legendre in
/// the polar angle with weight sin^{n-2}.
[[nodiscard]] inline double kernel_bin_average(const SphereSpec& s, const AngularBin& b, int n_gl = 64) {
    const int n = s.dim();
    const double r = s.radius();
    const double lo = b.lo_deg * std::numbers::pi / 180.0, hi = b.hi_deg * std::numbers::pi / 180.0;
    const auto gl = sphere::gauss_legendre(n_gl);
    double num = 0.0, den = 0.0;
    for (std::size_t k = 0; k < gl.x.size(); ++k) {
        const double th = 0.5 * (hi - lo) * gl.x[k] + 0.5 * (hi + lo);
        const double w = gl.w[k] * std::pow(std::sin(th), n - 2);
        const double d = 2.0 * r * std::sin(0.5 * th);
        num += w * 2.0 / sphere::unit_sphere_area(n) * std::pow(d, -n);
        den += w;
    }
    return num / den;
}

struct ShellBinPoint {
    double eps = 0.0;
    std::size_t count = 0;
    double density = 0.0;
    double std_error = 0.0;
};

struct ShellBinResult {
    AngularBin bin;
    bool estimated = false;
    std::vector<ShellBinPoint> per_eps;  // in schedule order
    EstimatorReport extrapolated;        // exact = kernel bin average
};

struct ShellEstimate {
    std::vector<ShellBinResult> bins;
    std::vector<ShellBinPoint> v_per_eps;
    EstimatorReport v_hat;  // exact = (n - 2) / (2r)
    std::size_t pairs_per_eps = 0;
};

namespace detail {

/// Linear extrapolation to eps = 0 through the last two schedule points.
inline EstimatorReport extrapolate_two(const ShellBinPoint& p1, const ShellBinPoint& p2) {
    const double e1 = p1.eps, e2 = p2.eps;
    EstimatorReport r;
    r.estimate = (e1 * p2.density - e2 * p1.density) / (e1 - e2);
    const double a = e2 / (e1 - e2), b = e1 / (e1 - e2);
    r.std_error = std::sqrt(a * a * p1.std_error * p1.std_error + b * b * p2.std_error * p2.std_error);
    r.n_events = p1.count + p2.count;
    return r;
}

} // namespace detail

/// eps-shell estimate of the Feller kernel around xi = center + r e_1. For each
/// eps, n_per_eps launch pairs start at xi -/+ eps along the normal; the bin
/// density is count / (n_per_eps * 2 eps * bin area). The escape fraction of
/// the outward launches over 2 eps estimates v. The bin below 10 degrees is
/// left unestimated.
template <Executor Exec = SequentialExecutor>
[[nodiscard]] ShellEstimate estimate_feller_sphere_mc(const SphereSpec& s, const std::vector<AngularBin>& bins,
                                                      const std::vector<double>& eps_schedule, std::size_t n_per_eps,
                                                      const ShellConfig& base, RngStream stream, const Exec& exec = {}) {
    if (eps_schedule.size() < 3) throw InvalidInput("eps schedule needs at least three values");
    for (std::size_t k = 1; k < eps_schedule.size(); ++k) {
        if (!(eps_schedule[k] < eps_schedule[k - 1])) throw InvalidInput("eps schedule must be strictly decreasing");
    }
    if (bins.empty()) throw InvalidInput("no angular bins");
    for (const auto& b : bins) {
        if (!(b.lo_deg >= 0.0 && b.hi_deg > b.lo_deg && b.hi_deg <= 180.0)) throw InvalidInput("bad angular bin");
    }
    if (n_per_eps == 0) throw InvalidInput("n_per_eps must be positive");

    Vector xi = s.center();
    xi(0) += s.radius();
    const Vector normal = Vector::Unit(s.dim(), 0);
    const std::size_t nb = bins.size();

    ShellEstimate out;
    out.pairs_per_eps = n_per_eps;
    out.bins.resize(nb);
    for (std::size_t j = 0; j < nb; ++j) {
        out.bins[j].bin = bins[j];
        out.bins[j].estimated = bins[j].lo_deg >= 10.0;
    }

    struct Acc {
        std::vector<double> sum, sum2;
        std::size_t escapes = 0;
    };
    const Acc init{std::vector<double>(nb, 0.0), std::vector<double>(nb, 0.0), 0};
    for (std::size_t k = 0; k < eps_schedule.size(); ++k) {
        ShellConfig cfg = base;
        cfg.eps = eps_schedule[k];
        cfg.validate(s);
        auto bin_of = [&](const Vector& eta) -> std::size_t {
            const double c = std::clamp((eta - s.center()).dot(normal) / s.radius(), -1.0, 1.0);
            const double deg = std::acos(c) * 180.0 / std::numbers::pi;
            for (std::size_t j = 0; j < nb; ++j) {
                if (deg >= bins[j].lo_deg && deg < bins[j].hi_deg) return j;
            }
            if (deg >= bins.back().hi_deg && bins.back().hi_deg == 180.0) return nb - 1;
            return nb;
        };
        auto parts = detail::run_chunks(n_per_eps, stream, k, exec, init, [&](Rng& rng, std::size_t b, std::size_t e, Acc& acc) {
            std::vector<int> hits(nb);
            for (std::size_t i = b; i < e; ++i) {
                std::fill(hits.begin(), hits.end(), 0);
                const auto in = excursion_pair_sampler(s, xi, Launch::inward, cfg, rng);
                if (const auto j = bin_of(*in); j < nb) ++hits[j];
                const auto outw = excursion_pair_sampler(s, xi, Launch::outward, cfg, rng);
                if (outw) {
                    if (const auto j = bin_of(*outw); j < nb) ++hits[j];
                } else {
                    ++acc.escapes;
                }
                for (std::size_t j = 0; j < nb; ++j) {
                    acc.sum[j] += hits[j];
                    acc.sum2[j] += hits[j] * hits[j];
                }
            }
        });
        Acc total = init;
        for (const auto& a : parts) {
            for (std::size_t j = 0; j < nb; ++j) {
                total.sum[j] += a.sum[j];
                total.sum2[j] += a.sum2[j];
            }
            total.escapes += a.escapes;
        }
        const double n = static_cast<double>(n_per_eps);
        for (std::size_t j = 0; j < nb; ++j) {
            const double scale = 1.0 / (2.0 * cfg.eps * bin_area(s, bins[j]));
            const double mean = total.sum[j] / n;
            const double var = std::max(0.0, total.sum2[j] / n - mean * mean);
            out.bins[j].per_eps.push_back(
                {cfg.eps, static_cast<std::size_t>(total.sum[j]), mean * scale, std::sqrt(var / n) * scale});
        }
        const auto esc = detail::binomial_report(total.escapes, n_per_eps);
        out.v_per_eps.push_back({cfg.eps, total.escapes, esc.estimate / (2.0 * cfg.eps), esc.std_error / (2.0 * cfg.eps)});
    }

    const std::size_t last = eps_schedule.size() - 1;
    for (auto& b : out.bins) {
        if (!b.estimated) continue;
        for (const auto& p : b.per_eps) {
            if (p.count < kMinBinEvents) {
                char msg[160];
                std::snprintf(msg, sizeof msg, "bin [%g, %g] deg has %zu events at eps = %g", b.bin.lo_deg, b.bin.hi_deg,
                              p.count, p.eps);
                throw InsufficientEvents(msg);
            }
        }
        b.extrapolated = detail::extrapolate_two(b.per_eps[last - 1], b.per_eps[last]);
        b.extrapolated.with_exact(kernel_bin_average(s, b.bin));
    }
    out.v_hat = detail::extrapolate_two(out.v_per_eps[last - 1], out.v_per_eps[last]);
    out.v_hat.with_exact(sphere::supplementary_density(s));
    return out;
}

} // namespace traceforms::bm
