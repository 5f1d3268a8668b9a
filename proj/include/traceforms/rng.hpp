#pragma once

// Seeded random streams. A stream is (seed, stream_id); path i of an
// experiment draws from Rng(stream, i), so results do not depend on how paths
// are spread over workers.

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <vector>

namespace traceforms {

struct RngStream {
    std::uint64_t seed = 0;
    std::uint64_t stream_id = 0;

    friend bool operator==(const RngStream&, const RngStream&) = default;
};

/// Counter-based derivation: stream i of `seed` has stream_id = i. The first k
/// streams are the same whatever n is.
[[nodiscard]] inline std::vector<RngStream> derive_streams(std::uint64_t seed, std::size_t n) {
    std::vector<RngStream> out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) out.push_back({seed, static_cast<std::uint64_t>(i)});
    return out;
}

/// Mersenne twister keyed by (seed, stream_id, substream) through seed_seq.
/// The variate transforms are written out here because the standard
/// distributions are not specified bit-for-bit across library vendors.
class Rng {
public:
    explicit Rng(RngStream s, std::uint64_t substream = 0) {
        std::seed_seq seq{lo(s.seed), hi(s.seed), lo(s.stream_id), hi(s.stream_id), lo(substream), hi(substream)};
        engine_.seed(seq);
    }

    /// Uniform on [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    /// Uniform on (0, 1].
    double uniform_pos() { return 1.0 - uniform(); }

    double exponential(double rate) { return -std::log1p(-uniform()) / rate; }

    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        const double r = std::sqrt(-2.0 * std::log(uniform_pos()));
        const double theta = 2.0 * std::numbers::pi * uniform();
        spare_ = r * std::sin(theta);
        has_spare_ = true;
        return r * std::cos(theta);
    }

    std::uint64_t bits() { return engine_(); }

private:
    static std::uint32_t lo(std::uint64_t v) { return static_cast<std::uint32_t>(v & 0xffffffffu); }
    static std::uint32_t hi(std::uint64_t v) { return static_cast<std::uint32_t>(v >> 32); }

    std::mt19937_64 engine_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

} // namespace traceforms
