#pragma once

// Experiment configuration: an INI file with one section per module.
//
//   [experiment]  seed, workers
//   [chain]       file, trace_set
//   [mc]          sample sizes and horizons for the chain Monte Carlo runs
//   [sphere]      radius, quadrature and sampling parameters
//   [prototype]   lattice prototype geometry
//   [tolerances]  residual and z-score bounds
//
// Relative paths are resolved against the directory of the config file.

#include <traceforms/error.hpp>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace traceforms::cli {

enum class Kind { chain_verify, chain_mc, sphere_verify, sphere_mc, prototype };

[[nodiscard]] inline std::optional<Kind> parse_kind(const std::string& s) {
    if (s == "chain-verify") return Kind::chain_verify;
    if (s == "chain-mc") return Kind::chain_mc;
    if (s == "sphere-verify") return Kind::sphere_verify;
    if (s == "sphere-mc") return Kind::sphere_mc;
    if (s == "prototype") return Kind::prototype;
    return std::nullopt;
}

[[nodiscard]] inline std::string kind_name(Kind k) {
    switch (k) {
    case Kind::chain_verify: return "chain-verify";
    case Kind::chain_mc: return "chain-mc";
    case Kind::sphere_verify: return "sphere-verify";
    case Kind::sphere_mc: return "sphere-mc";
    case Kind::prototype: return "prototype";
    }
    return "?";
}

struct Tolerances {
    double identity = 1e-10;
    double route = 1e-12;
    double sphere_residual = 1e-3;
    double closed_form = 1e-10;
    double z_bound = 4.0;
    double shell_relative = 0.10;
};

struct ChainSection {
    std::filesystem::path file;
    std::optional<std::vector<std::size_t>> trace_set;  // overrides the file's F line
    std::size_t reweightings = 10;
};

struct McSection {
    double feller_horizon = 2000.0;
    std::size_t feller_paths = 40;
    std::vector<double> supp_grid{0.1, 0.2, 0.3, 0.4};
    std::size_t supp_paths = 400000;
    std::size_t levy_paths = 100000;
    double levy_t = 0.1;
    std::size_t curve_paths = 400000;
};

struct SphereSection {
    int dim = 3;
    double radius = 1.0;
    int n_polar = 35;
    int max_degree = 3;
    double start_radius = 2.0;
    double kill_radius = 100.0;
    std::size_t walks = 100000;
    std::vector<double> eps{0.1, 0.05, 0.025};
    std::size_t pairs_per_eps = 0;  // 0 skips the eps-shell estimator
    bool shell_stretch = true;      // shell misses count as inconclusive
};

struct PrototypeSection {
    int sites = 9;
    double spacing = 0.75;
    double alpha = 1.0;
    double cutoff = 2.0;
    std::vector<double> lower{-1.5, -3.0, -3.0};
    std::vector<double> shell_center{3.0, 0.0, 0.0};
};

struct ExperimentConfig {
    Kind kind = Kind::chain_verify;
    std::filesystem::path source;
    std::uint64_t seed = 0;
    std::size_t workers = 1;
    ChainSection chain;
    McSection mc;
    SphereSection sphere;
    PrototypeSection prototype;
    Tolerances tol;
};

namespace detail {

template <typename T>
std::vector<T> parse_list(const std::string& key, const std::string& text) {
    std::istringstream in(text);
    std::vector<T> out;
    T v{};
    while (in >> v) out.push_back(v);
    if (!in.eof()) throw ConfigError("key '" + key + "': cannot parse list '" + text + "'");
    return out;
}

class Reader {
public:
    explicit Reader(const boost::property_tree::ptree& pt) : pt_(pt) {}

    template <typename T>
    void get(const std::string& key, T& out) const {
        const auto v = pt_.get_optional<std::string>(key);
        if (!v) return;
        std::istringstream in(*v);
        T parsed{};
        in >> parsed;
        if (in.fail() || !(in >> std::ws).eof()) throw ConfigError("key '" + key + "': cannot parse '" + *v + "'");
        out = parsed;
    }

    void get(const std::string& key, bool& out) const {
        const auto v = pt_.get_optional<std::string>(key);
        if (!v) return;
        if (*v == "true" || *v == "1" || *v == "yes") {
            out = true;
        } else if (*v == "false" || *v == "0" || *v == "no") {
            out = false;
        } else {
            throw ConfigError("key '" + key + "': expected true or false, got '" + *v + "'");
        }
    }

    template <typename T>
    void get(const std::string& key, std::vector<T>& out) const {
        if (const auto v = pt_.get_optional<std::string>(key)) out = parse_list<T>(key, *v);
    }

    [[nodiscard]] bool has(const std::string& key) const { return pt_.get_optional<std::string>(key).has_value(); }

private:
    const boost::property_tree::ptree& pt_;
};

inline void require(bool ok, const std::string& msg) {
    if (!ok) throw ConfigError(msg);
}

} // namespace detail

/// Parses INI text. `base` resolves relative file paths; `seed_override`
/// takes precedence over [experiment] seed. A seed must come from one of them.
[[nodiscard]] inline ExperimentConfig parse_config(Kind kind, std::istream& in, const std::filesystem::path& base,
                                                   std::optional<std::uint64_t> seed_override = std::nullopt) {
    boost::property_tree::ptree pt;
    try {
        boost::property_tree::read_ini(in, pt);
    } catch (const boost::property_tree::ini_parser_error& e) {
        throw ConfigError(std::string("malformed config: ") + e.what());
    }
    const detail::Reader r(pt);
    ExperimentConfig c;
    c.kind = kind;

    if (seed_override) {
        c.seed = *seed_override;
    } else {
        detail::require(r.has("experiment.seed"), "no seed: set [experiment] seed or pass --seed");
        r.get("experiment.seed", c.seed);
    }
    r.get("experiment.workers", c.workers);
    detail::require(c.workers >= 1, "[experiment] workers must be at least 1");

    std::string file;
    r.get("chain.file", file);
    if (!file.empty()) c.chain.file = base / file;
    if (r.has("chain.trace_set")) {
        std::vector<std::size_t> f;
        r.get("chain.trace_set", f);
        c.chain.trace_set = std::move(f);
    }
    r.get("chain.reweightings", c.chain.reweightings);

    r.get("mc.feller_horizon", c.mc.feller_horizon);
    r.get("mc.feller_paths", c.mc.feller_paths);
    r.get("mc.supp_grid", c.mc.supp_grid);
    r.get("mc.supp_paths", c.mc.supp_paths);
    r.get("mc.levy_paths", c.mc.levy_paths);
    r.get("mc.levy_t", c.mc.levy_t);
    r.get("mc.curve_paths", c.mc.curve_paths);

    r.get("sphere.dim", c.sphere.dim);
    r.get("sphere.radius", c.sphere.radius);
    r.get("sphere.n_polar", c.sphere.n_polar);
    r.get("sphere.max_degree", c.sphere.max_degree);
    r.get("sphere.start_radius", c.sphere.start_radius);
    r.get("sphere.kill_radius", c.sphere.kill_radius);
    r.get("sphere.walks", c.sphere.walks);
    r.get("sphere.eps", c.sphere.eps);
    r.get("sphere.pairs_per_eps", c.sphere.pairs_per_eps);
    r.get("sphere.shell_stretch", c.sphere.shell_stretch);

    r.get("prototype.sites", c.prototype.sites);
    r.get("prototype.spacing", c.prototype.spacing);
    r.get("prototype.alpha", c.prototype.alpha);
    r.get("prototype.cutoff", c.prototype.cutoff);
    r.get("prototype.lower", c.prototype.lower);
    r.get("prototype.shell_center", c.prototype.shell_center);

    r.get("tolerances.identity", c.tol.identity);
    r.get("tolerances.route", c.tol.route);
    r.get("tolerances.sphere_residual", c.tol.sphere_residual);
    r.get("tolerances.closed_form", c.tol.closed_form);
    r.get("tolerances.z_bound", c.tol.z_bound);
    r.get("tolerances.shell_relative", c.tol.shell_relative);

    if (kind == Kind::chain_verify || kind == Kind::chain_mc) {
        detail::require(!c.chain.file.empty(), "[chain] file is required for " + kind_name(kind));
        detail::require(std::filesystem::exists(c.chain.file), "chain file not found: " + c.chain.file.string());
    }
    if (kind == Kind::chain_mc) {
        detail::require(c.mc.feller_paths >= 1 && c.mc.feller_horizon > 0.0, "[mc] feller_paths and feller_horizon must be positive");
        detail::require(c.mc.supp_paths >= 1000 && c.mc.levy_paths >= 1000 && c.mc.curve_paths >= 1000,
                        "[mc] path counts must be at least 1000");
        detail::require(c.mc.supp_grid.size() >= 2, "[mc] supp_grid needs at least two times");
        detail::require(c.mc.levy_t > 0.0, "[mc] levy_t must be positive");
    }
    if (kind == Kind::sphere_verify || kind == Kind::sphere_mc) {
        detail::require(c.sphere.dim == 3, "[sphere] dim: only n = 3 is supported by these suites");
        detail::require(c.sphere.radius > 0.0, "[sphere] radius must be positive");
        detail::require(c.sphere.n_polar >= 4, "[sphere] n_polar must be at least 4");
        detail::require(c.sphere.max_degree >= 0 && c.sphere.max_degree <= 8, "[sphere] max_degree must lie in [0, 8]");
    }
    if (kind == Kind::sphere_mc) {
        detail::require(c.sphere.walks >= 1000, "[sphere] walks must be at least 1000");
        detail::require(c.sphere.start_radius > c.sphere.radius && c.sphere.start_radius < c.sphere.kill_radius,
                        "[sphere] start_radius must lie between radius and kill_radius");
        detail::require(c.sphere.kill_radius > 2.0 * c.sphere.radius, "[sphere] kill_radius must exceed 2 radius");
        if (c.sphere.pairs_per_eps > 0) detail::require(c.sphere.eps.size() >= 3, "[sphere] eps needs at least three values");
    }
    if (kind == Kind::prototype) {
        detail::require(c.prototype.sites >= 2 && c.prototype.spacing > 0.0, "[prototype] sites >= 2 and spacing > 0 required");
        detail::require(c.prototype.lower.size() == 3 && c.prototype.shell_center.size() == 3,
                        "[prototype] lower and shell_center need three coordinates");
    }
    return c;
}

[[nodiscard]] inline ExperimentConfig load_config(Kind kind, const std::filesystem::path& path,
                                                  std::optional<std::uint64_t> seed_override = std::nullopt) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path.string());
    return parse_config(kind, in, path.parent_path(), seed_override);
}

} // namespace traceforms::cli
