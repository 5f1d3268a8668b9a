#include <traceforms/cli/runner.hpp>
#include <traceforms/cli/thread_pool.hpp>

#include <CLI11.hpp>

#include <iostream>

using namespace traceforms;

int main(int argc, char** argv) {
    CLI::App app{"Trace Dirichlet forms: exact checks and Monte Carlo experiments"};
    std::string kind_text, config_path, out_dir = "out";
    std::optional<std::uint64_t> seed;
    app.add_option("kind", kind_text, "chain-verify | chain-mc | sphere-verify | sphere-mc | prototype")->required();
    app.add_option("--config", config_path, "INI configuration file")->required();
    app.add_option("--seed", seed, "overrides [experiment] seed");
    app.add_option("--out", out_dir, "output directory");
    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 3;
    }

    const auto kind = cli::parse_kind(kind_text);
    if (!kind) {
        std::cerr << "error: unknown experiment kind '" << kind_text << "'\n";
        return 3;
    }
    cli::ExperimentConfig cfg;
    try {
        cfg = cli::load_config(*kind, config_path, seed);
    } catch (const Error& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 3;
    }

    try {
        const cli::ThreadPool pool(cfg.workers);
        const auto bundle = cli::run_experiment(cfg, pool);
        cli::emit_reports(bundle, out_dir);
        std::cout << cli::summary_text(bundle);
        return cli::exit_code(bundle.status());
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 3;
    } catch (const IoError& e) {
        std::cerr << "io error: " << e.what() << "\n";
        return 3;
    } catch (const ParseError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
