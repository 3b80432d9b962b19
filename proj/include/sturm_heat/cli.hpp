#ifndef STURM_HEAT_CLI_HPP
#define STURM_HEAT_CLI_HPP

#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "sturm_heat/config.hpp"
#include "sturm_heat/runner.hpp"

namespace sturm_heat {

/// sturm-heat <config> [--output DIR] [--threads K] [--verbose]
inline int run_cli(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
    CLI::App app{"Spectral heat solver for Sturm-Liouville operators with singular potentials"};
    std::string config_path, output_dir;
    int threads = 0;
    bool verbose = false;
    app.add_option("config", config_path, "JSON configuration file")->required();
    app.add_option("--output", output_dir, "output directory (overrides output.directory)");
    app.add_option("--threads", threads, "worker threads for the epsilon sweep and the spectrum")
        ->check(CLI::Range(1, 1024));
    app.add_flag("--verbose", verbose, "print the full report to stderr");
    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        // help and version exit 0, bad usage counts as a config error
        const int code = app.exit(e, out, err);
        return code == 0 ? kExitOk : kExitConfig;
    }

    RunConfig config;
    try {
        std::ifstream in(config_path);
        if (!in) throw ConfigError("cannot read " + config_path);
        std::stringstream text;
        text << in.rdbuf();
        config = parse_config(text.str());
        if (!output_dir.empty()) config.output.directory = output_dir;
        if (threads > 0) config.numerics.threads = threads;
    } catch (const ConfigError& e) {
        err << "config error: " << e.what() << "\n";
        return kExitConfig;
    }

    RunResult r;
    try {
        r = run(config);
    } catch (const ConfigError& e) {
        err << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const std::filesystem::filesystem_error& e) {
        err << "output error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const std::exception& e) {
        err << "solver failure: " << e.what() << "\n";
        return kExitSolver;
    }
    out << r.summary << "\n";
    if (verbose) {
        err << r.report.dump(2) << "\n";
        for (const auto& f : r.files) err << "wrote " << f << "\n";
    }
    return r.exit_code;
}

}  // namespace sturm_heat

#endif
