/*
   Copyright 2026 The spdepath Authors

   Licensed under the Apache License, Version 2.0 (the "License");
   you may not use this file except in compliance with the License.
   You may obtain a copy of the License at

       http://www.apache.org/licenses/LICENSE-2.0

   Unless required by applicable law or agreed to in writing, software
   distributed under the License is distributed on an "AS IS" BASIS,
   WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
   See the License for the specific language governing permissions and
   limitations under the License.
*/

#include "spdepath/cli.hpp"

#include "spdepath/config.hpp"
#include "spdepath/harness.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

namespace spdepath {

namespace {

struct GlobalOptions {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::string out;
    std::optional<std::size_t> paths;
    std::optional<std::size_t> threads;
    std::optional<std::size_t> level;
    bool quiet = false;
};

class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

ExperimentConfig load(const GlobalOptions& g) {
    if (g.config.empty())
        throw ConfigError("--config is required for this subcommand");
    ExperimentConfig cfg = load_config(g.config);
    if (g.seed)
        cfg.experiment.seed = *g.seed;
    if (g.paths)
        cfg.experiment.paths = *g.paths;
    if (g.threads)
        cfg.experiment.threads = *g.threads;
    cfg.validate();
    return cfg;
}

std::filesystem::path out_dir(const GlobalOptions& g) {
    std::filesystem::path dir = g.out.empty() ? std::filesystem::path(".") : std::filesystem::path(g.out);
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec)
        throw IoError("cannot create output directory " + dir.string() + ": " + ec.message());
    return dir;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path);
    out << text;
    if (!out)
        throw IoError("cannot write " + path.string());
}

int run_coeffs(const GlobalOptions& g) {
    std::size_t n = g.level.value_or(0);
    if (n == 0) {
        if (g.config.empty())
            throw ConfigError("coeffs needs --level or --config");
        n = load(g).discretization.levels.front();
    }
    const CouplingTable table = build_coupling_table(n);
    std::string text;
    char buf[160];
    for (std::size_t k = 1; k <= n; ++k) {
        for (const auto& e : table.row(k)) {
            std::snprintf(buf, sizeof buf, "%zu %zu %zu %.17g\n", e.k, e.source, e.noise_mode, e.coefficient);
            text += buf;
        }
    }
    if (!g.out.empty())
        write_text(out_dir(g) / "coeffs.txt", text);
    std::cout << text;
    return 0;
}

int run_simulate(const GlobalOptions& g, std::size_t path) {
    const ExperimentConfig cfg = load(g);
    const std::size_t level = g.level.value_or(cfg.discretization.levels.front());
    StreamKey key;
    key.master_seed = cfg.experiment.seed;
    key.path_index = path;
    const IncrementTable table = sample_increments(cfg.noise_basis(), cfg.grid(), key, cfg.increment_options());
    const Trajectory traj = cfg.discretization.scheme == Scheme::spectral
                                ? solve_spectral(cfg.galerkin_run(level), table)
                                : solve_fem(cfg.fem_run(level), table);
    const auto dir = out_dir(g);
    try {
        write_trajectory((dir / "trajectory.bin").string(), traj);
        write_increments((dir / "increments.bin").string(), table);
    } catch (const std::ios_base::failure& e) {
        throw IoError(e.what());
    }
    if (!g.quiet)
        std::cout << "wrote " << traj.dimension() << " x " << traj.times() << " trajectory to "
                  << (dir / "trajectory.bin").string() << "\n";
    return 0;
}

int run_converge(const GlobalOptions& g) {
    const ExperimentConfig cfg = load(g);
    const ConvergenceReport report = run_convergence(cfg, {cfg.experiment.threads});
    const auto dir = out_dir(g);
    try {
        write_errors_csv((dir / "errors.csv").string(), report);
    } catch (const std::ios_base::failure& e) {
        throw IoError(e.what());
    }
    const std::string text = format_report(report, cfg);
    write_text(dir / "report.txt", text);
    if (!g.quiet)
        std::cout << text;
    return report.failed() ? 2 : 0;
}

int run_defect(const GlobalOptions& g, std::optional<double> lambda0) {
    const ExperimentConfig cfg = load(g);
    const std::string text = format_defect(defect_study(cfg, lambda0));
    if (!g.out.empty())
        write_text(out_dir(g) / "defect.txt", text);
    if (!g.quiet)
        std::cout << text;
    return 0;
}

int run_localize(const GlobalOptions& g, std::vector<double> cutoffs) {
    const ExperimentConfig cfg = load(g);
    if (cutoffs.empty())
        cutoffs = cfg.experiment.cutoffs;
    if (cutoffs.empty())
        throw ConfigError("no cutoff levels: set experiment.cutoffs or pass --cutoffs");
    const LocalizationReport report = run_localization(cfg, cutoffs, {cfg.experiment.threads});
    const std::string text = format_localization(report);
    if (!g.out.empty())
        write_text(out_dir(g) / "localization.txt", text);
    if (!g.quiet)
        std::cout << text;
    return report.consistent() ? 0 : 2;
}

} // namespace

int cli_main(int argc, char** argv) {
    CLI::App app{"Simulate semilinear parabolic SPDEs and measure pathwise convergence"};
    app.name("spdepath");
    app.require_subcommand(1);
    app.fallthrough();

    GlobalOptions g;
    app.add_option("--config", g.config, "Experiment configuration file");
    app.add_option("--seed", g.seed, "Master seed (overrides the config)");
    app.add_option("--out", g.out, "Output directory");
    app.add_option("--paths", g.paths, "Number of Monte Carlo paths (overrides the config)")->check(CLI::PositiveNumber);
    app.add_option("--threads", g.threads, "Worker threads (overrides the config)")->check(CLI::PositiveNumber);
    app.add_option("--level", g.level, "Truncation level or element count")->check(CLI::PositiveNumber);
    app.add_flag("--quiet", g.quiet, "Suppress standard output");

    std::size_t path = 0;
    std::optional<double> lambda0;
    std::vector<double> cutoffs;
    auto* simulate = app.add_subcommand("simulate", "Simulate one trajectory and dump it with its increments");
    simulate->add_option("--path", path, "Path index");
    auto* converge = app.add_subcommand("converge", "Run a coupled-path convergence study");
    auto* defect = app.add_subcommand("defect", "Tabulate resolvent or elliptic defects");
    defect->add_option("--lambda0", lambda0, "Resolvent shift (spectral only)");
    auto* coeffs = app.add_subcommand("coeffs", "Print the coupling table of the linear cosine-noise term");
    auto* localize = app.add_subcommand("localize", "Compare cut-off solutions across cutoff levels");
    localize->add_option("--cutoffs", cutoffs, "Cutoff levels (overrides the config)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        std::cout << app.help();
        return 0;
    } catch (const CLI::CallForAllHelp& e) {
        std::cout << app.help("", CLI::AppFormatMode::All);
        return 0;
    } catch (const CLI::ParseError& e) {
        std::cerr << "error: " << e.what() << "\n\n" << app.help();
        return 1;
    }

    try {
        if (*simulate)
            return run_simulate(g, path);
        if (*converge)
            return run_converge(g);
        if (*defect)
            return run_defect(g, lambda0);
        if (*coeffs)
            return run_coeffs(g);
        return run_localize(g, cutoffs);
    } catch (const ConfigIoError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (const IoError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (const NumericalFailure& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return 2;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::domain_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}

} // namespace spdepath
