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

#include "spdepath/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <exception>
#include <fstream>
#include <limits>
#include <mutex>
#include <sstream>
#include <thread>

namespace spdepath {

std::string format_real(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

// Order fitting -----------------------------------------------------------

OrderFit fit_order(std::span<const double> levels, std::span<const double> errors) {
    if (levels.size() != errors.size())
        throw std::invalid_argument("fit_order: levels and errors differ in length");
    OrderFit fit;
    std::vector<double> xs, ys;
    for (std::size_t i = 0; i < levels.size(); ++i) {
        if (errors[i] > 0.0 && std::isfinite(errors[i]) && levels[i] > 0.0) {
            xs.push_back(std::log(levels[i]));
            ys.push_back(std::log(errors[i]));
        } else {
            fit.dropped.push_back(static_cast<std::size_t>(levels[i]));
        }
    }
    const std::size_t n = xs.size();
    if (n < 3)
        throw std::invalid_argument("fit_order: fewer than three levels with positive error");
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        mx += xs[i];
        my += ys[i];
    }
    mx /= static_cast<double>(n);
    my /= static_cast<double>(n);
    double sxx = 0.0, sxy = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        sxx += (xs[i] - mx) * (xs[i] - mx);
        sxy += (xs[i] - mx) * (ys[i] - my);
        syy += (ys[i] - my) * (ys[i] - my);
    }
    if (sxx == 0.0)
        throw std::invalid_argument("fit_order: levels are all equal");
    const double b = sxy / sxx;
    fit.slope = 0.0 - b;
    fit.intercept = my - b * mx;
    double sse = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double r = ys[i] - (fit.intercept + b * xs[i]);
        sse += r * r;
    }
    fit.r_squared = syy == 0.0 ? 1.0 : 1.0 - sse / syy;
    fit.stderr_slope = n > 2 ? std::sqrt(sse / static_cast<double>(n - 2) / sxx) : 0.0;
    return fit;
}

OrderFit fit_order(std::span<const std::size_t> levels, std::span<const double> errors) {
    std::vector<double> x(levels.begin(), levels.end());
    return fit_order(std::span<const double>(x), errors);
}

// Parallel paths ----------------------------------------------------------

namespace {

/// Runs body(i) for i in [0, count) on up to `threads` workers. The first
/// exception thrown by any body is rethrown after all workers finish.
template <typename Body>
void for_each_path(std::size_t count, std::size_t threads, Body&& body) {
    threads = std::max<std::size_t>(1, std::min(threads, count));
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    auto worker = [&] {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= count)
                return;
            try {
                body(i);
            } catch (...) {
                std::lock_guard<std::mutex> lock(failure_mutex);
                if (!failure)
                    failure = std::current_exception();
                next.store(count);
            }
        }
    };
    if (threads == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        pool.reserve(threads);
        for (std::size_t t = 0; t < threads; ++t)
            pool.emplace_back(worker);
        for (auto& th : pool)
            th.join();
    }
    if (failure)
        std::rethrow_exception(failure);
}

StreamKey path_key(const ExperimentConfig& cfg, std::size_t path) {
    StreamKey key;
    key.master_seed = cfg.experiment.seed;
    key.path_index = path;
    return key;
}

double spectral_distance(std::span<const double> reference, std::span<const double> level) {
    double s = 0.0;
    for (std::size_t k = 0; k < reference.size(); ++k) {
        const double d = reference[k] - (k < level.size() ? level[k] : 0.0);
        s += d * d;
    }
    return std::sqrt(s);
}

} // namespace

// Convergence -------------------------------------------------------------

bool ConvergenceReport::failed() const {
    return static_cast<double>(excluded_count) > 0.05 * static_cast<double>(paths);
}

ConvergenceReport run_convergence(const ExperimentConfig& cfg, const RunOptions& options) {
    cfg.validate();
    const auto& disc = cfg.discretization;
    const std::size_t ref = cfg.reference_level();
    const std::size_t paths = cfg.experiment.paths;
    const std::size_t nlev = disc.levels.size();
    const TimeGrid grid = cfg.grid();
    const NoiseBasisSpec basis = cfg.noise_basis();
    const IncrementOptions incr = cfg.increment_options();

    ConvergenceReport report;
    report.scheme = disc.scheme;
    report.levels = disc.levels;
    report.reference = ref;
    report.p = cfg.experiment.p;
    report.paths = paths;
    report.sup_errors.assign(nlev, std::vector<double>(paths, std::numeric_limits<double>::quiet_NaN()));
    report.excluded.assign(paths, false);
    report.exclusion_reasons.assign(paths, {});
    report.seed = cfg.experiment.seed;
    report.dt = grid.dt();
    report.steps = grid.steps();
    report.noise_modes = basis.modes();
    report.warnings = cfg.rate_warnings();
    report.predicted_rate = cfg.predicted_rate();

    const bool spectral_reference =
        disc.scheme == Scheme::spectral || disc.fem_reference == FemReference::spectral;

    std::optional<GalerkinRun> ref_galerkin;
    std::optional<FemRun> ref_fem;
    if (spectral_reference) {
        ref_galerkin = cfg.galerkin_run(ref);
        report.quadrature_nodes = ref_galerkin->effective_quadrature_nodes();
        report.stepper = to_string(disc.stepper);
    } else {
        ref_fem = cfg.fem_run(ref);
        report.stepper = disc.theta == 1.0 ? "backward-euler" : "theta=" + format_real(disc.theta);
    }
    if (disc.scheme == Scheme::fem && spectral_reference)
        report.stepper = (disc.theta == 1.0 ? "backward-euler" : "theta=" + format_real(disc.theta)) +
                         " vs spectral " + to_string(disc.stepper);

    std::vector<GalerkinRun> galerkin_levels;
    std::vector<FemRun> fem_levels;
    std::vector<SpectralFemDistance> distances;
    for (std::size_t l : disc.levels) {
        if (disc.scheme == Scheme::spectral) {
            galerkin_levels.push_back(cfg.galerkin_run(l));
        } else {
            fem_levels.push_back(cfg.fem_run(l));
            if (spectral_reference)
                distances.emplace_back(Mesh1D(l), ref);
        }
    }

    for_each_path(paths, options.threads, [&](std::size_t i) {
        const IncrementTable table = sample_increments(basis, grid, path_key(cfg, i), incr);
        std::vector<double> sup(nlev, 0.0);
        try {
            const Trajectory reference =
                ref_galerkin ? solve_spectral(*ref_galerkin, table) : solve_fem(*ref_fem, table);
            for (std::size_t l = 0; l < nlev; ++l) {
                double worst = 0.0;
                if (disc.scheme == Scheme::spectral) {
                    solve_spectral(galerkin_levels[l], table, [&](std::size_t m, std::span<const double> u) {
                        worst = std::max(worst, spectral_distance(reference.state(m), u));
                    });
                } else if (spectral_reference) {
                    solve_fem(fem_levels[l], table, [&](std::size_t m, std::span<const double> u) {
                        worst = std::max(worst, distances[l](reference.state(m), u));
                    });
                } else {
                    solve_fem(fem_levels[l], table, [&](std::size_t m, std::span<const double> u) {
                        worst = std::max(worst, nested_difference_norm(ref_fem->mesh, reference.state(m),
                                                                       fem_levels[l].mesh, u));
                    });
                }
                sup[l] = worst;
            }
        } catch (const NumericalFailure& e) {
            report.excluded[i] = true;
            report.exclusion_reasons[i] = e.what();
            return;
        }
        for (std::size_t l = 0; l < nlev; ++l)
            report.sup_errors[l][i] = sup[l];
    });

    report.excluded_count = static_cast<std::size_t>(std::count(report.excluded.begin(), report.excluded.end(), true));
    report.lp_errors.assign(nlev, std::numeric_limits<double>::quiet_NaN());
    const double p = report.p;
    for (std::size_t l = 0; l < nlev; ++l) {
        double acc = 0.0;
        std::size_t used = 0;
        for (std::size_t i = 0; i < paths; ++i) {
            if (report.excluded[i])
                continue;
            acc += std::pow(report.sup_errors[l][i], p);
            ++used;
        }
        if (used > 0)
            report.lp_errors[l] = std::pow(acc / static_cast<double>(used), 1.0 / p);
    }
    if (nlev >= 3) {
        try {
            report.fit = fit_order(std::span<const std::size_t>(report.levels), report.lp_errors);
            for (std::size_t l : report.fit->dropped)
                report.warnings.push_back("level " + std::to_string(l) + " dropped from the fit (zero error)");
        } catch (const std::invalid_argument& e) {
            report.warnings.push_back(std::string("order fit skipped: ") + e.what());
        }
        if (report.predicted_rate > 0.0 && report.included_paths() > 0) {
            try {
                report.chi = pathwise_chi(report, report.predicted_rate);
            } catch (const std::invalid_argument& e) {
                report.warnings.push_back(std::string("chi trend skipped: ") + e.what());
            }
        }
    }
    return report;
}

ChiStatistics pathwise_chi(const ConvergenceReport& report, double rate_exponent) {
    ChiStatistics stats;
    stats.rate_exponent = rate_exponent;
    const std::size_t paths = report.paths;
    const std::size_t nlev = report.levels.size();
    stats.chi.assign(paths, std::numeric_limits<double>::quiet_NaN());
    std::vector<double> worst(nlev, 0.0);
    double acc = 0.0;
    std::size_t used = 0;
    for (std::size_t i = 0; i < paths; ++i) {
        if (!report.excluded.empty() && report.excluded[i])
            continue;
        double chi = 0.0;
        for (std::size_t l = 0; l < nlev; ++l) {
            const double scaled =
                report.sup_errors[l][i] * std::pow(static_cast<double>(report.levels[l]), rate_exponent);
            chi = std::max(chi, scaled);
            worst[l] = std::max(worst[l], scaled);
        }
        stats.chi[i] = chi;
        acc += std::pow(chi, report.p);
        ++used;
    }
    stats.lp_norm = used > 0 ? std::pow(acc / static_cast<double>(used), 1.0 / report.p) : 0.0;
    if (nlev >= 3)
        stats.trend_slope = -fit_order(std::span<const std::size_t>(report.levels), worst).slope;
    return stats;
}

// Localization ------------------------------------------------------------

bool LocalizationReport::consistent() const {
    return std::all_of(pairs.begin(), pairs.end(), [](const LocalizationPair& p) { return p.violations == 0; });
}

bool LocalizationReport::fraction_monotone() const {
    for (std::size_t j = 1; j < fraction_no_exit.size(); ++j)
        if (fraction_no_exit[j] < fraction_no_exit[j - 1])
            return false;
    return true;
}

LocalizationReport run_localization(const ExperimentConfig& cfg, std::span<const double> cutoffs,
                                    const RunOptions& options) {
    cfg.validate();
    if (cutoffs.empty())
        throw std::invalid_argument("run_localization: no cutoff levels given");
    std::vector<double> levels(cutoffs.begin(), cutoffs.end());
    std::sort(levels.begin(), levels.end());

    const auto& disc = cfg.discretization;
    const std::size_t level = disc.levels.front();
    const std::size_t paths = cfg.experiment.paths;
    const TimeGrid grid = cfg.grid();
    const NoiseBasisSpec basis = cfg.noise_basis();
    const std::size_t nc = levels.size();

    LocalizationReport report;
    report.scheme = disc.scheme;
    report.level = level;
    report.cutoffs = levels;
    report.paths = paths;
    report.exit_steps.assign(nc, std::vector<std::optional<std::size_t>>(paths));
    for (std::size_t a = 0; a < nc; ++a)
        for (std::size_t b = a + 1; b < nc; ++b)
            report.pairs.push_back({levels[a], levels[b], 0, 0, 0, 0});

    std::vector<GalerkinRun> galerkin;
    std::vector<FemRun> fem;
    for (double m : levels) {
        if (disc.scheme == Scheme::spectral) {
            galerkin.push_back(cfg.galerkin_run(level));
            galerkin.back().cutoff = CutoffLevel(m);
        } else {
            fem.push_back(cfg.fem_run(level));
            fem.back().cutoff = CutoffLevel(m);
        }
    }

    // Norm of the uncut initial state in the solver's own L^2 frame.
    double initial_norm = 0.0;
    std::optional<FemMatrices> mats;
    if (disc.scheme == Scheme::spectral) {
        initial_norm = l2_norm(cfg.galerkin_run(level).initial);
    } else {
        const FemRun run = cfg.fem_run(level);
        mats = assemble(run.mesh, run.a);
        initial_norm = mass_norm(*mats, l2_project(run.mesh, *mats, run.initial));
    }

    struct PathOutcome {
        std::vector<std::optional<std::size_t>> exits;
        std::vector<LocalizationPair> pairs;
    };
    std::vector<PathOutcome> outcomes(paths);

    for_each_path(paths, options.threads, [&](std::size_t i) {
        const IncrementTable table = sample_increments(basis, grid, path_key(cfg, i), cfg.increment_options());
        std::vector<Trajectory> trajs;
        std::vector<std::vector<double>> norms(nc);
        for (std::size_t c = 0; c < nc; ++c) {
            Trajectory t = disc.scheme == Scheme::spectral ? solve_spectral(galerkin[c], table)
                                                           : solve_fem(fem[c], table);
            norms[c].resize(t.times());
            for (std::size_t m = 0; m < t.times(); ++m)
                norms[c][m] = disc.scheme == Scheme::spectral ? l2_norm(t.state(m)) : mass_norm(*mats, t.state(m));
            trajs.push_back(std::move(t));
        }
        PathOutcome& out = outcomes[i];
        for (std::size_t c = 0; c < nc; ++c)
            out.exits.push_back(first_exit_step(norms[c], CutoffLevel(levels[c])));
        std::size_t pair_index = 0;
        for (std::size_t a = 0; a < nc; ++a) {
            for (std::size_t b = a + 1; b < nc; ++b, ++pair_index) {
                LocalizationPair pr{levels[a], levels[b], 1, 0, 0, 0};
                const std::optional<std::size_t> exit = out.exits[a];
                const bool initial_cut = initial_norm > levels[a];
                if (initial_cut || (exit && *exit == 0 && initial_norm >= levels[a])) {
                    pr.vacuous = 1;
                } else {
                    const std::size_t last = exit ? *exit : grid.steps();
                    for (std::size_t m = 0; m <= last; ++m) {
                        const auto x = trajs[a].state(m);
                        const auto y = trajs[b].state(m);
                        ++pr.steps_compared;
                        if (std::memcmp(x.data(), y.data(), x.size() * sizeof(double)) != 0) {
                            pr.violations = 1;
                            break;
                        }
                    }
                }
                out.pairs.push_back(pr);
            }
        }
    });

    std::vector<std::size_t> no_exit(nc, 0);
    for (std::size_t i = 0; i < paths; ++i) {
        for (std::size_t c = 0; c < nc; ++c) {
            report.exit_steps[c][i] = outcomes[i].exits[c];
            if (!outcomes[i].exits[c])
                ++no_exit[c];
        }
        for (std::size_t p = 0; p < report.pairs.size(); ++p) {
            const LocalizationPair& src = outcomes[i].pairs[p];
            LocalizationPair& dst = report.pairs[p];
            dst.paths_compared += src.paths_compared;
            dst.vacuous += src.vacuous;
            dst.steps_compared += src.steps_compared;
            dst.violations += src.violations;
        }
    }
    for (std::size_t c = 0; c < nc; ++c)
        report.fraction_no_exit.push_back(static_cast<double>(no_exit[c]) / static_cast<double>(paths));
    return report;
}

// Defects -----------------------------------------------------------------

DefectReport defect_study(const ExperimentConfig& cfg, std::optional<double> lambda0) {
    cfg.validate();
    DefectReport report;
    report.scheme = cfg.discretization.scheme;
    const auto& levels = cfg.discretization.levels;
    if (report.scheme == Scheme::spectral) {
        const SpectralOperator op = cfg.spectral_operator();
        const std::size_t maxl = *std::max_element(levels.begin(), levels.end());
        report.lambda0 = lambda0 ? *lambda0 : resolvent_shift(op.eigenvalues(maxl + 1));
        for (double delta : cfg.experiment.deltas) {
            std::vector<double> xs, ys;
            for (std::size_t n : levels) {
                DefectRow row;
                row.delta = delta;
                row.level = n;
                row.value = resolvent_defect_spectral(op, n, delta, report.lambda0);
                row.formula = std::pow(std::abs(report.lambda0 - op.eigenvalue(n + 1)), -delta);
                report.max_formula_deviation =
                    std::max(report.max_formula_deviation, std::abs(row.value - row.formula));
                report.rows.push_back(row);
                xs.push_back(static_cast<double>(n + 1));
                ys.push_back(row.value);
            }
            if (xs.size() >= 3)
                report.fits.emplace_back(delta, fit_order(std::span<const double>(xs), ys));
        }
        return report;
    }

    const Coefficient a = cfg.coefficient();
    const double pi = std::numbers::pi;
    const auto f = [pi](double x) { return std::sin(pi * x); };
    std::function<double(double)> exact;
    if (cfg.equation.coefficient == "one")
        exact = [pi](double x) { return std::sin(pi * x) / (pi * pi); };
    std::vector<double> ys;
    for (std::size_t ne : levels) {
        DefectRow row;
        row.delta = 1.0;
        row.level = ne;
        row.value = elliptic_defect(Mesh1D(ne), a, f, exact);
        row.formula = std::numeric_limits<double>::quiet_NaN();
        report.rows.push_back(row);
        ys.push_back(row.value);
    }
    if (ys.size() >= 3)
        report.fits.emplace_back(1.0, fit_order(std::span<const std::size_t>(levels), ys));
    return report;
}

// Output ------------------------------------------------------------------

void write_errors_csv(const std::string& path, const ConvergenceReport& report) {
    std::ofstream out(path);
    if (!out)
        throw std::ios_base::failure("cannot open " + path + " for writing");
    const std::string scheme = to_string(report.scheme);
    out << "scheme,level,path,sup_error,lp_error,p,n_paths\n";
    for (std::size_t l = 0; l < report.levels.size(); ++l) {
        for (std::size_t i = 0; i < report.paths; ++i) {
            if (report.excluded[i])
                continue;
            out << scheme << ',' << report.levels[l] << ',' << i << ',' << format_real(report.sup_errors[l][i])
                << ",,,\n";
        }
    }
    for (std::size_t l = 0; l < report.levels.size(); ++l) {
        out << scheme << ',' << report.levels[l] << ",all,," << format_real(report.lp_errors[l]) << ','
            << format_real(report.p) << ',' << report.included_paths() << '\n';
    }
    if (!out)
        throw std::ios_base::failure("failed writing " + path);
}

std::string format_report(const ConvergenceReport& r, const ExperimentConfig& cfg) {
    std::ostringstream out;
    out << "convergence study (" << to_string(r.scheme) << ")\n"
        << "reference level      " << r.reference << "\n"
        << "paths                " << r.paths << " (" << r.excluded_count << " excluded)\n"
        << "moment order p       " << format_real(r.p) << "\n"
        << "seed                 " << r.seed << "\n"
        << "time steps           " << r.steps << " (dt = " << format_real(r.dt) << ")\n"
        << "noise modes          " << r.noise_modes << "\n";
    if (r.quadrature_nodes)
        out << "quadrature nodes     " << r.quadrature_nodes << " (reference)\n";
    out << "stepper              " << r.stepper << "\n"
        << "sup norm             max over grid nodes\n\n";
    out << "level  lp_error\n";
    for (std::size_t l = 0; l < r.levels.size(); ++l)
        out << r.levels[l] << "  " << format_real(r.lp_errors[l]) << "\n";
    out << "\n";
    if (r.fit) {
        out << "fitted order         " << format_real(r.fit->slope) << " +/- " << format_real(r.fit->stderr_slope)
            << "\nR^2                  " << format_real(r.fit->r_squared) << "\n";
    }
    out << "predicted rate       " << format_real(r.predicted_rate) << "\n";
    {
        // ||x0|| in the fractional space of order eta, from 4096 sine modes;
        // for finite elements this is the spectral-equivalent proxy
        const SpectralOperator op = cfg.spectral_operator();
        const std::vector<double> lam = op.eigenvalues(4096);
        const ModeVector x0 = cfg.initial_condition().modes(4096);
        out << (r.scheme == Scheme::fem ? "x0 eta-norm (proxy)  " : "x0 eta-norm          ")
            << format_real(fractional_norm(x0, cfg.experiment.eta, resolvent_shift(lam), lam)) << "\n";
    }
    if (r.chi) {
        out << "chi L^p norm         " << format_real(r.chi->lp_norm) << "\n"
            << "chi trend slope      " << format_real(r.chi->trend_slope) << "\n";
    }
    for (const auto& w : r.warnings)
        out << "warning: " << w << "\n";
    for (std::size_t i = 0; i < r.paths; ++i)
        if (r.excluded[i])
            out << "excluded path " << i << ": " << r.exclusion_reasons[i] << "\n";
    if (r.failed())
        out << "FAILED: more than 5% of paths excluded\n";
    out << "\n# configuration\n" << format_config(cfg);
    return out.str();
}

std::string format_localization(const LocalizationReport& r) {
    std::ostringstream out;
    out << "localization study (" << to_string(r.scheme) << ", level " << r.level << ", " << r.paths << " paths)\n\n"
        << "cutoff  fraction_tau_eq_T\n";
    for (std::size_t c = 0; c < r.cutoffs.size(); ++c)
        out << format_real(r.cutoffs[c]) << "  " << format_real(r.fraction_no_exit[c]) << "\n";
    out << "\nm1  m2  paths  vacuous  states_compared  violations\n";
    for (const auto& p : r.pairs)
        out << format_real(p.m1) << "  " << format_real(p.m2) << "  " << p.paths_compared << "  " << p.vacuous
            << "  " << p.steps_compared << "  " << p.violations << "\n";
    out << "\nagreement up to exit: " << (r.consistent() ? "yes" : "NO") << "\n"
        << "fraction nondecreasing in m: " << (r.fraction_monotone() ? "yes" : "no") << "\n";
    return out.str();
}

std::string format_defect(const DefectReport& r) {
    std::ostringstream out;
    if (r.scheme == Scheme::spectral) {
        out << "resolvent defect (spectral), lambda0 = " << format_real(r.lambda0) << "\n"
            << "delta,level,defect,formula\n";
        for (const auto& row : r.rows)
            out << format_real(row.delta) << ',' << row.level << ',' << format_real(row.value) << ','
                << format_real(row.formula) << "\n";
        out << "max |defect - formula| = " << format_real(r.max_formula_deviation) << "\n";
    } else {
        out << "elliptic defect (fem), f = sin(pi x)\n"
            << "elements,defect\n";
        for (const auto& row : r.rows)
            out << row.level << ',' << format_real(row.value) << "\n";
    }
    for (const auto& [delta, fit] : r.fits)
        out << "delta " << format_real(delta) << ": slope " << format_real(fit.slope) << " (R^2 "
            << format_real(fit.r_squared) << ")\n";
    return out.str();
}

} // namespace spdepath
