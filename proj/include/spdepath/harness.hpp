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

#pragma once

#include "spdepath/config.hpp"

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace spdepath {

/// Least-squares line through (log level, log error). Positive slope means
/// error ~ level^{-slope}.
struct OrderFit {
    double slope = 0.0;
    double intercept = 0.0;
    double stderr_slope = 0.0;
    double r_squared = 0.0;
    std::vector<std::size_t> dropped; // levels with non-positive error
};

/// Drops levels whose error is not positive; fewer than three surviving
/// points is an error.
OrderFit fit_order(std::span<const double> levels, std::span<const double> errors);
OrderFit fit_order(std::span<const std::size_t> levels, std::span<const double> errors);

struct ChiStatistics {
    std::vector<double> chi;      // per path; NaN for excluded paths
    double trend_slope = 0.0;     // slope of log max_i(eps_n^i n^r) against log n
    double lp_norm = 0.0;         // (mean chi^p)^{1/p}
    double rate_exponent = 0.0;
};

struct ConvergenceReport {
    Scheme scheme = Scheme::spectral;
    std::vector<std::size_t> levels;
    std::size_t reference = 0;
    double p = 4.0;
    std::size_t paths = 0;
    /// sup_errors[l][i]: max over grid nodes of the L^2 distance to the
    /// reference; NaN when path i was excluded.
    std::vector<std::vector<double>> sup_errors;
    std::vector<bool> excluded;
    std::vector<std::string> exclusion_reasons;
    std::size_t excluded_count = 0;
    std::vector<double> lp_errors;
    std::optional<OrderFit> fit;
    std::optional<ChiStatistics> chi;
    double predicted_rate = 0.0;
    std::vector<std::string> warnings;

    // metadata
    std::uint64_t seed = 0;
    double dt = 0.0;
    std::size_t steps = 0;
    std::size_t noise_modes = 0;
    std::size_t quadrature_nodes = 0;
    std::string stepper;

    /// More than 5% of paths excluded.
    bool failed() const;
    std::size_t included_paths() const { return paths - excluded_count; }
};

struct RunOptions {
    std::size_t threads = 1;
};

/// Coupled-path study: every level and the reference consume the same
/// increment table on each path.
ConvergenceReport run_convergence(const ExperimentConfig& config, const RunOptions& options = {});

/// chi_i = max_n eps_n^i n^r, plus the trend diagnostic.
ChiStatistics pathwise_chi(const ConvergenceReport& report, double rate_exponent);

struct LocalizationPair {
    double m1 = 0.0;
    double m2 = 0.0;
    std::size_t paths_compared = 0;
    std::size_t vacuous = 0;        // exit at step 0 or initial state cut
    std::size_t steps_compared = 0; // grid states compared bitwise in total
    std::size_t violations = 0;     // paths with a mismatch inside the window
};

struct LocalizationReport {
    Scheme scheme = Scheme::spectral;
    std::size_t level = 0;
    std::vector<double> cutoffs;
    std::size_t paths = 0;
    std::vector<std::vector<std::optional<std::size_t>>> exit_steps; // [cutoff][path]
    std::vector<double> fraction_no_exit;                            // tau_m = T
    std::vector<LocalizationPair> pairs;

    bool consistent() const;
    bool fraction_monotone() const;
};

/// Solves U_m for every cutoff m on each path and checks U_{m1} = U_{m2}
/// bitwise on the grid nodes up to the first exit step of U_{m1}.
LocalizationReport run_localization(const ExperimentConfig& config, std::span<const double> cutoffs,
                                    const RunOptions& options = {});

struct DefectRow {
    double delta = 0.0;
    std::size_t level = 0;
    double value = 0.0;
    double formula = 0.0; // spectral only: |lambda0 - lambda_{n+1}|^{-delta}
};

struct DefectReport {
    Scheme scheme = Scheme::spectral;
    double lambda0 = 0.0;
    std::vector<DefectRow> rows;
    /// Per delta (spectral) or single entry (fem): slope of -log D against
    /// log of the level. For spectral the abscissa is n + 1, the index at
    /// which the supremum is attained.
    std::vector<std::pair<double, OrderFit>> fits;
    double max_formula_deviation = 0.0;
};

/// Spectral: resolvent defects at the configured levels and deltas with
/// lambda0 from the resolvent-shift convention (or `lambda0` when given).
/// FEM: elliptic defects for f = sin(pi x) against w = sin(pi x)/pi^2
/// (a = 1) or a fine reference solve.
DefectReport defect_study(const ExperimentConfig& config, std::optional<double> lambda0 = std::nullopt);

void write_errors_csv(const std::string& path, const ConvergenceReport& report);
std::string format_report(const ConvergenceReport& report, const ExperimentConfig& config);
std::string format_localization(const LocalizationReport& report);
std::string format_defect(const DefectReport& report);

/// `%.17g`
std::string format_real(double v);

} // namespace spdepath
