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

#include "spdepath/fem.hpp"
#include "spdepath/noise.hpp"
#include "spdepath/nonlinearity.hpp"
#include "spdepath/spectral.hpp"

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace spdepath {

/// Malformed configuration content (usage error).
class ConfigError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Configuration file missing or unreadable.
class ConfigIoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

enum class Scheme { spectral, fem };
std::string to_string(Scheme s);

/// Reference used by FEM convergence studies.
enum class FemReference { self, spectral };

struct EquationConfig {
    std::string op = "heat";    // heat | power
    double op_c = 0.0;          // power only; heat uses pi^2
    double op_alpha = 2.0;
    std::string coefficient = "one"; // FEM diffusion coefficient: one | smooth
    std::string drift = "zero";
    double drift_a = 1.0;
    double drift_b = 0.0;
    double theta_F = 0.0;
    std::string diffusion = "zero";
    double sigma = 1.0;
    double theta_G = 0.0;
    std::string noise = "sine";
    std::size_t noise_modes = 256;
    double noise_decay = 0.0;   // q_j = j^{-2 rho} when noise = qwiener
    std::string initial = "zero";
    double initial_amplitude = 1.0;
};

struct DiscretizationConfig {
    Scheme scheme = Scheme::spectral;
    std::vector<std::size_t> levels;
    std::size_t reference = 0; // 0 selects 4 * max(levels)
    FemReference fem_reference = FemReference::self;
    double horizon = 1.0;
    std::size_t steps = 1000;
    SpectralStepper stepper = SpectralStepper::exponential;
    double theta = 1.0;
    std::size_t quadrature = 0;
    IncrementMode increments = IncrementMode::independent;
    std::size_t finest_steps = 0;
};

struct ExperimentSection {
    std::size_t paths = 32;
    double p = 4.0;
    std::uint64_t seed = 0;
    double eta = 0.0;
    std::vector<double> cutoffs;
    std::vector<double> deltas{0.0, 0.25, 0.5, 1.0};
    std::size_t threads = 1;
};

/// Flat `key = value` file with [equation], [discretization] and
/// [experiment] sections. '#' starts a comment.
struct ExperimentConfig {
    EquationConfig equation;
    DiscretizationConfig discretization;
    ExperimentSection experiment;

    std::size_t reference_level() const;
    TimeGrid grid() const;
    SpectralOperator spectral_operator() const;
    NoiseBasisSpec noise_basis() const;
    DriftSpec drift() const;
    DiffusionSpec diffusion() const;
    InitialCondition initial_condition() const;
    Coefficient coefficient() const;
    IncrementOptions increment_options() const;

    GalerkinRun galerkin_run(std::size_t level) const;
    FemRun fem_run(std::size_t elements) const;

    /// alpha * eta for spectral, 2 eta for FEM.
    double predicted_rate() const;
    /// Violations of eta + 1/(alpha p) < min(1 + theta_F, 1/2 + theta_G - 1/p).
    std::vector<std::string> rate_warnings() const;

    /// Throws ConfigError when invariants fail.
    void validate() const;
};

ExperimentConfig parse_config(const std::string& text);
ExperimentConfig load_config(const std::string& path);
std::string format_config(const ExperimentConfig& cfg);

} // namespace spdepath
