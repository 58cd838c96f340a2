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

#include "spdepath/noise.hpp"

#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace spdepath {

enum class LipschitzKind { global, local };

using ScalarField = std::function<double(double t, double u)>;

struct DriftSpec {
    ScalarField f;
    double theta_F = 0.0;
    LipschitzKind lipschitz = LipschitzKind::global;
    std::string label;
    bool is_zero = false;
};

/// Structural shape of g; solvers pick a cheaper route when they know it.
enum class DiffusionForm {
    zero,     // g = 0
    constant, // g = amplitude (additive noise)
    linear,   // g = amplitude * u
    general,
};

struct DiffusionSpec {
    ScalarField g;
    double theta_G = 0.0;
    NoiseBasisSpec basis = NoiseBasisSpec::sine(1);
    LipschitzKind lipschitz = LipschitzKind::global;
    std::string label;
    DiffusionForm form = DiffusionForm::general;
    double amplitude = 1.0;
};

// Catalog. Labels are the names accepted in config files.
DriftSpec zero_drift();
DriftSpec identity_drift();
DriftSpec affine_drift(double a, double b);
DriftSpec sin_square_drift(); // f(u) = sin(u^2)
DriftSpec make_drift(const std::string& label, double a = 1.0, double b = 0.0);

DiffusionSpec zero_diffusion(NoiseBasisSpec basis);
DiffusionSpec constant_diffusion(NoiseBasisSpec basis, double sigma);
DiffusionSpec identity_diffusion(NoiseBasisSpec basis, double sigma = 1.0); // g(u) = sigma u
DiffusionSpec bounded_diffusion(NoiseBasisSpec basis, double sigma = 1.0);  // sigma u / (1 + u^2)
DiffusionSpec make_diffusion(const std::string& label, NoiseBasisSpec basis, double sigma = 1.0);

/// Pointwise image f(t, u_i). Rejects NaN input.
std::vector<double> apply_drift(const DriftSpec& spec, double t, std::span<const double> u_values);
std::vector<double> apply_diffusion(const DiffusionSpec& spec, double t,
                                    std::span<const double> u_values);

class CutoffLevel {
public:
    explicit CutoffLevel(double m);
    double value() const { return m_; }

private:
    double m_;
};

/// Evaluation context for F_m(t,x) = F(t, s x) with s = min(1, m/||x||).
struct CutoffContext {
    double scale = 1.0;
    bool active() const { return scale != 1.0; }
    /// s * x; returns x unchanged (bitwise) when inactive.
    std::vector<double> apply(std::span<const double> x) const;
};

CutoffContext cutoff(const DriftSpec& specF, const DiffusionSpec& specG, const CutoffLevel& level,
                     double norm_of_state);
/// Same scale factor, without spec arguments, for solver inner loops.
CutoffContext cutoff_scale(const CutoffLevel& level, double norm_of_state);

/// Smallest grid index whose norm reaches the level; nullopt means the
/// stopping time equals the horizon.
std::optional<std::size_t> first_exit_step(std::span<const double> path_norms,
                                           const CutoffLevel& level);

} // namespace spdepath
