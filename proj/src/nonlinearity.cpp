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

#include "spdepath/nonlinearity.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace spdepath {

DriftSpec zero_drift() {
    return DriftSpec{[](double, double) { return 0.0; }, 0.0, LipschitzKind::global, "zero", true};
}

DriftSpec identity_drift() {
    return DriftSpec{[](double, double u) { return u; }, 0.0, LipschitzKind::global, "identity", false};
}

DriftSpec affine_drift(double a, double b) {
    return DriftSpec{[a, b](double, double u) { return a * u + b; }, 0.0, LipschitzKind::global,
                     "affine", a == 0.0 && b == 0.0};
}

DriftSpec sin_square_drift() {
    return DriftSpec{[](double, double u) { return std::sin(u * u); }, 0.0, LipschitzKind::local,
                     "sin_u2", false};
}

DriftSpec make_drift(const std::string& label, double a, double b) {
    if (label == "zero")
        return zero_drift();
    if (label == "identity")
        return identity_drift();
    if (label == "affine")
        return affine_drift(a, b);
    if (label == "sin_u2")
        return sin_square_drift();
    throw std::invalid_argument("unknown drift '" + label + "'");
}

DiffusionSpec zero_diffusion(NoiseBasisSpec basis) {
    return DiffusionSpec{[](double, double) { return 0.0; }, 0.0, std::move(basis),
                         LipschitzKind::global, "zero", DiffusionForm::zero, 0.0};
}

DiffusionSpec constant_diffusion(NoiseBasisSpec basis, double sigma) {
    return DiffusionSpec{[sigma](double, double) { return sigma; }, 0.0, std::move(basis),
                         LipschitzKind::global, "constant", DiffusionForm::constant, sigma};
}

DiffusionSpec identity_diffusion(NoiseBasisSpec basis, double sigma) {
    return DiffusionSpec{[sigma](double, double u) { return sigma * u; }, 0.0, std::move(basis),
                         LipschitzKind::global, "identity", DiffusionForm::linear, sigma};
}

DiffusionSpec bounded_diffusion(NoiseBasisSpec basis, double sigma) {
    return DiffusionSpec{[sigma](double, double u) { return sigma * u / (1.0 + u * u); }, 0.0,
                         std::move(basis), LipschitzKind::global, "bounded", DiffusionForm::general,
                         sigma};
}

DiffusionSpec make_diffusion(const std::string& label, NoiseBasisSpec basis, double sigma) {
    if (label == "zero")
        return zero_diffusion(std::move(basis));
    if (label == "constant")
        return constant_diffusion(std::move(basis), sigma);
    if (label == "identity")
        return identity_diffusion(std::move(basis), sigma);
    if (label == "bounded")
        return bounded_diffusion(std::move(basis), sigma);
    throw std::invalid_argument("unknown diffusion '" + label + "'");
}

namespace {
std::vector<double> pointwise(const ScalarField& fn, double t, std::span<const double> u,
                              const char* what) {
    std::vector<double> out(u.size());
    for (std::size_t i = 0; i < u.size(); ++i) {
        if (std::isnan(u[i]))
            throw std::domain_error(std::string(what) + ": NaN input at index " + std::to_string(i));
        out[i] = fn(t, u[i]);
    }
    return out;
}
} // namespace

std::vector<double> apply_drift(const DriftSpec& spec, double t, std::span<const double> u_values) {
    return pointwise(spec.f, t, u_values, "apply_drift");
}

std::vector<double> apply_diffusion(const DiffusionSpec& spec, double t,
                                    std::span<const double> u_values) {
    return pointwise(spec.g, t, u_values, "apply_diffusion");
}

CutoffLevel::CutoffLevel(double m) : m_(m) {
    if (!(m > 0.0))
        throw std::invalid_argument("cutoff level must be positive");
}

std::vector<double> CutoffContext::apply(std::span<const double> x) const {
    std::vector<double> out(x.begin(), x.end());
    if (active())
        for (double& v : out)
            v *= scale;
    return out;
}

CutoffContext cutoff_scale(const CutoffLevel& level, double norm_of_state) {
    if (norm_of_state < 0.0 || std::isnan(norm_of_state))
        throw std::invalid_argument("cutoff: state norm must be non-negative");
    // min(1, m / 0) = 1
    if (norm_of_state <= level.value())
        return CutoffContext{1.0};
    return CutoffContext{level.value() / norm_of_state};
}

CutoffContext cutoff(const DriftSpec&, const DiffusionSpec&, const CutoffLevel& level,
                     double norm_of_state) {
    return cutoff_scale(level, norm_of_state);
}

std::optional<std::size_t> first_exit_step(std::span<const double> path_norms,
                                           const CutoffLevel& level) {
    for (std::size_t i = 0; i < path_norms.size(); ++i)
        if (path_norms[i] >= level.value())
            return i;
    return std::nullopt;
}

} // namespace spdepath
