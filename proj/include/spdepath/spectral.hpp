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

#include "spdepath/core.hpp"
#include "spdepath/noise.hpp"
#include "spdepath/nonlinearity.hpp"

#include <cstddef>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

struct fftw_plan_s;

namespace spdepath {

/// Diagonal generator with eigenvalues lambda_k = -c k^alpha and
/// eigenfunctions phi_k(x) = sqrt(2) sin(k pi x) on (0,1).
class SpectralOperator {
public:
    SpectralOperator(double c, double alpha);
    static SpectralOperator heat();

    double growth_constant() const { return c_; }
    double alpha() const { return alpha_; }
    /// 1-based.
    double eigenvalue(std::size_t k) const;
    std::vector<double> eigenvalues(std::size_t n) const;

private:
    double c_;
    double alpha_;
};

/// (-pi^2, -4 pi^2, ..., -n^2 pi^2)
std::vector<double> heat_eigenvalues(std::size_t n);

/// int_0^1 sin(j pi x) sin(k pi x) cos(l pi x) dx
double sine_cos_overlap(std::size_t j, std::size_t k, std::size_t l);

/// Mode coupling for g(u) = u driven by the cosine representation
/// W = sqrt(2) sum_l W_l cos(l pi x). Entry (k, source, l, c) contributes
/// c * u_source * dW_l to the k-th equation. Coefficients follow the
/// unnormalized-sine convention (magnitude 2^{-3/2}); the orthonormal basis
/// used by the solver multiplies every entry by `basis_normalization`.
class CouplingTable {
public:
    struct Entry {
        std::size_t k;
        std::size_t source;
        std::size_t noise_mode;
        double coefficient;
    };

    static constexpr double basis_normalization = 2.0;

    explicit CouplingTable(std::size_t level);

    std::size_t level() const { return level_; }
    const std::vector<Entry>& entries() const { return entries_; }
    /// Entries for 1-based row k.
    std::span<const Entry> row(std::size_t k) const;
    /// Highest noise mode referenced (2n).
    std::size_t max_noise_mode() const { return 2 * level_; }

    /// out_k = sum over row k of coefficient * u_source * dW_l, in the
    /// table's own convention. Noise modes beyond dW.size() contribute 0.
    void apply(std::span<const double> u, std::span<const double> dW, std::span<double> out) const;

private:
    std::size_t level_;
    std::vector<Entry> entries_;
    std::vector<std::size_t> row_start_;
};

CouplingTable build_coupling_table(std::size_t n);

/// Orthonormal sine synthesis/analysis on the N interior nodes
/// x_i = i / (N + 1), i = 1..N (exact DST-I pair).
class SineTransform {
public:
    explicit SineTransform(std::size_t nodes);

    std::size_t nodes() const { return nodes_; }
    double node(std::size_t i) const { return static_cast<double>(i + 1) / static_cast<double>(nodes_ + 1); }

    /// values_i = sum_k coeffs_k phi_k(x_i); coeffs may be shorter than N.
    void synthesize(std::span<const double> coeffs, std::span<double> values) const;
    /// coeffs_k = discrete <values, phi_k>, k = 1..coeffs.size().
    void analyze(std::span<const double> values, std::span<double> coeffs) const;
    /// values_i = sum_l coeffs_l sqrt(2) cos(l pi x_i), l = 1..coeffs.size() <= N.
    void synthesize_cosine(std::span<const double> coeffs, std::span<double> values) const;

private:
    std::size_t nodes_;
    fftw_plan_s* dst_plan_;
    fftw_plan_s* dct_plan_;
    mutable std::vector<double> in_, out_;
};

enum class SpectralStepper {
    /// u+ = e^{dt L} (u + dt F + G dW)
    semigroup,
    /// u+ = e^{dt L} u + dt phi1(dt L) F + sqrt(phi1(2 dt L)) G dW; the noise
    /// weight reproduces the exact variance of the frozen-coefficient
    /// stochastic convolution over one step.
    exponential,
};

std::string to_string(SpectralStepper s);
SpectralStepper spectral_stepper_from_string(const std::string& s);

/// (e^z - 1) / z, Taylor series near 0.
double phi1(double z);

/// Initial datum, as a function on (0,1) and (when known in closed form)
/// as orthonormal sine coefficients.
struct InitialCondition {
    std::string label;
    std::function<double(double)> value;
    std::function<double(std::size_t)> mode; // may be empty

    /// First n coefficients; closed form when available, otherwise a
    /// DST projection on a fine grid.
    ModeVector modes(std::size_t n) const;
};

/// zero, sine (A sin pi x), modes4 (A sum_{k<=4} sin(k pi x)/k^2),
/// bump (A x(1-x)).
InitialCondition make_initial_condition(const std::string& label, double amplitude = 1.0);

struct GalerkinRun {
    SpectralOperator op = SpectralOperator::heat();
    std::size_t level = 1;
    DriftSpec drift = zero_drift();
    DiffusionSpec diffusion = zero_diffusion(NoiseBasisSpec::sine(1));
    TimeGrid grid{1.0, 1};
    ModeVector initial;                     // truncated to `level` on use
    std::size_t quadrature_nodes = 0;       // 0 selects the default
    SpectralStepper stepper = SpectralStepper::exponential;
    std::optional<CutoffLevel> cutoff;

    /// 2 * max(2n, J) + 1
    std::size_t default_quadrature_nodes() const;
    std::size_t effective_quadrature_nodes() const;
    /// Throws std::invalid_argument on a malformed run.
    void validate() const;
};

/// Precomputed per-run stepping data. Immutable after construction apart
/// from private scratch, so use one instance per thread.
class GalerkinStepper {
public:
    explicit GalerkinStepper(const GalerkinRun& run);

    std::size_t level() const { return n_; }
    /// Advances `state` in place over one step starting at time t.
    void step(std::span<double> state, double t, std::span<const double> dW);
    /// P_n F(t, u) by synthesis, pointwise f, analysis.
    void project_drift(double t, std::span<const double> u, std::span<double> out);
    /// P_n G(t, u) dW through the route matching the diffusion's shape.
    void project_diffusion(double t, std::span<const double> u, std::span<const double> dW,
                           std::span<double> out);
    /// Noise modes the diffusion route reads.
    std::size_t noise_modes_used() const;

private:
    const GalerkinRun& run_;
    std::size_t n_;
    std::vector<double> decay_;       // e^{z_k}
    std::vector<double> drift_gain_;  // dt or dt phi1(z_k)
    std::vector<double> noise_gain_;  // 1 or sqrt(phi1(2 z_k))
    std::optional<CouplingTable> table_;
    std::optional<SineTransform> transform_;
    std::vector<double> nodal_u_, nodal_a_, nodal_b_, coeff_, scaled_, drift_, noise_;
};

std::vector<double> project_drift(const GalerkinRun& run, double t, std::span<const double> u);

ModeVector step_exponential_euler(const GalerkinRun& run, std::span<const double> state, double t,
                                  std::span<const double> increments);

/// sup_{k>n} |lambda0 - lambda_k|^{-delta}, attained at k = n + 1.
double resolvent_defect_spectral(const SpectralOperator& op, std::size_t n, double delta,
                                 double lambda0);

using StateObserver = std::function<void(std::size_t step, std::span<const double> state)>;

/// Initial state P_n x0 (zeroed when a cutoff is set and ||x0|| > m),
/// then repeated steps; the observer sees every grid node including 0.
void solve_spectral(const GalerkinRun& run, const IncrementTable& increments,
                    const StateObserver& observer);
Trajectory solve_spectral(const GalerkinRun& run, const IncrementTable& increments);
Trajectory solve_spectral(const GalerkinRun& run, const StreamKey& key);

} // namespace spdepath
