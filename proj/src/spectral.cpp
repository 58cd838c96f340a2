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

#include "spdepath/spectral.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>
#include <numbers>
#include <stdexcept>
#include <utility>

namespace spdepath {

// Operator ----------------------------------------------------------------

SpectralOperator::SpectralOperator(double c, double alpha) : c_(c), alpha_(alpha) {
    if (!(c > 0.0) || !(alpha > 0.0))
        throw std::invalid_argument("spectral operator: growth constant and exponent must be positive");
}

SpectralOperator SpectralOperator::heat() { return SpectralOperator(std::numbers::pi * std::numbers::pi, 2.0); }

double SpectralOperator::eigenvalue(std::size_t k) const {
    if (k < 1)
        throw std::out_of_range("eigenvalue index is 1-based");
    const double kk = static_cast<double>(k);
    if (alpha_ == 2.0)
        return -c_ * kk * kk;
    return -c_ * std::pow(kk, alpha_);
}

std::vector<double> SpectralOperator::eigenvalues(std::size_t n) const {
    std::vector<double> out(n);
    for (std::size_t k = 1; k <= n; ++k)
        out[k - 1] = eigenvalue(k);
    return out;
}

std::vector<double> heat_eigenvalues(std::size_t n) {
    if (n < 1)
        throw std::invalid_argument("heat_eigenvalues: n must be at least 1");
    return SpectralOperator::heat().eigenvalues(n);
}

double sine_cos_overlap(std::size_t j, std::size_t k, std::size_t l) {
    // sin a sin b = (cos(a-b) - cos(a+b)) / 2, then cosine orthogonality.
    const std::size_t diff = j > k ? j - k : k - j;
    double v = 0.0;
    if (diff == l)
        v += 0.25;
    if (j + k == l)
        v -= 0.25;
    return v;
}

// Coupling table ----------------------------------------------------------

CouplingTable::CouplingTable(std::size_t level) : level_(level) {
    if (level < 1)
        throw std::invalid_argument("coupling table level must be at least 1");
    const double c = std::numbers::sqrt2 / 4.0; // 2^{-3/2}
    row_start_.reserve(level + 1);
    for (std::size_t k = 1; k <= level; ++k) {
        row_start_.push_back(entries_.size());
        std::vector<Entry> row;
        for (std::size_t l = 1; l <= level + k; ++l) {
            if (l == k)
                continue;
            const std::size_t source = l < k ? k - l : l - k;
            row.push_back({k, source, l, l < k ? c : -c});
        }
        for (std::size_t l = 1; l + k <= level; ++l)
            row.push_back({k, k + l, l, c});
        std::sort(row.begin(), row.end(), [](const Entry& a, const Entry& b) {
            return std::pair(a.noise_mode, a.source) < std::pair(b.noise_mode, b.source);
        });
        entries_.insert(entries_.end(), row.begin(), row.end());
    }
    row_start_.push_back(entries_.size());
}

std::span<const CouplingTable::Entry> CouplingTable::row(std::size_t k) const {
    return std::span<const Entry>(entries_).subspan(row_start_[k - 1], row_start_[k] - row_start_[k - 1]);
}

void CouplingTable::apply(std::span<const double> u, std::span<const double> dW,
                          std::span<double> out) const {
    for (std::size_t k = 1; k <= level_; ++k) {
        double acc = 0.0;
        for (const Entry& e : row(k)) {
            if (e.noise_mode <= dW.size())
                acc += e.coefficient * u[e.source - 1] * dW[e.noise_mode - 1];
        }
        out[k - 1] = acc;
    }
}

CouplingTable build_coupling_table(std::size_t n) { return CouplingTable(n); }

// Transforms --------------------------------------------------------------

namespace {

std::mutex plan_mutex;

fftw_plan cached_plan(fftw_r2r_kind kind, std::size_t n) {
    static std::map<std::pair<int, std::size_t>, fftw_plan> cache;
    std::lock_guard<std::mutex> lock(plan_mutex);
    const auto key = std::pair(static_cast<int>(kind), n);
    if (auto it = cache.find(key); it != cache.end())
        return it->second;
    std::vector<double> in(n), out(n);
    fftw_plan plan = fftw_plan_r2r_1d(static_cast<int>(n), in.data(), out.data(), kind,
                                      FFTW_ESTIMATE | FFTW_UNALIGNED | FFTW_PRESERVE_INPUT);
    if (plan == nullptr)
        throw std::runtime_error("FFTW could not build a transform plan");
    cache.emplace(key, plan);
    return plan;
}

} // namespace

SineTransform::SineTransform(std::size_t nodes)
    : nodes_(nodes), dst_plan_(cached_plan(FFTW_RODFT00, nodes)),
      dct_plan_(cached_plan(FFTW_REDFT00, nodes + 2)), in_(nodes + 2), out_(nodes + 2) {
    if (nodes < 1)
        throw std::invalid_argument("sine transform needs at least one node");
}

void SineTransform::synthesize(std::span<const double> coeffs, std::span<double> values) const {
    // RODFT00: Y_i = 2 sum_k X_k sin(pi (i+1)(k+1) / (N+1)); phi_k = sqrt(2) sin.
    std::fill(in_.begin(), in_.end(), 0.0);
    std::copy_n(coeffs.begin(), std::min(coeffs.size(), nodes_), in_.begin());
    fftw_execute_r2r(dst_plan_, in_.data(), out_.data());
    const double s = 1.0 / std::numbers::sqrt2;
    for (std::size_t i = 0; i < nodes_; ++i)
        values[i] = s * out_[i];
}

void SineTransform::analyze(std::span<const double> values, std::span<double> coeffs) const {
    std::copy_n(values.begin(), nodes_, in_.begin());
    fftw_execute_r2r(dst_plan_, in_.data(), out_.data());
    const double s = 1.0 / (std::numbers::sqrt2 * static_cast<double>(nodes_ + 1));
    const std::size_t n = std::min(coeffs.size(), nodes_);
    for (std::size_t k = 0; k < n; ++k)
        coeffs[k] = s * out_[k];
    for (std::size_t k = n; k < coeffs.size(); ++k)
        coeffs[k] = 0.0;
}

void SineTransform::synthesize_cosine(std::span<const double> coeffs, std::span<double> values) const {
    if (coeffs.size() > nodes_)
        throw std::invalid_argument("cosine synthesis: more modes than interior nodes");
    // REDFT00 on N+2 points: Y_i = X_0 + (-1)^i X_{N+1} + 2 sum_{l=1}^{N} X_l cos(pi l i / (N+1)).
    std::fill(in_.begin(), in_.end(), 0.0);
    std::copy(coeffs.begin(), coeffs.end(), in_.begin() + 1);
    fftw_execute_r2r(dct_plan_, in_.data(), out_.data());
    const double s = 1.0 / std::numbers::sqrt2;
    for (std::size_t i = 0; i < nodes_; ++i)
        values[i] = s * out_[i + 1];
}

// Stepping ----------------------------------------------------------------

std::string to_string(SpectralStepper s) {
    return s == SpectralStepper::semigroup ? "semigroup" : "exponential";
}

SpectralStepper spectral_stepper_from_string(const std::string& s) {
    if (s == "semigroup")
        return SpectralStepper::semigroup;
    if (s == "exponential")
        return SpectralStepper::exponential;
    throw std::invalid_argument("unknown spectral stepper '" + s + "'");
}

double phi1(double z) {
    if (std::abs(z) < 1e-5) {
        // 1 + z/2 + z^2/6 + z^3/24 + z^4/120 + z^5/720
        return 1.0 + z * (1.0 / 2 + z * (1.0 / 6 + z * (1.0 / 24 + z * (1.0 / 120 + z / 720))));
    }
    return std::expm1(z) / z;
}

ModeVector InitialCondition::modes(std::size_t n) const {
    ModeVector out(n, 0.0);
    if (mode) {
        for (std::size_t k = 1; k <= n; ++k)
            out[k - 1] = mode(k);
        return out;
    }
    const std::size_t nodes = std::max<std::size_t>(8191, 4 * n + 1);
    SineTransform dst(nodes);
    std::vector<double> samples(nodes);
    for (std::size_t i = 0; i < nodes; ++i)
        samples[i] = value(dst.node(i));
    dst.analyze(samples, out);
    return out;
}

InitialCondition make_initial_condition(const std::string& label, double amplitude) {
    const double pi = std::numbers::pi;
    const double a = amplitude;
    if (label == "zero")
        return {label, [](double) { return 0.0; }, [](std::size_t) { return 0.0; }};
    if (label == "sine")
        return {label, [a, pi](double x) { return a * std::sin(pi * x); },
                [a](std::size_t k) { return k == 1 ? a / std::numbers::sqrt2 : 0.0; }};
    if (label == "modes4")
        return {label,
                [a, pi](double x) {
                    double s = 0.0;
                    for (int k = 1; k <= 4; ++k)
                        s += std::sin(k * pi * x) / (k * k);
                    return a * s;
                },
                [a](std::size_t k) {
                    const double kk = static_cast<double>(k);
                    return k <= 4 ? a / (std::numbers::sqrt2 * kk * kk) : 0.0;
                }};
    if (label == "bump")
        return {label, [a](double x) { return a * x * (1.0 - x); },
                [a, pi](std::size_t k) {
                    if (k % 2 == 0)
                        return 0.0;
                    const double kp = static_cast<double>(k) * pi;
                    return a * std::numbers::sqrt2 * 4.0 / (kp * kp * kp);
                }};
    throw std::invalid_argument("unknown initial condition '" + label + "'");
}

std::size_t GalerkinRun::default_quadrature_nodes() const {
    return 2 * std::max(2 * level, diffusion.basis.modes()) + 1;
}

std::size_t GalerkinRun::effective_quadrature_nodes() const {
    return quadrature_nodes == 0 ? default_quadrature_nodes() : quadrature_nodes;
}

void GalerkinRun::validate() const {
    if (level < 1)
        throw std::invalid_argument("Galerkin level must be at least 1");
    if (effective_quadrature_nodes() < 2 * std::max(level, diffusion.basis.modes()))
        throw std::invalid_argument("quadrature size below 2 * max(n, J)");
    if (!(drift.theta_F > -1.0))
        throw std::invalid_argument("theta_F must exceed -1");
    if (!(diffusion.theta_G > -0.5))
        throw std::invalid_argument("theta_G must exceed -1/2");
}

GalerkinStepper::GalerkinStepper(const GalerkinRun& run)
    : run_(run), n_(run.level), decay_(n_), drift_gain_(n_), noise_gain_(n_), coeff_(n_), drift_(n_),
      noise_(n_) {
    run.validate();
    const double dt = run.grid.dt();
    for (std::size_t k = 1; k <= n_; ++k) {
        const double z = run.op.eigenvalue(k) * dt;
        decay_[k - 1] = std::exp(z);
        if (run.stepper == SpectralStepper::semigroup) {
            drift_gain_[k - 1] = dt * decay_[k - 1];
            noise_gain_[k - 1] = decay_[k - 1];
        } else {
            drift_gain_[k - 1] = dt * phi1(z);
            noise_gain_[k - 1] = std::sqrt(phi1(2.0 * z));
        }
    }
    const DiffusionSpec& g = run.diffusion;
    const bool coupled = g.form == DiffusionForm::linear && g.basis.kind() == NoiseKind::cosine_cylindrical;
    const bool diagonal = g.form == DiffusionForm::constant && g.basis.is_sine_basis();
    if (coupled)
        table_.emplace(n_);
    const bool needs_quadrature =
        !run.drift.is_zero || (g.form != DiffusionForm::zero && !coupled && !diagonal);
    if (needs_quadrature) {
        const std::size_t nq = run.effective_quadrature_nodes();
        transform_.emplace(nq);
        nodal_u_.resize(nq);
        nodal_a_.resize(nq);
        nodal_b_.resize(nq);
    }
}

std::size_t GalerkinStepper::noise_modes_used() const {
    const DiffusionSpec& g = run_.diffusion;
    switch (g.form) {
    case DiffusionForm::zero:
        return 0;
    case DiffusionForm::constant:
        if (g.basis.is_sine_basis())
            return std::min(n_, g.basis.modes());
        break;
    case DiffusionForm::linear:
        if (table_)
            return std::min(table_->max_noise_mode(), g.basis.modes());
        break;
    case DiffusionForm::general:
        break;
    }
    return g.basis.modes();
}

void GalerkinStepper::project_drift(double t, std::span<const double> u, std::span<double> out) {
    if (run_.drift.is_zero) {
        std::fill(out.begin(), out.end(), 0.0);
        return;
    }
    if (!transform_)
        throw std::logic_error("drift projection without quadrature transform");
    transform_->synthesize(u, nodal_u_);
    for (std::size_t i = 0; i < nodal_u_.size(); ++i)
        nodal_a_[i] = run_.drift.f(t, nodal_u_[i]);
    transform_->analyze(nodal_a_, out.first(n_));
}

void GalerkinStepper::project_diffusion(double t, std::span<const double> u, std::span<const double> dW,
                                        std::span<double> out) {
    const DiffusionSpec& g = run_.diffusion;
    const std::size_t J = std::min(dW.size(), g.basis.modes());
    if (g.form == DiffusionForm::zero) {
        std::fill(out.begin(), out.end(), 0.0);
        return;
    }
    if (g.form == DiffusionForm::constant && g.basis.is_sine_basis()) {
        for (std::size_t k = 1; k <= n_; ++k)
            out[k - 1] = k <= J ? g.amplitude * g.basis.weight(k) * dW[k - 1] : 0.0;
        return;
    }
    if (table_) {
        table_->apply(u, dW.first(J), out);
        const double s = CouplingTable::basis_normalization * g.amplitude;
        for (std::size_t k = 0; k < n_; ++k)
            out[k] *= s;
        return;
    }
    // Quadrature route: g(u(x_i)) * xi(x_i) on the DST nodes, then analysis.
    transform_->synthesize(u, nodal_u_);
    scaled_.assign(J, 0.0);
    for (std::size_t l = 1; l <= J; ++l)
        scaled_[l - 1] = g.basis.weight(l) * dW[l - 1];
    if (g.basis.is_sine_basis())
        transform_->synthesize(scaled_, nodal_b_);
    else
        transform_->synthesize_cosine(scaled_, nodal_b_);
    for (std::size_t i = 0; i < nodal_u_.size(); ++i)
        nodal_a_[i] = g.g(t, nodal_u_[i]) * nodal_b_[i];
    transform_->analyze(nodal_a_, out.first(n_));
}

void GalerkinStepper::step(std::span<double> state, double t, std::span<const double> dW) {
    std::span<const double> arg = state;
    if (run_.cutoff) {
        const CutoffContext ctx = cutoff_scale(*run_.cutoff, l2_norm(state));
        if (ctx.active()) {
            coeff_ = ctx.apply(state);
            arg = coeff_;
        }
    }
    const bool has_drift = !run_.drift.is_zero;
    const bool has_noise = run_.diffusion.form != DiffusionForm::zero;
    if (has_drift)
        project_drift(t, arg, drift_);
    if (has_noise)
        project_diffusion(t, arg, dW, noise_);
    for (std::size_t k = 0; k < n_; ++k) {
        double v = decay_[k] * state[k];
        if (has_drift)
            v += drift_gain_[k] * drift_[k];
        if (has_noise)
            v += noise_gain_[k] * noise_[k];
        state[k] = v;
    }
    require_finite(state, "spectral step");
}

std::vector<double> project_drift(const GalerkinRun& run, double t, std::span<const double> u) {
    if (u.size() != run.level)
        throw std::invalid_argument("project_drift: state length differs from level");
    if (run.quadrature_nodes != 0 && run.quadrature_nodes < 2 * run.level)
        throw std::invalid_argument("project_drift: quadrature size below 2n");
    GalerkinStepper stepper(run);
    std::vector<double> out(run.level);
    stepper.project_drift(t, u, out);
    return out;
}

ModeVector step_exponential_euler(const GalerkinRun& run, std::span<const double> state, double t,
                                  std::span<const double> increments) {
    if (state.size() != run.level)
        throw std::invalid_argument("step_exponential_euler: state length differs from level");
    GalerkinStepper stepper(run);
    ModeVector next(state.begin(), state.end());
    stepper.step(next, t, increments);
    return next;
}

double resolvent_defect_spectral(const SpectralOperator& op, std::size_t n, double delta, double lambda0) {
    if (!(delta >= 0.0 && delta <= 1.0))
        throw std::invalid_argument("resolvent defect: delta must lie in [0, 1]");
    if (!(lambda0 > op.eigenvalue(1)))
        throw std::invalid_argument("resolvent defect: lambda0 must exceed lambda_1");
    return std::pow(lambda0 - op.eigenvalue(n + 1), -delta);
}

void solve_spectral(const GalerkinRun& run, const IncrementTable& increments, const StateObserver& observer) {
    run.validate();
    if (!(increments.grid() == run.grid))
        throw std::invalid_argument("solve_spectral: increment grid differs from run grid");
    GalerkinStepper stepper(run);
    if (increments.modes() < stepper.noise_modes_used())
        throw std::invalid_argument("solve_spectral: increment table has too few modes");

    ModeVector u(run.level, 0.0);
    std::copy_n(run.initial.begin(), std::min(run.initial.size(), run.level), u.begin());
    if (run.cutoff && l2_norm(u) > run.cutoff->value())
        std::fill(u.begin(), u.end(), 0.0);

    observer(0, u);
    for (std::size_t m = 0; m < run.grid.steps(); ++m) {
        stepper.step(u, run.grid.node(m), increments.step(m));
        observer(m + 1, u);
    }
}

Trajectory solve_spectral(const GalerkinRun& run, const IncrementTable& increments) {
    Trajectory traj(run.level, run.grid.steps() + 1);
    solve_spectral(run, increments, [&](std::size_t m, std::span<const double> s) {
        std::copy(s.begin(), s.end(), traj.state(m).begin());
    });
    return traj;
}

Trajectory solve_spectral(const GalerkinRun& run, const StreamKey& key) {
    const IncrementTable table = sample_increments(run.diffusion.basis, run.grid, key);
    return solve_spectral(run, table);
}

} // namespace spdepath
