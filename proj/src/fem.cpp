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

#include "spdepath/fem.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <stdexcept>

namespace spdepath {

Mesh1D::Mesh1D(std::size_t elements) : elements_(elements) {
    if (elements < 2)
        throw std::invalid_argument("mesh needs at least two elements");
}

double Mesh1D::node(std::size_t i) const {
    if (i == elements_)
        return 1.0;
    return static_cast<double>(i) / static_cast<double>(elements_);
}

void SymTridiagonal::multiply(std::span<const double> x, std::span<double> y) const {
    const std::size_t n = size();
    for (std::size_t i = 0; i < n; ++i) {
        double v = diag[i] * x[i];
        if (i > 0)
            v += off[i - 1] * x[i - 1];
        if (i + 1 < n)
            v += off[i] * x[i + 1];
        y[i] = v;
    }
}

double SymTridiagonal::quadratic_form(std::span<const double> x) const {
    double s = 0.0;
    for (std::size_t i = 0; i < size(); ++i) {
        s += diag[i] * x[i] * x[i];
        if (i + 1 < size())
            s += 2.0 * off[i] * x[i] * x[i + 1];
    }
    return s;
}

SymTridiagonal combine(const SymTridiagonal& a, double s, const SymTridiagonal& b) {
    if (a.size() != b.size())
        throw std::invalid_argument("combine: size mismatch");
    SymTridiagonal out = a;
    for (std::size_t i = 0; i < out.diag.size(); ++i)
        out.diag[i] += s * b.diag[i];
    for (std::size_t i = 0; i < out.off.size(); ++i)
        out.off[i] += s * b.off[i];
    return out;
}

FemMatrices assemble(const Mesh1D& mesh, const Coefficient& a) {
    const std::size_t ne = mesh.elements();
    const std::size_t n = mesh.interior();
    const double h = mesh.h();

    std::vector<double> a_elem(ne);
    for (std::size_t e = 0; e < ne; ++e) {
        const double mid = 0.5 * (mesh.node(e) + mesh.node(e + 1));
        a_elem[e] = a(mid);
        if (!(a_elem[e] > 0.0))
            throw std::invalid_argument("assemble: coefficient not positive at x = " + std::to_string(mid));
    }

    FemMatrices m;
    m.mass.diag.assign(n, 2.0 * h / 3.0);
    m.mass.off.assign(n - 1, h / 6.0);
    m.stiffness.diag.resize(n);
    m.stiffness.off.resize(n - 1);
    // Interior node i (1-based on the mesh) touches elements i-1 and i.
    for (std::size_t i = 1; i <= n; ++i) {
        m.stiffness.diag[i - 1] = (a_elem[i - 1] + a_elem[i]) / h;
        if (i < n)
            m.stiffness.off[i - 1] = -a_elem[i] / h;
    }
    return m;
}

TridiagonalFactor::TridiagonalFactor(const SymTridiagonal& a)
    : pivot_(a.size()), lower_(a.size() > 0 ? a.size() - 1 : 0), off_(a.off) {
    const std::size_t n = a.size();
    for (std::size_t i = 0; i < n; ++i) {
        double d = a.diag[i];
        if (i > 0)
            d -= lower_[i - 1] * a.off[i - 1];
        if (!(d > 0.0))
            throw std::runtime_error("tridiagonal factorization: non-positive pivot at row " + std::to_string(i));
        pivot_[i] = d;
        if (i + 1 < n)
            lower_[i] = a.off[i] / d;
    }
}

void TridiagonalFactor::solve(std::span<double> rhs) const {
    const std::size_t n = pivot_.size();
    for (std::size_t i = 1; i < n; ++i)
        rhs[i] -= lower_[i - 1] * rhs[i - 1];
    for (std::size_t i = n; i-- > 0;) {
        rhs[i] /= pivot_[i];
        if (i + 1 < n)
            rhs[i] -= lower_[i] * rhs[i + 1];
    }
}

std::vector<double> load_vector(const Mesh1D& mesh, const std::function<double(double)>& g) {
    const std::size_t ne = mesh.elements();
    const double h = mesh.h();
    std::vector<double> b(mesh.interior(), 0.0);
    for (std::size_t e = 0; e < ne; ++e) {
        const double x0 = mesh.node(e);
        double left = 0.0, right = 0.0;
        for (std::size_t q = 0; q < 3; ++q) {
            const double s = GaussRule::points[q];
            const double v = GaussRule::weights[q] * h * g(x0 + s * h);
            left += v * (1.0 - s);
            right += v * s;
        }
        if (e >= 1)
            b[e - 1] += left;
        if (e + 1 <= mesh.interior())
            b[e] += right;
    }
    return b;
}

NodalState l2_project(const Mesh1D& mesh, const FemMatrices& matrices, const std::function<double(double)>& u) {
    NodalState c = load_vector(mesh, u);
    TridiagonalFactor(matrices.mass).solve(c);
    return c;
}

double evaluate_nodal(const Mesh1D& mesh, std::span<const double> u, double x) {
    const std::size_t ne = mesh.elements();
    const double pos = std::clamp(x, 0.0, 1.0) * static_cast<double>(ne);
    const std::size_t e = std::min(static_cast<std::size_t>(pos), ne - 1);
    const double s = pos - static_cast<double>(e);
    const double left = e >= 1 ? u[e - 1] : 0.0;
    const double right = e + 1 <= mesh.interior() ? u[e] : 0.0;
    return (1.0 - s) * left + s * right;
}

double mass_norm(const FemMatrices& matrices, std::span<const double> u) {
    return std::sqrt(std::max(0.0, matrices.mass.quadratic_form(u)));
}

NodalState elliptic_solve(const Mesh1D& mesh, const FemMatrices& matrices, const std::function<double(double)>& f) {
    NodalState w = load_vector(mesh, f);
    TridiagonalFactor(matrices.stiffness).solve(w);
    return w;
}

namespace {

template <typename Integrand>
double element_quadrature(const Mesh1D& mesh, Integrand&& integrand) {
    double s = 0.0;
    for (std::size_t e = 0; e < mesh.elements(); ++e) {
        for (std::size_t q = 0; q < 3; ++q)
            s += GaussRule::weights[q] * mesh.h() * integrand(e, GaussRule::points[q]);
    }
    return s;
}

} // namespace

double elliptic_defect(const Mesh1D& mesh, const Coefficient& a, const std::function<double(double)>& f,
                       const std::function<double(double)>& exact) {
    const FemMatrices mats = assemble(mesh, a);
    const NodalState wh = elliptic_solve(mesh, mats, f);

    std::function<double(double)> reference = exact;
    NodalState wref;
    std::optional<Mesh1D> ref_mesh;
    if (!reference) {
        ref_mesh.emplace(4096);
        wref = elliptic_solve(*ref_mesh, assemble(*ref_mesh, a), f);
        reference = [&](double x) { return evaluate_nodal(*ref_mesh, wref, x); };
    }
    const double err2 = element_quadrature(mesh, [&](std::size_t e, double s) {
        const double x = mesh.node(e) + s * mesh.h();
        const double d = reference(x) - evaluate_nodal(mesh, wh, x);
        return d * d;
    });
    return std::sqrt(err2);
}

double elliptic_defect_h1(const Mesh1D& mesh, const Coefficient& a, const std::function<double(double)>& f,
                          const std::function<double(double)>& exact_derivative) {
    const FemMatrices mats = assemble(mesh, a);
    const NodalState wh = elliptic_solve(mesh, mats, f);
    const double err2 = element_quadrature(mesh, [&](std::size_t e, double s) {
        const double left = e >= 1 ? wh[e - 1] : 0.0;
        const double right = e + 1 <= mesh.interior() ? wh[e] : 0.0;
        const double slope = (right - left) / mesh.h();
        const double d = exact_derivative(mesh.node(e) + s * mesh.h()) - slope;
        return d * d;
    });
    return std::sqrt(err2);
}

// Time stepping -----------------------------------------------------------

FemStepper::FemStepper(const FemRun& run)
    : run_(run), n_(run.mesh.interior()), matrices_(assemble(run.mesh, run.a)),
      factor_(combine(matrices_.mass, run.theta * run.grid.dt(), matrices_.stiffness)), rhs_(n_), load_(n_) {
    if (!(run.theta >= 0.5 && run.theta <= 1.0))
        throw std::invalid_argument("theta must lie in [1/2, 1]");
    if (!(run.drift.theta_F > -1.0))
        throw std::invalid_argument("theta_F must exceed -1");
    if (!(run.diffusion.theta_G > -0.5))
        throw std::invalid_argument("theta_G must exceed -1/2");
    const DiffusionSpec& g = run.diffusion;
    const std::size_t J = g.basis.modes();
    const double h = run.mesh.h();
    if (g.form == DiffusionForm::constant) {
        additive_.resize(n_ * J);
        for (std::size_t i = 0; i < n_; ++i)
            for (std::size_t j = 1; j <= J; ++j)
                additive_[i * J + j - 1] = g.basis.weight(j) * g.basis.hat_moment(j, run.mesh.node(i + 1), h);
    } else if (g.form != DiffusionForm::zero) {
        const std::size_t nq = 3 * run.mesh.elements();
        basis_at_qp_.resize(nq * J);
        for (std::size_t e = 0; e < run.mesh.elements(); ++e)
            for (std::size_t q = 0; q < 3; ++q) {
                const double x = run.mesh.node(e) + GaussRule::points[q] * h;
                for (std::size_t j = 1; j <= J; ++j)
                    basis_at_qp_[(3 * e + q) * J + j - 1] = g.basis.weight(j) * g.basis.basis_value(j, x);
            }
        xi_.resize(nq);
    }
}

std::size_t FemStepper::noise_modes_used() const {
    return run_.diffusion.form == DiffusionForm::zero ? 0 : run_.diffusion.basis.modes();
}

void FemStepper::drift_load(double t, std::span<const double> u, std::span<double> out) const {
    std::fill(out.begin(), out.end(), 0.0);
    const Mesh1D& mesh = run_.mesh;
    const double h = mesh.h();
    for (std::size_t e = 0; e < mesh.elements(); ++e) {
        const double ul = e >= 1 ? u[e - 1] : 0.0;
        const double ur = e + 1 <= n_ ? u[e] : 0.0;
        double left = 0.0, right = 0.0;
        for (std::size_t q = 0; q < 3; ++q) {
            const double s = GaussRule::points[q];
            const double v = GaussRule::weights[q] * h * run_.drift.f(t, (1.0 - s) * ul + s * ur);
            left += v * (1.0 - s);
            right += v * s;
        }
        if (e >= 1)
            out[e - 1] += left;
        if (e + 1 <= n_)
            out[e] += right;
    }
}

void FemStepper::noise_load(double t, std::span<const double> u, std::span<const double> dW,
                            std::span<double> out) const {
    const DiffusionSpec& g = run_.diffusion;
    const std::size_t J = g.basis.modes();
    const std::size_t used = std::min(J, dW.size());
    std::fill(out.begin(), out.end(), 0.0);
    if (g.form == DiffusionForm::zero)
        return;
    if (g.form == DiffusionForm::constant) {
        for (std::size_t i = 0; i < n_; ++i) {
            const double* row = additive_.data() + i * J;
            double acc = 0.0;
            for (std::size_t j = 0; j < used; ++j)
                acc += row[j] * dW[j];
            out[i] = g.amplitude * acc;
        }
        return;
    }
    const Mesh1D& mesh = run_.mesh;
    const double h = mesh.h();
    for (std::size_t qp = 0; qp < xi_.size(); ++qp) {
        const double* row = basis_at_qp_.data() + qp * J;
        double acc = 0.0;
        for (std::size_t j = 0; j < used; ++j)
            acc += row[j] * dW[j];
        xi_[qp] = acc;
    }
    for (std::size_t e = 0; e < mesh.elements(); ++e) {
        const double ul = e >= 1 ? u[e - 1] : 0.0;
        const double ur = e + 1 <= n_ ? u[e] : 0.0;
        double left = 0.0, right = 0.0;
        for (std::size_t q = 0; q < 3; ++q) {
            const double s = GaussRule::points[q];
            const double v = GaussRule::weights[q] * h * g.g(t, (1.0 - s) * ul + s * ur) * xi_[3 * e + q];
            left += v * (1.0 - s);
            right += v * s;
        }
        if (e >= 1)
            out[e - 1] += left;
        if (e + 1 <= n_)
            out[e] += right;
    }
}

void FemStepper::step(std::span<double> state, double t, std::span<const double> dW) {
    std::span<const double> arg = state;
    if (run_.cutoff) {
        const CutoffContext ctx = cutoff_scale(*run_.cutoff, mass_norm(matrices_, state));
        if (ctx.active()) {
            scaled_ = ctx.apply(state);
            arg = scaled_;
        }
    }
    matrices_.mass.multiply(state, rhs_);
    const double dt = run_.grid.dt();
    if (run_.theta != 1.0) {
        explicit_.resize(n_);
        matrices_.stiffness.multiply(state, explicit_);
        const double w = (1.0 - run_.theta) * dt;
        for (std::size_t i = 0; i < n_; ++i)
            rhs_[i] -= w * explicit_[i];
    }
    if (!run_.drift.is_zero) {
        drift_load(t, arg, load_);
        for (std::size_t i = 0; i < n_; ++i)
            rhs_[i] += dt * load_[i];
    }
    if (run_.diffusion.form != DiffusionForm::zero) {
        noise_load(t, arg, dW, load_);
        for (std::size_t i = 0; i < n_; ++i)
            rhs_[i] += load_[i];
    }
    factor_.solve(rhs_);
    std::copy(rhs_.begin(), rhs_.end(), state.begin());
    require_finite(state, "finite element step");
}

NodalState step_semi_implicit(const FemRun& run, std::span<const double> state, double t,
                              std::span<const double> increments) {
    FemStepper stepper(run);
    NodalState next(state.begin(), state.end());
    stepper.step(next, t, increments);
    return next;
}

void solve_fem(const FemRun& run, const IncrementTable& increments, const NodalObserver& observer) {
    if (!(increments.grid() == run.grid))
        throw std::invalid_argument("solve_fem: increment grid differs from run grid");
    FemStepper stepper(run);
    if (increments.modes() < stepper.noise_modes_used())
        throw std::invalid_argument("solve_fem: increment table has too few modes");
    NodalState u = l2_project(run.mesh, stepper.matrices(), run.initial);
    if (run.cutoff && mass_norm(stepper.matrices(), u) > run.cutoff->value())
        std::fill(u.begin(), u.end(), 0.0);
    observer(0, u);
    for (std::size_t m = 0; m < run.grid.steps(); ++m) {
        stepper.step(u, run.grid.node(m), increments.step(m));
        observer(m + 1, u);
    }
}

Trajectory solve_fem(const FemRun& run, const IncrementTable& increments) {
    Trajectory traj(run.mesh.interior(), run.grid.steps() + 1);
    solve_fem(run, increments, [&](std::size_t m, std::span<const double> s) {
        std::copy(s.begin(), s.end(), traj.state(m).begin());
    });
    return traj;
}

Trajectory solve_fem(const FemRun& run, const StreamKey& key) {
    return solve_fem(run, sample_increments(run.diffusion.basis, run.grid, key));
}

double nested_difference_norm(const Mesh1D& fine, std::span<const double> fine_state, const Mesh1D& coarse,
                              std::span<const double> coarse_state) {
    if (fine.elements() % coarse.elements() != 0)
        throw std::invalid_argument("nested_difference_norm: meshes are not nested");
    const std::size_t r = fine.elements() / coarse.elements();
    const std::size_t n = fine.interior();
    std::vector<double> d(n);
    for (std::size_t i = 1; i <= n; ++i) {
        const std::size_t e = i / r;
        const double s = static_cast<double>(i % r) / static_cast<double>(r);
        const double left = e >= 1 ? coarse_state[e - 1] : 0.0;
        const double right = e + 1 <= coarse.interior() ? coarse_state[e] : 0.0;
        d[i - 1] = fine_state[i - 1] - ((1.0 - s) * left + s * right);
    }
    const double h = fine.h();
    SymTridiagonal mass{std::vector<double>(n, 2.0 * h / 3.0), std::vector<double>(n - 1, h / 6.0)};
    return std::sqrt(std::max(0.0, mass.quadratic_form(d)));
}

SpectralFemDistance::SpectralFemDistance(const Mesh1D& mesh, std::size_t modes)
    : mesh_(mesh), modes_(modes), matrices_(assemble(mesh, [](double) { return 1.0; })),
      moments_(modes * mesh.interior()) {
    const NoiseBasisSpec sine = NoiseBasisSpec::sine(modes);
    for (std::size_t k = 1; k <= modes; ++k)
        for (std::size_t i = 0; i < mesh.interior(); ++i)
            moments_[(k - 1) * mesh.interior() + i] = sine.hat_moment(k, mesh.node(i + 1), mesh.h());
}

double SpectralFemDistance::operator()(std::span<const double> modes, std::span<const double> nodal) const {
    const std::size_t n = mesh_.interior();
    double aa = 0.0, cross = 0.0;
    for (std::size_t k = 0; k < std::min(modes.size(), modes_); ++k) {
        aa += modes[k] * modes[k];
        const double* row = moments_.data() + k * n;
        double inner = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            inner += row[i] * nodal[i];
        cross += modes[k] * inner;
    }
    const double uu = matrices_.mass.quadratic_form(nodal);
    return std::sqrt(std::max(0.0, aa - 2.0 * cross + uu));
}

void write_matrix_triplets(const std::string& path, const FemMatrices& matrices) {
    std::ofstream out(path);
    if (!out)
        throw std::ios_base::failure("cannot open " + path);
    out.precision(17);
    auto dump = [&](const char* name, const SymTridiagonal& a) {
        out << "# " << name << " " << a.size() << "\n";
        for (std::size_t i = 0; i < a.size(); ++i) {
            if (i > 0)
                out << i + 1 << " " << i << " " << a.off[i - 1] << "\n";
            out << i + 1 << " " << i + 1 << " " << a.diag[i] << "\n";
            if (i + 1 < a.size())
                out << i + 1 << " " << i + 2 << " " << a.off[i] << "\n";
        }
    };
    dump("mass", matrices.mass);
    dump("stiffness", matrices.stiffness);
}

} // namespace spdepath
