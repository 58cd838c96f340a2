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

#include <array>
#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace spdepath {

/// Uniform partition of [0,1] into N_e elements; unknowns live on the
/// N_e - 1 interior nodes (homogeneous Dirichlet conditions).
class Mesh1D {
public:
    explicit Mesh1D(std::size_t elements);

    std::size_t elements() const { return elements_; }
    std::size_t interior() const { return elements_ - 1; }
    double h() const { return 1.0 / static_cast<double>(elements_); }
    /// x_i, i = 0..N_e.
    double node(std::size_t i) const;

private:
    std::size_t elements_;
};

/// Symmetric tridiagonal matrix: diagonal of length N, off-diagonal N - 1.
struct SymTridiagonal {
    std::vector<double> diag;
    std::vector<double> off;

    std::size_t size() const { return diag.size(); }
    void multiply(std::span<const double> x, std::span<double> y) const;
    double quadratic_form(std::span<const double> x) const;
};

using Coefficient = std::function<double(double)>;

struct FemMatrices {
    SymTridiagonal mass;
    SymTridiagonal stiffness; // encodes the positive form -a(u, v)
};

/// Piecewise-linear mass and stiffness matrices; a is sampled at element
/// midpoints. Throws if a is not positive there.
FemMatrices assemble(const Mesh1D& mesh, const Coefficient& a);

/// Factorization of a symmetric positive definite tridiagonal matrix
/// (Thomas elimination). Throws if a pivot is not positive.
class TridiagonalFactor {
public:
    explicit TridiagonalFactor(const SymTridiagonal& a);
    void solve(std::span<double> rhs) const;

private:
    std::vector<double> pivot_;
    std::vector<double> lower_;
    std::vector<double> off_;
};

/// A + s B for matrices of equal size.
SymTridiagonal combine(const SymTridiagonal& a, double s, const SymTridiagonal& b);

using NodalState = std::vector<double>;

/// Three-point Gauss rule on [0,1]: points and weights.
struct GaussRule {
    static constexpr std::array<double, 3> points{0.11270166537925831, 0.5, 0.88729833462074169};
    static constexpr std::array<double, 3> weights{5.0 / 18.0, 8.0 / 18.0, 5.0 / 18.0};
};

/// b_i = int g hat_i, per-element three-point Gauss.
std::vector<double> load_vector(const Mesh1D& mesh, const std::function<double(double)>& g);

/// Orthogonal L^2 projection onto the hat-function space.
NodalState l2_project(const Mesh1D& mesh, const FemMatrices& matrices,
                      const std::function<double(double)>& u);

/// Value of the piecewise-linear function with interior values u at x.
double evaluate_nodal(const Mesh1D& mesh, std::span<const double> u, double x);

/// sqrt(u^T M u), the L^2 norm of a nodal function.
double mass_norm(const FemMatrices& matrices, std::span<const double> u);

/// Elliptic problem K w_h = b, b_i = <f, hat_i>.
NodalState elliptic_solve(const Mesh1D& mesh, const FemMatrices& matrices,
                          const std::function<double(double)>& f);

/// ||w - w_h||_{L^2}, with w the exact solution of -(a w')' = f when given,
/// else a reference solve on 4096 elements.
double elliptic_defect(const Mesh1D& mesh, const Coefficient& a, const std::function<double(double)>& f,
                       const std::function<double(double)>& exact = {});
/// ||w' - w_h'||_{L^2} against the exact derivative.
double elliptic_defect_h1(const Mesh1D& mesh, const Coefficient& a, const std::function<double(double)>& f,
                          const std::function<double(double)>& exact_derivative);

struct FemRun {
    Mesh1D mesh{2};
    Coefficient a = [](double) { return 1.0; };
    DriftSpec drift = zero_drift();
    DiffusionSpec diffusion = zero_diffusion(NoiseBasisSpec::sine(1));
    TimeGrid grid{1.0, 1};
    std::function<double(double)> initial = [](double) { return 0.0; };
    std::optional<CutoffLevel> cutoff;
    /// Implicitness of the linear part: 1 is backward Euler, 1/2 is
    /// Crank-Nicolson. Must lie in [1/2, 1].
    double theta = 1.0;
};

/// Linearly implicit step
///   (M + theta dt K) u+ = (M - (1 - theta) dt K) u + dt b_F(t, u) + b_G(t, u) dW,
/// backward Euler at the default theta = 1.
/// Additive noise uses exact hat moments of the noise basis; state
/// dependent terms use per-element three-point Gauss quadrature.
class FemStepper {
public:
    explicit FemStepper(const FemRun& run);

    const FemMatrices& matrices() const { return matrices_; }
    void step(std::span<double> state, double t, std::span<const double> dW);
    /// b_F(t, u)
    void drift_load(double t, std::span<const double> u, std::span<double> out) const;
    /// b_G(t, u) dW
    void noise_load(double t, std::span<const double> u, std::span<const double> dW,
                    std::span<double> out) const;
    std::size_t noise_modes_used() const;

private:
    const FemRun& run_;
    std::size_t n_;
    FemMatrices matrices_;
    TridiagonalFactor factor_;
    std::vector<double> additive_;    // N x J, w_j <e_j, hat_i>
    std::vector<double> basis_at_qp_; // 3 N_e x J, w_j e_j(x_q)
    mutable std::vector<double> rhs_, load_, scaled_, xi_, explicit_;
};

NodalState step_semi_implicit(const FemRun& run, std::span<const double> state, double t,
                              std::span<const double> increments);

using NodalObserver = std::function<void(std::size_t step, std::span<const double> state)>;

void solve_fem(const FemRun& run, const IncrementTable& increments, const NodalObserver& observer);
Trajectory solve_fem(const FemRun& run, const IncrementTable& increments);
Trajectory solve_fem(const FemRun& run, const StreamKey& key);

/// L^2 distance between a nodal function on `fine` and one on `coarse`,
/// where fine.elements() is a multiple of coarse.elements(). Exact.
double nested_difference_norm(const Mesh1D& fine, std::span<const double> fine_state, const Mesh1D& coarse,
                              std::span<const double> coarse_state);

/// L^2 distance between sum_k a_k phi_k and a nodal function. Exact.
class SpectralFemDistance {
public:
    SpectralFemDistance(const Mesh1D& mesh, std::size_t modes);
    double operator()(std::span<const double> modes, std::span<const double> nodal) const;

private:
    Mesh1D mesh_;
    std::size_t modes_;
    FemMatrices matrices_;
    std::vector<double> moments_; // modes x N
};

/// Plain-text triplet listing "row col value" (1-based) of M then K.
void write_matrix_triplets(const std::string& path, const FemMatrices& matrices);

} // namespace spdepath
