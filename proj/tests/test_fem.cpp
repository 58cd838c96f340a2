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
#include "spdepath/spectral.hpp"

#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <random>

using namespace spdepath;

namespace {

constexpr double pi = std::numbers::pi;
const Coefficient unit = [](double) { return 1.0; };

StreamKey key(std::uint64_t seed, std::uint64_t path = 0) {
    StreamKey k;
    k.master_seed = seed;
    k.path_index = path;
    return k;
}

/// L2 distance between a nodal function and u by 3-point Gauss per element.
double l2_error(const Mesh1D& mesh, std::span<const double> nodal, const std::function<double(double)>& u) {
    double acc = 0;
    for (std::size_t e = 0; e < mesh.elements(); ++e)
        for (std::size_t q = 0; q < 3; ++q) {
            const double x = mesh.node(e) + GaussRule::points[q] * mesh.h();
            const double d = evaluate_nodal(mesh, nodal, x) - u(x);
            acc += GaussRule::weights[q] * mesh.h() * d * d;
        }
    return std::sqrt(acc);
}

} // namespace

TEST_CASE("mesh") {
    const Mesh1D m(8);
    CHECK(m.interior() == 7);
    CHECK(m.h() * 8 == doctest::Approx(1.0).epsilon(1e-16));
    CHECK(m.node(0) == 0.0);
    CHECK(m.node(8) == 1.0);
    CHECK_THROWS(Mesh1D(1));
}

TEST_CASE("assembly at N_e = 4") {
    const auto mats = assemble(Mesh1D(4), unit);
    REQUIRE(mats.mass.size() == 3);
    for (double d : mats.stiffness.diag)
        CHECK(d == doctest::Approx(8.0));
    for (double o : mats.stiffness.off)
        CHECK(o == doctest::Approx(-4.0));
    for (double d : mats.mass.diag)
        CHECK(d == doctest::Approx(1.0 / 6.0));
    for (double o : mats.mass.off)
        CHECK(o == doctest::Approx(1.0 / 24.0));
}

TEST_CASE("mass row sums and variable coefficient") {
    const Mesh1D mesh(10);
    const auto mats = assemble(mesh, [](double x) { return 1.0 + x; });
    for (std::size_t i = 1; i + 1 < mats.mass.size(); ++i)
        CHECK(mats.mass.diag[i] + mats.mass.off[i - 1] + mats.mass.off[i] == doctest::Approx(mesh.h()));
    // K_ii = (a_{i-1/2} + a_{i+1/2}) / h, K_{i,i+1} = -a_{i+1/2} / h
    const double h = mesh.h();
    CHECK(mats.stiffness.diag[0] == doctest::Approx((1.0 + 0.5 * h + 1.0 + 1.5 * h) / h));
    CHECK(mats.stiffness.off[0] == doctest::Approx(-(1.0 + 1.5 * h) / h));
    CHECK_THROWS(assemble(mesh, [](double x) { return x - 0.5; }));
}

TEST_CASE("stiffness applied to x(1-x) matches mass times 2") {
    const Mesh1D mesh(32);
    const auto mats = assemble(mesh, unit);
    std::vector<double> u(mesh.interior()), two(mesh.interior(), 2.0), ku(u.size()), m2(u.size());
    for (std::size_t i = 0; i < u.size(); ++i)
        u[i] = mesh.node(i + 1) * (1 - mesh.node(i + 1));
    mats.stiffness.multiply(u, ku);
    mats.mass.multiply(two, m2);
    double worst = 0;
    for (std::size_t i = 1; i + 1 < u.size(); ++i)
        worst = std::max(worst, std::abs(ku[i] - m2[i]));
    CHECK(worst <= mesh.h() * mesh.h());
}

TEST_CASE("spd factorisation") {
    const auto mats = assemble(Mesh1D(16), unit);
    for (double dt : {1e-6, 1e-3, 1.0, 1e3}) {
        const auto a = combine(mats.mass, dt, mats.stiffness);
        CHECK_NOTHROW(TridiagonalFactor{a});
        std::vector<double> x(a.size()), b(a.size());
        for (std::size_t i = 0; i < x.size(); ++i)
            x[i] = std::cos(0.3 * i);
        a.multiply(x, b);
        TridiagonalFactor(a).solve(b);
        for (std::size_t i = 0; i < x.size(); ++i)
            CHECK(b[i] == doctest::Approx(x[i]).epsilon(1e-12));
    }
    SymTridiagonal bad{{1.0, -1.0}, {0.0}};
    CHECK_THROWS(TridiagonalFactor{bad});
}

TEST_CASE("l2 projection") {
    const Mesh1D mesh(64);
    const auto mats = assemble(mesh, unit);
    const auto zero = l2_project(mesh, mats, [](double) { return 0.0; });
    for (double v : zero)
        CHECK(v == 0.0);
    std::vector<double> vh(mesh.interior());
    for (std::size_t i = 0; i < vh.size(); ++i)
        vh[i] = std::sin(1.0 + i);
    const auto again = l2_project(mesh, mats, [&](double x) { return evaluate_nodal(mesh, vh, x); });
    for (std::size_t i = 0; i < vh.size(); ++i)
        CHECK(std::abs(again[i] - vh[i]) < 1e-12);
    const auto s = l2_project(mesh, mats, [](double x) { return std::sin(pi * x); });
    double worst = 0;
    for (std::size_t i = 0; i < s.size(); ++i)
        worst = std::max(worst, std::abs(s[i] - std::sin(pi * mesh.node(i + 1))));
    CHECK(worst <= 1e-3);
}

TEST_CASE("projection is orthogonal against hat functions") {
    const Mesh1D mesh(16);
    const auto mats = assemble(mesh, unit);
    std::mt19937_64 rng(2024);
    std::uniform_real_distribution<double> coef(-1.0, 1.0);
    for (int trial = 0; trial < 5; ++trial) {
        // random cubic: three-point Gauss integrates cubic times hat exactly
        const double c0 = coef(rng), c1 = coef(rng), c2 = coef(rng), c3 = coef(rng);
        const auto u = [=](double x) { return c0 + x * (c1 + x * (c2 + x * c3)); };
        const auto p = l2_project(mesh, mats, u);
        std::vector<double> mp(p.size());
        mats.mass.multiply(p, mp);
        for (std::size_t i = 0; i < p.size(); ++i) {
            // <u, hat_i> by a fine midpoint rule
            const double xi = mesh.node(i + 1);
            const int n = 200000;
            double acc = 0;
            for (int j = 0; j < n; ++j) {
                const double x = xi - mesh.h() + (j + 0.5) * 2 * mesh.h() / n;
                acc += u(x) * (1 - std::abs(x - xi) / mesh.h());
            }
            acc *= 2 * mesh.h() / n;
            CHECK(std::abs(mp[i] - acc) < 1e-10);
        }
    }
}

TEST_CASE("elliptic defect") {
    const auto f = [](double x) { return std::sin(pi * x); };
    const auto w = [](double x) { return std::sin(pi * x) / (pi * pi); };
    const double d16 = elliptic_defect(Mesh1D(16), unit, f, w);
    const double d32 = elliptic_defect(Mesh1D(32), unit, f, w);
    CHECK(d16 / d32 == doctest::Approx(4.0).epsilon(0.15));
    CHECK(elliptic_defect(Mesh1D(16), unit, [](double) { return 0.0; }, [](double) { return 0.0; }) == 0.0);
    // reference-mesh variant agrees with the closed form
    CHECK(elliptic_defect(Mesh1D(16), unit, f) == doctest::Approx(d16).epsilon(1e-3));
    const double h1_16 = elliptic_defect_h1(Mesh1D(16), unit, f, [](double x) { return std::cos(pi * x) / pi; });
    const double h1_32 = elliptic_defect_h1(Mesh1D(32), unit, f, [](double x) { return std::cos(pi * x) / pi; });
    CHECK(std::log2(h1_16 / h1_32) >= 0.95);
}

TEST_CASE("deterministic heat decay") {
    FemRun run;
    run.mesh = Mesh1D(64);
    run.grid = TimeGrid(0.1, 1000);
    run.initial = [](double x) { return std::sin(pi * x); };
    const auto traj = solve_fem(run, key(1));
    const auto mats = assemble(run.mesh, unit);
    const double expected = std::exp(-pi * pi * 0.1) / std::sqrt(2.0);
    CHECK(std::abs(mass_norm(mats, traj.state(1000)) - expected) < 2e-3 * expected);
}

TEST_CASE("implicit step is dissipative") {
    FemRun run;
    run.mesh = Mesh1D(32);
    run.grid = TimeGrid(1.0, 10);
    const auto mats = assemble(run.mesh, unit);
    std::vector<double> u(run.mesh.interior());
    for (std::size_t i = 0; i < u.size(); ++i)
        u[i] = std::sin(3.0 * i) + 0.5;
    std::vector<double> dW(1, 0.0);
    const auto next = step_semi_implicit(run, u, 0.0, dW);
    CHECK(mats.stiffness.quadratic_form(next) <= mats.stiffness.quadratic_form(u));
}

TEST_CASE("small step consistency") {
    FemRun run;
    run.mesh = Mesh1D(16);
    run.drift = affine_drift(0.0, 1.0);
    const auto mats = assemble(run.mesh, unit);
    std::vector<double> u(run.mesh.interior(), 0.0);
    for (std::size_t i = 0; i < u.size(); ++i)
        u[i] = std::sin(pi * run.mesh.node(i + 1));
    std::vector<double> dW(1, 0.0);
    std::vector<double> minv_b = load_vector(run.mesh, [](double) { return 1.0; });
    TridiagonalFactor(mats.mass).solve(minv_b);
    std::vector<double> ku(u.size());
    mats.stiffness.multiply(u, ku);
    TridiagonalFactor(mats.mass).solve(ku);
    double prev = INFINITY;
    for (double dt : {1e-4, 1e-5, 1e-6}) {
        run.grid = TimeGrid(dt, 1);
        const auto next = step_semi_implicit(run, u, 0.0, dW);
        double worst = 0;
        for (std::size_t i = 0; i < u.size(); ++i)
            worst = std::max(worst, std::abs(next[i] - (u[i] + dt * minv_b[i] - dt * ku[i])));
        CHECK(worst < prev / 50);
        prev = worst;
    }
}

TEST_CASE("zero data gives a zero trajectory") {
    FemRun run;
    run.mesh = Mesh1D(8);
    run.grid = TimeGrid(1.0, 20);
    const auto traj = solve_fem(run, key(3));
    for (std::size_t m = 0; m <= 20; ++m)
        for (double v : traj.state(m))
            CHECK(v == 0.0);
}

TEST_CASE("additive smooth noise is stable under time refinement") {
    FemRun run;
    run.mesh = Mesh1D(32);
    run.diffusion = constant_diffusion(NoiseBasisSpec::power_decay(64, 1.5), 1.0);
    run.initial = [](double x) { return std::sin(pi * x); };
    const auto mats = assemble(run.mesh, unit);
    const IncrementOptions bridge{IncrementMode::bridge, 2000};
    double sup[2];
    for (int r = 0; r < 2; ++r) {
        run.grid = TimeGrid(1.0, 1000 * (r + 1));
        double total = 0;
        for (std::size_t p = 0; p < 16; ++p) {
            const auto table = sample_increments(run.diffusion.basis, run.grid, key(12, p), bridge);
            double s = 0;
            solve_fem(run, table, [&](std::size_t, std::span<const double> u) {
                REQUIRE(std::isfinite(mass_norm(mats, u)));
                s = std::max(s, mass_norm(mats, u));
            });
            total += s;
        }
        sup[r] = total / 16;
    }
    CHECK(std::abs(sup[1] - sup[0]) <= 0.05 * sup[0]);
}

TEST_CASE("additive load uses exact hat moments") {
    FemRun run;
    run.mesh = Mesh1D(8);
    run.diffusion = constant_diffusion(NoiseBasisSpec::sine(40), 2.0);
    run.grid = TimeGrid(1.0, 1);
    FemStepper stepper(run);
    std::vector<double> u(7, 0.0), dW(40, 0.0), out(7);
    dW[29] = 1.0;
    stepper.noise_load(0.0, u, dW, out);
    for (std::size_t i = 0; i < 7; ++i)
        CHECK(out[i] == doctest::Approx(2.0 * run.diffusion.basis.hat_moment(30, run.mesh.node(i + 1), run.mesh.h())));
    CHECK(stepper.noise_modes_used() == 40);
}

TEST_CASE("general diffusion load matches gauss quadrature") {
    FemRun run;
    run.mesh = Mesh1D(6);
    run.diffusion = bounded_diffusion(NoiseBasisSpec::cosine(3), 1.0);
    run.grid = TimeGrid(1.0, 1);
    FemStepper stepper(run);
    std::vector<double> u{0.1, 0.5, -0.3, 0.8, 0.2}, dW{0.3, -0.1, 0.7}, out(5);
    stepper.noise_load(0.0, u, dW, out);
    const auto xi = [&](double x) {
        double s = 0;
        for (std::size_t l = 1; l <= 3; ++l)
            s += run.diffusion.basis.basis_value(l, x) * dW[l - 1];
        const double v = evaluate_nodal(run.mesh, u, x);
        return v / (1 + v * v) * s;
    };
    const auto expected = load_vector(run.mesh, xi);
    for (std::size_t i = 0; i < 5; ++i)
        CHECK(out[i] == doctest::Approx(expected[i]).epsilon(1e-13));
}

TEST_CASE("theta validation") {
    FemRun run;
    run.theta = 0.4;
    CHECK_THROWS(FemStepper{run});
    run.theta = 0.5;
    CHECK_NOTHROW(FemStepper{run});
}

TEST_CASE("nested difference norm is exact") {
    const Mesh1D coarse(4), fine(16);
    std::vector<double> c{0.3, -0.1, 0.6}, f(15);
    for (std::size_t i = 0; i < f.size(); ++i)
        f[i] = std::cos(0.7 * i) * 0.2;
    const auto diff = [&](double x) { return evaluate_nodal(fine, f, x) - evaluate_nodal(coarse, c, x); };
    double acc = 0;
    for (std::size_t e = 0; e < fine.elements(); ++e)
        for (std::size_t q = 0; q < 3; ++q) {
            const double x = fine.node(e) + GaussRule::points[q] * fine.h();
            acc += GaussRule::weights[q] * fine.h() * diff(x) * diff(x);
        }
    CHECK(nested_difference_norm(fine, f, coarse, c) == doctest::Approx(std::sqrt(acc)).epsilon(1e-13));
    CHECK(nested_difference_norm(fine, f, fine, f) == 0.0);
    CHECK_THROWS(nested_difference_norm(Mesh1D(10), std::vector<double>(9), coarse, c));
}

TEST_CASE("spectral fem distance is exact") {
    const Mesh1D mesh(8);
    std::vector<double> modes{0.5, -0.25, 0.1, 0.05}, nodal(7);
    for (std::size_t i = 0; i < 7; ++i)
        nodal[i] = std::sin(pi * mesh.node(i + 1)) * 0.6;
    const auto diff = [&](double x) {
        double s = 0;
        for (std::size_t k = 0; k < modes.size(); ++k)
            s += modes[k] * std::sqrt(2.0) * std::sin((k + 1) * pi * x);
        return s - evaluate_nodal(mesh, nodal, x);
    };
    const Mesh1D fine(4096);
    double acc = 0;
    for (std::size_t e = 0; e < fine.elements(); ++e)
        for (std::size_t q = 0; q < 3; ++q) {
            const double x = fine.node(e) + GaussRule::points[q] * fine.h();
            acc += GaussRule::weights[q] * fine.h() * diff(x) * diff(x);
        }
    const SpectralFemDistance dist(mesh, 4);
    CHECK(dist(modes, nodal) == doctest::Approx(std::sqrt(acc)).epsilon(1e-10));
}

TEST_CASE("fem error against the exact solution decreases with N_e") {
    double prev = INFINITY;
    for (std::size_t ne : {8u, 16u, 32u, 64u}) {
        FemRun run;
        run.mesh = Mesh1D(ne);
        run.grid = TimeGrid(0.1, 2000);
        run.theta = 0.5;
        run.initial = [](double x) { return std::sin(pi * x); };
        const auto traj = solve_fem(run, key(1));
        const double err = l2_error(run.mesh, traj.state(2000),
                                    [](double x) { return std::exp(-pi * pi * 0.1) * std::sin(pi * x); });
        CHECK(err < prev);
        prev = err;
    }
}

TEST_CASE("matrix triplets") {
    const auto path = (std::filesystem::temp_directory_path() / "spdepath_triplets.txt").string();
    write_matrix_triplets(path, assemble(Mesh1D(4), unit));
    std::ifstream in(path);
    std::size_t lines = 0;
    for (std::string s; std::getline(in, s);)
        ++lines;
    CHECK(lines >= 14);
    std::filesystem::remove(path);
}
