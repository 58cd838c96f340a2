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

#include <doctest.h>

#include <cmath>
#include <cstring>
#include <numbers>

using namespace spdepath;

TEST_CASE("drift catalog") {
    const std::vector<double> u{1.0, -2.0, 3.0};
    CHECK(apply_drift(zero_drift(), 0.0, u) == std::vector<double>{0.0, 0.0, 0.0});
    CHECK(apply_drift(identity_drift(), 0.0, u) == u);
    CHECK(apply_drift(affine_drift(2.0, 1.0), 0.0, u) == std::vector<double>{3.0, -3.0, 7.0});
    const std::vector<double> v{0.0, std::sqrt(std::numbers::pi / 2)};
    const auto s = apply_drift(sin_square_drift(), 0.0, v);
    CHECK(s[0] == 0.0);
    CHECK(s[1] == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(sin_square_drift().lipschitz == LipschitzKind::local);
    CHECK(make_drift("sin_u2").label == "sin_u2");
    CHECK(make_drift("affine", 2.0, 1.0).f(0.0, 1.0) == 3.0);
    CHECK_THROWS(make_drift("cubic"));
}

TEST_CASE("diffusion catalog") {
    const auto basis = NoiseBasisSpec::cosine(4);
    const std::vector<double> u{2.0, -1.0};
    CHECK(apply_diffusion(constant_diffusion(basis, 0.5), 0.0, u) == std::vector<double>{0.5, 0.5});
    CHECK(apply_diffusion(identity_diffusion(basis, 3.0), 0.0, u) == std::vector<double>{6.0, -3.0});
    CHECK(apply_diffusion(bounded_diffusion(basis), 0.0, u) == std::vector<double>{0.4, -0.5});
    CHECK(apply_diffusion(zero_diffusion(basis), 0.0, u) == std::vector<double>{0.0, 0.0});
    CHECK(identity_diffusion(basis).form == DiffusionForm::linear);
    CHECK(constant_diffusion(basis, 1.0).form == DiffusionForm::constant);
    CHECK(make_diffusion("bounded", basis).form == DiffusionForm::general);
    CHECK_THROWS(make_diffusion("square", basis));
}

TEST_CASE("nan input rejected") {
    const std::vector<double> u{1.0, std::nan("")};
    CHECK_THROWS_AS(apply_drift(identity_drift(), 0.0, u), std::domain_error);
    CHECK_THROWS_AS(apply_diffusion(identity_diffusion(NoiseBasisSpec::sine(1)), 0.0, u), std::domain_error);
}

TEST_CASE("cutoff scale") {
    const CutoffLevel m(2.0);
    const auto F = identity_drift();
    const auto G = identity_diffusion(NoiseBasisSpec::sine(1));
    CHECK(cutoff(F, G, m, 1.0).scale == 1.0);
    CHECK_FALSE(cutoff(F, G, m, 1.0).active());
    CHECK(cutoff(F, G, m, 4.0).scale == 0.5);
    CHECK(cutoff(F, G, m, 0.0).scale == 1.0);
    CHECK(cutoff(F, G, m, 2.0).scale == 1.0);
    CHECK_THROWS(CutoffLevel(0.0));
    CHECK_THROWS(CutoffLevel(-1.0));
}

TEST_CASE("cutoff identity inside the ball is bitwise") {
    const std::vector<double> x{0.1, -0.7, 0.3333333333333333};
    const auto ctx = cutoff_scale(CutoffLevel(5.0), 0.8);
    const auto y = ctx.apply(x);
    CHECK(std::memcmp(x.data(), y.data(), x.size() * sizeof(double)) == 0);
    const auto f = apply_drift(sin_square_drift(), 0.0, y);
    const auto f_raw = apply_drift(sin_square_drift(), 0.0, x);
    CHECK(std::memcmp(f.data(), f_raw.data(), f.size() * sizeof(double)) == 0);
}

TEST_CASE("cutoff bounds the scaled norm") {
    for (double norm : {1.5, 10.0, 1e6}) {
        std::vector<double> x{norm, 0.0};
        const auto ctx = cutoff_scale(CutoffLevel(1.3), norm);
        const auto y = ctx.apply(x);
        CHECK(std::hypot(y[0], y[1]) <= std::nextafter(1.3, 2.0));
    }
}

TEST_CASE("first exit step") {
    const CutoffLevel one(1.0);
    std::vector<double> below{0.1, 0.5, 0.99};
    CHECK_FALSE(first_exit_step(below, one).has_value());
    std::vector<double> crossing{0.1, 0.9, 1.2, 0.8};
    CHECK(first_exit_step(crossing, one) == 2u);
    std::vector<double> immediate{1.0, 0.2};
    CHECK(first_exit_step(immediate, one) == 0u);
}
