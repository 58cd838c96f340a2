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

#include "spdepath/config.hpp"

#include <doctest.h>

#include <filesystem>
#include <fstream>

using namespace spdepath;

namespace {

const char* kBasic = R"(# comment line
[equation]
operator = heat
drift = sin_u2
diffusion = identity
sigma = 0.5
noise = cosine
noise_modes = 32   # trailing comment
initial = modes4

[discretization]
scheme = spectral
levels = 4, 8, 16
horizon = 0.5
steps = 200

[experiment]
paths = 8
p = 6
seed = 17
eta = 0.2
cutoffs = 2, 4
)";

} // namespace

TEST_CASE("parse a complete config") {
    const auto cfg = parse_config(kBasic);
    CHECK(cfg.equation.drift == "sin_u2");
    CHECK(cfg.equation.sigma == 0.5);
    CHECK(cfg.equation.noise_modes == 32);
    CHECK(cfg.discretization.levels == std::vector<std::size_t>{4, 8, 16});
    CHECK(cfg.reference_level() == 64);
    CHECK(cfg.grid() == TimeGrid(0.5, 200));
    CHECK(cfg.experiment.paths == 8);
    CHECK(cfg.experiment.p == 6.0);
    CHECK(cfg.experiment.seed == 17);
    CHECK(cfg.experiment.cutoffs == std::vector<double>{2.0, 4.0});
    CHECK(cfg.predicted_rate() == doctest::Approx(0.4));
    const auto run = cfg.galerkin_run(8);
    CHECK(run.level == 8);
    CHECK(run.diffusion.form == DiffusionForm::linear);
    CHECK(run.diffusion.basis.modes() == 32);
}

TEST_CASE("format round trip") {
    const auto cfg = parse_config(kBasic);
    const auto again = parse_config(format_config(cfg));
    CHECK(format_config(again) == format_config(cfg));
}

TEST_CASE("parse errors") {
    CHECK_THROWS_AS(parse_config("[equation]\nbogus = 1\n[discretization]\nlevels = 4\n"), ConfigError);
    CHECK_THROWS_AS(parse_config("[nonsense]\n"), ConfigError);
    CHECK_THROWS_AS(parse_config("levels = 4\n"), ConfigError);
    CHECK_THROWS_AS(parse_config("[discretization]\nlevels = 4\nsteps = many\n"), ConfigError);
    CHECK_THROWS_AS(parse_config("[discretization]\nlevels 4\n"), ConfigError);
    try {
        parse_config("[equation]\n\nbogus = 1\n");
        FAIL("expected an error");
    } catch (const ConfigError& e) {
        CHECK(std::string(e.what()).find("line 3") != std::string::npos);
    }
}

TEST_CASE("validation") {
    auto cfg = parse_config(kBasic);
    cfg.discretization.reference = 16;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg = parse_config(kBasic);
    cfg.experiment.p = 2.0;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg = parse_config(kBasic);
    cfg.experiment.paths = 0;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg = parse_config(kBasic);
    cfg.equation.theta_G = -0.6;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg = parse_config(kBasic);
    cfg.equation.drift = "cubic";
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg = parse_config(kBasic);
    cfg.discretization.scheme = Scheme::fem;
    cfg.discretization.levels = {8, 12};
    cfg.discretization.reference = 32;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
}

TEST_CASE("rate constraint warns but does not reject") {
    auto cfg = parse_config(kBasic);
    cfg.experiment.eta = 0.9;
    CHECK_NOTHROW(cfg.validate());
    CHECK_FALSE(cfg.rate_warnings().empty());
    cfg.experiment.eta = 0.05;
    cfg.equation.theta_G = 0.4;
    CHECK(cfg.rate_warnings().empty());
}

TEST_CASE("missing file is an io error") {
    CHECK_THROWS_AS(load_config("/nonexistent/spdepath.cfg"), ConfigIoError);
    const auto path = (std::filesystem::temp_directory_path() / "spdepath_cfg_test.cfg").string();
    {
        std::ofstream out(path);
        out << kBasic;
    }
    CHECK(load_config(path).experiment.seed == 17);
    std::filesystem::remove(path);
}

TEST_CASE("fem run from config") {
    auto cfg = parse_config("[equation]\ncoefficient = smooth\ndiffusion = constant\nnoise = qwiener\n"
                            "noise_modes = 8\nnoise_decay = 1.5\n[discretization]\nscheme = fem\nlevels = 4, 8\n"
                            "reference = 32\ntheta = 0.5\n[experiment]\neta = 0.6\n");
    const auto run = cfg.fem_run(8);
    CHECK(run.mesh.elements() == 8);
    CHECK(run.theta == 0.5);
    CHECK(run.a(0.5) == doctest::Approx(1.5));
    CHECK(run.diffusion.basis.kind() == NoiseKind::q_wiener);
    CHECK(cfg.predicted_rate() == doctest::Approx(1.2));
}
