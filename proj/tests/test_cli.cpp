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

#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <sys/wait.h>

namespace fs = std::filesystem;

namespace {

std::string cli() {
    const char* p = std::getenv("SPDEPATH_CLI");
    REQUIRE(p != nullptr);
    return p;
}

std::string configs() {
    const char* p = std::getenv("SPDEPATH_CONFIGS");
    REQUIRE(p != nullptr);
    return p;
}

fs::path scratch(const std::string& name) {
    const auto dir = fs::temp_directory_path() / ("spdepath_cli_" + name);
    fs::remove_all(dir);
    return dir;
}

/// Runs the tool with stdout and stderr captured to files in `dir`.
int run(const std::string& args, const fs::path& dir) {
    fs::create_directories(dir);
    const std::string cmd =
        cli() + " " + args + " >" + (dir / "stdout.txt").string() + " 2>" + (dir / "stderr.txt").string();
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

std::size_t count_lines(const std::string& s) {
    std::size_t n = 0;
    for (char c : s)
        n += c == '\n';
    return n;
}

} // namespace

TEST_CASE("converge writes errors.csv and report.txt") {
    const auto dir = scratch("converge");
    const auto out = dir / "run1";
    CHECK(run("converge --config " + configs() + "/heat_white.cfg --seed 42 --out " + out.string(), dir) == 0);
    CHECK(fs::exists(out / "errors.csv"));
    CHECK(fs::exists(out / "report.txt"));
    CHECK(slurp(out / "errors.csv").rfind("scheme,level,path,sup_error,lp_error,p,n_paths\n", 0) == 0);
    CHECK(slurp(out / "report.txt").find("fitted order") != std::string::npos);
    fs::remove_all(dir);
}

TEST_CASE("missing config file exits 3") {
    const auto dir = scratch("missing");
    CHECK(run("converge --config " + (dir / "absent.cfg").string(), dir) == 3);
    fs::remove_all(dir);
}

TEST_CASE("coeffs table at level 3") {
    const auto dir = scratch("coeffs");
    CHECK(run("coeffs --level 3", dir) == 0);
    const auto text = slurp(dir / "stdout.txt");
    CHECK(count_lines(text) == 15);
    CHECK(text.find("1 1 2 -0.35355339059327379\n") != std::string::npos);
    fs::remove_all(dir);
}

TEST_CASE("unknown flag prints usage and exits 1") {
    const auto dir = scratch("usage");
    CHECK(run("converge --bogus", dir) == 1);
    CHECK(slurp(dir / "stderr.txt").find("Usage") != std::string::npos);
    CHECK(slurp(dir / "stdout.txt").empty());
    CHECK(run("", dir) == 1);
    CHECK(run("converge", dir) == 1);
    fs::remove_all(dir);
}

TEST_CASE("invalid config value exits 1") {
    const auto dir = scratch("invalid");
    fs::create_directories(dir);
    {
        std::ofstream cfg(dir / "bad.cfg");
        cfg << "[discretization]\nlevels = 4\nreference = 2\n";
    }
    CHECK(run("converge --config " + (dir / "bad.cfg").string(), dir) == 1);
    fs::remove_all(dir);
}

TEST_CASE("unwritable output exits 3") {
    const auto dir = scratch("unwritable");
    fs::create_directories(dir);
    {
        std::ofstream blocker(dir / "file");
        blocker << "x";
    }
    CHECK(run("converge --config " + configs() + "/ou.cfg --paths 2 --out " + (dir / "file" / "sub").string(),
              dir) == 3);
    fs::remove_all(dir);
}

TEST_CASE("simulate dumps trajectory and increments") {
    const auto dir = scratch("simulate");
    CHECK(run("simulate --config " + configs() + "/heat_mult.cfg --level 4 --quiet --out " + dir.string(), dir) ==
          0);
    const auto traj = slurp(dir / "trajectory.bin");
    const auto winc = slurp(dir / "increments.bin");
    CHECK(traj.substr(0, 8) == "SPDETRAJ");
    CHECK(winc.substr(0, 8) == "SPDEWINC");
    CHECK(traj.size() == 24 + 8 * 4 * 1001);
    CHECK(winc.size() == 24 + 8 * 512 * 1000);
    CHECK(slurp(dir / "stdout.txt").empty());
    fs::remove_all(dir);
}

TEST_CASE("errors.csv is byte identical across thread counts") {
    const auto dir = scratch("threads");
    const std::string base = "converge --quiet --config " + configs() + "/heat_mult.cfg --paths 4 --seed 5 ";
    CHECK(run(base + "--threads 1 --out " + (dir / "serial").string(), dir) == 0);
    CHECK(run(base + "--threads 3 --out " + (dir / "parallel").string(), dir) == 0);
    const auto a = slurp(dir / "serial" / "errors.csv");
    CHECK_FALSE(a.empty());
    CHECK(a == slurp(dir / "parallel" / "errors.csv"));
    fs::remove_all(dir);
}

TEST_CASE("defect and localize subcommands") {
    const auto dir = scratch("other");
    CHECK(run("defect --config " + configs() + "/defect_spectral.cfg --out " + dir.string(), dir) == 0);
    CHECK(slurp(dir / "stdout.txt").find("lambda0 = 1") != std::string::npos);
    CHECK(fs::exists(dir / "defect.txt"));
    CHECK(run("localize --config " + configs() + "/localize_sin2.cfg --paths 4 --cutoffs 2 8", dir) == 0);
    CHECK(slurp(dir / "stdout.txt").find("agreement up to exit: yes") != std::string::npos);
    fs::remove_all(dir);
}
