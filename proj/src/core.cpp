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

#include "spdepath/core.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <numbers>

namespace spdepath {

TimeGrid::TimeGrid(double horizon, std::size_t steps) : horizon_(horizon), steps_(steps) {
    if (!(horizon > 0.0) || !std::isfinite(horizon))
        throw std::invalid_argument("time grid horizon must be positive and finite");
    if (steps < 1)
        throw std::invalid_argument("time grid needs at least one step");
}

double TimeGrid::node(std::size_t m) const {
    if (m == steps_)
        return horizon_;
    return horizon_ * static_cast<double>(m) / static_cast<double>(steps_);
}

void require_finite(std::span<const double> v, const char* what) {
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (!std::isfinite(v[i]))
            throw NumericalFailure(std::string(what) + ": non-finite entry at index " +
                                   std::to_string(i));
    }
}

double l2_norm(std::span<const double> v) {
    double s = 0.0;
    for (double x : v)
        s += x * x;
    return std::sqrt(s);
}

double resolvent_shift(std::span<const double> eigenvalues) {
    double sup = 0.0;
    for (double l : eigenvalues)
        sup = std::max(sup, l);
    return 1.0 + sup;
}

double fractional_norm(std::span<const double> v, double eta, double lambda0,
                       std::span<const double> eigenvalues) {
    if (eta < 0.0)
        throw std::invalid_argument("fractional_norm: eta must be non-negative");
    if (v.size() > eigenvalues.size())
        throw std::invalid_argument("fractional_norm: more coefficients than eigenvalues");
    for (double l : eigenvalues) {
        if (!(lambda0 > l))
            throw std::invalid_argument("fractional_norm: lambda0 must exceed every eigenvalue");
    }
    double s = 0.0;
    for (std::size_t k = 0; k < v.size(); ++k) {
        const double w = std::pow(lambda0 - eigenvalues[k], eta);
        s += w * w * v[k] * v[k];
    }
    return std::sqrt(s);
}

// Philox ------------------------------------------------------------------

namespace {

constexpr std::uint32_t kPhiloxM0 = 0xD2511F53u;
constexpr std::uint32_t kPhiloxM1 = 0xCD9E8D57u;
constexpr std::uint32_t kPhiloxW0 = 0x9E3779B9u;
constexpr std::uint32_t kPhiloxW1 = 0xBB67AE85u;

inline void mulhilo(std::uint32_t a, std::uint32_t b, std::uint32_t& hi, std::uint32_t& lo) {
    const std::uint64_t p = static_cast<std::uint64_t>(a) * b;
    hi = static_cast<std::uint32_t>(p >> 32);
    lo = static_cast<std::uint32_t>(p);
}

inline std::uint64_t splitmix64(std::uint64_t z) {
    z += 0x9E3779B97F4A7C15ull;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

inline double to_unit_interval(std::uint32_t hi, std::uint32_t lo) {
    const std::uint64_t bits = (static_cast<std::uint64_t>(hi) << 32) | lo;
    // 53 random bits mapped onto (0, 1].
    return (static_cast<double>(bits >> 11) + 1.0) * 0x1.0p-53;
}

} // namespace

std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> ctr,
                                        std::array<std::uint32_t, 2> key) {
    for (int round = 0; round < 10; ++round) {
        if (round > 0) {
            key[0] += kPhiloxW0;
            key[1] += kPhiloxW1;
        }
        std::uint32_t hi0, lo0, hi1, lo1;
        mulhilo(kPhiloxM0, ctr[0], hi0, lo0);
        mulhilo(kPhiloxM1, ctr[2], hi1, lo1);
        ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
    }
    return ctr;
}

NormalStream::NormalStream(const StreamKey& key) : mode_(key.mode), step_(key.step) {
    std::uint64_t h = splitmix64(key.master_seed);
    h = splitmix64(h ^ key.path_index);
    h = splitmix64(h ^ static_cast<std::uint64_t>(key.purpose));
    key_ = {static_cast<std::uint32_t>(h), static_cast<std::uint32_t>(h >> 32)};
}

double NormalStream::uniform_at(std::uint32_t index) const {
    const auto block = philox4x32({mode_, step_, index, 0u}, key_);
    return to_unit_interval(block[0], block[1]);
}

double NormalStream::at(std::uint32_t index) const {
    // One Philox block feeds one Box-Muller pair: even draws take the
    // cosine branch, odd draws the sine branch.
    const auto block = philox4x32({mode_, step_, index / 2u, 0x5350u}, key_);
    const double u1 = to_unit_interval(block[0], block[1]);
    const double u2 = to_unit_interval(block[2], block[3]);
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * std::numbers::pi * u2;
    return (index % 2u == 0u) ? r * std::cos(angle) : r * std::sin(angle);
}

double NormalStream::next() { return at(index_++); }

NormalStream derive_stream(const StreamKey& key) { return NormalStream(key); }

// Binary dumps ------------------------------------------------------------

namespace detail {

void open_for_write(std::ofstream& out, const std::string& path) {
    out.open(path, std::ios::binary | std::ios::trunc);
    if (!out)
        throw std::ios_base::failure("cannot open " + path + " for writing");
}

namespace {
void write_le_u64(std::ostream& out, std::uint64_t v) {
    char bytes[8];
    for (int i = 0; i < 8; ++i)
        bytes[i] = static_cast<char>((v >> (8 * i)) & 0xFFu);
    out.write(bytes, 8);
}

std::uint64_t read_le_u64(std::istream& in) {
    unsigned char bytes[8];
    in.read(reinterpret_cast<char*>(bytes), 8);
    std::uint64_t v = 0;
    for (int i = 7; i >= 0; --i)
        v = (v << 8) | bytes[i];
    return v;
}
} // namespace

void write_binary_header(std::ostream& out, const char* magic, std::size_t rows, std::size_t cols) {
    out.write(magic, 8);
    write_le_u64(out, rows);
    write_le_u64(out, cols);
}

void write_le_double(std::ostream& out, double v) { write_le_u64(out, std::bit_cast<std::uint64_t>(v)); }

BinaryMatrix read_matrix_stream(std::istream& in, const std::string& path) {
    BinaryMatrix m;
    char magic[8];
    in.read(magic, 8);
    if (!in)
        throw std::ios_base::failure("truncated header in " + path);
    m.magic.assign(magic, 8);
    m.rows = read_le_u64(in);
    m.cols = read_le_u64(in);
    m.values.resize(m.rows * m.cols);
    for (double& v : m.values)
        v = std::bit_cast<double>(read_le_u64(in));
    if (!in)
        throw std::ios_base::failure("truncated payload in " + path);
    return m;
}

} // namespace detail

void write_trajectory(const std::string& path, const Trajectory& traj) {
    write_binary_matrix(path, "SPDETRAJ", traj.dimension(), traj.times(),
                        [&](std::size_t k, std::size_t m) { return traj.state(m)[k]; });
}

BinaryMatrix read_binary_matrix(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw std::ios_base::failure("cannot open " + path);
    return detail::read_matrix_stream(in, path);
}

} // namespace spdepath
