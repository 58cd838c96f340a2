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

#include <array>
#include <cstdint>
#include <cstddef>
#include <fstream>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace spdepath {

/// Raised when a simulated state stops being finite. Harness code treats
/// this as a path exclusion rather than a program error.
class NumericalFailure : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Uniform grid 0 = t_0 < t_1 < ... < t_M = T.
class TimeGrid {
public:
    TimeGrid(double horizon, std::size_t steps);

    double horizon() const { return horizon_; }
    std::size_t steps() const { return steps_; }
    double dt() const { return horizon_ / static_cast<double>(steps_); }

    /// t_m; node(steps()) is exactly the horizon.
    double node(std::size_t m) const;

    bool operator==(const TimeGrid&) const = default;

private:
    double horizon_;
    std::size_t steps_;
};

/// Galerkin coefficients (u_1, ..., u_n) in the orthonormal sine basis.
using ModeVector = std::vector<double>;

/// Throws NumericalFailure naming `what` if any entry is NaN or infinite.
void require_finite(std::span<const double> v, const char* what);

double l2_norm(std::span<const double> v);

/// Resolvent shift used throughout: 1 + max(0, sup_k lambda_k).
double resolvent_shift(std::span<const double> eigenvalues);

/// ( sum_k |lambda0 - lambda_k|^{2 eta} v_k^2 )^{1/2}, the norm of the
/// fractional domain space of order eta for a diagonal operator.
double fractional_norm(std::span<const double> v, double eta, double lambda0,
                       std::span<const double> eigenvalues);

/// States at every grid node, stored time-major: state(m) is contiguous.
class Trajectory {
public:
    Trajectory() = default;
    Trajectory(std::size_t dimension, std::size_t times)
        : dim_(dimension), times_(times), data_(dimension * times, 0.0) {}

    std::size_t dimension() const { return dim_; }
    std::size_t times() const { return times_; }
    std::span<double> state(std::size_t m) { return {data_.data() + m * dim_, dim_}; }
    std::span<const double> state(std::size_t m) const { return {data_.data() + m * dim_, dim_}; }

private:
    std::size_t dim_ = 0;
    std::size_t times_ = 0;
    std::vector<double> data_;
};

/// "SPDETRAJ" dump, row-major [component][time], same layout as the
/// increment dump.
void write_trajectory(const std::string& path, const Trajectory& traj);

// Stream derivation -------------------------------------------------------

enum class StreamPurpose : std::uint32_t {
    increment = 1,
    initial_condition = 2,
    test = 3,
};

/// Full coordinate of a random draw source. Two keys that compare equal
/// always yield the same draws.
struct StreamKey {
    std::uint64_t master_seed = 0;
    std::uint64_t path_index = 0;
    StreamPurpose purpose = StreamPurpose::increment;
    std::uint32_t mode = 0;
    std::uint32_t step = 0;

    bool operator==(const StreamKey&) const = default;
};

/// Philox4x32-10 block function (Salmon et al., SC'11).
std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> counter,
                                        std::array<std::uint32_t, 2> key);

/// Counter-based standard normal source. The i-th draw is a pure function
/// of (key, i); there is no hidden sequential state beyond the draw index.
class NormalStream {
public:
    explicit NormalStream(const StreamKey& key);

    double next();
    /// Draw i without advancing.
    double at(std::uint32_t index) const;
    /// Uniform on (0,1], draw i.
    double uniform_at(std::uint32_t index) const;

private:
    std::array<std::uint32_t, 2> key_;
    std::uint32_t mode_;
    std::uint32_t step_;
    std::uint32_t index_ = 0;
};

NormalStream derive_stream(const StreamKey& key);

// Binary dumps ------------------------------------------------------------

/// Writes an 8-byte magic, then rows and cols as little-endian int64,
/// then rows*cols little-endian doubles, row-major. `at(r, c)` supplies
/// the values so callers can store data in any layout.
template <typename Accessor>
void write_binary_matrix(const std::string& path, const char (&magic)[9], std::size_t rows,
                         std::size_t cols, Accessor at);

struct BinaryMatrix {
    std::string magic;
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> values; // row-major
};

BinaryMatrix read_binary_matrix(const std::string& path);

namespace detail {
void write_binary_header(std::ostream& out, const char* magic, std::size_t rows, std::size_t cols);
void write_le_double(std::ostream& out, double v);
void open_for_write(std::ofstream& out, const std::string& path);
} // namespace detail

template <typename Accessor>
void write_binary_matrix(const std::string& path, const char (&magic)[9], std::size_t rows,
                         std::size_t cols, Accessor at) {
    std::ofstream out;
    detail::open_for_write(out, path);
    detail::write_binary_header(out, magic, rows, cols);
    for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t c = 0; c < cols; ++c)
            detail::write_le_double(out, at(r, c));
    if (!out)
        throw std::ios_base::failure("failed writing " + path);
}

} // namespace spdepath
