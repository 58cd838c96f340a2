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

#include "spdepath/noise.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

namespace spdepath {

std::string to_string(NoiseKind kind) {
    switch (kind) {
    case NoiseKind::cosine_cylindrical:
        return "cosine";
    case NoiseKind::sine_cylindrical:
        return "sine";
    case NoiseKind::q_wiener:
        return "qwiener";
    }
    return "unknown";
}

NoiseKind noise_kind_from_string(const std::string& s) {
    if (s == "cosine")
        return NoiseKind::cosine_cylindrical;
    if (s == "sine")
        return NoiseKind::sine_cylindrical;
    if (s == "qwiener")
        return NoiseKind::q_wiener;
    throw std::invalid_argument("unknown noise kind '" + s + "'");
}

NoiseBasisSpec::NoiseBasisSpec(NoiseKind kind, std::size_t modes, std::vector<double> q)
    : kind_(kind), modes_(modes), q_(std::move(q)) {
    if (modes_ < 1)
        throw std::invalid_argument("noise basis needs at least one mode");
    for (double qj : q_) {
        if (!(qj >= 0.0) || !std::isfinite(qj))
            throw std::invalid_argument("q-wiener eigenvalues must be finite and non-negative");
    }
}

NoiseBasisSpec NoiseBasisSpec::cosine(std::size_t modes) {
    return NoiseBasisSpec(NoiseKind::cosine_cylindrical, modes, {});
}

NoiseBasisSpec NoiseBasisSpec::sine(std::size_t modes) {
    return NoiseBasisSpec(NoiseKind::sine_cylindrical, modes, {});
}

NoiseBasisSpec NoiseBasisSpec::q_wiener(std::vector<double> q) {
    const std::size_t n = q.size();
    return NoiseBasisSpec(NoiseKind::q_wiener, n, std::move(q));
}

NoiseBasisSpec NoiseBasisSpec::power_decay(std::size_t modes, double rho) {
    std::vector<double> q(modes);
    for (std::size_t j = 0; j < modes; ++j)
        q[j] = std::pow(static_cast<double>(j + 1), -2.0 * rho);
    return q_wiener(std::move(q));
}

double NoiseBasisSpec::weight(std::size_t l) const {
    if (kind_ != NoiseKind::q_wiener)
        return 1.0;
    return std::sqrt(q_[l - 1]);
}

double NoiseBasisSpec::basis_value(std::size_t l, double x) const {
    const double arg = static_cast<double>(l) * std::numbers::pi * x;
    return std::numbers::sqrt2 * (kind_ == NoiseKind::cosine_cylindrical ? std::cos(arg) : std::sin(arg));
}

double NoiseBasisSpec::hat_moment(std::size_t l, double node, double h) const {
    // int hat(x) trig(w x) dx = trig(w node) * 4 sin^2(w h / 2) / (h w^2)
    const double w = static_cast<double>(l) * std::numbers::pi;
    const double s = std::sin(0.5 * w * h);
    const double factor = 4.0 * s * s / (h * w * w);
    const double trig = kind_ == NoiseKind::cosine_cylindrical ? std::cos(w * node) : std::sin(w * node);
    return std::numbers::sqrt2 * trig * factor;
}

double NoiseBasisSpec::trace() const {
    if (kind_ != NoiseKind::q_wiener)
        return static_cast<double>(modes_);
    double s = 0.0;
    for (double qj : q_)
        s += qj;
    return s;
}

IncrementTable::IncrementTable(std::size_t modes, TimeGrid grid, std::uint64_t path_index,
                               IncrementMode mode)
    : modes_(modes), grid_(grid), path_(path_index), mode_(mode), data_(modes * grid.steps(), 0.0) {}

namespace {

void fill_direct(IncrementTable& table, const StreamKey& key, double dt) {
    const double scale = std::sqrt(dt);
    for (std::size_t m = 0; m < table.steps(); ++m) {
        for (std::size_t l = 0; l < table.modes(); ++l) {
            StreamKey k = key;
            k.purpose = StreamPurpose::increment;
            k.mode = static_cast<std::uint32_t>(l + 1);
            k.step = static_cast<std::uint32_t>(m + 1);
            table.at(l, m) = scale * NormalStream(k).at(0);
        }
    }
}

} // namespace

IncrementTable sample_increments(const NoiseBasisSpec& spec, const TimeGrid& grid,
                                 const StreamKey& key, const IncrementOptions& options) {
    if (grid.steps() > std::numeric_limits<std::uint32_t>::max() - 1 ||
        spec.modes() > std::numeric_limits<std::uint32_t>::max() - 1)
        throw std::invalid_argument("increment table too large for 32-bit stream counters");

    IncrementTable table(spec.modes(), grid, key.path_index, options.mode);
    if (options.mode == IncrementMode::independent) {
        fill_direct(table, key, grid.dt());
        return table;
    }

    const std::size_t finest = options.finest_steps == 0 ? grid.steps() : options.finest_steps;
    std::size_t levels = 0;
    for (std::size_t s = grid.steps(); s < finest; s *= 2)
        ++levels;
    if (finest % grid.steps() != 0 || (grid.steps() << levels) != finest)
        throw std::invalid_argument("bridge mode: finest_steps must be steps * 2^r");

    IncrementTable fine(spec.modes(), TimeGrid(grid.horizon(), finest), key.path_index,
                        IncrementMode::bridge);
    fill_direct(fine, key, fine.grid().dt());
    for (std::size_t r = 0; r < levels; ++r) {
        const std::size_t coarse_steps = fine.steps() / 2;
        IncrementTable coarse(spec.modes(), TimeGrid(grid.horizon(), coarse_steps), key.path_index,
                              IncrementMode::bridge);
        for (std::size_t m = 0; m < coarse_steps; ++m)
            for (std::size_t l = 0; l < spec.modes(); ++l)
                coarse.at(l, m) = fine.at(l, 2 * m) + fine.at(l, 2 * m + 1);
        fine = std::move(coarse);
    }
    return IncrementTable(std::move(fine));
}

bool check_refinement_consistency(const IncrementTable& coarse, const IncrementTable& fine) {
    if (coarse.grid().horizon() != fine.grid().horizon())
        throw std::invalid_argument("refinement check: tables cover different horizons");
    if (coarse.mode() != IncrementMode::bridge || fine.mode() != IncrementMode::bridge)
        return false;
    if (fine.steps() != 2 * coarse.steps() || fine.modes() != coarse.modes())
        return false;
    for (std::size_t m = 0; m < coarse.steps(); ++m)
        for (std::size_t l = 0; l < coarse.modes(); ++l)
            if (coarse.at(l, m) != fine.at(l, 2 * m) + fine.at(l, 2 * m + 1))
                return false;
    return true;
}

void write_increments(const std::string& path, const IncrementTable& table) {
    write_binary_matrix(path, "SPDEWINC", table.modes(), table.steps(),
                        [&](std::size_t l, std::size_t m) { return table.at(l, m); });
}

IncrementTable read_increments(const std::string& path, double horizon) {
    const BinaryMatrix raw = read_binary_matrix(path);
    if (raw.magic != "SPDEWINC")
        throw std::runtime_error(path + ": not an increment table");
    IncrementTable table(raw.rows, TimeGrid(horizon, raw.cols), 0, IncrementMode::independent);
    for (std::size_t l = 0; l < raw.rows; ++l)
        for (std::size_t m = 0; m < raw.cols; ++m)
            table.at(l, m) = raw.values[l * raw.cols + m];
    return table;
}

} // namespace spdepath
