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

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace spdepath {

/// Which orthonormal family of L^2(0,1) carries the cylindrical noise.
///   cosine_cylindrical: h_l = sqrt(2) cos(l pi x), unit weights
///   sine_cylindrical:   h_l = sqrt(2) sin(l pi x), unit weights
///   q_wiener:           h_l = sqrt(2) sin(l pi x), weights sqrt(q_l)
enum class NoiseKind { cosine_cylindrical, sine_cylindrical, q_wiener };

std::string to_string(NoiseKind kind);
NoiseKind noise_kind_from_string(const std::string& s);

class NoiseBasisSpec {
public:
    static NoiseBasisSpec cosine(std::size_t modes);
    static NoiseBasisSpec sine(std::size_t modes);
    static NoiseBasisSpec q_wiener(std::vector<double> q);
    /// q_j = j^{-2 rho}, j = 1..modes.
    static NoiseBasisSpec power_decay(std::size_t modes, double rho);

    NoiseKind kind() const { return kind_; }
    std::size_t modes() const { return modes_; }
    /// True when h_l coincides with the sine eigenbasis of the Dirichlet
    /// Laplacian, so additive noise acts mode by mode.
    bool is_sine_basis() const { return kind_ != NoiseKind::cosine_cylindrical; }

    /// sqrt(q_l) for q-wiener, 1 otherwise. 1-based mode index.
    double weight(std::size_t l) const;
    /// h_l(x), 1-based mode index.
    double basis_value(std::size_t l, double x) const;
    /// Exact integral of h_l against the hat function centred at `node`
    /// with half-width `h`.
    double hat_moment(std::size_t l, double node, double h) const;
    /// Sum of squared weights over the configured modes.
    double trace() const;

private:
    NoiseBasisSpec(NoiseKind kind, std::size_t modes, std::vector<double> q);

    NoiseKind kind_;
    std::size_t modes_;
    std::vector<double> q_;
};

/// How increments on a grid relate to increments on finer grids.
///   independent: every (mode, step) is drawn directly at the grid's dt.
///   bridge: draws live on a dyadic refinement with `finest_steps` steps and
///           coarser increments are pairwise sums of finer ones, so a table
///           over M steps is exactly the aggregate of the table over 2M steps.
enum class IncrementMode { independent, bridge };

struct IncrementOptions {
    IncrementMode mode = IncrementMode::independent;
    std::size_t finest_steps = 0; // bridge mode only; steps * 2^r
};

/// Brownian increments dW[l][m] for modes l = 1..J and steps m = 1..M.
/// Stored step-major so that one time step reads a contiguous row.
class IncrementTable {
public:
    IncrementTable(std::size_t modes, TimeGrid grid, std::uint64_t path_index, IncrementMode mode);

    std::size_t modes() const { return modes_; }
    std::size_t steps() const { return grid_.steps(); }
    const TimeGrid& grid() const { return grid_; }
    std::uint64_t path_index() const { return path_; }
    IncrementMode mode() const { return mode_; }

    /// 0-based mode and step.
    double at(std::size_t mode, std::size_t step) const { return data_[step * modes_ + mode]; }
    double& at(std::size_t mode, std::size_t step) { return data_[step * modes_ + mode]; }
    /// All modes for 0-based step m.
    std::span<const double> step(std::size_t m) const {
        return {data_.data() + m * modes_, modes_};
    }

private:
    std::size_t modes_;
    TimeGrid grid_;
    std::uint64_t path_;
    IncrementMode mode_;
    std::vector<double> data_;
};

/// Entry (l, m) depends only on (master_seed, path, l, m) and, in bridge
/// mode, on finest_steps; never on J.
IncrementTable sample_increments(const NoiseBasisSpec& spec, const TimeGrid& grid,
                                 const StreamKey& key, const IncrementOptions& options = {});

/// True iff both tables were generated in bridge mode and every coarse
/// increment equals the sum of its two fine halves exactly.
bool check_refinement_consistency(const IncrementTable& coarse, const IncrementTable& fine);

/// "SPDEWINC" dump, row-major [mode][step].
void write_increments(const std::string& path, const IncrementTable& table);
IncrementTable read_increments(const std::string& path, double horizon);

} // namespace spdepath
