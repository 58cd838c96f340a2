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

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <numbers>
#include <sstream>

namespace spdepath {

std::string to_string(Scheme s) { return s == Scheme::spectral ? "spectral" : "fem"; }

namespace {

std::string trim(const std::string& s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string::npos)
        return {};
    const auto last = s.find_last_not_of(" \t\r");
    return s.substr(first, last - first + 1);
}

double to_double(const std::string& v, const std::string& key) {
    try {
        std::size_t used = 0;
        const double d = std::stod(v, &used);
        if (used != v.size())
            throw std::invalid_argument(v);
        return d;
    } catch (const std::exception&) {
        throw ConfigError("'" + key + "': expected a number, got '" + v + "'");
    }
}

std::uint64_t to_u64(const std::string& v, const std::string& key) {
    std::uint64_t out = 0;
    const auto res = std::from_chars(v.data(), v.data() + v.size(), out);
    if (res.ec != std::errc() || res.ptr != v.data() + v.size())
        throw ConfigError("'" + key + "': expected a non-negative integer, got '" + v + "'");
    return out;
}

std::vector<std::string> split_list(const std::string& v) {
    std::vector<std::string> out;
    std::stringstream ss(v);
    std::string item;
    while (std::getline(ss, item, ','))
        if (auto t = trim(item); !t.empty())
            out.push_back(t);
    return out;
}

using Setter = std::function<void(ExperimentConfig&, const std::string&, const std::string&)>;

template <typename Field>
Setter text(Field field) {
    return [field](ExperimentConfig& c, const std::string& v, const std::string&) { field(c) = v; };
}
template <typename Field>
Setter real(Field field) {
    return [field](ExperimentConfig& c, const std::string& v, const std::string& k) { field(c) = to_double(v, k); };
}
template <typename Field>
Setter count(Field field) {
    return [field](ExperimentConfig& c, const std::string& v, const std::string& k) {
        field(c) = static_cast<std::size_t>(to_u64(v, k));
    };
}

const std::map<std::string, std::map<std::string, Setter>>& setters() {
    using C = ExperimentConfig;
    static const std::map<std::string, std::map<std::string, Setter>> table = {
        {"equation",
         {
             {"operator", text([](C& c) -> auto& { return c.equation.op; })},
             {"growth_constant", real([](C& c) -> auto& { return c.equation.op_c; })},
             {"growth_exponent", real([](C& c) -> auto& { return c.equation.op_alpha; })},
             {"coefficient", text([](C& c) -> auto& { return c.equation.coefficient; })},
             {"drift", text([](C& c) -> auto& { return c.equation.drift; })},
             {"drift_a", real([](C& c) -> auto& { return c.equation.drift_a; })},
             {"drift_b", real([](C& c) -> auto& { return c.equation.drift_b; })},
             {"theta_F", real([](C& c) -> auto& { return c.equation.theta_F; })},
             {"diffusion", text([](C& c) -> auto& { return c.equation.diffusion; })},
             {"sigma", real([](C& c) -> auto& { return c.equation.sigma; })},
             {"theta_G", real([](C& c) -> auto& { return c.equation.theta_G; })},
             {"noise", text([](C& c) -> auto& { return c.equation.noise; })},
             {"noise_modes", count([](C& c) -> auto& { return c.equation.noise_modes; })},
             {"noise_decay", real([](C& c) -> auto& { return c.equation.noise_decay; })},
             {"initial", text([](C& c) -> auto& { return c.equation.initial; })},
             {"initial_amplitude", real([](C& c) -> auto& { return c.equation.initial_amplitude; })},
         }},
        {"discretization",
         {
             {"scheme",
              [](C& c, const std::string& v, const std::string& k) {
                  if (v == "spectral")
                      c.discretization.scheme = Scheme::spectral;
                  else if (v == "fem")
                      c.discretization.scheme = Scheme::fem;
                  else
                      throw ConfigError("'" + k + "': expected spectral or fem, got '" + v + "'");
              }},
             {"levels",
              [](C& c, const std::string& v, const std::string& k) {
                  c.discretization.levels.clear();
                  for (const auto& item : split_list(v))
                      c.discretization.levels.push_back(static_cast<std::size_t>(to_u64(item, k)));
              }},
             {"reference", count([](C& c) -> auto& { return c.discretization.reference; })},
             {"reference_mode",
              [](C& c, const std::string& v, const std::string& k) {
                  if (v == "self")
                      c.discretization.fem_reference = FemReference::self;
                  else if (v == "spectral")
                      c.discretization.fem_reference = FemReference::spectral;
                  else
                      throw ConfigError("'" + k + "': expected self or spectral, got '" + v + "'");
              }},
             {"horizon", real([](C& c) -> auto& { return c.discretization.horizon; })},
             {"steps", count([](C& c) -> auto& { return c.discretization.steps; })},
             {"stepper",
              [](C& c, const std::string& v, const std::string&) {
                  try {
                      c.discretization.stepper = spectral_stepper_from_string(v);
                  } catch (const std::invalid_argument& e) {
                      throw ConfigError(e.what());
                  }
              }},
             {"theta", real([](C& c) -> auto& { return c.discretization.theta; })},
             {"quadrature", count([](C& c) -> auto& { return c.discretization.quadrature; })},
             {"increments",
              [](C& c, const std::string& v, const std::string& k) {
                  if (v == "independent")
                      c.discretization.increments = IncrementMode::independent;
                  else if (v == "bridge")
                      c.discretization.increments = IncrementMode::bridge;
                  else
                      throw ConfigError("'" + k + "': expected independent or bridge, got '" + v + "'");
              }},
             {"finest_steps", count([](C& c) -> auto& { return c.discretization.finest_steps; })},
         }},
        {"experiment",
         {
             {"paths", count([](C& c) -> auto& { return c.experiment.paths; })},
             {"p", real([](C& c) -> auto& { return c.experiment.p; })},
             {"seed",
              [](C& c, const std::string& v, const std::string& k) { c.experiment.seed = to_u64(v, k); }},
             {"eta", real([](C& c) -> auto& { return c.experiment.eta; })},
             {"cutoffs",
              [](C& c, const std::string& v, const std::string& k) {
                  c.experiment.cutoffs.clear();
                  for (const auto& item : split_list(v))
                      c.experiment.cutoffs.push_back(to_double(item, k));
              }},
             {"deltas",
              [](C& c, const std::string& v, const std::string& k) {
                  c.experiment.deltas.clear();
                  for (const auto& item : split_list(v))
                      c.experiment.deltas.push_back(to_double(item, k));
              }},
             {"threads", count([](C& c) -> auto& { return c.experiment.threads; })},
         }},
    };
    return table;
}

} // namespace

ExperimentConfig parse_config(const std::string& text) {
    ExperimentConfig cfg;
    std::istringstream in(text);
    std::string line;
    std::string section;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (const auto hash = line.find('#'); hash != std::string::npos)
            line.erase(hash);
        line = trim(line);
        if (line.empty())
            continue;
        const std::string where = "line " + std::to_string(lineno) + ": ";
        if (line.front() == '[') {
            if (line.back() != ']')
                throw ConfigError(where + "unterminated section header");
            section = trim(line.substr(1, line.size() - 2));
            if (!setters().contains(section))
                throw ConfigError(where + "unknown section [" + section + "]");
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError(where + "expected key = value");
        if (section.empty())
            throw ConfigError(where + "key outside of any section");
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        const auto& keys = setters().at(section);
        const auto it = keys.find(key);
        if (it == keys.end())
            throw ConfigError(where + "unknown key '" + key + "' in [" + section + "]");
        try {
            it->second(cfg, value, key);
        } catch (const ConfigError& e) {
            throw ConfigError(where + e.what());
        }
    }
    cfg.validate();
    return cfg;
}

ExperimentConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in)
        throw ConfigIoError("cannot read config file '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str());
}

std::size_t ExperimentConfig::reference_level() const {
    if (discretization.reference != 0)
        return discretization.reference;
    if (discretization.levels.empty())
        return 0;
    return 4 * *std::max_element(discretization.levels.begin(), discretization.levels.end());
}

TimeGrid ExperimentConfig::grid() const { return TimeGrid(discretization.horizon, discretization.steps); }

SpectralOperator ExperimentConfig::spectral_operator() const {
    if (equation.op == "heat")
        return SpectralOperator::heat();
    if (equation.op == "power")
        return SpectralOperator(equation.op_c, equation.op_alpha);
    throw ConfigError("unknown operator '" + equation.op + "'");
}

NoiseBasisSpec ExperimentConfig::noise_basis() const {
    switch (noise_kind_from_string(equation.noise)) {
    case NoiseKind::cosine_cylindrical:
        return NoiseBasisSpec::cosine(equation.noise_modes);
    case NoiseKind::sine_cylindrical:
        return NoiseBasisSpec::sine(equation.noise_modes);
    case NoiseKind::q_wiener:
        return NoiseBasisSpec::power_decay(equation.noise_modes, equation.noise_decay);
    }
    throw ConfigError("unknown noise kind");
}

DriftSpec ExperimentConfig::drift() const {
    DriftSpec d = make_drift(equation.drift, equation.drift_a, equation.drift_b);
    d.theta_F = equation.theta_F;
    return d;
}

DiffusionSpec ExperimentConfig::diffusion() const {
    DiffusionSpec g = make_diffusion(equation.diffusion, noise_basis(), equation.sigma);
    g.theta_G = equation.theta_G;
    return g;
}

InitialCondition ExperimentConfig::initial_condition() const {
    return make_initial_condition(equation.initial, equation.initial_amplitude);
}

Coefficient ExperimentConfig::coefficient() const {
    if (equation.coefficient == "one")
        return [](double) { return 1.0; };
    if (equation.coefficient == "smooth")
        return [](double x) { return 1.0 + 0.5 * std::sin(std::numbers::pi * x); };
    throw ConfigError("unknown coefficient '" + equation.coefficient + "'");
}

IncrementOptions ExperimentConfig::increment_options() const {
    return IncrementOptions{discretization.increments, discretization.finest_steps};
}

GalerkinRun ExperimentConfig::galerkin_run(std::size_t level) const {
    GalerkinRun run;
    run.op = spectral_operator();
    run.level = level;
    run.drift = drift();
    run.diffusion = diffusion();
    run.grid = grid();
    run.initial = initial_condition().modes(level);
    run.quadrature_nodes = discretization.quadrature;
    run.stepper = discretization.stepper;
    return run;
}

FemRun ExperimentConfig::fem_run(std::size_t elements) const {
    FemRun run;
    run.mesh = Mesh1D(elements);
    run.a = coefficient();
    run.drift = drift();
    run.diffusion = diffusion();
    run.grid = grid();
    run.initial = initial_condition().value;
    run.theta = discretization.theta;
    return run;
}

double ExperimentConfig::predicted_rate() const {
    const double alpha = discretization.scheme == Scheme::fem ? 2.0 : spectral_operator().alpha();
    return alpha * experiment.eta;
}

std::vector<std::string> ExperimentConfig::rate_warnings() const {
    std::vector<std::string> out;
    const double alpha = discretization.scheme == Scheme::fem ? 2.0 : spectral_operator().alpha();
    const double p = experiment.p;
    const double eta = experiment.eta;
    const double lhs = eta + 1.0 / (alpha * p);
    const double rhs = std::min(1.0 + equation.theta_F, 0.5 + equation.theta_G - 1.0 / p);
    if (!(lhs < rhs)) {
        std::ostringstream msg;
        msg << "eta + 1/(alpha p) = " << lhs << " is not below min(1 + theta_F, 1/2 + theta_G - 1/p) = " << rhs
            << "; the predicted rate is outside the proven range for p = " << p;
        out.push_back(msg.str());
    }
    if (discretization.scheme == Scheme::fem && eta < 0.5)
        out.push_back("finite element rates are only covered for eta >= 1/2");
    return out;
}

void ExperimentConfig::validate() const {
    const auto& d = discretization;
    if (d.levels.empty())
        throw ConfigError("[discretization] levels must list at least one level");
    for (std::size_t l : d.levels) {
        if (l < 1 || (d.scheme == Scheme::fem && l < 2))
            throw ConfigError("levels must be >= 1 (spectral) or >= 2 (fem)");
    }
    const std::size_t maxl = *std::max_element(d.levels.begin(), d.levels.end());
    if (reference_level() <= maxl)
        throw ConfigError("reference level must exceed every tested level");
    if (d.scheme == Scheme::fem && d.fem_reference == FemReference::self) {
        for (std::size_t l : d.levels)
            if (reference_level() % l != 0)
                throw ConfigError("fem self-reference mesh must be a multiple of every tested mesh");
    }
    if (d.steps < 1 || !(d.horizon > 0.0))
        throw ConfigError("time grid needs steps >= 1 and horizon > 0");
    if (!(d.theta >= 0.5 && d.theta <= 1.0))
        throw ConfigError("theta must lie in [1/2, 1]");
    if (experiment.paths < 1)
        throw ConfigError("paths must be at least 1");
    if (!(experiment.p > 2.0))
        throw ConfigError("moment order p must exceed 2");
    if (!(experiment.eta >= 0.0 && experiment.eta <= 1.0))
        throw ConfigError("eta must lie in [0, 1]");
    if (!(equation.theta_F > -1.0))
        throw ConfigError("theta_F must exceed -1");
    if (!(equation.theta_G > -0.5))
        throw ConfigError("theta_G must exceed -1/2");
    if (equation.noise_modes < 1)
        throw ConfigError("noise_modes must be at least 1");
    for (double m : experiment.cutoffs)
        if (!(m > 0.0))
            throw ConfigError("cutoff levels must be positive");
    for (double delta : experiment.deltas)
        if (!(delta >= 0.0 && delta <= 1.0))
            throw ConfigError("deltas must lie in [0, 1]");
    try {
        (void)spectral_operator();
        (void)noise_basis();
        (void)drift();
        (void)diffusion();
        (void)initial_condition();
        (void)coefficient();
    } catch (const ConfigError&) {
        throw;
    } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
    }
}

std::string format_config(const ExperimentConfig& cfg) {
    std::ostringstream out;
    out.precision(17);
    const auto& e = cfg.equation;
    const auto& d = cfg.discretization;
    const auto& x = cfg.experiment;
    out << "[equation]\n"
        << "operator = " << e.op << "\n";
    if (e.op == "power")
        out << "growth_constant = " << e.op_c << "\ngrowth_exponent = " << e.op_alpha << "\n";
    out << "coefficient = " << e.coefficient << "\n"
        << "drift = " << e.drift << "\n"
        << "drift_a = " << e.drift_a << "\n"
        << "drift_b = " << e.drift_b << "\n"
        << "theta_F = " << e.theta_F << "\n"
        << "diffusion = " << e.diffusion << "\n"
        << "sigma = " << e.sigma << "\n"
        << "theta_G = " << e.theta_G << "\n"
        << "noise = " << e.noise << "\n"
        << "noise_modes = " << e.noise_modes << "\n"
        << "noise_decay = " << e.noise_decay << "\n"
        << "initial = " << e.initial << "\n"
        << "initial_amplitude = " << e.initial_amplitude << "\n\n"
        << "[discretization]\n"
        << "scheme = " << to_string(d.scheme) << "\n"
        << "levels = ";
    for (std::size_t i = 0; i < d.levels.size(); ++i)
        out << (i ? "," : "") << d.levels[i];
    out << "\nreference = " << cfg.reference_level() << "\n"
        << "reference_mode = " << (d.fem_reference == FemReference::self ? "self" : "spectral") << "\n"
        << "horizon = " << d.horizon << "\n"
        << "steps = " << d.steps << "\n"
        << "stepper = " << to_string(d.stepper) << "\n"
        << "theta = " << d.theta << "\n"
        << "quadrature = " << d.quadrature << "\n"
        << "increments = " << (d.increments == IncrementMode::bridge ? "bridge" : "independent") << "\n"
        << "finest_steps = " << d.finest_steps << "\n\n"
        << "[experiment]\n"
        << "paths = " << x.paths << "\n"
        << "p = " << x.p << "\n"
        << "seed = " << x.seed << "\n"
        << "eta = " << x.eta << "\n"
        << "cutoffs = ";
    for (std::size_t i = 0; i < x.cutoffs.size(); ++i)
        out << (i ? "," : "") << x.cutoffs[i];
    out << "\ndeltas = ";
    for (std::size_t i = 0; i < x.deltas.size(); ++i)
        out << (i ? "," : "") << x.deltas[i];
    out << "\nthreads = " << x.threads << "\n";
    return out.str();
}

} // namespace spdepath
