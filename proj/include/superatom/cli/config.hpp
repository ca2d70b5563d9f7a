// Copyright 2026 The superatom Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <array>
#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "superatom/master_equation.hpp"
#include "superatom/model.hpp"

/// Flat key = value experiment configuration.
///
///   # comment
///   experiment = fig1c
///   n_atoms = 1..6
///   omega0 = 2pi*3
///
/// Keys are case-sensitive; unknown keys and repeated keys are errors.
namespace superatom::cli {

class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& what, int line) : std::runtime_error(format(what, line)), line_(line) {}
  int line() const { return line_; }

 private:
  static std::string format(const std::string& what, int line) {
    return line > 0 ? "line " + std::to_string(line) + ": " + what : what;
  }
  int line_;
};

enum class Experiment { fig1c, fig2, custom };
enum class Engine { me, mcwf, both };

inline const char* to_string(Experiment e) {
  switch (e) {
    case Experiment::fig1c: return "fig1c";
    case Experiment::fig2: return "fig2";
    case Experiment::custom: return "custom";
  }
  return "?";
}

inline const char* to_string(Engine e) {
  switch (e) {
    case Engine::me: return "me";
    case Engine::mcwf: return "mcwf";
    case Engine::both: return "both";
  }
  return "?";
}

/// Dephasing rate of the second fig2 run, 2 pi x 0.1 rad/us.
inline constexpr double kFig2Dephasing = kTwoPi * 0.1;

struct ExperimentConfig {
  Experiment experiment = Experiment::custom;
  std::vector<int> n_atoms_list;
  bool coherent = false;
  Engine engine = Engine::me;
  int n_traj = 1000;
  std::uint64_t seed = 1;
  std::filesystem::path output_dir = "out";
  bool jump_log = false;

  // Model and integrator overrides; unset fields keep library defaults.
  std::optional<double> omega0, sigma_t, t_end, omega_ge_scale, omega_er_scale;
  std::optional<PulseShape> pulse_shape;
  std::optional<double> gamma_eg, gamma_re, gamma_r_deph;
  std::optional<double> blockade_factor, delta;
  bool perfect_blockade = false;
  std::optional<std::vector<std::array<double, 3>>> positions;
  std::optional<double> c_p;
  std::optional<int> power;
  std::optional<Method> method;
  std::optional<double> rtol, atol, fixed_dt, trace_drift_tol;
  std::optional<int> sample_count;
  std::optional<bool> symmetry;

  /// Raw (key, value) pairs in file order, for the manifest.
  std::vector<std::pair<std::string, std::string>> echo;

  /// Model for n atoms with the overrides applied; `dephasing` replaces
  /// gamma_r_deph when given.
  ModelConfig model_for(int n_atoms, bool coherent_run, std::optional<double> dephasing = std::nullopt) const {
    ModelConfig cfg;
    cfg.n_atoms = n_atoms;
    auto& p = cfg.pulses;
    if (t_end) {
      p.t_end = *t_end;
      p.sigma_t = *t_end / 8.0;
    }
    if (sigma_t) p.sigma_t = *sigma_t;
    if (omega0) p.omega0 = *omega0;
    if (pulse_shape) p.shape = *pulse_shape;
    if (omega_ge_scale) p.ge_scale = *omega_ge_scale;
    if (omega_er_scale) p.er_scale = *omega_er_scale;
    if (gamma_eg) cfg.rates.gamma_eg = *gamma_eg;
    if (gamma_re) cfg.rates.gamma_re = *gamma_re;
    if (gamma_r_deph) cfg.rates.gamma_r_deph = *gamma_r_deph;
    if (dephasing) cfg.rates.gamma_r_deph = *dephasing;
    if (coherent_run) cfg.rates = RateSet::coherent();

    if (perfect_blockade) {
      cfg.interaction = InteractionSpec::perfect_blockade();
    } else if (positions) {
      cfg.interaction = InteractionSpec::geometry(*positions, c_p.value_or(0.0), power.value_or(6));
    } else if (delta) {
      cfg.interaction = InteractionSpec::uniform(*delta);
    } else {
      // w_0 uses the dissipative Gamma_eg even for coherent runs, so both
      // runs of a pair see the same shift.
      const double g = gamma_eg.value_or(RateSet{}.gamma_eg);
      cfg.interaction = InteractionSpec::uniform(blockade_factor.value_or(kDefaultBlockadeFactor) *
                                                 linewidth_w(p.omega0, p.omega0, g));
    }
    return cfg;
  }

  IntegratorSettings integrator() const {
    IntegratorSettings s;
    if (method) s.method = *method;
    if (rtol) s.rtol = *rtol;
    if (atol) s.atol = *atol;
    if (fixed_dt) s.fixed_dt = *fixed_dt;
    if (sample_count) s.sample_count = *sample_count;
    if (trace_drift_tol) s.trace_drift_tol = *trace_drift_tol;
    if (symmetry) s.use_symmetry = *symmetry;
    return s;
  }

  bool runs_me() const { return engine != Engine::mcwf; }
  bool runs_mcwf() const { return engine != Engine::me; }
};

namespace detail {

inline std::string_view trim(std::string_view s) {
  const auto ws = " \t\r";
  const auto b = s.find_first_not_of(ws);
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(ws);
  return s.substr(b, e - b + 1);
}

/// Locale-independent real; "2pi*X" means 2 pi X.
inline double parse_real(std::string_view text, const std::string& key, int line) {
  std::string_view body = trim(text);
  double factor = 1.0;
  if (body.starts_with("2pi*")) {
    factor = kTwoPi;
    body = trim(body.substr(4));
  }
  double value = 0.0;
  const auto* end = body.data() + body.size();
  const auto [ptr, ec] = std::from_chars(body.data(), end, value);
  if (ec != std::errc{} || ptr != end || body.empty()) {
    throw ParseError("key '" + key + "': expected a number, got '" + std::string(text) + "'", line);
  }
  if (!std::isfinite(value)) throw ParseError("key '" + key + "': value must be finite", line);
  return factor * value;
}

template <class Int>
Int parse_int(std::string_view text, const std::string& key, int line) {
  const std::string_view body = trim(text);
  Int value{};
  const auto* end = body.data() + body.size();
  const auto [ptr, ec] = std::from_chars(body.data(), end, value);
  if (ec != std::errc{} || ptr != end || body.empty()) {
    throw ParseError("key '" + key + "': expected an integer, got '" + std::string(text) + "'", line);
  }
  return value;
}

inline bool parse_bool(std::string_view text, const std::string& key, int line) {
  const std::string_view v = trim(text);
  if (v == "true" || v == "yes" || v == "1") return true;
  if (v == "false" || v == "no" || v == "0") return false;
  throw ParseError("key '" + key + "': expected true or false, got '" + std::string(text) + "'", line);
}

/// "1,2,5" or "1..6" or a mix such as "1..3,6".
inline std::vector<int> parse_int_list(std::string_view text, const std::string& key, int line) {
  std::vector<int> out;
  std::string_view rest = trim(text);
  while (!rest.empty()) {
    const auto comma = rest.find(',');
    const std::string_view item = trim(rest.substr(0, comma));
    rest = comma == std::string_view::npos ? std::string_view{} : rest.substr(comma + 1);
    const auto dots = item.find("..");
    if (dots == std::string_view::npos) {
      out.push_back(parse_int<int>(item, key, line));
    } else {
      const int lo = parse_int<int>(item.substr(0, dots), key, line);
      const int hi = parse_int<int>(item.substr(dots + 2), key, line);
      if (hi < lo) throw ParseError("key '" + key + "': empty range '" + std::string(item) + "'", line);
      for (int n = lo; n <= hi; ++n) out.push_back(n);
    }
  }
  if (out.empty()) throw ParseError("key '" + key + "': empty list", line);
  return out;
}

/// "x,y,z; x,y,z; ..." in um.
inline std::vector<std::array<double, 3>> parse_positions(std::string_view text, const std::string& key, int line) {
  std::vector<std::array<double, 3>> out;
  std::string_view rest = trim(text);
  while (!rest.empty()) {
    const auto semi = rest.find(';');
    std::string_view item = trim(rest.substr(0, semi));
    rest = semi == std::string_view::npos ? std::string_view{} : rest.substr(semi + 1);
    std::array<double, 3> p{};
    for (int k = 0; k < 3; ++k) {
      const auto comma = item.find(',');
      if ((k < 2) == (comma == std::string_view::npos)) {
        throw ParseError("key '" + key + "': each position needs three comma-separated coordinates", line);
      }
      p[static_cast<std::size_t>(k)] = parse_real(item.substr(0, comma), key, line);
      item = comma == std::string_view::npos ? std::string_view{} : item.substr(comma + 1);
    }
    out.push_back(p);
  }
  if (out.empty()) throw ParseError("key '" + key + "': no positions", line);
  return out;
}

}  // namespace detail

/// Parses configuration text. Errors carry the 1-based line number.
inline ExperimentConfig parse_config(std::istream& in) {
  using namespace detail;
  ExperimentConfig cfg;
  std::map<std::string, int> seen;
  std::string raw;
  int line = 0;
  while (std::getline(in, raw)) {
    ++line;
    std::string_view text = raw;
    if (const auto hash = text.find('#'); hash != std::string_view::npos) text = text.substr(0, hash);
    text = trim(text);
    if (text.empty()) continue;
    const auto eq = text.find('=');
    if (eq == std::string_view::npos) throw ParseError("expected 'key = value', got '" + std::string(text) + "'", line);
    const std::string key(trim(text.substr(0, eq)));
    const std::string_view value = trim(text.substr(eq + 1));
    if (key.empty()) throw ParseError("missing key before '='", line);
    if (value.empty()) throw ParseError("key '" + key + "': missing value", line);
    if (auto [it, fresh] = seen.emplace(key, line); !fresh) {
      throw ParseError("key '" + key + "' repeated (first set on line " + std::to_string(it->second) + ")", line);
    }
    cfg.echo.emplace_back(key, std::string(value));

    if (key == "experiment") {
      if (value == "fig1c") cfg.experiment = Experiment::fig1c;
      else if (value == "fig2") cfg.experiment = Experiment::fig2;
      else if (value == "custom") cfg.experiment = Experiment::custom;
      else throw ParseError("key 'experiment': expected fig1c, fig2 or custom", line);
    } else if (key == "n_atoms") {
      cfg.n_atoms_list = parse_int_list(value, key, line);
    } else if (key == "coherent") {
      cfg.coherent = parse_bool(value, key, line);
    } else if (key == "engine") {
      if (value == "me") cfg.engine = Engine::me;
      else if (value == "mcwf") cfg.engine = Engine::mcwf;
      else if (value == "both") cfg.engine = Engine::both;
      else throw ParseError("key 'engine': expected me, mcwf or both", line);
    } else if (key == "n_traj") {
      cfg.n_traj = parse_int<int>(value, key, line);
    } else if (key == "seed") {
      cfg.seed = parse_int<std::uint64_t>(value, key, line);
    } else if (key == "output_dir") {
      cfg.output_dir = std::string(value);
    } else if (key == "jump_log") {
      cfg.jump_log = parse_bool(value, key, line);
    } else if (key == "omega0") {
      cfg.omega0 = parse_real(value, key, line);
    } else if (key == "sigma_t") {
      cfg.sigma_t = parse_real(value, key, line);
    } else if (key == "t_end") {
      cfg.t_end = parse_real(value, key, line);
    } else if (key == "pulse_shape") {
      if (value == "gaussian") cfg.pulse_shape = PulseShape::gaussian;
      else if (value == "constant") cfg.pulse_shape = PulseShape::constant;
      else throw ParseError("key 'pulse_shape': expected gaussian or constant", line);
    } else if (key == "omega_ge_scale") {
      cfg.omega_ge_scale = parse_real(value, key, line);
    } else if (key == "omega_er_scale") {
      cfg.omega_er_scale = parse_real(value, key, line);
    } else if (key == "gamma_eg") {
      cfg.gamma_eg = parse_real(value, key, line);
    } else if (key == "gamma_re") {
      cfg.gamma_re = parse_real(value, key, line);
    } else if (key == "gamma_r_deph") {
      cfg.gamma_r_deph = parse_real(value, key, line);
    } else if (key == "blockade_factor") {
      cfg.blockade_factor = parse_real(value, key, line);
    } else if (key == "delta") {
      cfg.delta = parse_real(value, key, line);
    } else if (key == "interaction") {
      if (value == "uniform") cfg.perfect_blockade = false;
      else if (value == "perfect_blockade") cfg.perfect_blockade = true;
      else throw ParseError("key 'interaction': expected uniform or perfect_blockade", line);
    } else if (key == "positions") {
      cfg.positions = parse_positions(value, key, line);
    } else if (key == "c_p") {
      cfg.c_p = parse_real(value, key, line);
    } else if (key == "power") {
      cfg.power = parse_int<int>(value, key, line);
    } else if (key == "method") {
      if (value == "rk45") cfg.method = Method::adaptive_rk45;
      else if (value == "rk4") cfg.method = Method::fixed_rk4;
      else throw ParseError("key 'method': expected rk45 or rk4", line);
    } else if (key == "rtol") {
      cfg.rtol = parse_real(value, key, line);
    } else if (key == "atol") {
      cfg.atol = parse_real(value, key, line);
    } else if (key == "fixed_dt") {
      cfg.fixed_dt = parse_real(value, key, line);
    } else if (key == "sample_count") {
      cfg.sample_count = parse_int<int>(value, key, line);
    } else if (key == "trace_drift_tol") {
      cfg.trace_drift_tol = parse_real(value, key, line);
    } else if (key == "symmetry") {
      cfg.symmetry = parse_bool(value, key, line);
    } else {
      throw ParseError("unknown key '" + key + "'", line);
    }
  }

  if (cfg.n_atoms_list.empty()) throw ParseError("missing required key 'n_atoms'", 0);
  if (cfg.runs_mcwf() && cfg.n_traj < 1) {
    throw ParseError("key 'n_traj': must be >= 1 when the engine includes mcwf", seen.count("n_traj") ? seen["n_traj"] : 0);
  }
  for (int n : cfg.n_atoms_list) {
    if (n < 1) throw ParseError("key 'n_atoms': atom counts must be >= 1", seen["n_atoms"]);
  }
  const int exclusive = (cfg.delta ? 1 : 0) + (cfg.blockade_factor ? 1 : 0) + (cfg.perfect_blockade ? 1 : 0) +
                        (cfg.positions ? 1 : 0);
  if (exclusive > 1) {
    throw ParseError("at most one of 'delta', 'blockade_factor', 'positions', 'interaction = perfect_blockade' may be set", 0);
  }
  if ((cfg.c_p || cfg.power) && !cfg.positions) throw ParseError("'c_p' and 'power' require 'positions'", 0);
  return cfg;
}

inline ExperimentConfig parse_config_text(const std::string& text) {
  std::istringstream in(text);
  return parse_config(in);
}

inline ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open config file '" + path.string() + "'", 0);
  return parse_config(in);
}

}  // namespace superatom::cli
