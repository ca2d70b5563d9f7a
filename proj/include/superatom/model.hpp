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
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "superatom/algebra.hpp"
#include "superatom/formulas.hpp"

/// Physical model of N ladder-type atoms under two delayed pulses.
///
/// Units: angular frequencies in rad/us, times in us, hbar = 1.
namespace superatom {

/// Decay and dephasing rates (rad/us).
struct RateSet {
  double gamma_eg = 38.0;     ///< |e> -> |g>
  double gamma_re = 1e-3;     ///< |r> -> |e>
  double gamma_r_deph = 0.0;  ///< Rydberg dephasing

  static RateSet coherent() { return {0.0, 0.0, 0.0}; }

  void validate() const {
    for (double rate : {gamma_eg, gamma_re, gamma_r_deph}) {
      if (!std::isfinite(rate) || rate < 0.0) {
        throw std::invalid_argument("rates must be finite and non-negative");
      }
    }
  }
};

enum class PulseShape { gaussian, constant };
enum class Transition { ge, er };

struct PulseParams {
  double omega0 = kTwoPi * 3.0;  ///< peak Rabi frequency
  double sigma_t = 3.75;         ///< width and half-delay (us)
  double t_end = 30.0;           ///< process duration (us)
  PulseShape shape = PulseShape::gaussian;
  // Per-transition amplitude factors; 0 switches a field off.
  double ge_scale = 1.0;
  double er_scale = 1.0;

  /// Width tied to the duration, 2 sigma_t = t_end / 4.
  static PulseParams with_default_width(double omega0, double t_end) {
    PulseParams p;
    p.omega0 = omega0;
    p.t_end = t_end;
    p.sigma_t = t_end / 8.0;
    return p;
  }

  /// Time-independent fields Omega_ge = omega_ge, Omega_er = omega_er.
  static PulseParams constant_fields(double omega_ge, double omega_er, double t_end) {
    PulseParams p;
    p.shape = PulseShape::constant;
    p.omega0 = 1.0;
    p.ge_scale = omega_ge;
    p.er_scale = omega_er;
    p.t_end = t_end;
    p.sigma_t = t_end / 8.0;
    return p;
  }

  void validate() const {
    if (!(omega0 > 0.0) || !std::isfinite(omega0)) throw std::invalid_argument("omega0 must be > 0");
    if (!(sigma_t > 0.0) || !std::isfinite(sigma_t)) throw std::invalid_argument("sigma_t must be > 0");
    if (!(t_end > 0.0) || !std::isfinite(t_end)) throw std::invalid_argument("t_end must be > 0");
    if (!std::isfinite(ge_scale) || !std::isfinite(er_scale)) {
      throw std::invalid_argument("pulse scale factors must be finite");
    }
  }
};

/// Omega_0 exp[-(t - t_end/2 -+ sigma_t)^2 / (2 sigma_t^2)]; the ge pulse is
/// centred late (t_end/2 + sigma_t), the er pulse early.
inline double gaussian_pulse(double t, Transition which, const PulseParams& p) {
  const double centre = 0.5 * p.t_end + (which == Transition::ge ? p.sigma_t : -p.sigma_t);
  const double x = (t - centre) / p.sigma_t;
  return p.omega0 * std::exp(-0.5 * x * x);
}

/// Field actually applied at time t, including shape and scale factors.
inline double rabi_frequency(double t, Transition which, const PulseParams& p) {
  const double scale = which == Transition::ge ? p.ge_scale : p.er_scale;
  if (p.shape == PulseShape::constant) return scale * p.omega0;
  return scale * gaussian_pulse(t, which, p);
}

struct UniformShift {
  double shift = 0.0;  ///< same Delta for all pairs; +inf means perfect blockade
};

struct Geometry {
  std::vector<std::array<double, 3>> positions;  ///< um
  double c_p = 0.0;                              ///< rad um^p / us
  int power = 6;
};

struct InteractionSpec {
  std::variant<UniformShift, Geometry> mode = UniformShift{};

  static InteractionSpec uniform(double shift) { return {UniformShift{shift}}; }
  static InteractionSpec perfect_blockade() {
    return {UniformShift{std::numeric_limits<double>::infinity()}};
  }
  static InteractionSpec geometry(std::vector<std::array<double, 3>> positions, double c_p, int power) {
    return {Geometry{std::move(positions), c_p, power}};
  }

  /// Doubly excited Rydberg states removed from the dynamics.
  bool is_perfect_blockade() const {
    const auto* u = std::get_if<UniformShift>(&mode);
    return u != nullptr && std::isinf(u->shift);
  }

  void validate(int n_atoms) const {
    if (const auto* u = std::get_if<UniformShift>(&mode)) {
      if (std::isnan(u->shift) || u->shift < 0.0) {
        throw std::invalid_argument("uniform shift must be >= 0");
      }
      return;
    }
    const auto& g = std::get<Geometry>(mode);
    if (g.power != 3 && g.power != 6) throw std::invalid_argument("interaction power must be 3 or 6");
    if (static_cast<int>(g.positions.size()) != n_atoms) {
      throw std::invalid_argument("geometry lists " + std::to_string(g.positions.size()) +
                                  " positions for " + std::to_string(n_atoms) + " atoms");
    }
  }
};

/// Symmetric pair-shift matrix Delta_ij with zero diagonal.
inline Eigen::MatrixXd interaction_matrix(const InteractionSpec& spec, int n_atoms) {
  if (n_atoms < 1) throw std::invalid_argument("n_atoms must be >= 1");
  spec.validate(n_atoms);
  Eigen::MatrixXd delta = Eigen::MatrixXd::Zero(n_atoms, n_atoms);
  if (const auto* u = std::get_if<UniformShift>(&spec.mode)) {
    for (int i = 0; i < n_atoms; ++i) {
      for (int j = 0; j < n_atoms; ++j) {
        if (i != j) delta(i, j) = u->shift;
      }
    }
    return delta;
  }
  const auto& g = std::get<Geometry>(spec.mode);
  for (int i = 0; i < n_atoms; ++i) {
    for (int j = i + 1; j < n_atoms; ++j) {
      double d2 = 0.0;
      for (int k = 0; k < 3; ++k) {
        const double dx = g.positions[i][k] - g.positions[j][k];
        d2 += dx * dx;
      }
      if (d2 == 0.0) {
        throw std::invalid_argument("atoms " + std::to_string(i) + " and " + std::to_string(j) +
                                    " are at the same position");
      }
      const double value = g.c_p / std::pow(std::sqrt(d2), g.power);
      delta(i, j) = value;
      delta(j, i) = value;
    }
  }
  return delta;
}

/// Single-atom Rydberg linewidth at the pulse peaks, w_0.
inline double peak_linewidth(const PulseParams& pulses, const RateSet& rates) {
  return linewidth_w(pulses.omega0, pulses.omega0, rates.gamma_eg);
}

/// Default uniform shift in units of w_0.
inline constexpr double kDefaultBlockadeFactor = 20.0;
/// Blockade diagnostic threshold in units of w_0.
inline constexpr double kBlockadeThreshold = 10.0;

struct ModelConfig {
  int n_atoms = 1;
  RateSet rates;
  PulseParams pulses;
  InteractionSpec interaction =
      InteractionSpec::uniform(kDefaultBlockadeFactor * peak_linewidth(PulseParams{}, RateSet{}));

  /// Dissipative parameters with a uniform shift of kDefaultBlockadeFactor w_0.
  static ModelConfig defaults(int n_atoms) {
    ModelConfig cfg;
    cfg.n_atoms = n_atoms;
    cfg.interaction = InteractionSpec::uniform(kDefaultBlockadeFactor * peak_linewidth(cfg.pulses, cfg.rates));
    return cfg;
  }

  void validate() const {
    hilbert_dim(n_atoms);
    rates.validate();
    pulses.validate();
    interaction.validate(n_atoms);
  }

  double w0() const { return peak_linewidth(pulses, rates); }

  /// Smallest pair shift; +inf for a single atom.
  double min_shift() const {
    if (n_atoms < 2) return std::numeric_limits<double>::infinity();
    if (interaction.is_perfect_blockade()) return std::numeric_limits<double>::infinity();
    const Eigen::MatrixXd delta = interaction_matrix(interaction, n_atoms);
    double smallest = std::numeric_limits<double>::infinity();
    for (int i = 0; i < n_atoms; ++i) {
      for (int j = i + 1; j < n_atoms; ++j) smallest = std::min(smallest, std::abs(delta(i, j)));
    }
    return smallest;
  }

  /// Diagnostic only: min Delta_ij >= 10 w_0.
  bool blockade_satisfied() const { return min_shift() >= kBlockadeThreshold * w0() * (1.0 - 1e-12); }
};

enum class ChannelKind { eg, re, deph };

inline const char* to_string(ChannelKind kind) {
  switch (kind) {
    case ChannelKind::eg: return "eg";
    case ChannelKind::re: return "re";
    case ChannelKind::deph: return "deph";
  }
  return "?";
}

/// Collapse operator, already scaled by sqrt(rate).
struct JumpChannel {
  OperatorMatrix op;
  ChannelKind kind;
  int atom;

  std::string label() const { return std::string(to_string(kind)) + "_" + std::to_string(atom); }
};

/// sigma_rr - sigma_ee - sigma_gg on one atom; squares to the identity.
inline OperatorMatrix dephasing_sign_operator() {
  return {kLevels, {{0, 0, -1.0}, {1, 1, -1.0}, {2, 2, 1.0}}};
}

/// Per atom: sqrt(G_eg) s_ge, sqrt(G_re) s_er, sqrt(g_r/2) (s_rr - s_ee - s_gg).
/// Channels with zero rate are omitted.
inline std::vector<JumpChannel> build_jump_channels(const ModelConfig& cfg) {
  cfg.validate();
  const auto& rates = cfg.rates;
  std::vector<JumpChannel> channels;
  for (int j = 0; j < cfg.n_atoms; ++j) {
    if (rates.gamma_eg > 0.0) {
      channels.push_back({std::sqrt(rates.gamma_eg) * embedded_transition(Level::g, Level::e, j, cfg.n_atoms),
                          ChannelKind::eg, j});
    }
    if (rates.gamma_re > 0.0) {
      channels.push_back({std::sqrt(rates.gamma_re) * embedded_transition(Level::e, Level::r, j, cfg.n_atoms),
                          ChannelKind::re, j});
    }
    if (rates.gamma_r_deph > 0.0) {
      channels.push_back({std::sqrt(0.5 * rates.gamma_r_deph) *
                              kron_embed(dephasing_sign_operator(), j, cfg.n_atoms),
                          ChannelKind::deph, j});
    }
  }
  return channels;
}

/// Per-basis-state level counts, used for fast diagonal observables.
struct BasisTable {
  int n_atoms = 0;
  std::vector<int> rydberg_count;
  std::vector<int> excited_count;
  std::vector<std::vector<int>> levels;  ///< levels[index][atom]

  explicit BasisTable(int n) : n_atoms(n) {
    const std::size_t dim = hilbert_dim(n);
    rydberg_count.resize(dim);
    excited_count.resize(dim);
    levels.resize(dim);
    for (std::size_t i = 0; i < dim; ++i) {
      rydberg_count[i] = count_level(i, n, Level::r);
      excited_count[i] = count_level(i, n, Level::e);
      levels[i].resize(static_cast<std::size_t>(n));
      for (int j = 0; j < n; ++j) levels[i][static_cast<std::size_t>(j)] = level_of(i, j, n);
    }
  }
};

/// Immutable built model: H(t) = Omega_ge(t) X_ge + Omega_er(t) X_er + V_aa,
/// plus the jump channels.
class Model {
 public:
  explicit Model(ModelConfig cfg)
      : cfg_(std::move(cfg)),
        dim_(hilbert_dim(cfg_.n_atoms)),
        basis_(cfg_.n_atoms),
        drive_ge_(dim_),
        drive_er_(dim_),
        interaction_(dim_) {
    cfg_.validate();
    const int n = cfg_.n_atoms;
    OperatorMatrix ge(dim_);
    OperatorMatrix er(dim_);
    for (int j = 0; j < n; ++j) {
      ge = ge + embedded_transition(Level::e, Level::g, j, n);
      er = er + embedded_transition(Level::r, Level::e, j, n);
    }
    if (cfg_.interaction.is_perfect_blockade()) {
      std::vector<Entry> kept;
      for (const auto& e : er.entries()) {
        if (basis_.rydberg_count[e.row] <= 1 && basis_.rydberg_count[e.col] <= 1) kept.push_back(e);
      }
      er = OperatorMatrix(dim_, std::move(kept));
    } else {
      const Eigen::MatrixXd delta = interaction_matrix(cfg_.interaction, n);
      std::vector<Entry> diag;
      for (std::size_t s = 0; s < dim_; ++s) {
        double shift = 0.0;
        for (int i = 0; i < n; ++i) {
          if (basis_.levels[s][static_cast<std::size_t>(i)] != static_cast<int>(Level::r)) continue;
          for (int j = i + 1; j < n; ++j) {
            if (basis_.levels[s][static_cast<std::size_t>(j)] == static_cast<int>(Level::r)) shift += delta(i, j);
          }
        }
        if (shift != 0.0) diag.push_back({s, s, shift});
      }
      interaction_ = OperatorMatrix(dim_, std::move(diag));
    }
    drive_ge_ = ge + ge.adjoint();
    drive_er_ = er + er.adjoint();
    channels_ = build_jump_channels(cfg_);
  }

  const ModelConfig& config() const { return cfg_; }
  int n_atoms() const { return cfg_.n_atoms; }
  std::size_t dim() const { return dim_; }
  const BasisTable& basis() const { return basis_; }

  double omega_ge(double t) const { return rabi_frequency(t, Transition::ge, cfg_.pulses); }
  double omega_er(double t) const { return rabi_frequency(t, Transition::er, cfg_.pulses); }

  /// sum_j (sigma_eg^j + sigma_ge^j)
  const OperatorMatrix& drive_ge() const { return drive_ge_; }
  /// sum_j (sigma_re^j + sigma_er^j)
  const OperatorMatrix& drive_er() const { return drive_er_; }
  /// sum_{i<j} Delta_ij sigma_rr^i sigma_rr^j (diagonal, time independent)
  const OperatorMatrix& interaction() const { return interaction_; }
  const std::vector<JumpChannel>& channels() const { return channels_; }

  OperatorMatrix hamiltonian(double t) const {
    return drive_ge_ * Complex{omega_ge(t)} + drive_er_ * Complex{omega_er(t)} + interaction_;
  }

 private:
  ModelConfig cfg_;
  std::size_t dim_;
  BasisTable basis_;
  OperatorMatrix drive_ge_;
  OperatorMatrix drive_er_;
  OperatorMatrix interaction_;
  std::vector<JumpChannel> channels_;
};

inline OperatorMatrix build_hamiltonian(double t, const ModelConfig& cfg) {
  return Model(cfg).hamiltonian(t);
}

}  // namespace superatom
