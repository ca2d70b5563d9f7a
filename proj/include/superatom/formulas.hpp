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

#include <cmath>
#include <numbers>
#include <stdexcept>

/// Closed-form single-atom and superatom estimates. Frequencies in rad/us.
namespace superatom {

inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

/// Rydberg excitation linewidth of one driven three-level atom,
/// (Omega_ge^2 + Omega_er^2) / sqrt(2 Omega_ge^2 + Gamma_eg^2 / 4).
inline double linewidth_w(double omega_ge, double omega_er, double gamma_eg) {
  if (gamma_eg < 0.0) throw std::invalid_argument("gamma_eg must be non-negative");
  const double denom_sq = 2.0 * omega_ge * omega_ge + 0.25 * gamma_eg * gamma_eg;
  if (denom_sq == 0.0) throw std::invalid_argument("linewidth_w undefined for omega_ge = gamma_eg = 0");
  return (omega_ge * omega_ge + omega_er * omega_er) / std::sqrt(denom_sq);
}

/// Steady-state ground population of a resonantly driven, decaying two-level
/// atom. Lies in (1/2, 1].
inline double kappa(double omega_ge, double gamma_eg) {
  const double o2 = omega_ge * omega_ge;
  const double g2 = 0.25 * gamma_eg * gamma_eg;
  if (o2 == 0.0 && g2 == 0.0) throw std::invalid_argument("kappa undefined for omega_ge = gamma_eg = 0");
  return (o2 + g2) / (2.0 * o2 + g2);
}

/// P_r(1) of an N-atom superatom from the single-atom Rydberg population x:
/// N x / ((N - 1) x + 1).
inline double superatom_excitation_estimate(int n_atoms, double sigma_rr_single) {
  if (n_atoms < 1) throw std::invalid_argument("n_atoms must be >= 1");
  if (!(sigma_rr_single >= 0.0 && sigma_rr_single <= 1.0)) {
    throw std::invalid_argument("single-atom Rydberg population must lie in [0, 1]");
  }
  const double n = n_atoms;
  return n * sigma_rr_single / ((n - 1.0) * sigma_rr_single + 1.0);
}

}  // namespace superatom
