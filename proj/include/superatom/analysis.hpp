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

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "superatom/algebra.hpp"
#include "superatom/formulas.hpp"
#include "superatom/integrator.hpp"
#include "superatom/model.hpp"
#include "superatom/observables.hpp"

/// Projectors, single-atom dark/bright states, adiabaticity, and the
/// symmetrized hard-core boson model.
namespace superatom {

/// Diagonal 0/1 operator selecting basis states with exactly n atoms in |r>.
inline OperatorMatrix rydberg_projector(int n, int n_atoms) {
  const std::size_t dim = hilbert_dim(n_atoms);
  if (n < 0 || n > n_atoms) {
    throw std::out_of_range("rydberg_projector: n = " + std::to_string(n) + " outside [0, " +
                            std::to_string(n_atoms) + "]");
  }
  std::vector<Entry> diag;
  for (std::size_t s = 0; s < dim; ++s) {
    if (count_level(s, n_atoms, Level::r) == n) diag.push_back({s, s, 1.0});
  }
  return {dim, std::move(diag)};
}

/// sum_j sigma_rr^j prod_{i != j} sigma_gg^i
inline OperatorMatrix single_rydberg_ground_projector(int n_atoms) {
  const std::size_t dim = hilbert_dim(n_atoms);
  std::vector<Entry> diag;
  for (std::size_t s = 0; s < dim; ++s) {
    if (count_level(s, n_atoms, Level::r) == 1 && count_level(s, n_atoms, Level::g) == n_atoms - 1) {
      diag.push_back({s, s, 1.0});
    }
  }
  return {dim, std::move(diag)};
}

/// Single-atom V_af in the (g, e, r) basis.
inline DenseMatrix single_atom_coupling(double omega_ge, double omega_er) {
  DenseMatrix h = DenseMatrix::Zero(kLevels, kLevels);
  h(0, 1) = h(1, 0) = omega_ge;
  h(1, 2) = h(2, 1) = omega_er;
  return h;
}

struct DarkStateDecomposition {
  double theta = 0.0;  ///< tan(theta) = Omega_ge / Omega_er
  StateVector dark;
  StateVector bright_plus;
  StateVector bright_minus;
  double gap = 0.0;  ///< sqrt(Omega_ge^2 + Omega_er^2)
  /// Bright-state energies +gap and -gap.
  double energy_plus() const { return gap; }
  double energy_minus() const { return -gap; }
};

/// dark = cos(theta)|g> - sin(theta)|r>,
/// bright_pm = (sin(theta)|g> +- |e> + cos(theta)|r>) / sqrt(2).
inline DarkStateDecomposition dark_state_decomposition(double omega_ge, double omega_er) {
  if (omega_ge == 0.0 && omega_er == 0.0) {
    throw std::invalid_argument("dark state undefined for vanishing fields");
  }
  DarkStateDecomposition d;
  d.theta = std::atan2(omega_ge, omega_er);
  d.gap = std::hypot(omega_ge, omega_er);
  const double c = std::cos(d.theta);
  const double s = std::sin(d.theta);
  const double h = 1.0 / std::sqrt(2.0);
  d.dark = StateVector(3);
  d.dark << c, 0.0, -s;
  d.bright_plus = StateVector(3);
  d.bright_plus << h * s, h, h * c;
  d.bright_minus = StateVector(3);
  d.bright_minus << h * s, -h, h * c;
  return d;
}

inline double mixing_angle(double t, const PulseParams& pulses) {
  return std::atan2(rabi_frequency(t, Transition::ge, pulses), rabi_frequency(t, Transition::er, pulses));
}

/// |d theta / dt| / gap on t_grid, theta' by central differences (one-sided
/// at the ends). Points with zero gap give +inf.
inline std::vector<double> adiabaticity_margin(const PulseParams& pulses, const std::vector<double>& t_grid) {
  pulses.validate();
  const std::size_t n = t_grid.size();
  if (n < 2) throw std::invalid_argument("adiabaticity_margin needs at least two grid points");
  std::vector<double> theta(n);
  for (std::size_t k = 0; k < n; ++k) theta[k] = mixing_angle(t_grid[k], pulses);
  std::vector<double> margin(n);
  for (std::size_t k = 0; k < n; ++k) {
    const std::size_t lo = k == 0 ? 0 : k - 1;
    const std::size_t hi = k + 1 == n ? n - 1 : k + 1;
    const double rate = (theta[hi] - theta[lo]) / (t_grid[hi] - t_grid[lo]);
    const double gap = std::hypot(rabi_frequency(t_grid[k], Transition::ge, pulses),
                                  rabi_frequency(t_grid[k], Transition::er, pulses));
    margin[k] = gap > 0.0 ? std::abs(rate) / gap : std::numeric_limits<double>::infinity();
  }
  return margin;
}

/// Largest margin over points where the gap exceeds 1e-3 Omega_0.
inline double max_adiabaticity_margin(const PulseParams& pulses, const std::vector<double>& t_grid) {
  const auto margin = adiabaticity_margin(pulses, t_grid);
  double worst = 0.0;
  for (std::size_t k = 0; k < t_grid.size(); ++k) {
    const double gap = std::hypot(rabi_frequency(t_grid[k], Transition::ge, pulses),
                                  rabi_frequency(t_grid[k], Transition::er, pulses));
    if (gap > 1e-3 * pulses.omega0) worst = std::max(worst, margin[k]);
  }
  return worst;
}

struct CollectiveState {
  int n_g = 0;
  int n_e = 0;
  int n_r = 0;
};

/// Fully symmetrized states |n_g, n_e, n_r> with n_r in {0, 1}. Order: the
/// n_r = 0 sector by n_e = 0..N, then n_r = 1 by n_e = 0..N-1.
class CollectiveBasis {
 public:
  explicit CollectiveBasis(int n_atoms) : n_atoms_(n_atoms) {
    if (n_atoms < 1 || n_atoms > 30) throw std::invalid_argument("collective model supports 1 <= N <= 30");
    for (int nr = 0; nr <= 1; ++nr) {
      for (int ne = 0; ne <= n_atoms - nr; ++ne) states_.push_back({n_atoms - nr - ne, ne, nr});
    }
  }

  int n_atoms() const { return n_atoms_; }
  std::size_t dim() const { return states_.size(); }
  const std::vector<CollectiveState>& states() const { return states_; }
  const CollectiveState& operator[](std::size_t i) const { return states_[i]; }

  std::size_t index_of(int n_e, int n_r) const {
    if (n_r < 0 || n_r > 1 || n_e < 0 || n_e > n_atoms_ - n_r) throw std::out_of_range("no such collective state");
    return n_r == 0 ? static_cast<std::size_t>(n_e) : static_cast<std::size_t>(n_atoms_ + 1 + n_e);
  }

  /// e^dag g + g^dag e with bosonic factors.
  DenseMatrix lower_coupling() const {
    DenseMatrix x = DenseMatrix::Zero(static_cast<Eigen::Index>(dim()), static_cast<Eigen::Index>(dim()));
    for (std::size_t i = 0; i < dim(); ++i) {
      const auto& s = states_[i];
      if (s.n_g == 0) continue;
      const std::size_t j = index_of(s.n_e + 1, s.n_r);
      const double amp = std::sqrt(static_cast<double>(s.n_g) * (s.n_e + 1));
      x(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i)) = amp;
      x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = amp;
    }
    return x;
  }

  /// r^dag e + e^dag r with (r^dag)^2 = 0.
  DenseMatrix upper_coupling() const {
    DenseMatrix x = DenseMatrix::Zero(static_cast<Eigen::Index>(dim()), static_cast<Eigen::Index>(dim()));
    for (std::size_t i = 0; i < dim(); ++i) {
      const auto& s = states_[i];
      if (s.n_r != 0 || s.n_e == 0) continue;
      const std::size_t j = index_of(s.n_e - 1, 1);
      const double amp = std::sqrt(static_cast<double>(s.n_e));
      x(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i)) = amp;
      x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = amp;
    }
    return x;
  }

  /// |N_g, 0, 0>
  StateVector ground() const {
    StateVector v = StateVector::Zero(static_cast<Eigen::Index>(dim()));
    v(0) = 1.0;
    return v;
  }

 private:
  int n_atoms_;
  std::vector<CollectiveState> states_;
};

/// Schroedinger problem of the hard-core boson model.
/// H(t) = Omega_ge(t) L + Omega_er(t) U with L, U real symmetric. Stepped
/// with the two-exponential commutator-free Magnus scheme of order 4, so
/// every step is unitary up to rounding.
class CollectivePropagator {
 public:
  CollectivePropagator(const CollectiveBasis& basis, const PulseParams& pulses)
      : pulses_(pulses), lower_(basis.lower_coupling().real()), upper_(basis.upper_coupling().real()) {}

  void step(double t, double h, StateVector& psi) const {
    static const double r3 = std::sqrt(3.0);
    const double c1 = 0.5 - r3 / 6.0;
    const double c2 = 0.5 + r3 / 6.0;
    const double a1 = (3.0 - 2.0 * r3) / 12.0;
    const double a2 = (3.0 + 2.0 * r3) / 12.0;
    const double ge1 = rabi_frequency(t + c1 * h, Transition::ge, pulses_);
    const double ge2 = rabi_frequency(t + c2 * h, Transition::ge, pulses_);
    const double er1 = rabi_frequency(t + c1 * h, Transition::er, pulses_);
    const double er2 = rabi_frequency(t + c2 * h, Transition::er, pulses_);
    // right factor first
    apply_exp(h * (a2 * ge1 + a1 * ge2), h * (a2 * er1 + a1 * er2), psi);
    apply_exp(h * (a1 * ge1 + a2 * ge2), h * (a1 * er1 + a2 * er2), psi);
  }

 private:
  // psi <- exp(-i (g L + e U)) psi
  void apply_exp(double g, double e, StateVector& psi) const {
    if (g == 0.0 && e == 0.0) return;
    const Eigen::MatrixXd m = g * lower_ + e * upper_;
    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(m);
    const Eigen::MatrixXd& v = solver.eigenvectors();
    StateVector coeff = v.transpose().cast<Complex>() * psi;
    for (Eigen::Index k = 0; k < coeff.size(); ++k) coeff(k) *= std::polar(1.0, -solver.eigenvalues()(k));
    psi.noalias() = v.cast<Complex>() * coeff;
  }

  PulseParams pulses_;
  Eigen::MatrixXd lower_;
  Eigen::MatrixXd upper_;
};

struct CollectiveRun {
  ObservableSeries series;
  StateVector final_state;
};

/// Coherent evolution from |N_g, 0, 0> sampled on t_grid (t_grid.front() is
/// the start time). per_atom_rr is P_r(1) / N by symmetry.
inline CollectiveRun collective_coherent_run(int n_atoms, const PulseParams& pulses, const std::vector<double>& t_grid,
                                             double max_step = 1e-3) {
  pulses.validate();
  if (!(max_step > 0.0)) throw std::invalid_argument("max_step must be positive");
  const CollectiveBasis basis(n_atoms);
  const CollectivePropagator propagator(basis, pulses);
  CollectiveRun run;
  run.series.resize(t_grid.size(), n_atoms);
  StateVector psi = basis.ground();
  auto sample = [&](std::size_t i, double t) {
    ObservableRow row;
    row.t = t;
    row.per_atom_rr.assign(static_cast<std::size_t>(n_atoms), 0.0);
    double norm2 = 0.0;
    for (std::size_t k = 0; k < basis.dim(); ++k) {
      const double p = std::norm(psi(static_cast<Eigen::Index>(k)));
      norm2 += p;
      row.pr[static_cast<std::size_t>(basis[k].n_r)] += p;
      row.pop_e_total += p * basis[k].n_e;
    }
    for (auto& v : row.per_atom_rr) v = row.pr[1] / n_atoms;
    row.purity = 1.0;
    row.trace_error = norm2 - 1.0;
    run.series.set_row(i, row);
  };
  for (std::size_t i = 0; i < t_grid.size(); ++i) {
    if (i > 0) {
      const double span = t_grid[i] - t_grid[i - 1];
      if (span < 0.0) throw std::invalid_argument("t_grid must be non-decreasing");
      const auto steps = static_cast<int>(std::ceil(span / max_step));
      const double h = steps > 0 ? span / steps : 0.0;
      for (int k = 0; k < steps; ++k) propagator.step(t_grid[i - 1] + k * h, h, psi);
    }
    sample(i, t_grid[i]);
  }
  run.final_state = psi;
  return run;
}

inline ObservableSeries collective_coherent_evolve(int n_atoms, const PulseParams& pulses,
                                                   const std::vector<double>& t_grid) {
  return collective_coherent_run(n_atoms, pulses, t_grid).series;
}

/// J_x = (e^dag g + g^dag e) / 2 restricted to the n_r sector, in the
/// basis n_e = 0..N - n_r.
inline DenseMatrix jx_sector(int n_atoms, int n_r) {
  const CollectiveBasis basis(n_atoms);
  const int m = n_atoms - n_r;
  if (n_r < 0 || n_r > 1) throw std::out_of_range("n_r must be 0 or 1");
  const DenseMatrix full = 0.5 * basis.lower_coupling();
  const auto start = static_cast<Eigen::Index>(basis.index_of(0, n_r));
  return full.block(start, start, m + 1, m + 1);
}

/// Orthonormal null space of J_x in the n_r sector (columns, sector basis);
/// empty when J_x has no zero eigenvalue there.
inline DenseMatrix jx_null_space(int n_atoms, int n_r, double tol = 1e-9) {
  const DenseMatrix jx = jx_sector(n_atoms, n_r);
  Eigen::SelfAdjointEigenSolver<DenseMatrix> solver(jx);
  std::vector<Eigen::Index> zero;
  for (Eigen::Index k = 0; k < jx.rows(); ++k) {
    if (std::abs(solver.eigenvalues()(k)) < tol) zero.push_back(k);
  }
  DenseMatrix null(jx.rows(), static_cast<Eigen::Index>(zero.size()));
  for (std::size_t c = 0; c < zero.size(); ++c) {
    null.col(static_cast<Eigen::Index>(c)) = solver.eigenvectors().col(zero[c]);
  }
  return null;
}

/// Squared overlap of a collective state with the J_x null space of the n_r
/// sector. nullopt when that sector has no zero eigenvalue (odd atom count).
inline std::optional<double> jx_zero_overlap(const StateVector& state, int n_atoms, int n_r) {
  const CollectiveBasis basis(n_atoms);
  if (static_cast<std::size_t>(state.size()) != basis.dim()) {
    throw std::invalid_argument("state is not in the collective basis of this N");
  }
  const DenseMatrix null = jx_null_space(n_atoms, n_r);
  if (null.cols() == 0) return std::nullopt;
  const auto start = static_cast<Eigen::Index>(basis.index_of(0, n_r));
  const StateVector sector = state.segment(start, null.rows());
  return (null.adjoint() * sector).squaredNorm() / state.squaredNorm();
}

/// Sign changes of P_r(1) - P_r(0) over samples where both pulses exceed
/// `fraction` Omega_0. Exact zeros do not count as a sign.
inline int count_crossings(const ObservableSeries& series, const PulseParams& pulses, double fraction = 0.1) {
  int crossings = 0;
  int last_sign = 0;
  for (std::size_t i = 0; i < series.size(); ++i) {
    const double t = series.times[i];
    if (rabi_frequency(t, Transition::ge, pulses) <= fraction * pulses.omega0 ||
        rabi_frequency(t, Transition::er, pulses) <= fraction * pulses.omega0) {
      continue;
    }
    const double d = series.pr(i, 1) - series.pr(i, 0);
    const int sign = (d > 0.0) - (d < 0.0);
    if (sign == 0) continue;
    if (last_sign != 0 && sign != last_sign) ++crossings;
    last_sign = sign;
  }
  return crossings;
}

/// Swaps of the dominant sector after the initial transfer out of n_r = 0,
/// i.e. crossings - 1. Starting and ending in n_r = 0 forces an even number
/// of crossings, so the first one is the transfer itself.
inline int count_alternations(const ObservableSeries& series, const PulseParams& pulses, double fraction = 0.1) {
  return std::max(0, count_crossings(series, pulses, fraction) - 1);
}

}  // namespace superatom
