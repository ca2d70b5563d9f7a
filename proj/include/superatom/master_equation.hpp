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
#include <functional>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <vector>

#include "superatom/algebra.hpp"
#include "superatom/integrator.hpp"
#include "superatom/model.hpp"
#include "superatom/observables.hpp"
#include "superatom/symmetric.hpp"

namespace superatom {

struct IntegratorSettings {
  Method method = Method::adaptive_rk45;
  double rtol = 1e-8;
  double atol = 1e-11;
  double fixed_dt = 1e-3;  ///< us, fixed_rk4 only
  int sample_count = 600;
  double trace_drift_tol = 1e-7;
  /// Integrate on permutation orbits when the model and rho(0) allow it.
  bool use_symmetry = true;

  void validate() const {
    if (!(rtol > 0.0) || !(atol > 0.0)) throw std::invalid_argument("tolerances must be positive");
    if (!(fixed_dt > 0.0)) throw std::invalid_argument("fixed_dt must be positive");
    if (sample_count < 2) throw std::invalid_argument("sample_count must be >= 2");
    if (!(trace_drift_tol > 0.0)) throw std::invalid_argument("trace_drift_tol must be positive");
  }

  /// fixed_dt * max(Delta, Gamma_eg, Omega_0) < 0.5 for the fixed-step method.
  void validate_for(const ModelConfig& cfg) const {
    validate();
    if (method != Method::fixed_rk4) return;
    double fastest = std::max(cfg.rates.gamma_eg, cfg.pulses.omega0 *
                                                      std::max({1.0, std::abs(cfg.pulses.ge_scale),
                                                                std::abs(cfg.pulses.er_scale)}));
    if (cfg.n_atoms > 1 && !cfg.interaction.is_perfect_blockade()) {
      fastest = std::max(fastest, interaction_matrix(cfg.interaction, cfg.n_atoms).cwiseAbs().maxCoeff());
    }
    if (fixed_dt * fastest >= 0.5) {
      std::ostringstream msg;
      msg << "fixed_dt = " << fixed_dt << " us is too coarse: fixed_dt * max rate = "
          << fixed_dt * fastest << " (must be < 0.5)";
      throw std::invalid_argument(msg.str());
    }
  }

  GridSettings grid() const {
    GridSettings g;
    g.method = method;
    g.rtol = rtol;
    g.atol = atol;
    g.fixed_dt = fixed_dt;
    return g;
  }
};

/// Right-hand side of the Lindblad equation split for the Lawson steppers.
///
/// The time-independent diagonal interaction is carried by `rotate`; the
/// remaining generator is F(rho) = -i (O rho - rho O^dag) + sum_k c_k rho c_k^dag
/// with O = H_drive(t) - (i/2) sum_k c_k^dag c_k. `derivative` assumes a
/// Hermitian argument and uses rho O^dag = (O rho)^dag.
class LindbladProblem {
 public:
  using State = DenseMatrix;

  explicit LindbladProblem(const Model& model) : model_(model), dim_(model.dim()) {
    const auto n = static_cast<Eigen::Index>(dim_);
    phase_.setZero(n);
    for (const auto& e : model.interaction().entries()) phase_(static_cast<Eigen::Index>(e.row)) = e.value.real();
    has_phase_ = phase_.cwiseAbs().maxCoeff() > 0.0;

    // Columns of O^dag = Omega_ge X_ge + Omega_er X_er + (i/2) G.
    OperatorMatrix loss(dim_);
    for (const auto& ch : model.channels()) {
      loss = loss + ch.op.adjoint() * ch.op;
      if (ch.op.is_diagonal()) {
        Eigen::VectorXcd d = Eigen::VectorXcd::Zero(n);
        for (const auto& e : ch.op.entries()) d(static_cast<Eigen::Index>(e.row)) = e.value;
        diagonal_channels_.push_back(std::move(d));
      } else {
        sandwich_channels_.push_back(to_sandwich_terms(ch.op));
      }
    }
    std::vector<std::vector<ColumnTerm>> columns(dim_);
    for (const auto& e : model.drive_ge().entries()) columns[e.col].push_back({e.row, kGe, e.value});
    for (const auto& e : model.drive_er().entries()) columns[e.col].push_back({e.row, kEr, e.value});
    for (const auto& e : loss.entries()) columns[e.col].push_back({e.row, kStatic, Complex{0.0, 0.5} * e.value});
    col_start_.assign(dim_ + 1, 0);
    for (std::size_t j = 0; j < dim_; ++j) {
      col_start_[j + 1] = col_start_[j] + columns[j].size();
      terms_.insert(terms_.end(), columns[j].begin(), columns[j].end());
    }

    if (!diagonal_channels_.empty()) {
      dephasing_weight_ = DenseMatrix::Zero(n, n);
      for (const auto& d : diagonal_channels_) dephasing_weight_ += d * d.adjoint();
    }
  }

  /// Valid for Hermitian rho. Builds M = i rho O^dag + (jump gain on the
  /// strict lower triangle, half on the diagonal) and returns M + M^dag.
  /// The output is Hermitian whatever rho is, so an anti-Hermitian rounding
  /// remainder is never fed back (with dephasing it would otherwise grow
  /// exponentially).
  void derivative(double t, const DenseMatrix& rho, DenseMatrix& out) const {
    const auto n = static_cast<Eigen::Index>(dim_);
    const Complex coef[3] = {Complex{0.0, 1.0}, Complex{0.0, model_.omega_ge(t)}, Complex{0.0, model_.omega_er(t)}};
    weights_.resize(terms_.size());
    for (std::size_t p = 0; p < terms_.size(); ++p) weights_[p] = terms_[p].value * coef[terms_[p].kind];
    scratch_.resize(n, n);
    for (std::size_t j = 0; j < dim_; ++j) {
      auto yj = scratch_.col(static_cast<Eigen::Index>(j));
      yj.setZero();
      for (std::size_t p = col_start_[j]; p < col_start_[j + 1]; ++p) {
        const Complex w = weights_[p];
        if (w != Complex{}) yj.noalias() += w * rho.col(static_cast<Eigen::Index>(terms_[p].row));
      }
    }
    Complex* m_data = scratch_.data();
    const Complex* rho_data = rho.data();
    if (!diagonal_channels_.empty()) {
      for (Eigen::Index j = 0; j < n; ++j) {
        scratch_.col(j).tail(n - j - 1) +=
            dephasing_weight_.col(j).tail(n - j - 1).cwiseProduct(rho.col(j).tail(n - j - 1));
        m_data[j * n + j] += 0.5 * dephasing_weight_(j, j) * rho_data[j * n + j];
      }
    }
    // M(a, b) += v_a conj(v_b) rho(k_a, k_b) for a > b, and half that for a == b
    for (const auto& c : sandwich_channels_) {
      const std::size_t m = c.rows.size();
      const int* rows = c.rows.data();
      const int* cols = c.cols.data();
      for (std::size_t q = 0; q < m; ++q) {
        Complex* m_col = m_data + static_cast<Eigen::Index>(rows[q]) * n;
        const Complex* rho_col = rho_data + static_cast<Eigen::Index>(cols[q]) * n;
        const std::size_t diag_end = c.diag_end[q];
        if (c.uniform) {
          auto* o = reinterpret_cast<double*>(m_col);
          const auto* r = reinterpret_cast<const double*>(rho_col);
          const double g = c.weight;
          for (std::size_t p = diag_end; p < m; ++p) {
            o[2 * rows[p]] += g * r[2 * cols[p]];
            o[2 * rows[p] + 1] += g * r[2 * cols[p] + 1];
          }
        } else {
          const Complex cb = std::conj(c.values[q]);
          for (std::size_t p = diag_end; p < m; ++p) m_col[rows[p]] += (c.values[p] * cb) * rho_col[cols[p]];
        }
        const Complex cb = std::conj(c.values[q]);
        for (std::size_t p = c.diag_begin[q]; p < diag_end; ++p) {
          m_col[rows[p]] += 0.5 * (c.values[p] * cb) * rho_col[cols[p]];
        }
      }
    }
    out.resize(n, n);
    out.noalias() = scratch_ + scratch_.adjoint();
  }

  /// rho_ab <- exp(-i (V_a - V_b) tau) rho_ab
  void rotate(double tau, DenseMatrix& rho) const {
    if (!has_phase_) return;
    const Eigen::VectorXcd u = (Complex{0.0, -tau} * phase_.cast<Complex>()).array().exp();
    for (Eigen::Index b = 0; b < rho.cols(); ++b) {
      rho.col(b) = rho.col(b).cwiseProduct(u) * std::conj(u(b));
    }
  }

  /// Full generator, rotation part included.
  DenseMatrix full_derivative(double t, const DenseMatrix& rho) const {
    DenseMatrix out;
    derivative(t, rho, out);
    const Eigen::VectorXcd v = phase_.cast<Complex>();
    out += Complex{0.0, -1.0} * (v.asDiagonal() * rho - rho * v.asDiagonal());
    return out;
  }

  const Model& model() const { return model_; }

 private:
  enum Kind : int { kStatic = 0, kGe = 1, kEr = 2 };
  struct ColumnTerm {
    std::size_t row;
    int kind;
    Complex value;
  };

  /// Collapse operator entries in structure-of-arrays form. `uniform` marks
  /// operators whose entries share one value v, with weight = |v|^2.
  struct SandwichTerms {
    std::vector<int> rows;
    std::vector<int> cols;
    std::vector<Complex> values;
    std::vector<std::size_t> diag_begin;  ///< entries p sharing row q: [diag_begin, diag_end)
    std::vector<std::size_t> diag_end;
    bool uniform = true;
    double weight = 0.0;
  };

  static SandwichTerms to_sandwich_terms(const OperatorMatrix& op) {
    SandwichTerms t;
    for (const auto& e : op.entries()) {
      t.rows.push_back(static_cast<int>(e.row));
      t.cols.push_back(static_cast<int>(e.col));
      t.values.push_back(e.value);
    }
    // entries come sorted by row
    for (std::size_t q = 0; q < t.rows.size(); ++q) {
      const auto range = std::equal_range(t.rows.begin(), t.rows.end(), t.rows[q]);
      t.diag_begin.push_back(static_cast<std::size_t>(range.first - t.rows.begin()));
      t.diag_end.push_back(static_cast<std::size_t>(range.second - t.rows.begin()));
    }
    if (!t.values.empty()) {
      const Complex v0 = t.values.front();
      t.uniform = v0.imag() == 0.0 &&
                  std::all_of(t.values.begin(), t.values.end(), [&](Complex v) { return v == v0; });
      t.weight = std::norm(v0);
    }
    return t;
  }

  const Model& model_;
  std::size_t dim_;
  Eigen::VectorXd phase_;
  bool has_phase_ = false;
  std::vector<std::size_t> col_start_;
  std::vector<ColumnTerm> terms_;
  std::vector<Eigen::VectorXcd> diagonal_channels_;
  DenseMatrix dephasing_weight_;
  std::vector<SandwichTerms> sandwich_channels_;
  mutable DenseMatrix scratch_;
  mutable std::vector<Complex> weights_;
};

/// -i[H(t), rho] + sum_k (c_k rho c_k^dag - {c_k^dag c_k, rho}/2), evaluated
/// directly through op_apply for an arbitrary square rho.
inline DenseMatrix lindblad_rhs(const DenseMatrix& rho, double t, const Model& model) {
  if (static_cast<std::size_t>(rho.rows()) != model.dim() || rho.rows() != rho.cols()) {
    throw std::invalid_argument("lindblad_rhs dimension mismatch");
  }
  const OperatorMatrix h = model.hamiltonian(t);
  DenseMatrix out = Complex{0.0, -1.0} * (op_apply(h, rho, Side::left) - op_apply(h, rho, Side::right));
  for (const auto& ch : model.channels()) {
    const OperatorMatrix cdc = ch.op.adjoint() * ch.op;
    out += op_apply(ch.op, rho, Side::sandwich) -
           0.5 * (op_apply(cdc, rho, Side::left) + op_apply(cdc, rho, Side::right));
  }
  return out;
}

inline DenseMatrix lindblad_rhs(const DensityMatrix& rho, double t, const Model& model) {
  return lindblad_rhs(rho.matrix(), t, model);
}

/// All atoms in |g>.
inline DensityMatrix ground_state(int n_atoms) {
  return DensityMatrix::pure(uniform_product_state(n_atoms, Level::g));
}

using DensityObserver = std::function<void(std::size_t index, double t, const DenseMatrix& rho)>;

struct MasterEquationResult {
  ObservableSeries series;
  DensityMatrix final_state;
  StepStats stats;
};

/// Integrates the master equation from rho0 over [0, t_end] and samples
/// observables on a uniform grid. Throws IntegrationError when the final
/// trace drifts by more than settings.trace_drift_tol.
inline MasterEquationResult integrate(const DensityMatrix& rho0, const Model& model,
                                      const IntegratorSettings& settings,
                                      const DensityObserver& observer = {}) {
  settings.validate_for(model.config());
  if (rho0.dim() != model.dim()) throw std::invalid_argument("initial state dimension mismatch");
  const auto times = uniform_grid(model.config().pulses.t_end, settings.sample_count);

  ObservableSeries series;
  series.resize(times.size(), model.n_atoms());
  auto sample = [&](std::size_t i, double t, const DenseMatrix& state) {
    series.set_row(i, observe(model.basis(), t, state));
    if (observer) observer(i, t, state);
  };
  DenseMatrix rho;
  StepStats stats;
  std::optional<PairOrbits> orbits;
  if (settings.use_symmetry && model.n_atoms() > 1 && is_permutation_symmetric(model)) {
    orbits.emplace(model.n_atoms());
    if (orbits->asymmetry(rho0.matrix()) > 0.0) orbits.reset();
  }
  if (orbits) {
    const SymmetricLindbladProblem problem(model, *orbits);
    Eigen::VectorXcd x = orbits->restrict_to(rho0.matrix());
    stats = integrate_on_grid(problem, x, times, settings.grid(),
                              [&](std::size_t i, double t, const Eigen::VectorXcd& state) {
                                orbits->expand(state, rho);
                                sample(i, t, rho);
                              });
  } else {
    const LindbladProblem problem(model);
    rho = rho0.matrix();
    stats = integrate_on_grid(problem, rho, times, settings.grid(), sample);
  }
  const double drift = std::abs(rho.trace().real() - 1.0);
  if (!(drift <= settings.trace_drift_tol)) {
    std::ostringstream msg;
    msg << "trace drift " << drift << " exceeds " << settings.trace_drift_tol << " at t_end = "
        << times.back() << " us after " << stats.accepted << " accepted / " << stats.rejected
        << " rejected steps";
    throw IntegrationError(msg.str(), times.back(), drift);
  }
  return {std::move(series), DensityMatrix::unchecked(std::move(rho)), stats};
}

/// (1/N) sum_j sigma_rr^j prod_{i != j} sigma_gg^i
inline DensityMatrix single_excitation_mixture(int n_atoms) {
  const std::size_t dim = hilbert_dim(n_atoms);
  DenseMatrix m = DenseMatrix::Zero(static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(dim));
  for (int j = 0; j < n_atoms; ++j) {
    std::size_t index = 0;
    for (int i = 0; i < n_atoms; ++i) index = index * kLevels + (i == j ? 2u : 0u);
    m(static_cast<Eigen::Index>(index), static_cast<Eigen::Index>(index)) = 1.0 / n_atoms;
  }
  return DensityMatrix(std::move(m));
}

struct MixedStateOverlap {
  double overlap = 0.0;           ///< tr(rho rho_mix) / tr(rho_mix^2)
  double uhlmann_fidelity = 0.0;  ///< (tr sqrt(sqrt(rho_mix) rho sqrt(rho_mix)))^2
};

/// Overlap of a final state with the incoherent single-excitation mixture.
inline MixedStateOverlap final_state_fidelity_mixed(const DensityMatrix& rho, int n_atoms) {
  const DensityMatrix mix = single_excitation_mixture(n_atoms);
  if (rho.dim() != mix.dim()) throw std::invalid_argument("state dimension does not match n_atoms");
  // rho_mix is diagonal with support on N basis states of weight 1/N.
  std::vector<Eigen::Index> support;
  for (Eigen::Index a = 0; a < mix.matrix().rows(); ++a) {
    if (mix.matrix()(a, a).real() > 0.0) support.push_back(a);
  }
  const double weight = 1.0 / n_atoms;
  MixedStateOverlap result;
  double tr_mix_rho = 0.0;
  const auto k = static_cast<Eigen::Index>(support.size());
  DenseMatrix reduced(k, k);
  for (Eigen::Index p = 0; p < k; ++p) {
    tr_mix_rho += weight * rho.matrix()(support[p], support[p]).real();
    for (Eigen::Index q = 0; q < k; ++q) reduced(p, q) = weight * rho.matrix()(support[p], support[q]);
  }
  result.overlap = tr_mix_rho / (weight * weight * k);
  Eigen::SelfAdjointEigenSolver<DenseMatrix> solver(0.5 * (reduced + reduced.adjoint()), Eigen::EigenvaluesOnly);
  double root_sum = 0.0;
  for (Eigen::Index p = 0; p < k; ++p) root_sum += std::sqrt(std::max(0.0, solver.eigenvalues()(p)));
  result.uhlmann_fidelity = root_sum * root_sum;
  return result;
}

}  // namespace superatom
