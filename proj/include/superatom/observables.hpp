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
#include <cstddef>
#include <string>
#include <vector>

#include "superatom/algebra.hpp"
#include "superatom/model.hpp"

namespace superatom {

/// Nine significant digits, '.' decimal point regardless of locale.
inline std::string format_number(double value) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), value, std::chars_format::general, 9);
  return std::string(buf, res.ptr);
}

/// Number of P_r(n) columns: n = 0, 1, 2 and the aggregate n >= 3.
inline constexpr int kRydbergBins = 4;

/// One row of sampled observables.
struct ObservableRow {
  double t = 0.0;
  std::array<double, kRydbergBins> pr{};
  double pop_e_total = 0.0;
  double purity = 0.0;
  double trace_error = 0.0;
  std::vector<double> per_atom_rr;
};

/// Time series of P_r(n), total |e> population, per-atom Rydberg
/// populations, purity and trace drift.
struct ObservableSeries {
  int n_atoms = 0;
  std::vector<double> times;
  std::vector<std::array<double, kRydbergBins>> pr_n;
  std::vector<double> pop_e_total;
  std::vector<std::vector<double>> per_atom_rr;  ///< [time][atom]
  std::vector<double> purity;
  std::vector<double> trace_error;
  /// Standard error of pr1 for trajectory averages; empty otherwise.
  std::vector<double> stderr_pr1;

  std::size_t size() const { return times.size(); }
  double pr(std::size_t row, int n) const { return pr_n[row][static_cast<std::size_t>(n)]; }
  double final_pr(int n) const { return pr_n.back()[static_cast<std::size_t>(n)]; }

  void resize(std::size_t rows, int atoms) {
    n_atoms = atoms;
    times.assign(rows, 0.0);
    pr_n.assign(rows, {});
    pop_e_total.assign(rows, 0.0);
    per_atom_rr.assign(rows, std::vector<double>(static_cast<std::size_t>(atoms), 0.0));
    purity.assign(rows, 0.0);
    trace_error.assign(rows, 0.0);
  }

  void set_row(std::size_t i, const ObservableRow& row) {
    times[i] = row.t;
    pr_n[i] = row.pr;
    pop_e_total[i] = row.pop_e_total;
    per_atom_rr[i] = row.per_atom_rr;
    purity[i] = row.purity;
    trace_error[i] = row.trace_error;
  }
};

namespace detail {
inline void accumulate_population(const BasisTable& basis, std::size_t index, double p, ObservableRow& row) {
  const int nr = basis.rydberg_count[index];
  row.pr[static_cast<std::size_t>(std::min(nr, kRydbergBins - 1))] += p;
  row.pop_e_total += p * basis.excited_count[index];
  const auto& levels = basis.levels[index];
  for (std::size_t j = 0; j < levels.size(); ++j) {
    if (levels[j] == static_cast<int>(Level::r)) row.per_atom_rr[j] += p;
  }
}
}  // namespace detail

/// Observables of a density matrix; only its diagonal and Frobenius norm are read.
inline ObservableRow observe(const BasisTable& basis, double t, const DenseMatrix& rho) {
  ObservableRow row;
  row.t = t;
  row.per_atom_rr.assign(static_cast<std::size_t>(basis.n_atoms), 0.0);
  double trace = 0.0;
  for (Eigen::Index a = 0; a < rho.rows(); ++a) {
    const double p = rho(a, a).real();
    trace += p;
    detail::accumulate_population(basis, static_cast<std::size_t>(a), p, row);
  }
  row.purity = rho.squaredNorm();
  row.trace_error = trace - 1.0;
  return row;
}

/// Observables of the normalized pure state psi / |psi|.
inline ObservableRow observe(const BasisTable& basis, double t, const StateVector& psi) {
  ObservableRow row;
  row.t = t;
  row.per_atom_rr.assign(static_cast<std::size_t>(basis.n_atoms), 0.0);
  const double norm2 = psi.squaredNorm();
  for (Eigen::Index a = 0; a < psi.size(); ++a) {
    detail::accumulate_population(basis, static_cast<std::size_t>(a), std::norm(psi(a)) / norm2, row);
  }
  row.purity = 1.0;
  row.trace_error = 0.0;
  return row;
}

}  // namespace superatom
