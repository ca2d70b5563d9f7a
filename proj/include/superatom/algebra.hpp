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
#include <complex>
#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

/// Complex linear algebra for N three-level atoms.
///
/// Basis conventions used throughout the library:
///   - single-atom level index: 0 = |g>, 1 = |e>, 2 = |r>
///   - composite index i = sum_j s_j * 3^(N-1-j), i.e. atom 0 is the
///     slowest-varying digit.
namespace superatom {

using Complex = std::complex<double>;
using DenseMatrix = Eigen::MatrixXcd;
using StateVector = Eigen::VectorXcd;

inline constexpr int kLevels = 3;
inline constexpr int kMaxAtoms = 12;

enum class Level : int { g = 0, e = 1, r = 2 };

/// Raised when a request exceeds the n_atoms <= 12 memory wall.
class CapacityError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// 3^n_atoms, after checking 1 <= n_atoms <= kMaxAtoms.
inline std::size_t hilbert_dim(int n_atoms) {
  if (n_atoms < 1) throw std::invalid_argument("n_atoms must be >= 1");
  if (n_atoms > kMaxAtoms) {
    throw CapacityError("n_atoms = " + std::to_string(n_atoms) +
                        " exceeds the supported maximum of " +
                        std::to_string(kMaxAtoms));
  }
  std::size_t dim = 1;
  for (int i = 0; i < n_atoms; ++i) dim *= kLevels;
  return dim;
}

/// Level of `atom` in composite basis state `index`.
inline int level_of(std::size_t index, int atom, int n_atoms) {
  for (int j = n_atoms - 1; j > atom; --j) index /= kLevels;
  return static_cast<int>(index % kLevels);
}

/// Number of atoms in `level` for composite basis state `index`.
inline int count_level(std::size_t index, int n_atoms, Level level) {
  int count = 0;
  for (int j = 0; j < n_atoms; ++j) {
    if (static_cast<int>(index % kLevels) == static_cast<int>(level)) ++count;
    index /= kLevels;
  }
  return count;
}

struct Entry {
  std::size_t row;
  std::size_t col;
  Complex value;
};

/// Square complex operator in canonical coordinate-list form: entries are
/// sorted by (row, col), duplicates summed, exact zeros dropped.
class OperatorMatrix {
 public:
  explicit OperatorMatrix(std::size_t dim) : dim_(dim) {
    if (dim == 0) throw std::invalid_argument("operator dimension must be >= 1");
  }

  OperatorMatrix(std::size_t dim, std::vector<Entry> entries) : dim_(dim) {
    if (dim == 0) throw std::invalid_argument("operator dimension must be >= 1");
    for (const auto& e : entries) {
      if (e.row >= dim || e.col >= dim) {
        throw std::invalid_argument("operator entry (" + std::to_string(e.row) +
                                    ", " + std::to_string(e.col) +
                                    ") outside dimension " + std::to_string(dim));
      }
    }
    std::sort(entries.begin(), entries.end(), [](const Entry& a, const Entry& b) {
      return a.row != b.row ? a.row < b.row : a.col < b.col;
    });
    entries_.reserve(entries.size());
    for (const auto& e : entries) {
      if (!entries_.empty() && entries_.back().row == e.row &&
          entries_.back().col == e.col) {
        entries_.back().value += e.value;
      } else {
        entries_.push_back(e);
      }
    }
    std::erase_if(entries_, [](const Entry& e) { return e.value == Complex{}; });
  }

  static OperatorMatrix identity(std::size_t dim) {
    std::vector<Entry> entries;
    entries.reserve(dim);
    for (std::size_t i = 0; i < dim; ++i) entries.push_back({i, i, 1.0});
    return {dim, std::move(entries)};
  }

  static OperatorMatrix from_dense(const DenseMatrix& m) {
    if (m.rows() != m.cols() || m.rows() == 0) {
      throw std::invalid_argument("from_dense requires a non-empty square matrix");
    }
    std::vector<Entry> entries;
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      for (Eigen::Index r = 0; r < m.rows(); ++r) {
        if (m(r, c) != Complex{}) {
          entries.push_back({static_cast<std::size_t>(r), static_cast<std::size_t>(c), m(r, c)});
        }
      }
    }
    return {static_cast<std::size_t>(m.rows()), std::move(entries)};
  }

  std::size_t dim() const { return dim_; }
  std::size_t nnz() const { return entries_.size(); }
  std::span<const Entry> entries() const { return entries_; }

  Complex at(std::size_t row, std::size_t col) const {
    auto it = std::lower_bound(entries_.begin(), entries_.end(), std::pair{row, col},
                               [](const Entry& e, const std::pair<std::size_t, std::size_t>& key) {
                                 return e.row != key.first ? e.row < key.first
                                                           : e.col < key.second;
                               });
    if (it != entries_.end() && it->row == row && it->col == col) return it->value;
    return {};
  }

  DenseMatrix to_dense() const {
    DenseMatrix m = DenseMatrix::Zero(static_cast<Eigen::Index>(dim_),
                                      static_cast<Eigen::Index>(dim_));
    for (const auto& e : entries_) {
      m(static_cast<Eigen::Index>(e.row), static_cast<Eigen::Index>(e.col)) = e.value;
    }
    return m;
  }

  OperatorMatrix adjoint() const {
    std::vector<Entry> entries;
    entries.reserve(entries_.size());
    for (const auto& e : entries_) entries.push_back({e.col, e.row, std::conj(e.value)});
    return {dim_, std::move(entries)};
  }

  /// Max-norm of A - A^dagger.
  double hermiticity_error() const {
    double worst = 0.0;
    for (const auto& e : entries_) {
      worst = std::max(worst, std::abs(e.value - std::conj(at(e.col, e.row))));
    }
    return worst;
  }

  bool is_hermitian(double tol = 1e-10) const { return hermiticity_error() <= tol; }

  bool is_diagonal() const {
    return std::all_of(entries_.begin(), entries_.end(),
                       [](const Entry& e) { return e.row == e.col; });
  }

  Complex trace() const {
    Complex t{};
    for (const auto& e : entries_) {
      if (e.row == e.col) t += e.value;
    }
    return t;
  }

  /// Max-norm of the entrywise difference.
  double max_abs_diff(const OperatorMatrix& other) const {
    require_same_dim(other);
    double worst = 0.0;
    for (const auto& e : entries_) worst = std::max(worst, std::abs(e.value - other.at(e.row, e.col)));
    for (const auto& e : other.entries_) worst = std::max(worst, std::abs(e.value - at(e.row, e.col)));
    return worst;
  }

  friend OperatorMatrix operator+(const OperatorMatrix& a, const OperatorMatrix& b) {
    a.require_same_dim(b);
    std::vector<Entry> entries(a.entries_);
    entries.insert(entries.end(), b.entries_.begin(), b.entries_.end());
    return {a.dim_, std::move(entries)};
  }

  friend OperatorMatrix operator-(const OperatorMatrix& a, const OperatorMatrix& b) {
    return a + b * Complex{-1.0};
  }

  friend OperatorMatrix operator*(const OperatorMatrix& a, Complex s) {
    std::vector<Entry> entries(a.entries_);
    for (auto& e : entries) e.value *= s;
    return {a.dim_, std::move(entries)};
  }
  friend OperatorMatrix operator*(Complex s, const OperatorMatrix& a) { return a * s; }

  /// Sparse-sparse product.
  friend OperatorMatrix operator*(const OperatorMatrix& a, const OperatorMatrix& b) {
    a.require_same_dim(b);
    // b is sorted by row, so the row ranges are contiguous.
    std::vector<std::size_t> row_start(b.dim_ + 1, 0);
    for (const auto& e : b.entries_) ++row_start[e.row + 1];
    for (std::size_t i = 0; i < b.dim_; ++i) row_start[i + 1] += row_start[i];
    std::vector<Entry> entries;
    for (const auto& ea : a.entries_) {
      for (std::size_t k = row_start[ea.col]; k < row_start[ea.col + 1]; ++k) {
        const auto& eb = b.entries_[k];
        entries.push_back({ea.row, eb.col, ea.value * eb.value});
      }
    }
    return {a.dim_, std::move(entries)};
  }

  /// y = A x
  StateVector apply(const StateVector& x) const {
    if (static_cast<std::size_t>(x.size()) != dim_) {
      throw std::invalid_argument("dimension mismatch in OperatorMatrix::apply");
    }
    StateVector y = StateVector::Zero(x.size());
    for (const auto& e : entries_) {
      y(static_cast<Eigen::Index>(e.row)) += e.value * x(static_cast<Eigen::Index>(e.col));
    }
    return y;
  }

 private:
  void require_same_dim(const OperatorMatrix& other) const {
    if (other.dim_ != dim_) {
      throw std::invalid_argument("operator dimension mismatch: " + std::to_string(dim_) +
                                  " vs " + std::to_string(other.dim_));
    }
  }

  std::size_t dim_;
  std::vector<Entry> entries_;
};

/// |mu><nu| on a single three-level atom.
inline OperatorMatrix transition(Level mu, Level nu) {
  return {kLevels, {{static_cast<std::size_t>(mu), static_cast<std::size_t>(nu), 1.0}}};
}

/// I (x) ... (x) local_op (x) ... (x) I with local_op acting on `atom_index`.
inline OperatorMatrix kron_embed(const OperatorMatrix& local_op, int atom_index, int n_atoms) {
  if (local_op.dim() != static_cast<std::size_t>(kLevels)) {
    throw std::invalid_argument("kron_embed expects a 3x3 local operator, got dimension " +
                                std::to_string(local_op.dim()));
  }
  const std::size_t dim = hilbert_dim(n_atoms);
  if (atom_index < 0 || atom_index >= n_atoms) {
    throw std::invalid_argument("atom index " + std::to_string(atom_index) +
                                " out of range for " + std::to_string(n_atoms) + " atoms");
  }
  std::size_t stride = 1;
  for (int j = n_atoms - 1; j > atom_index; --j) stride *= kLevels;
  const std::size_t outer = dim / (stride * kLevels);

  std::vector<Entry> entries;
  entries.reserve(local_op.nnz() * outer * stride);
  for (std::size_t hi = 0; hi < outer; ++hi) {
    for (const auto& e : local_op.entries()) {
      for (std::size_t lo = 0; lo < stride; ++lo) {
        const std::size_t base = hi * stride * kLevels + lo;
        entries.push_back({base + e.row * stride, base + e.col * stride, e.value});
      }
    }
  }
  return {dim, std::move(entries)};
}

inline OperatorMatrix embedded_transition(Level mu, Level nu, int atom_index, int n_atoms) {
  return kron_embed(transition(mu, nu), atom_index, n_atoms);
}

/// Hermiticity, trace and positivity figures of a candidate density matrix.
struct DensityDiagnostics {
  double trace_error = 0.0;        ///< |tr(rho) - 1|
  double hermiticity_error = 0.0;  ///< max |rho_ij - conj(rho_ji)|
  double min_eigenvalue = 0.0;
};

inline double hermiticity_error(const DenseMatrix& m) {
  return (m - m.adjoint()).cwiseAbs().maxCoeff();
}

inline DensityDiagnostics diagnose(const DenseMatrix& rho, bool with_spectrum = true) {
  DensityDiagnostics d;
  d.trace_error = std::abs(rho.trace() - Complex{1.0});
  d.hermiticity_error = hermiticity_error(rho);
  if (with_spectrum) {
    const DenseMatrix herm = 0.5 * (rho + rho.adjoint());
    Eigen::SelfAdjointEigenSolver<DenseMatrix> solver(herm, Eigen::EigenvaluesOnly);
    d.min_eigenvalue = solver.eigenvalues().minCoeff();
  }
  return d;
}

/// Cheap positivity test: rho + eps*I admits a Cholesky factorization.
inline bool is_positive_within(const DenseMatrix& rho, double eps) {
  DenseMatrix shifted = 0.5 * (rho + rho.adjoint());
  shifted.diagonal().array() += eps;
  Eigen::LLT<DenseMatrix> llt(shifted);
  return llt.info() == Eigen::Success;
}

/// Hermitian, unit-trace, positive semidefinite state.
class DensityMatrix {
 public:
  static constexpr double kTraceTol = 1e-8;
  static constexpr double kHermitianTol = 1e-10;
  static constexpr double kPositivityTol = 1e-8;

  explicit DensityMatrix(DenseMatrix elements) : elements_(std::move(elements)) {
    if (elements_.rows() != elements_.cols() || elements_.rows() == 0) {
      throw std::invalid_argument("density matrix must be square and non-empty");
    }
    const auto d = diagnose(elements_);
    if (d.trace_error > kTraceTol) {
      throw std::invalid_argument("density matrix trace deviates from 1 by " +
                                  std::to_string(d.trace_error));
    }
    if (d.hermiticity_error > kHermitianTol) {
      throw std::invalid_argument("density matrix is not Hermitian (error " +
                                  std::to_string(d.hermiticity_error) + ")");
    }
    if (d.min_eigenvalue < -kPositivityTol) {
      throw std::invalid_argument("density matrix has negative eigenvalue " +
                                  std::to_string(d.min_eigenvalue));
    }
  }

  static DensityMatrix pure(const StateVector& psi) {
    const double norm = psi.norm();
    if (norm == 0.0) throw std::invalid_argument("cannot build a density matrix from a zero vector");
    const StateVector v = psi / norm;
    return DensityMatrix(v * v.adjoint());
  }

  static DensityMatrix maximally_mixed(std::size_t dim) {
    const auto n = static_cast<Eigen::Index>(dim);
    return DensityMatrix(DenseMatrix::Identity(n, n) / static_cast<double>(dim));
  }

  /// Wraps without validation; used for states produced by trusted integrators.
  static DensityMatrix unchecked(DenseMatrix elements) {
    DensityMatrix rho;
    rho.elements_ = std::move(elements);
    return rho;
  }

  std::size_t dim() const { return static_cast<std::size_t>(elements_.rows()); }
  const DenseMatrix& matrix() const { return elements_; }
  double purity() const { return (elements_ * elements_).trace().real(); }

 private:
  DensityMatrix() = default;
  DenseMatrix elements_;
};

/// Product basis state with every atom in `level`.
inline StateVector uniform_product_state(int n_atoms, Level level) {
  const std::size_t dim = hilbert_dim(n_atoms);
  std::size_t index = 0;
  for (int j = 0; j < n_atoms; ++j) index = index * kLevels + static_cast<std::size_t>(level);
  StateVector psi = StateVector::Zero(static_cast<Eigen::Index>(dim));
  psi(static_cast<Eigen::Index>(index)) = 1.0;
  return psi;
}

enum class Side { left, right, sandwich };

/// A rho, rho A, or A rho A^dagger with sparse traversal of A.
inline DenseMatrix op_apply(const OperatorMatrix& op, const DenseMatrix& rho, Side side) {
  if (rho.rows() != rho.cols() || static_cast<std::size_t>(rho.rows()) != op.dim()) {
    throw std::invalid_argument("op_apply dimension mismatch: operator " +
                                std::to_string(op.dim()) + ", matrix " +
                                std::to_string(rho.rows()) + "x" + std::to_string(rho.cols()));
  }
  const auto n = rho.rows();
  DenseMatrix out = DenseMatrix::Zero(n, n);
  switch (side) {
    case Side::left:
      // (A rho)(i, :) += A_ik rho(k, :)
      for (const auto& e : op.entries()) {
        out.row(static_cast<Eigen::Index>(e.row)) += e.value * rho.row(static_cast<Eigen::Index>(e.col));
      }
      break;
    case Side::right:
      // (rho A)(:, j) += rho(:, k) A_kj
      for (const auto& e : op.entries()) {
        out.col(static_cast<Eigen::Index>(e.col)) += rho.col(static_cast<Eigen::Index>(e.row)) * e.value;
      }
      break;
    case Side::sandwich:
      // (A rho A^dag)(a, b) = sum A_ak rho_kl conj(A_bl)
      for (const auto& eb : op.entries()) {
        const Complex cb = std::conj(eb.value);
        const auto b = static_cast<Eigen::Index>(eb.row);
        const auto l = static_cast<Eigen::Index>(eb.col);
        for (const auto& ea : op.entries()) {
          out(static_cast<Eigen::Index>(ea.row), b) += ea.value * rho(static_cast<Eigen::Index>(ea.col), l) * cb;
        }
      }
      break;
  }
  return out;
}

namespace detail {
inline constexpr double kImaginaryResidualTol = 1e-9;

inline double require_real(Complex value) {
  if (std::abs(value.imag()) > kImaginaryResidualTol) {
    throw std::domain_error("expectation value has imaginary residual " +
                            std::to_string(value.imag()));
  }
  return value.real();
}

inline void require_hermitian(const OperatorMatrix& op) {
  const double err = op.hermiticity_error();
  if (err > 1e-10) {
    throw std::domain_error("real expectation requested for non-Hermitian operator (error " +
                            std::to_string(err) + ")");
  }
}
}  // namespace detail

/// tr(A rho), without the Hermiticity requirement.
inline Complex trace_product(const OperatorMatrix& op, const DenseMatrix& rho) {
  if (rho.rows() != rho.cols() || static_cast<std::size_t>(rho.rows()) != op.dim()) {
    throw std::invalid_argument("trace_product dimension mismatch");
  }
  Complex t{};
  for (const auto& e : op.entries()) {
    t += e.value * rho(static_cast<Eigen::Index>(e.col), static_cast<Eigen::Index>(e.row));
  }
  return t;
}

inline double expectation(const OperatorMatrix& op, const DenseMatrix& rho) {
  detail::require_hermitian(op);
  return detail::require_real(trace_product(op, rho));
}

inline double expectation(const OperatorMatrix& op, const DensityMatrix& rho) {
  return expectation(op, rho.matrix());
}

/// <psi|A|psi> / <psi|psi>
inline double expectation(const OperatorMatrix& op, const StateVector& psi) {
  if (static_cast<std::size_t>(psi.size()) != op.dim()) {
    throw std::invalid_argument("expectation dimension mismatch");
  }
  detail::require_hermitian(op);
  const double norm2 = psi.squaredNorm();
  if (norm2 == 0.0) throw std::invalid_argument("expectation of a zero vector");
  return detail::require_real(psi.dot(op.apply(psi)) / norm2);
}

}  // namespace superatom
