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
#include <cstdint>
#include <stdexcept>
#include <unordered_map>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include "superatom/algebra.hpp"
#include "superatom/model.hpp"

/// Master equation restricted to permutation-invariant density matrices.
///
/// When every atom sees the same drive, rates and pair shift, the generator
/// commutes with atom permutations, so rho(t) stays invariant if rho(0) is.
/// Such a rho is fixed by one value per orbit of index pairs (a, b): the
/// orbit is the multiset of per-atom digit pairs (a_i, b_i), of which there
/// are C(N + 8, 8). The equation closes exactly on these values.
namespace superatom {

class PairOrbits {
 public:
  static constexpr int kSymbols = kLevels * kLevels;

  explicit PairOrbits(int n_atoms) : n_(n_atoms), dim_(hilbert_dim(n_atoms)) {
    if (n_atoms < 1) throw std::invalid_argument("n_atoms must be >= 1");
    std::array<int, kSymbols> counts{};
    enumerate(counts, 0, n_atoms);
  }

  int n_atoms() const { return n_; }
  std::size_t size() const { return reps_.size(); }
  /// Representative (row, col) of orbit k.
  const std::pair<std::size_t, std::size_t>& rep(std::size_t k) const { return reps_[k]; }

  std::size_t orbit_of(std::size_t a, std::size_t b) const { return index_.at(key(a, b)); }

  /// Orbit index of every element, column-major; built on first use.
  const std::vector<std::int32_t>& element_map() const {
    if (map_.empty()) {
      map_.resize(dim_ * dim_);
      for (std::size_t b = 0; b < dim_; ++b) {
        for (std::size_t a = 0; a < dim_; ++a) map_[b * dim_ + a] = static_cast<std::int32_t>(orbit_of(a, b));
      }
    }
    return map_;
  }

  void expand(const Eigen::VectorXcd& x, DenseMatrix& rho) const {
    const auto& map = element_map();
    const auto n = static_cast<Eigen::Index>(dim_);
    rho.resize(n, n);
    Complex* out = rho.data();
    for (std::size_t i = 0; i < map.size(); ++i) out[i] = x(map[i]);
  }

  Eigen::VectorXcd restrict_to(const DenseMatrix& rho) const {
    Eigen::VectorXcd x(static_cast<Eigen::Index>(size()));
    for (std::size_t k = 0; k < size(); ++k) {
      x(static_cast<Eigen::Index>(k)) =
          rho(static_cast<Eigen::Index>(reps_[k].first), static_cast<Eigen::Index>(reps_[k].second));
    }
    return x;
  }

  /// max |rho_ab - rho_rep(orbit(a, b))|
  double asymmetry(const DenseMatrix& rho) const {
    const Eigen::VectorXcd x = restrict_to(rho);
    const auto& map = element_map();
    const Complex* in = rho.data();
    double worst = 0.0;
    for (std::size_t i = 0; i < map.size(); ++i) worst = std::max(worst, std::abs(in[i] - x(map[i])));
    return worst;
  }

 private:
  void enumerate(std::array<int, kSymbols>& counts, int symbol, int left) {
    if (symbol == kSymbols - 1) {
      counts[symbol] = left;
      std::size_t a = 0, b = 0;
      for (int s = 0; s < kSymbols; ++s) {
        for (int c = 0; c < counts[s]; ++c) {
          a = a * kLevels + static_cast<std::size_t>(s / kLevels);
          b = b * kLevels + static_cast<std::size_t>(s % kLevels);
        }
      }
      index_.emplace(encode(counts), reps_.size());
      reps_.emplace_back(a, b);
      return;
    }
    for (int c = left; c >= 0; --c) {
      counts[symbol] = c;
      enumerate(counts, symbol + 1, left - c);
    }
    counts[symbol] = 0;
  }

  std::uint64_t encode(const std::array<int, kSymbols>& counts) const {
    std::uint64_t k = 0;
    for (int s = 0; s < kSymbols; ++s) k = k * static_cast<std::uint64_t>(n_ + 1) + static_cast<std::uint64_t>(counts[s]);
    return k;
  }

  std::uint64_t key(std::size_t a, std::size_t b) const {
    std::array<int, kSymbols> counts{};
    for (int i = 0; i < n_; ++i) {
      ++counts[(a % kLevels) * kLevels + b % kLevels];
      a /= kLevels;
      b /= kLevels;
    }
    return encode(counts);
  }

  int n_;
  std::size_t dim_;
  std::vector<std::pair<std::size_t, std::size_t>> reps_;
  std::unordered_map<std::uint64_t, std::size_t> index_;
  mutable std::vector<std::int32_t> map_;
};

/// True when the generator commutes with every atom permutation. Drives and
/// rates are identical per atom by construction; the pair shifts must be too.
inline bool is_permutation_symmetric(const Model& model) {
  const auto& spec = model.config().interaction;
  if (spec.is_perfect_blockade() || std::holds_alternative<UniformShift>(spec.mode)) return true;
  const int n = model.n_atoms();
  if (n < 3) return true;
  const Eigen::MatrixXd delta = interaction_matrix(spec, n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      if (i != j && delta(i, j) != delta(0, 1)) return false;
    }
  }
  return true;
}

/// Lawson split of the orbit-space equation: the pair-shift phase is the
/// rotation, and F(t) = L0 + Omega_ge(t) L_ge + Omega_er(t) L_er is sparse.
class SymmetricLindbladProblem {
 public:
  using State = Eigen::VectorXcd;
  using Sparse = Eigen::SparseMatrix<Complex, Eigen::RowMajor>;

  SymmetricLindbladProblem(const Model& model, const PairOrbits& orbits) : model_(model) {
    const std::size_t dim = model.dim();
    const std::size_t m = orbits.size();

    Eigen::VectorXd energy = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(dim));
    for (const auto& e : model.interaction().entries()) energy(static_cast<Eigen::Index>(e.row)) = e.value.real();
    phase_.resize(static_cast<Eigen::Index>(m));
    for (std::size_t k = 0; k < m; ++k) {
      const auto [a, b] = orbits.rep(k);
      phase_(static_cast<Eigen::Index>(k)) = energy(static_cast<Eigen::Index>(a)) - energy(static_cast<Eigen::Index>(b));
    }
    has_phase_ = phase_.cwiseAbs().maxCoeff() > 0.0;

    OperatorMatrix loss(dim);
    for (const auto& ch : model.channels()) loss = loss + ch.op.adjoint() * ch.op;
    const auto ge = rows_of(model.drive_ge());
    const auto er = rows_of(model.drive_er());
    const auto g = rows_of(loss);
    std::vector<Rows> jumps;
    for (const auto& ch : model.channels()) jumps.push_back(rows_of(ch.op));

    std::vector<Eigen::Triplet<Complex>> t0, t1, t2;
    const Complex mi{0.0, -1.0};
    const Complex pi{0.0, 1.0};
    for (std::size_t k = 0; k < m; ++k) {
      const auto [a, b] = orbits.rep(k);
      const auto row = static_cast<int>(k);
      auto push = [&](std::vector<Eigen::Triplet<Complex>>& t, std::size_t c, std::size_t d, Complex v) {
        t.emplace_back(row, static_cast<int>(orbits.orbit_of(c, d)), v);
      };
      // -i (O rho - rho O^dag) with O = drive - (i/2) G
      for (const auto& [c, v] : ge[a]) push(t1, c, b, mi * v);
      for (const auto& [c, v] : ge[b]) push(t1, a, c, pi * std::conj(v));
      for (const auto& [c, v] : er[a]) push(t2, c, b, mi * v);
      for (const auto& [c, v] : er[b]) push(t2, a, c, pi * std::conj(v));
      for (const auto& [c, v] : g[a]) push(t0, c, b, -0.5 * v);
      for (const auto& [c, v] : g[b]) push(t0, a, c, -0.5 * std::conj(v));
      for (const auto& l : jumps) {
        for (const auto& [c, u] : l[a]) {
          for (const auto& [d, v] : l[b]) push(t0, c, d, u * std::conj(v));
        }
      }
    }
    const auto mm = static_cast<Eigen::Index>(m);
    static_.resize(mm, mm);
    static_.setFromTriplets(t0.begin(), t0.end());
    ge_.resize(mm, mm);
    ge_.setFromTriplets(t1.begin(), t1.end());
    er_.resize(mm, mm);
    er_.setFromTriplets(t2.begin(), t2.end());
  }

  void derivative(double t, const State& x, State& out) const {
    out.noalias() = static_ * x;
    const double wge = model_.omega_ge(t);
    const double wer = model_.omega_er(t);
    if (wge != 0.0) out.noalias() += wge * (ge_ * x);
    if (wer != 0.0) out.noalias() += wer * (er_ * x);
  }

  void rotate(double tau, State& x) const {
    if (!has_phase_) return;
    x.array() *= (Complex{0.0, -tau} * phase_.cast<Complex>()).array().exp();
  }

  std::size_t nonzeros() const {
    return static_cast<std::size_t>(static_.nonZeros() + ge_.nonZeros() + er_.nonZeros());
  }

 private:
  using Rows = std::vector<std::vector<std::pair<std::size_t, Complex>>>;

  static Rows rows_of(const OperatorMatrix& op) {
    Rows rows(op.dim());
    for (const auto& e : op.entries()) rows[e.row].emplace_back(e.col, e.value);
    return rows;
  }

  const Model& model_;
  Eigen::VectorXd phase_;
  bool has_phase_ = false;
  Sparse static_, ge_, er_;
};

}  // namespace superatom
