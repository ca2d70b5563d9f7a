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
#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <exception>
#include <limits>
#include <ostream>
#include <random>
#include <stdexcept>
#include <thread>
#include <vector>

#include "superatom/algebra.hpp"
#include "superatom/integrator.hpp"
#include "superatom/master_equation.hpp"
#include "superatom/model.hpp"
#include "superatom/observables.hpp"

/// Quantum-jump (Monte Carlo wavefunction) unraveling of the master equation.
namespace superatom {

/// sum_k c_k^dag c_k
inline OperatorMatrix channel_damping(const Model& model) {
  OperatorMatrix sum(model.dim());
  for (const auto& ch : model.channels()) sum = sum + ch.op.adjoint() * ch.op;
  return sum;
}

/// H(t) - (i/2) sum_k c_k^dag c_k
inline OperatorMatrix effective_hamiltonian(double t, const Model& model) {
  return model.hamiltonian(t) + channel_damping(model) * Complex{0.0, -0.5};
}

/// Non-Hermitian Schroedinger problem in the frame of the interaction shifts.
class TrajectoryProblem {
 public:
  using State = StateVector;

  explicit TrajectoryProblem(const Model& model) : model_(model) {
    const std::size_t dim = model.dim();
    phase_.assign(dim, 0.0);
    for (const auto& e : model.interaction().entries()) phase_[e.row] = e.value.real();
    const OperatorMatrix damping = channel_damping(model);
    damping_diag_.assign(dim, 0.0);
    for (const auto& e : damping.entries()) {
      if (e.row == e.col && e.value.imag() == 0.0) {
        damping_diag_[e.row] += 0.5 * e.value.real();
      } else {
        damping_offdiag_.push_back({e.row, e.col, 0.5 * e.value});
      }
    }
  }

  const Model& model() const { return model_; }

  /// out = -i (Omega_ge X_ge + Omega_er X_er) psi - (1/2) sum c^dag c psi
  void derivative(double t, const StateVector& psi, StateVector& out) const {
    const double wge = model_.omega_ge(t);
    const double wer = model_.omega_er(t);
    const auto n = psi.size();
    out.resize(n);
    for (Eigen::Index a = 0; a < n; ++a) out(a) = -damping_diag_[static_cast<std::size_t>(a)] * psi(a);
    const Complex cge{0.0, -wge};
    const Complex cer{0.0, -wer};
    if (wge != 0.0) {
      for (const auto& e : model_.drive_ge().entries()) {
        out(static_cast<Eigen::Index>(e.row)) += cge * e.value * psi(static_cast<Eigen::Index>(e.col));
      }
    }
    if (wer != 0.0) {
      for (const auto& e : model_.drive_er().entries()) {
        out(static_cast<Eigen::Index>(e.row)) += cer * e.value * psi(static_cast<Eigen::Index>(e.col));
      }
    }
    for (const auto& e : damping_offdiag_) {
      out(static_cast<Eigen::Index>(e.row)) -= e.value * psi(static_cast<Eigen::Index>(e.col));
    }
  }

  /// psi_a <- exp(-i V_a tau) psi_a
  void rotate(double tau, StateVector& psi) const {
    for (Eigen::Index a = 0; a < psi.size(); ++a) {
      const double v = phase_[static_cast<std::size_t>(a)];
      if (v != 0.0) psi(a) *= Complex{std::cos(v * tau), -std::sin(v * tau)};
    }
  }

 private:
  const Model& model_;
  std::vector<double> phase_;
  std::vector<double> damping_diag_;
  std::vector<Entry> damping_offdiag_;
};

struct JumpEvent {
  double time = 0.0;
  ChannelKind kind = ChannelKind::eg;
  int atom = 0;
};

struct TrajectoryRecord {
  std::uint64_t seed = 0;
  std::vector<JumpEvent> jumps;
  ObservableSeries series;
  StateVector final_state;
};

/// Jump times are located by bisection to this width (us).
inline constexpr double kJumpTimeResolution = 1e-6;

namespace detail {
inline double norm_squared(const StateVector& psi) { return psi.squaredNorm(); }

/// Uniform draw in (0, 1).
inline double open_unit(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> dist(0.0, 1.0);
  double u = 0.0;
  while (u == 0.0) u = dist(rng);
  return u;
}

/// Core of evolve_trajectory; optionally stores the normalized state at every grid time.
inline TrajectoryRecord run_trajectory(const StateVector& psi0, const Model& model,
                                       const IntegratorSettings& settings, std::uint64_t seed,
                                       std::vector<StateVector>* samples) {
  if (static_cast<std::size_t>(psi0.size()) != model.dim()) {
    throw std::invalid_argument("initial state dimension mismatch");
  }
  if (std::abs(psi0.squaredNorm() - 1.0) > 1e-10) throw std::invalid_argument("initial state is not normalized");
  if (settings.method != Method::adaptive_rk45) {
    throw std::invalid_argument("trajectories require the adaptive integrator");
  }
  settings.validate_for(model.config());

  const TrajectoryProblem problem(model);
  const auto times = uniform_grid(model.config().pulses.t_end, settings.sample_count);
  const auto& channels = model.channels();

  TrajectoryRecord record;
  record.seed = seed;
  record.series.resize(times.size(), model.n_atoms());
  std::mt19937_64 rng(seed);
  double threshold = channels.empty() ? 0.0 : detail::open_unit(rng);

  StateVector psi = psi0;
  StateVector trial;
  StateVector probe;
  LawsonDopri5<TrajectoryProblem> stepper(problem, settings.rtol, settings.atol);
  if (samples) samples->assign(times.size(), StateVector());
  auto sample = [&](std::size_t i, double at) {
    record.series.set_row(i, observe(model.basis(), at, psi));
    if (samples) (*samples)[i] = psi / psi.norm();
  };
  sample(0, times.front());

  double t = times.front();
  double h = GridSettings{}.initial_step;
  std::vector<double> weights(channels.size());
  for (std::size_t i = 1; i < times.size(); ++i) {
    const double target = times[i];
    while (t < target) {
      const double remaining = target - t;
      const bool last = h >= remaining * (1.0 - 1e-12);
      const double step = last ? remaining : h;
      const double err = stepper.attempt(t, psi, step, trial);
      if (!std::isfinite(err)) throw IntegrationError("non-finite error estimate at t = " + std::to_string(t), t, err);
      if (err > 1.0) {
        stepper.reject();
        h = next_step_size(step, err, false);
        if (h < 1e-12 * std::max(1.0, std::abs(t))) {
          throw IntegrationError("step size underflow at t = " + std::to_string(t), t, err);
        }
        continue;
      }
      if (channels.empty() || detail::norm_squared(trial) > threshold) {
        stepper.accept();
        std::swap(psi, trial);
        t = last ? target : t + step;
        const double proposed = next_step_size(step, err, true);
        h = last ? std::max(h, proposed) : proposed;
        continue;
      }

      // The threshold is crossed inside (t, t + step]; bisect the step length.
      double lo = 0.0;
      double hi = step;
      while (hi - lo > kJumpTimeResolution) {
        const double mid = 0.5 * (lo + hi);
        stepper.attempt(t, psi, mid, probe);
        if (detail::norm_squared(probe) > threshold) {
          lo = mid;
        } else {
          hi = mid;
          std::swap(trial, probe);
        }
      }
      psi = trial;
      t = (hi == remaining) ? target : t + hi;
      stepper.invalidate();

      double total = 0.0;
      for (std::size_t k = 0; k < channels.size(); ++k) {
        weights[k] = channels[k].op.apply(psi).squaredNorm();
        total += weights[k];
      }
      if (!(total > 0.0)) throw IntegrationError("jump with vanishing channel weights", t, 0.0);
      const double pick = detail::open_unit(rng) * total;
      std::size_t chosen = channels.size() - 1;
      double acc = 0.0;
      for (std::size_t k = 0; k < channels.size(); ++k) {
        acc += weights[k];
        if (pick <= acc) {
          chosen = k;
          break;
        }
      }
      psi = channels[chosen].op.apply(psi);
      psi /= std::sqrt(weights[chosen]);
      record.jumps.push_back({t, channels[chosen].kind, channels[chosen].atom});
      threshold = detail::open_unit(rng);
    }
    sample(i, target);
  }
  record.final_state = psi / psi.norm();
  return record;
}
}  // namespace detail

/// One realization with the waiting-time (norm threshold) scheme. The state
/// evolves under H_eff until |psi|^2 falls to a uniform draw u; the jump
/// channel is then chosen with weight |c_k psi|^2. Deterministic in seed.
inline TrajectoryRecord evolve_trajectory(const StateVector& psi0, const Model& model,
                                          const IntegratorSettings& settings, std::uint64_t seed) {
  return detail::run_trajectory(psi0, model, settings, seed, nullptr);
}

/// Per-trajectory seed derived from (seed_base, index) through std::seed_seq.
inline std::uint64_t trajectory_seed(std::uint64_t seed_base, std::uint64_t index) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed_base), static_cast<std::uint32_t>(seed_base >> 32),
                    static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32)};
  std::uint32_t words[2];
  seq.generate(words, words + 2);
  return (static_cast<std::uint64_t>(words[0]) << 32) | words[1];
}

/// Worker count from SUPERATOM_THREADS, else hardware concurrency.
inline unsigned worker_count() {
  if (const char* env = std::getenv("SUPERATOM_THREADS")) {
    const long v = std::strtol(env, nullptr, 10);
    if (v >= 1) return static_cast<unsigned>(v);
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

struct TrajectoryOptions {
  unsigned threads = 0;  ///< 0 = worker_count()
  /// Keep every TrajectoryRecord in the result.
  bool keep_records = false;
  /// Grid indices at which the averaged |psi><psi| is accumulated.
  std::vector<std::size_t> density_samples;
  /// Accumulate the averaged density matrix at every grid point to report its
  /// purity. Refused above this dimension; purity is NaN then.
  std::size_t purity_max_dim = 27;
};

struct TrajectoryEnsemble {
  ObservableSeries series;  ///< means; stderr_pr1 filled
  std::vector<DenseMatrix> densities;  ///< one per density_samples entry
  std::vector<TrajectoryRecord> records;
  std::vector<std::size_t> jump_counts;  ///< total jumps per trajectory
  std::vector<std::size_t> eg_jump_counts;
};

/// Mean over n_traj trajectories started in the ground state. Trajectories
/// run on a worker pool and are folded in index order, so results do not
/// depend on the thread count.
inline TrajectoryEnsemble average_trajectories(const Model& model, const IntegratorSettings& settings, int n_traj,
                                               std::uint64_t seed_base, const TrajectoryOptions& options = {}) {
  if (n_traj < 1) throw std::invalid_argument("n_traj must be >= 1");
  const StateVector psi0 = uniform_product_state(model.n_atoms(), Level::g);
  const std::size_t rows = static_cast<std::size_t>(settings.sample_count);
  const int n_atoms = model.n_atoms();
  const auto dim = static_cast<Eigen::Index>(model.dim());
  const bool track_purity = model.dim() <= options.purity_max_dim;
  for (std::size_t idx : options.density_samples) {
    if (idx >= rows) throw std::invalid_argument("density sample index out of range");
  }

  TrajectoryEnsemble out;
  auto& mean = out.series;
  mean.resize(rows, n_atoms);
  std::vector<double> pr1_sq(rows, 0.0);
  std::vector<DenseMatrix> rho_rows;
  if (track_purity) rho_rows.assign(rows, DenseMatrix::Zero(dim, dim));
  out.densities.assign(options.density_samples.size(), DenseMatrix::Zero(dim, dim));

  const unsigned threads = std::max(1u, std::min<unsigned>(options.threads ? options.threads : worker_count(),
                                                            static_cast<unsigned>(n_traj)));
  const std::size_t batch = static_cast<std::size_t>(threads) * 4;
  std::vector<TrajectoryRecord> slots(batch);

  const bool keep_states = track_purity || !options.density_samples.empty();
  std::vector<std::vector<StateVector>> sampled(batch);

  for (std::size_t start = 0; start < static_cast<std::size_t>(n_traj); start += batch) {
    const std::size_t count = std::min(batch, static_cast<std::size_t>(n_traj) - start);
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::atomic<bool> failed{false};
    auto work = [&] {
      for (;;) {
        const std::size_t k = next.fetch_add(1);
        if (k >= count || failed.load()) return;
        try {
          slots[k] = detail::run_trajectory(psi0, model, settings, trajectory_seed(seed_base, start + k),
                                            keep_states ? &sampled[k] : nullptr);
        } catch (...) {
          if (!failed.exchange(true)) failure = std::current_exception();
        }
      }
    };
    std::vector<std::thread> pool;
    for (unsigned w = 1; w < std::min<unsigned>(threads, static_cast<unsigned>(count)); ++w) pool.emplace_back(work);
    work();
    for (auto& th : pool) th.join();
    if (failure) std::rethrow_exception(failure);

    for (std::size_t k = 0; k < count; ++k) {
      const auto& s = slots[k].series;
      for (std::size_t r = 0; r < rows; ++r) {
        for (int n = 0; n < kRydbergBins; ++n) mean.pr_n[r][static_cast<std::size_t>(n)] += s.pr(r, n);
        pr1_sq[r] += s.pr(r, 1) * s.pr(r, 1);
        mean.pop_e_total[r] += s.pop_e_total[r];
        for (int j = 0; j < n_atoms; ++j) {
          mean.per_atom_rr[r][static_cast<std::size_t>(j)] += s.per_atom_rr[r][static_cast<std::size_t>(j)];
        }
        if (track_purity) rho_rows[r].noalias() += sampled[k][r] * sampled[k][r].adjoint();
      }
      for (std::size_t d = 0; d < options.density_samples.size(); ++d) {
        const auto& v = sampled[k][options.density_samples[d]];
        out.densities[d].noalias() += v * v.adjoint();
      }
      std::size_t eg = 0;
      for (const auto& jump : slots[k].jumps) eg += jump.kind == ChannelKind::eg ? 1 : 0;
      out.jump_counts.push_back(slots[k].jumps.size());
      out.eg_jump_counts.push_back(eg);
      if (options.keep_records) out.records.push_back(std::move(slots[k]));
    }
  }

  const double m = n_traj;
  mean.stderr_pr1.assign(rows, 0.0);
  for (std::size_t r = 0; r < rows; ++r) {
    for (auto& p : mean.pr_n[r]) p /= m;
    mean.pop_e_total[r] /= m;
    for (auto& p : mean.per_atom_rr[r]) p /= m;
    const double p1 = mean.pr_n[r][1];
    const double var = n_traj > 1 ? std::max(0.0, (pr1_sq[r] - m * p1 * p1) / (m - 1.0)) : 0.0;
    mean.stderr_pr1[r] = std::sqrt(var / m);
    mean.trace_error[r] = 0.0;
    if (track_purity) {
      rho_rows[r] /= m;
      mean.purity[r] = rho_rows[r].squaredNorm();
    } else {
      mean.purity[r] = std::numeric_limits<double>::quiet_NaN();
    }
  }
  mean.times = uniform_grid(model.config().pulses.t_end, settings.sample_count);
  for (auto& d : out.densities) d /= m;
  return out;
}

/// Jump log rows: trajectory_index,time_us,channel,atom
inline void write_jump_log(std::ostream& os, const std::vector<TrajectoryRecord>& records) {
  os << "trajectory_index,time_us,channel,atom\n";
  for (std::size_t i = 0; i < records.size(); ++i) {
    for (const auto& j : records[i].jumps) {
      os << i << ',' << format_number(j.time) << ',' << to_string(j.kind) << ',' << j.atom << '\n';
    }
  }
}

}  // namespace superatom
