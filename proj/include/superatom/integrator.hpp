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
#include <concepts>
#include <cstdint>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

/// Explicit Runge-Kutta steppers in integrating-factor (Lawson) form.
///
/// A problem splits its generator as y' = R y + F(t, y), where R is a
/// time-independent phase rotation applied exactly through
/// `rotate(tau, y)` (y <- exp(R tau) y), and F carries everything else.
/// Rotations are unitary elementwise phases, so error norms are unaffected.
namespace superatom {

enum class Method { adaptive_rk45, fixed_rk4 };

class IntegrationError : public std::runtime_error {
 public:
  IntegrationError(const std::string& what, double time, double local_error)
      : std::runtime_error(what), time_(time), local_error_(local_error) {}
  double time() const { return time_; }
  double local_error() const { return local_error_; }

 private:
  double time_;
  double local_error_;
};

template <class P>
concept SplitProblem = requires(const P& p, double t, const typename P::State& y,
                                typename P::State& out) {
  { p.derivative(t, y, out) };
  { p.rotate(t, out) };
};

struct StepStats {
  std::int64_t accepted = 0;
  std::int64_t rejected = 0;
  std::int64_t rhs_evals = 0;
};

/// Weighted RMS error with elementwise scale atol + rtol * max(|y0_i|, |y1_i|).
/// `err` may be an unevaluated expression; it is consumed in one pass.
template <class ErrExpr, class State>
double error_norm(const Eigen::MatrixBase<ErrExpr>& err, const State& y0, const State& y1,
                  double atol, double rtol) {
  // Squared moduli avoid the hypot() behind std::abs on complex values.
  const auto scale = atol + rtol * y0.cwiseAbs2().cwiseMax(y1.cwiseAbs2()).cwiseSqrt().array();
  const double sum = (err.cwiseAbs2().array() / scale.square()).sum();
  return std::sqrt(sum / static_cast<double>(err.size()));
}

/// Dormand-Prince 5(4) with first-same-as-last reuse.
template <SplitProblem Problem>
class LawsonDopri5 {
 public:
  using State = typename Problem::State;

  LawsonDopri5(const Problem& problem, double rtol, double atol)
      : problem_(problem), rtol_(rtol), atol_(atol) {}

  /// Trial step of size h from (t, y); writes the 5th-order result and
  /// returns the scaled error norm. The stored derivative at (t, y) is
  /// reused until `invalidate()` or an accepted step moves it.
  double attempt(double t, const State& y, double h, State& y_out) {
    static constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
    static constexpr double a21 = 1.0 / 5;
    static constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
    static constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
    static constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561,
                            a54 = -212.0 / 729;
    static constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247,
                            a64 = 49.0 / 176, a65 = -5103.0 / 18656;
    static constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192,
                            b5 = -2187.0 / 6784, b6 = 11.0 / 84;
    static constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920,
                            e5 = -17253.0 / 339200, e6 = 22.0 / 525, e7 = -1.0 / 40;

    if (!k1_valid_) {
      k1_.resizeLike(y);
      problem_.derivative(t, y, k1_);
      ++stats_.rhs_evals;
      k1_valid_ = true;
    }
    stage_.noalias() = y + h * a21 * k1_;
    eval_stage(t, c2 * h, k2_);
    stage_.noalias() = y + h * (a31 * k1_ + a32 * k2_);
    eval_stage(t, c3 * h, k3_);
    stage_.noalias() = y + h * (a41 * k1_ + a42 * k2_ + a43 * k3_);
    eval_stage(t, c4 * h, k4_);
    stage_.noalias() = y + h * (a51 * k1_ + a52 * k2_ + a53 * k3_ + a54 * k4_);
    eval_stage(t, c5 * h, k5_);
    stage_.noalias() = y + h * (a61 * k1_ + a62 * k2_ + a63 * k3_ + a64 * k4_ + a65 * k5_);
    eval_stage(t, h, k6_);
    y_out.noalias() = y + h * (b1 * k1_ + b3 * k3_ + b4 * k4_ + b5 * k5_ + b6 * k6_);
    problem_.rotate(h, y_out);

    // Stage 7 sits at (t + h, y_out); its raw derivative is the next k1.
    k7_raw_.resizeLike(y);
    problem_.derivative(t + h, y_out, k7_raw_);
    ++stats_.rhs_evals;
    k7_ = k7_raw_;
    problem_.rotate(-h, k7_);

    // Compare in the rotated frame: |y| is rotation invariant.
    return error_norm(h * (e1 * k1_ + e3 * k3_ + e4 * k4_ + e5 * k5_ + e6 * k6_ + e7 * k7_), y,
                      y_out, atol_, rtol_);
  }

  void accept() {
    std::swap(k1_, k7_raw_);
    ++stats_.accepted;
  }
  void reject() {
    ++stats_.rejected;
  }
  void invalidate() { k1_valid_ = false; }
  const StepStats& stats() const { return stats_; }
  double rtol() const { return rtol_; }
  double atol() const { return atol_; }

 private:
  // k = E(-dt) F(t + dt, E(dt) stage)
  void eval_stage(double t, double dt, State& k) {
    problem_.rotate(dt, stage_);
    k.resizeLike(stage_);
    problem_.derivative(t + dt, stage_, k);
    problem_.rotate(-dt, k);
    ++stats_.rhs_evals;
  }

  const Problem& problem_;
  double rtol_;
  double atol_;
  bool k1_valid_ = false;
  State k1_, k2_, k3_, k4_, k5_, k6_, k7_, k7_raw_, stage_;
  StepStats stats_;
};

/// Classic fourth-order Runge-Kutta in Lawson form.
template <SplitProblem Problem>
class LawsonRk4 {
 public:
  using State = typename Problem::State;

  explicit LawsonRk4(const Problem& problem) : problem_(problem) {}

  void step(double t, State& y, double h) {
    k1_.resizeLike(y);
    problem_.derivative(t, y, k1_);
    stage_.noalias() = y + 0.5 * h * k1_;
    eval_stage(t, 0.5 * h, k2_);
    stage_.noalias() = y + 0.5 * h * k2_;
    eval_stage(t, 0.5 * h, k3_);
    stage_.noalias() = y + h * k3_;
    eval_stage(t, h, k4_);
    y += (h / 6.0) * (k1_ + 2.0 * k2_ + 2.0 * k3_ + k4_);
    problem_.rotate(h, y);
    stats_.rhs_evals += 4;
    ++stats_.accepted;
  }

  const StepStats& stats() const { return stats_; }

 private:
  void eval_stage(double t, double dt, State& k) {
    problem_.rotate(dt, stage_);
    k.resizeLike(stage_);
    problem_.derivative(t + dt, stage_, k);
    problem_.rotate(-dt, k);
  }

  const Problem& problem_;
  State k1_, k2_, k3_, k4_, stage_;
  StepStats stats_;
};

/// Step-size update after a trial with scaled error `err`.
inline double next_step_size(double h, double err, bool accepted) {
  constexpr double safety = 0.9;
  constexpr double min_factor = 0.2;
  constexpr double max_factor = 5.0;
  double factor = err == 0.0 ? max_factor : safety * std::pow(err, -0.2);
  factor = std::clamp(factor, min_factor, accepted ? max_factor : 1.0);
  return h * factor;
}

struct GridSettings {
  Method method = Method::adaptive_rk45;
  double rtol = 1e-8;
  double atol = 1e-11;
  double fixed_dt = 1e-3;
  double initial_step = 1e-3;
};

/// Integrates from times.front() and calls on_sample(index, t, y) at each
/// grid time (including the first). The state is advanced in place.
template <SplitProblem Problem, class OnSample>
StepStats integrate_on_grid(const Problem& problem, typename Problem::State& y,
                            const std::vector<double>& times, const GridSettings& settings,
                            OnSample&& on_sample) {
  if (times.empty()) return {};
  on_sample(std::size_t{0}, times.front(), y);
  if (settings.method == Method::fixed_rk4) {
    LawsonRk4<Problem> stepper(problem);
    for (std::size_t i = 1; i < times.size(); ++i) {
      const double span = times[i] - times[i - 1];
      const auto substeps = static_cast<long>(std::max(1.0, std::ceil(span / settings.fixed_dt - 1e-9)));
      const double h = span / static_cast<double>(substeps);
      double t = times[i - 1];
      for (long s = 0; s < substeps; ++s) {
        stepper.step(t, y, h);
        t = times[i - 1] + static_cast<double>(s + 1) * h;
      }
      on_sample(i, times[i], y);
    }
    return stepper.stats();
  }

  LawsonDopri5<Problem> stepper(problem, settings.rtol, settings.atol);
  typename Problem::State trial;
  double t = times.front();
  double h = settings.initial_step;
  for (std::size_t i = 1; i < times.size(); ++i) {
    const double target = times[i];
    while (t < target) {
      const double remaining = target - t;
      const bool last = h >= remaining * (1.0 - 1e-12);
      const double step = last ? remaining : h;
      const double err = stepper.attempt(t, y, step, trial);
      if (!std::isfinite(err)) {
        throw IntegrationError("non-finite error estimate at t = " + std::to_string(t), t, err);
      }
      if (err <= 1.0) {
        stepper.accept();
        std::swap(y, trial);
        t = last ? target : t + step;
        const double proposed = next_step_size(step, err, true);
        // Keep the natural step size when the grid forced a short one.
        h = last ? std::max(h, proposed) : proposed;
      } else {
        stepper.reject();
        h = next_step_size(step, err, false);
        if (h < 1e-12 * std::max(1.0, std::abs(t))) {
          std::ostringstream msg;
          msg << "step size underflow at t = " << t << " us (h = " << h
              << ", local error = " << err << ")";
          throw IntegrationError(msg.str(), t, err);
        }
      }
    }
    on_sample(i, target, y);
  }
  return stepper.stats();
}

/// Uniform grid of `count` points on [0, t_end] including both ends.
inline std::vector<double> uniform_grid(double t_end, int count) {
  if (count < 2) throw std::invalid_argument("sample count must be >= 2");
  std::vector<double> times(static_cast<std::size_t>(count));
  for (int k = 0; k < count; ++k) times[static_cast<std::size_t>(k)] = t_end * k / (count - 1);
  times.back() = t_end;
  return times;
}

}  // namespace superatom
