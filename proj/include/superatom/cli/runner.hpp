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
#include <chrono>
#include <cmath>
#include <exception>
#include <filesystem>
#include <iomanip>
#include <mutex>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <openssl/evp.h>

#include <nlohmann/json.hpp>

#include "superatom/analysis.hpp"
#include "superatom/cli/config.hpp"
#include "superatom/cli/csv.hpp"
#include "superatom/master_equation.hpp"
#include "superatom/trajectories.hpp"

#ifndef SUPERATOM_VERSION
#define SUPERATOM_VERSION "unknown"
#endif

namespace superatom::cli {

/// Process exit codes.
enum ExitCode : int {
  kExitOk = 0,
  kExitOther = 1,
  kExitParse = 2,
  kExitCapacity = 3,
  kExitIntegration = 4,
};

inline std::string sha256_hex(const std::string& bytes) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), md, &len, EVP_sha256(), nullptr) != 1) {
    throw std::runtime_error("sha256 failed");
  }
  std::ostringstream hex;
  for (unsigned int i = 0; i < len; ++i) hex << std::hex << std::setw(2) << std::setfill('0') << int(md[i]);
  return hex.str();
}

/// One simulation in an experiment.
struct PlannedRun {
  std::string name;  ///< file stem
  int n_atoms = 1;
  bool coherent = false;
  std::optional<double> dephasing;
  bool mcwf = false;
};

/// fig1c: dissipative + coherent per N; fig2: without and with dephasing per
/// N; custom: one run per N. Each run is repeated per engine.
inline std::vector<PlannedRun> plan_runs(const ExperimentConfig& cfg) {
  std::vector<PlannedRun> plan;
  auto add = [&](const std::string& stem, int n, bool coherent, std::optional<double> deph) {
    if (cfg.runs_me()) plan.push_back({stem, n, coherent, deph, false});
    if (cfg.runs_mcwf()) plan.push_back({stem + "_mcwf", n, coherent, deph, true});
  };
  for (int n : cfg.n_atoms_list) {
    const std::string tag = "_N" + std::to_string(n);
    switch (cfg.experiment) {
      case Experiment::fig1c:
        add("fig1c" + tag + "_dissipative", n, false, std::nullopt);
        add("fig1c" + tag + "_coherent", n, true, std::nullopt);
        break;
      case Experiment::fig2:
        add("fig2" + tag + "_nodeph", n, false, 0.0);
        add("fig2" + tag + "_deph", n, false, cfg.gamma_r_deph.value_or(kFig2Dephasing));
        break;
      case Experiment::custom:
        add("custom" + tag, n, cfg.coherent, std::nullopt);
        break;
    }
  }
  return plan;
}

/// Throws CapacityError or std::invalid_argument for an unusable plan.
inline void check_plan(const ExperimentConfig& cfg, const std::vector<PlannedRun>& plan) {
  for (int n : cfg.n_atoms_list) hilbert_dim(n);
  const IntegratorSettings settings = cfg.integrator();
  for (const auto& run : plan) {
    const ModelConfig model = cfg.model_for(run.n_atoms, run.coherent, run.dephasing);
    model.validate();
    settings.validate_for(model);
    if (run.mcwf && settings.method != Method::adaptive_rk45) {
      throw std::invalid_argument("the mcwf engine requires method = rk45");
    }
  }
}

inline nlohmann::json model_json(const ModelConfig& m) {
  nlohmann::json j;
  j["n_atoms"] = m.n_atoms;
  j["omega0"] = m.pulses.omega0;
  j["sigma_t"] = m.pulses.sigma_t;
  j["t_end"] = m.pulses.t_end;
  j["pulse_shape"] = m.pulses.shape == PulseShape::gaussian ? "gaussian" : "constant";
  j["omega_ge_scale"] = m.pulses.ge_scale;
  j["omega_er_scale"] = m.pulses.er_scale;
  j["gamma_eg"] = m.rates.gamma_eg;
  j["gamma_re"] = m.rates.gamma_re;
  j["gamma_r_deph"] = m.rates.gamma_r_deph;
  if (m.interaction.is_perfect_blockade()) {
    j["interaction"] = "perfect_blockade";
  } else if (const auto* u = std::get_if<UniformShift>(&m.interaction.mode)) {
    j["interaction"] = "uniform";
    j["delta"] = u->shift;
  } else {
    const auto& g = std::get<Geometry>(m.interaction.mode);
    j["interaction"] = "geometry";
    j["positions"] = g.positions;
    j["c_p"] = g.c_p;
    j["power"] = g.power;
  }
  return j;
}

inline nlohmann::json settings_json(const IntegratorSettings& s) {
  return {{"method", s.method == Method::adaptive_rk45 ? "rk45" : "rk4"},
          {"rtol", s.rtol},
          {"atol", s.atol},
          {"fixed_dt", s.fixed_dt},
          {"sample_count", s.sample_count},
          {"trace_drift_tol", s.trace_drift_tol},
          {"symmetry", s.use_symmetry}};
}

struct RunOutcome {
  ObservableSeries series;
  nlohmann::json record;
  std::string jump_log;
};

inline RunOutcome execute_run(const ExperimentConfig& cfg, const PlannedRun& run, unsigned mcwf_threads) {
  const ModelConfig model_cfg = cfg.model_for(run.n_atoms, run.coherent, run.dephasing);
  const Model model(model_cfg);
  const IntegratorSettings settings = cfg.integrator();
  RunOutcome out;
  const auto start = std::chrono::steady_clock::now();
  auto& rec = out.record;
  rec["name"] = run.name;
  rec["engine"] = run.mcwf ? "mcwf" : "me";
  rec["n_atoms"] = run.n_atoms;
  rec["coherent"] = run.coherent;
  rec["model"] = model_json(model_cfg);
  if (run.mcwf) {
    TrajectoryOptions options;
    options.threads = mcwf_threads;
    options.keep_records = cfg.jump_log;
    auto ens = average_trajectories(model, settings, cfg.n_traj, cfg.seed, options);
    std::size_t total = 0;
    for (auto c : ens.jump_counts) total += c;
    rec["n_traj"] = cfg.n_traj;
    rec["seed_base"] = cfg.seed;
    rec["mean_jumps"] = static_cast<double>(total) / cfg.n_traj;
    if (cfg.jump_log) {
      std::ostringstream log;
      write_jump_log(log, ens.records);
      out.jump_log = log.str();
    }
    out.series = std::move(ens.series);
  } else {
    auto res = integrate(ground_state(run.n_atoms), model, settings);
    rec["steps_accepted"] = res.stats.accepted;
    rec["steps_rejected"] = res.stats.rejected;
    rec["rhs_evals"] = res.stats.rhs_evals;
    out.series = std::move(res.series);
  }
  rec["wall_seconds"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return out;
}

/// Runs every planned simulation on a worker pool, writes one CSV per run
/// (plus jump logs and the fig2 summary) and finally manifest.json.
/// Returns the manifest.
inline nlohmann::json run_experiment(const ExperimentConfig& cfg, const std::string& config_path,
                                     std::ostream& log) {
  const auto plan = plan_runs(cfg);
  check_plan(cfg, plan);
  std::filesystem::create_directories(cfg.output_dir);
  const auto start = std::chrono::steady_clock::now();

  const unsigned workers = std::max(1u, std::min<unsigned>(worker_count(), static_cast<unsigned>(plan.size())));
  const unsigned mcwf_threads = std::max(1u, worker_count() / workers);
  std::vector<RunOutcome> outcomes(plan.size());
  std::atomic<std::size_t> next{0};
  std::atomic<bool> failed{false};
  std::exception_ptr failure;
  std::mutex log_mutex;
  auto work = [&] {
    for (;;) {
      const std::size_t k = next.fetch_add(1);
      if (k >= plan.size() || failed.load()) return;
      try {
        outcomes[k] = execute_run(cfg, plan[k], mcwf_threads);
        const auto& s = outcomes[k].series;
        std::lock_guard<std::mutex> lock(log_mutex);
        log << plan[k].name << ": P_r(1)(t_end) = " << format_number(s.final_pr(1)) << " ("
            << format_number(outcomes[k].record["wall_seconds"].get<double>()) << " s)\n";
      } catch (...) {
        if (!failed.exchange(true)) failure = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  for (unsigned w = 1; w < workers; ++w) pool.emplace_back(work);
  work();
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);

  nlohmann::json manifest;
  manifest["tool"] = "superatom";
  manifest["library_version"] = SUPERATOM_VERSION;
  manifest["config_path"] = config_path;
  nlohmann::json echo = nlohmann::json::array();
  for (const auto& [k, v] : cfg.echo) echo.push_back({{"key", k}, {"value", v}});
  manifest["config"] = echo;
  manifest["effective"] = {{"experiment", to_string(cfg.experiment)},
                           {"engine", to_string(cfg.engine)},
                           {"n_atoms", cfg.n_atoms_list},
                           {"coherent", cfg.coherent},
                           {"n_traj", cfg.n_traj},
                           {"seed", cfg.seed},
                           {"output_dir", cfg.output_dir.string()},
                           {"integrator", settings_json(cfg.integrator())}};
  nlohmann::json runs = nlohmann::json::array();
  for (std::size_t k = 0; k < plan.size(); ++k) {
    auto& rec = outcomes[k].record;
    const std::string csv = series_csv(outcomes[k].series);
    const std::string file = plan[k].name + ".csv";
    write_file_atomic(cfg.output_dir / file, csv);
    rec["file"] = file;
    rec["sha256"] = sha256_hex(csv);
    if (!outcomes[k].jump_log.empty()) {
      const std::string jumps = plan[k].name + "_jumps.csv";
      write_file_atomic(cfg.output_dir / jumps, outcomes[k].jump_log);
      rec["jump_log"] = jumps;
      rec["jump_log_sha256"] = sha256_hex(outcomes[k].jump_log);
    }
    runs.push_back(rec);
  }
  manifest["runs"] = runs;

  if (cfg.experiment == Experiment::fig2) {
    // Final P_r(1) per N; the estimate uses the dephased single-atom value.
    auto final_of = [&](int n, bool deph) -> double {
      const std::string stem = "fig2_N" + std::to_string(n) + (deph ? "_deph" : "_nodeph");
      for (std::size_t k = 0; k < plan.size(); ++k) {
        if (plan[k].name == stem || plan[k].name == stem + "_mcwf") return outcomes[k].series.final_pr(1);
      }
      return std::numeric_limits<double>::quiet_NaN();
    };
    const double x = final_of(1, true);
    std::string summary = "n_atoms,pr1_final,pr1_final_dephased,estimate_dephased\n";
    for (int n : cfg.n_atoms_list) {
      const double est = std::isnan(x) ? x : superatom_excitation_estimate(n, std::clamp(x, 0.0, 1.0));
      summary += std::to_string(n) + ',' + format_number(final_of(n, false)) + ',' +
                 format_number(final_of(n, true)) + ',' + format_number(est) + '\n';
    }
    write_file_atomic(cfg.output_dir / "fig2_summary.csv", summary);
    manifest["summary"] = {{"file", "fig2_summary.csv"}, {"sha256", sha256_hex(summary)}};
  }

  manifest["wall_seconds"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  write_file_atomic(cfg.output_dir / "manifest.json", manifest.dump(2) + "\n");
  return manifest;
}

/// One decimal, as in "20.0".
inline std::string one_decimal(double v) {
  std::ostringstream os;
  os.imbue(std::locale::classic());
  os << std::fixed << std::setprecision(1) << v;
  return os.str();
}

/// Prints effective parameters and the blockade diagnostic. Returns true when
/// the blockade condition holds for every requested N.
inline bool validate_report(const ExperimentConfig& cfg, std::ostream& os) {
  const auto plan = plan_runs(cfg);
  check_plan(cfg, plan);
  const IntegratorSettings settings = cfg.integrator();
  os << "experiment: " << to_string(cfg.experiment) << "\n";
  os << "engine: " << to_string(cfg.engine) << "\n";
  os << "n_atoms:";
  for (int n : cfg.n_atoms_list) os << ' ' << n;
  os << "\n";
  if (cfg.runs_mcwf()) os << "n_traj: " << cfg.n_traj << "\nseed: " << cfg.seed << "\n";
  os << "output_dir: " << cfg.output_dir.string() << "\n";
  const ModelConfig base = cfg.model_for(cfg.n_atoms_list.front(), false);
  os << "omega0: " << format_number(base.pulses.omega0) << " rad/us\n";
  os << "sigma_t: " << format_number(base.pulses.sigma_t) << " us\n";
  os << "t_end: " << format_number(base.pulses.t_end) << " us\n";
  os << "pulse_shape: " << (base.pulses.shape == PulseShape::gaussian ? "gaussian" : "constant") << "\n";
  os << "gamma_eg: " << format_number(base.rates.gamma_eg) << " rad/us\n";
  os << "gamma_re: " << format_number(base.rates.gamma_re) << " rad/us\n";
  os << "gamma_r_deph: " << format_number(base.rates.gamma_r_deph) << " rad/us\n";
  os << "method: " << (settings.method == Method::adaptive_rk45 ? "rk45" : "rk4") << "\n";
  os << "rtol: " << format_number(settings.rtol) << "\natol: " << format_number(settings.atol) << "\n";
  os << "sample_count: " << settings.sample_count << "\n";
  os << "runs:";
  for (const auto& r : plan) os << ' ' << r.name;
  os << "\n";

  // w_0 from the dissipative Gamma_eg, the quantity the threshold refers to.
  const double w0 = linewidth_w(base.pulses.omega0, base.pulses.omega0, base.rates.gamma_eg);
  os << "w_0: " << format_number(w0) << " rad/us\n";
  bool ok = true;
  double smallest = std::numeric_limits<double>::infinity();
  for (int n : cfg.n_atoms_list) smallest = std::min(smallest, cfg.model_for(n, false).min_shift());
  if (std::isinf(smallest)) {
    if (cfg.perfect_blockade) {
      os << "blockade satisfied: perfect (doubly excited Rydberg states removed)\n";
    } else {
      os << "blockade not applicable: single atom\n";
    }
  } else {
    const double factor = smallest / w0;
    ok = smallest >= kBlockadeThreshold * w0 * (1.0 - 1e-12);
    if (ok) {
      os << "blockade satisfied: Δ = " << one_decimal(factor) << "·w_0\n";
    } else {
      os << "warning: blockade marginal: Δ = " << one_decimal(factor) << "·w_0 < "
         << one_decimal(kBlockadeThreshold) << "·w_0\n";
    }
  }
  return ok;
}

}  // namespace superatom::cli
