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

#include <gtest/gtest.h>
#include <sys/wait.h>

#include <atomic>
#include <clocale>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "superatom/cli/config.hpp"
#include "superatom/cli/csv.hpp"
#include "superatom/cli/runner.hpp"
#include "test_support.hpp"

namespace superatom::cli {
namespace {

namespace fs = std::filesystem;

class ScratchDir {
 public:
  ScratchDir() {
    static std::atomic<int> counter{0};
    path_ = fs::temp_directory_path() /
            ("superatom_cli_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~ScratchDir() { fs::remove_all(path_); }
  const fs::path& path() const { return path_; }

 private:
  fs::path path_;
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void spit(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  out << text;
}

int expect_parse_error_line(const std::string& text, const std::string& needle) {
  try {
    parse_config_text(text);
  } catch (const ParseError& e) {
    EXPECT_NE(std::string(e.what()).find(needle), std::string::npos) << e.what();
    return e.line();
  }
  ADD_FAILURE() << "no ParseError for:\n" << text;
  return -1;
}

std::string validate_text(const std::string& text) {
  std::ostringstream os;
  validate_report(parse_config_text(text), os);
  return os.str();
}

TEST(ParseConfig, ValuesRangesAndPrefix) {
  const auto cfg = parse_config_text(
      "# comment\n"
      "experiment = fig2   # trailing comment\n"
      "n_atoms = 1..3, 6\n"
      "engine = both\n"
      "n_traj = 250\n"
      "seed = 18446744073709551615\n"
      "omega0 = 2pi*3\n"
      "gamma_eg = 38\n"
      "gamma_r_deph = 2pi*0.1\n"
      "output_dir = results/fig2\n"
      "rtol = 1e-7\n"
      "method = rk45\n"
      "symmetry = false\n");
  EXPECT_EQ(cfg.experiment, Experiment::fig2);
  EXPECT_EQ(cfg.n_atoms_list, (std::vector<int>{1, 2, 3, 6}));
  EXPECT_EQ(cfg.engine, Engine::both);
  EXPECT_EQ(cfg.n_traj, 250);
  EXPECT_EQ(cfg.seed, 18446744073709551615ull);
  EXPECT_EQ(*cfg.omega0, kTwoPi * 3.0);
  EXPECT_EQ(*cfg.gamma_r_deph, kTwoPi * 0.1);
  EXPECT_EQ(cfg.output_dir, fs::path("results/fig2"));
  EXPECT_EQ(cfg.integrator().rtol, 1e-7);
  EXPECT_FALSE(cfg.integrator().use_symmetry);
  EXPECT_TRUE(parse_config_text("n_atoms = 2\n").integrator().use_symmetry);
  EXPECT_EQ(cfg.echo.size(), 12u);
  EXPECT_EQ(cfg.echo[1].first, "n_atoms");
  EXPECT_EQ(cfg.echo[1].second, "1..3, 6");
}

TEST(ParseConfig, ModelOverridesAndDefaults) {
  const auto cfg = parse_config_text("n_atoms = 2\nt_end = 16\ndelta = 300\ngamma_re = 0\n");
  const ModelConfig m = cfg.model_for(2, false);
  EXPECT_DOUBLE_EQ(m.pulses.t_end, 16.0);
  EXPECT_DOUBLE_EQ(m.pulses.sigma_t, 2.0);
  EXPECT_DOUBLE_EQ(m.rates.gamma_re, 0.0);
  EXPECT_DOUBLE_EQ(m.rates.gamma_eg, 38.0);
  EXPECT_DOUBLE_EQ(interaction_matrix(m.interaction, 2)(0, 1), 300.0);
  const ModelConfig coh = cfg.model_for(2, true);
  EXPECT_DOUBLE_EQ(coh.rates.gamma_eg, 0.0);

  const auto def = parse_config_text("n_atoms = 3\n");
  const ModelConfig d = def.model_for(3, true);
  // Coherent runs keep the dissipative w_0 for the shift.
  EXPECT_NEAR(interaction_matrix(d.interaction, 3)(0, 1),
              kDefaultBlockadeFactor * linewidth_w(kTwoPi * 3.0, kTwoPi * 3.0, 38.0), 1e-9);
  const auto geo = parse_config_text("n_atoms = 2\npositions = 0,0,0; 4,0,0\nc_p = 4096\npower = 6\n");
  EXPECT_NEAR(interaction_matrix(geo.model_for(2, false).interaction, 2)(0, 1), 1.0, 1e-12);
  const auto pb = parse_config_text("n_atoms = 2\ninteraction = perfect_blockade\n");
  EXPECT_TRUE(pb.model_for(2, false).interaction.is_perfect_blockade());
}

TEST(ParseConfig, ErrorsNameKeyAndLine) {
  EXPECT_EQ(expect_parse_error_line("n_atoms = 1\n\n# x\nbogus = 3\n", "unknown key 'bogus'"), 4);
  EXPECT_EQ(expect_parse_error_line("n_atoms = 1\nomega0 = fast\n", "omega0"), 2);
  EXPECT_EQ(expect_parse_error_line("n_atoms = 1\nomega0 = 3\nomega0 = 4\n", "repeated"), 3);
  EXPECT_EQ(expect_parse_error_line("n_atoms = 1\njust words\n", "key = value"), 2);
  EXPECT_EQ(expect_parse_error_line("n_atoms = 1\nengine = gpu\n", "engine"), 2);
  EXPECT_EQ(expect_parse_error_line("n_atoms = 3..1\n", "n_atoms"), 1);
  EXPECT_EQ(expect_parse_error_line("n_atoms = 1\ncoherent = maybe\n", "coherent"), 2);
  EXPECT_EQ(expect_parse_error_line("n_atoms = 1\nomega0 = 2pi*\n", "omega0"), 2);
  EXPECT_EQ(expect_parse_error_line("n_atoms = 1\nomega0 = 3,5\n", "omega0"), 2);
  EXPECT_EQ(expect_parse_error_line("n_atoms = 1\nrtol =\n", "missing value"), 2);
  expect_parse_error_line("experiment = fig1c\n", "n_atoms");
  expect_parse_error_line("n_atoms = 2\ndelta = 5\nblockade_factor = 12\n", "at most one");
  expect_parse_error_line("n_atoms = 2\nc_p = 5\n", "positions");
  expect_parse_error_line("n_atoms = 2\nengine = mcwf\nn_traj = 0\n", "n_traj");
  expect_parse_error_line("n_atoms = 0\n", "n_atoms");
  EXPECT_THROW(load_config("/nonexistent/superatom.cfg"), ParseError);
}

TEST(ParseConfig, DecimalPointIgnoresLocale) {
  const char* previous = std::setlocale(LC_NUMERIC, nullptr);
  const std::string saved = previous ? previous : "C";
  bool switched = false;
  for (const char* name : {"de_DE.UTF-8", "de_DE", "fr_FR.UTF-8"}) {
    if (std::setlocale(LC_NUMERIC, name)) {
      switched = true;
      break;
    }
  }
  const auto cfg = parse_config_text("n_atoms = 1\nomega0 = 18.5\n");
  const std::string formatted = format_number(0.125);
  std::setlocale(LC_NUMERIC, saved.c_str());
  EXPECT_EQ(*cfg.omega0, 18.5);
  EXPECT_EQ(formatted, "0.125");
  if (!switched) GTEST_SKIP() << "no comma-decimal locale installed; checked under the default locale only";
}

TEST(Plan, Fig1cLayout) {
  const auto cfg = parse_config_text("experiment = fig1c\nn_atoms = 1..6\n");
  const auto plan = plan_runs(cfg);
  ASSERT_EQ(plan.size(), 12u);
  EXPECT_EQ(plan[0].name, "fig1c_N1_dissipative");
  EXPECT_FALSE(plan[0].coherent);
  EXPECT_EQ(plan[11].name, "fig1c_N6_coherent");
  EXPECT_TRUE(plan[11].coherent);
  const auto both = plan_runs(parse_config_text("experiment = fig2\nn_atoms = 2\nengine = both\n"));
  ASSERT_EQ(both.size(), 4u);
  EXPECT_EQ(both[1].name, "fig2_N2_nodeph_mcwf");
  EXPECT_EQ(both[3].name, "fig2_N2_deph_mcwf");
  EXPECT_DOUBLE_EQ(*both[3].dephasing, kFig2Dephasing);
}

TEST(Plan, CapacityAndSettingsChecks) {
  const auto big = parse_config_text("n_atoms = 13\n");
  EXPECT_THROW(check_plan(big, plan_runs(big)), CapacityError);
  const auto rk4 = parse_config_text("n_atoms = 1\nengine = mcwf\nmethod = rk4\n");
  EXPECT_THROW(check_plan(rk4, plan_runs(rk4)), std::invalid_argument);
}

TEST(Validate, DefaultFig1cBlockadeLine) {
  const std::string out = validate_text("experiment = fig1c\nn_atoms = 1..6\n");
  EXPECT_NE(out.find("blockade satisfied: Δ = 20.0·w_0\n"), std::string::npos) << out;
  EXPECT_NE(out.find("w_0: 21.7"), std::string::npos) << out;
  EXPECT_NE(out.find("runs: fig1c_N1_dissipative fig1c_N1_coherent"), std::string::npos) << out;
}

TEST(Validate, MarginalBlockadeWarning) {
  const double w0 = linewidth_w(kTwoPi * 3.0, kTwoPi * 3.0, 38.0);
  std::ostringstream os;
  const auto cfg = parse_config_text("n_atoms = 2\ndelta = " + format_number(w0) + "\n");
  EXPECT_FALSE(validate_report(cfg, os));
  EXPECT_NE(os.str().find("warning: blockade marginal: Δ = 1.0·w_0 < 10.0·w_0"), std::string::npos) << os.str();
  EXPECT_NE(validate_text("n_atoms = 2\nblockade_factor = 10\n").find("blockade satisfied: Δ = 10.0·w_0"),
            std::string::npos);
  EXPECT_NE(validate_text("n_atoms = 2\ninteraction = perfect_blockade\n").find("blockade satisfied: perfect"),
            std::string::npos);
  EXPECT_NE(validate_text("n_atoms = 1\n").find("blockade not applicable"), std::string::npos);
}

TEST(Csv, HeaderSchema) {
  EXPECT_EQ(series_header(3, false),
            "t_us,pr0,pr1,pr2,pr_ge3,pop_e_total,purity,trace_err,per_atom_rr_0,per_atom_rr_1,per_atom_rr_2");
  EXPECT_EQ(series_header(1, true), "t_us,pr0,pr1,pr2,pr_ge3,pop_e_total,purity,trace_err,per_atom_rr_0,stderr_pr1");
}

TEST(Csv, NineSignificantDigitsAndRoundTrip) {
  EXPECT_EQ(format_number(1.0 / 3.0), "0.333333333");
  EXPECT_EQ(format_number(30.0), "30");
  EXPECT_EQ(format_number(-2.5e-12), "-2.5e-12");
  EXPECT_EQ(format_number(123456789.4), "123456789");

  ObservableSeries s;
  s.resize(2, 2);
  s.times = {0.0, 0.5};
  s.pr_n = {{1.0, 0.0, 0.0, 0.0}, {0.25, 0.7, 0.05, 0.0}};
  s.pop_e_total = {0.0, 0.123456789123};
  s.per_atom_rr = {{0.0, 0.0}, {0.4, 0.4}};
  s.purity = {1.0, 0.9};
  s.trace_error = {0.0, -1e-13};
  ScratchDir dir;
  write_file_atomic(dir.path() / "s.csv", series_csv(s));
  EXPECT_FALSE(fs::exists(dir.path() / "s.csv.tmp"));
  const auto table = read_csv(dir.path() / "s.csv");
  EXPECT_EQ(table.header.size(), 10u);
  ASSERT_EQ(table.rows.size(), 2u);
  EXPECT_EQ(table.rows[1][table.column("pop_e_total")], 0.123456789);
  EXPECT_EQ(table.rows[1][table.column("pr1")], 0.7);
  EXPECT_EQ(table.rows[1][table.column("trace_err")], -1e-13);
  EXPECT_THROW(table.column("nope"), std::out_of_range);
}

TEST(Sha256, KnownVector) {
  EXPECT_EQ(sha256_hex("abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST(Run, CustomRabiMatchesSineSquared) {
  ScratchDir dir;
  const double omega = kTwoPi * 0.5;
  const auto cfg = parse_config_text(
      "experiment = custom\nn_atoms = 1\ncoherent = true\npulse_shape = constant\n"
      "omega0 = 2pi*0.5\nomega_er_scale = 0\nt_end = 4\nsample_count = 201\noutput_dir = " +
      dir.path().string() + "\n");
  std::ostringstream log;
  const auto manifest = run_experiment(cfg, "inline", log);
  const auto table = read_csv(dir.path() / "custom_N1.csv");
  ASSERT_EQ(table.rows.size(), 201u);
  const std::size_t t_col = table.column("t_us");
  const std::size_t e_col = table.column("pop_e_total");
  double worst = 0.0;
  for (const auto& row : table.rows) {
    const double s = std::sin(omega * row[t_col]);
    worst = std::max(worst, std::abs(row[e_col] - s * s));
  }
  EXPECT_LE(worst, 1e-6);
  EXPECT_EQ(manifest["runs"].size(), 1u);
  EXPECT_EQ(manifest["runs"][0]["file"], "custom_N1.csv");
  EXPECT_EQ(manifest["runs"][0]["sha256"], sha256_hex(slurp(dir.path() / "custom_N1.csv")));
  const auto on_disk = nlohmann::json::parse(slurp(dir.path() / "manifest.json"));
  EXPECT_EQ(on_disk["library_version"], SUPERATOM_VERSION);
  EXPECT_EQ(on_disk["config"][0]["key"], "experiment");
  EXPECT_EQ(on_disk["runs"][0]["model"]["pulse_shape"], "constant");
  EXPECT_TRUE(on_disk["runs"][0].contains("wall_seconds"));
}

TEST(Run, RepeatedRunsAreByteIdentical) {
  ScratchDir a;
  ScratchDir b;
  const std::string body =
      "experiment = custom\nn_atoms = 2\nengine = both\nn_traj = 12\nseed = 99\njump_log = true\n"
      "t_end = 8\nsample_count = 41\n";
  std::ostringstream log;
  const auto ma = run_experiment(parse_config_text(body + "output_dir = " + a.path().string() + "\n"), "a", log);
  const auto mb = run_experiment(parse_config_text(body + "output_dir = " + b.path().string() + "\n"), "b", log);
  for (const char* file : {"custom_N2.csv", "custom_N2_mcwf.csv", "custom_N2_mcwf_jumps.csv"}) {
    ASSERT_TRUE(fs::exists(a.path() / file)) << file;
    EXPECT_EQ(slurp(a.path() / file), slurp(b.path() / file)) << file;
  }
  for (std::size_t k = 0; k < 2; ++k) EXPECT_EQ(ma["runs"][k]["sha256"], mb["runs"][k]["sha256"]);
  EXPECT_EQ(slurp(a.path() / "custom_N2_mcwf_jumps.csv").rfind("trajectory_index,time_us,channel,atom\n", 0), 0u);
  const auto table = read_csv(a.path() / "custom_N2_mcwf.csv");
  EXPECT_EQ(table.header.back(), "stderr_pr1");
}

TEST(Run, Fig1cAndFig2Artifacts) {
  ScratchDir dir;
  std::ostringstream log;
  run_experiment(parse_config_text("experiment = fig1c\nn_atoms = 1..2\nsample_count = 61\noutput_dir = " +
                                   dir.path().string() + "\n"),
                 "fig1c", log);
  for (const char* file : {"fig1c_N1_dissipative.csv", "fig1c_N1_coherent.csv", "fig1c_N2_dissipative.csv",
                           "fig1c_N2_coherent.csv", "manifest.json"}) {
    EXPECT_TRUE(fs::exists(dir.path() / file)) << file;
  }
  ScratchDir two;
  const auto manifest = run_experiment(
      parse_config_text("experiment = fig2\nn_atoms = 1,2\nsample_count = 61\noutput_dir = " + two.path().string() + "\n"),
      "fig2", log);
  const auto summary = read_csv(two.path() / "fig2_summary.csv");
  ASSERT_EQ(summary.header, (std::vector<std::string>{"n_atoms", "pr1_final", "pr1_final_dephased", "estimate_dephased"}));
  ASSERT_EQ(summary.rows.size(), 2u);
  const double x = summary.rows[0][2];
  EXPECT_NEAR(summary.rows[0][3], x, 1e-8);
  EXPECT_NEAR(summary.rows[1][3], superatom_excitation_estimate(2, x), 1e-8);
  EXPECT_LT(x, summary.rows[0][1]);
  EXPECT_EQ(manifest["summary"]["file"], "fig2_summary.csv");
  const auto deph = read_csv(two.path() / "fig2_N1_deph.csv");
  EXPECT_EQ(deph.rows.back()[deph.column("pr1")], x);
}

#ifdef SUPERATOM_CLI_PATH
int run_cli(const std::string& args, const fs::path& capture) {
  const std::string cmd = std::string(SUPERATOM_CLI_PATH) + " " + args + " > " + capture.string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

TEST(Binary, ExitCodes) {
  ScratchDir dir;
  const fs::path out = dir.path() / "out.txt";
  spit(dir.path() / "ok.cfg", "experiment = fig1c\nn_atoms = 1..6\n");
  EXPECT_EQ(run_cli("validate " + (dir.path() / "ok.cfg").string(), out), kExitOk);
  EXPECT_NE(slurp(out).find("blockade satisfied: Δ = 20.0·w_0"), std::string::npos) << slurp(out);

  spit(dir.path() / "bad.cfg", "experiment = fig1c\nn_atoms = 2\n\nbogus = 1\n");
  EXPECT_EQ(run_cli("validate " + (dir.path() / "bad.cfg").string(), out), kExitParse);
  EXPECT_NE(slurp(out).find("line 4: unknown key 'bogus'"), std::string::npos) << slurp(out);
  EXPECT_EQ(run_cli("run " + (dir.path() / "bad.cfg").string(), out), kExitParse);

  spit(dir.path() / "big.cfg", "n_atoms = 13\n");
  EXPECT_EQ(run_cli("run " + (dir.path() / "big.cfg").string(), out), kExitCapacity);
  EXPECT_EQ(run_cli("validate " + (dir.path() / "big.cfg").string(), out), kExitCapacity);

  // No finite-precision run keeps the trace within 1e-300.
  spit(dir.path() / "drift.cfg", "n_atoms = 2\nt_end = 5\nrtol = 1e-3\ntrace_drift_tol = 1e-300\noutput_dir = " +
                                     (dir.path() / "drift").string() + "\n");
  EXPECT_EQ(run_cli("run " + (dir.path() / "drift.cfg").string(), out), kExitIntegration);
  EXPECT_NE(slurp(out).find("trace drift"), std::string::npos) << slurp(out);

  EXPECT_EQ(run_cli("run " + (dir.path() / "missing.cfg").string(), out), kExitParse);
  EXPECT_EQ(run_cli("--version", out), 0);
  EXPECT_NE(slurp(out).find(SUPERATOM_VERSION), std::string::npos);
  EXPECT_NE(run_cli("", out), 0);
}

TEST(Binary, RunWritesArtifacts) {
  ScratchDir dir;
  const fs::path out = dir.path() / "out.txt";
  spit(dir.path() / "rabi.cfg", "n_atoms = 1\ncoherent = true\npulse_shape = constant\nomega0 = 2\n"
                                "omega_er_scale = 0\nt_end = 1\nsample_count = 11\noutput_dir = " +
                                    (dir.path() / "res").string() + "\n");
  EXPECT_EQ(run_cli("run " + (dir.path() / "rabi.cfg").string(), out), kExitOk) << slurp(out);
  EXPECT_TRUE(fs::exists(dir.path() / "res" / "custom_N1.csv"));
  EXPECT_TRUE(fs::exists(dir.path() / "res" / "manifest.json"));
}
#endif

}  // namespace
}  // namespace superatom::cli
