// Copyright 2026 The doublemeas Authors
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


// Command-line front end: observable generation, exact references, single
// allocation runs and the three repeated-run experiments.

#include <CLI11.hpp>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "doublemeas.hpp"
#include "json.hpp"

namespace dm = doublemeas;
using nlohmann::json;

namespace {

enum Exit { kOk = 0, kUsage = 2, kNumerical = 3, kResource = 4 };

struct Source {
  std::string observable_file;
  std::string builtin;
  std::string state_file;
  bool ground = false;
  std::size_t max_qubits = dm::kDefaultMaxQubits;
  std::string backend = "quadrature";
};

void add_source(CLI::App* cmd, Source& s, bool with_state = true) {
  auto* f = cmd->add_option("--observable", s.observable_file, "Observable file (coefficient and letters per line)");
  auto* b = cmd->add_option("--builtin", s.builtin, "Built-in observable: ising-1x2, ising-2x2, ising-2x3, toy-fig1");
  f->excludes(b);
  if (with_state) {
    auto* st = cmd->add_option("--state", s.state_file, "Amplitude file, one 're im' pair per line");
    auto* g = cmd->add_flag("--ground-state", s.ground, "Use the ground state of the observable (default)");
    st->excludes(g);
  }
  cmd->add_option("--max-qubits", s.max_qubits, "Dense simulation cap")->check(CLI::PositiveNumber);
  cmd->add_option("--backend", s.backend, "Pair posterior backend")->check(CLI::IsMember({"quadrature", "mcmc"}));
}

dm::Observable load_observable(const Source& s) {
  if (!s.builtin.empty()) return dm::parse_observable(dm::builtin(s.builtin).text);
  if (!s.observable_file.empty()) return dm::read_observable(s.observable_file);
  throw dm::InvalidInput("one of --observable or --builtin is required");
}

dm::StateVector load_state(const Source& s, const dm::Observable& obs) {
  if (!s.state_file.empty()) return dm::read_state(s.state_file, obs.width, s.max_qubits);
  return dm::ground_state(obs, s.max_qubits).state;
}

dm::PosteriorConfig posterior_config(const Source& s) {
  dm::PosteriorConfig c;
  c.pair_backend = s.backend == "mcmc" ? dm::Backend::mcmc : dm::Backend::quadrature;
  return c;
}

void write_text(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
    return;
  }
  std::ofstream f(path);
  if (!f) throw dm::InvalidInput("cannot write '" + path + "'");
  f << text;
}

std::vector<bool> parse_arms(const std::string& arms) {
  if (arms == "both") return {true, false};
  if (arms == "double") return {true};
  if (arms == "single") return {false};
  throw dm::InvalidInput("unknown arms '" + arms + "'");
}

template <std::size_t N>
std::array<double, N> json_array(const json& j) {
  if (!j.is_array() || j.size() != N) throw dm::InvalidInput("expected an array of " + std::to_string(N) + " numbers");
  std::array<double, N> a{};
  for (std::size_t k = 0; k < N; ++k) a[k] = j[k].get<double>();
  return a;
}

// Coefficient file: {"field": [...], "perturb": [[x, y], ...], "coupling": [...],
// "edge_perturb": [[xx, xy, xz, yx, yy, yz, zx, zy], ...]}.
dm::IsingCoefficients read_coefficients(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw dm::InvalidInput("cannot open coefficient file '" + path + "'");
  json j;
  try {
    j = json::parse(f);
  } catch (const json::exception& e) {
    throw dm::InvalidInput(std::string("coefficient file: ") + e.what());
  }
  dm::IsingCoefficients c;
  try {
    c.field = j.at("field").get<std::vector<double>>();
    c.coupling = j.at("coupling").get<std::vector<double>>();
    for (const auto& p : j.at("perturb")) c.perturb.push_back(json_array<2>(p));
    for (const auto& p : j.at("edge_perturb")) c.edge_perturb.push_back(json_array<8>(p));
  } catch (const json::exception& e) {
    throw dm::InvalidInput(std::string("coefficient file: ") + e.what());
  }
  for (const auto& e : c.edge_perturb)
    if (e[1] != e[3] || e[2] != e[6] || e[5] != e[7])
      throw dm::InvalidInput("edge perturbation matrix is not symmetric");
  return c;
}

int run(int argc, char** argv) {
  CLI::App app{"Adaptive Pauli-measurement allocation with single and double-copy shots"};
  app.require_subcommand(1);

  // gen-ising
  auto* gen = app.add_subcommand("gen-ising", "Write a perturbed periodic Ising observable");
  std::size_t nx = 0, ny = 0;
  std::uint64_t gen_seed = 1;
  std::string gen_coef, gen_builtin, gen_out;
  gen->add_option("--nx", nx, "Lattice size along x")->check(CLI::PositiveNumber);
  gen->add_option("--ny", ny, "Lattice size along y")->check(CLI::PositiveNumber);
  gen->add_option("--seed", gen_seed, "Seed for default random coefficients");
  auto* gc = gen->add_option("--coefficients", gen_coef, "JSON coefficient file");
  auto* gb = gen->add_option("--builtin", gen_builtin, "Emit a bundled table instead");
  gc->excludes(gb);
  gen->add_option("--out", gen_out, "Output path (default stdout)");

  // reference
  auto* ref = app.add_subcommand("reference", "Exact expectation values as JSON");
  Source ref_src;
  std::string ref_out;
  add_source(ref, ref_src);
  ref->add_option("--out", ref_out, "Output path (default stdout)");

  // estimate
  auto* est = app.add_subcommand("estimate", "One adaptive allocation run");
  Source est_src;
  double est_budget = 100;
  std::uint64_t est_seed = 1;
  bool est_no_double = false;
  std::string est_out, est_trace;
  add_source(est, est_src);
  est->add_option("--budget", est_budget, "Effective-shot budget")->check(CLI::NonNegativeNumber);
  est->add_option("--seed", est_seed, "Sampling seed");
  est->add_flag("--no-double", est_no_double, "Disable double-copy shots");
  est->add_option("--out", est_out, "Report JSON path (default stdout)");
  est->add_option("--trace", est_trace, "Trace CSV path");

  // curve
  auto* cur = app.add_subcommand("curve", "M_eff times variance against budget, both arms");
  Source cur_src;
  dm::CurveConfig cur_cfg;
  std::string cur_arms = "both", cur_out;
  add_source(cur, cur_src);
  cur->add_option("--budgets", cur_cfg.budgets, "Strictly increasing budgets")->delimiter(',');
  cur->add_option("--reps", cur_cfg.reps, "Repetitions")->check(CLI::PositiveNumber);
  cur->add_option("--seed", cur_cfg.seed, "Base seed");
  cur->add_option("--arms", cur_arms, "both, double or single")->check(CLI::IsMember({"both", "double", "single"}));
  cur->add_option("--out", cur_out, "CSV path (default stdout)");

  // calibrate
  auto* cal = app.add_subcommand("calibrate", "z-scores of the estimate against the exact value");
  Source cal_src;
  dm::CalibrationConfig cal_cfg;
  std::string cal_arms = "both", cal_mode = "replay", cal_out;
  add_source(cal, cal_src);
  cal->add_option("--budget", cal_cfg.budget, "Effective-shot budget")->check(CLI::NonNegativeNumber);
  cal->add_option("--reps", cal_cfg.reps, "Repetitions")->check(CLI::PositiveNumber);
  cal->add_option("--seed", cal_cfg.seed, "Base seed");
  cal->add_option("--mode", cal_mode, "replay or adaptive")->check(CLI::IsMember({"replay", "adaptive"}));
  cal->add_option("--arms", cal_arms, "both, double or single")->check(CLI::IsMember({"both", "double", "single"}));
  cal->add_option("--out", cal_out, "CSV path (default stdout)");

  // double-usage
  auto* du = app.add_subcommand("double-usage", "Mean double shots against shots taken, with a line fit");
  Source du_src;
  dm::DoubleUsageConfig du_cfg;
  bool du_no_double = false;
  std::string du_out;
  add_source(du, du_src);
  du->add_option("--max-shots", du_cfg.max_shots, "Shots taken per run")->check(CLI::Range(2.0, 1e9));
  du->add_option("--reps", du_cfg.reps, "Repetitions")->check(CLI::PositiveNumber);
  du->add_option("--seed", du_cfg.seed, "Base seed");
  du->add_option("--fit-above", du_cfg.fit_above, "Fit uses M above this value");
  du->add_flag("--no-double", du_no_double, "Disable double-copy shots");
  du->add_option("--out", du_out, "CSV path (default stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  if (gen->parsed()) {
    std::string text;
    if (!gen_builtin.empty()) {
      text = dm::builtin(gen_builtin).text;
    } else {
      if (nx == 0 || ny == 0) throw dm::InvalidInput("--nx and --ny are required");
      const auto c = gen_coef.empty() ? dm::random_ising_coefficients(nx, ny, gen_seed) : read_coefficients(gen_coef);
      std::ostringstream os;
      os << "# Perturbed Ising model, periodic " << nx << "x" << ny << " lattice.\n";
      text = os.str() + dm::serialize_observable(dm::ising_observable(nx, ny, c));
    }
    write_text(gen_out, text);
  } else if (ref->parsed()) {
    const auto obs = load_observable(ref_src);
    const auto gs = dm::ground_state(obs, ref_src.max_qubits);
    const auto state = ref_src.state_file.empty() ? gs.state : load_state(ref_src, obs);
    json j;
    j["expectation"] = dm::observable_expectation(state, obs);
    j["ground_energy"] = gs.energy;
    j["identity_offset"] = obs.identity_offset;
    j["terms"] = json::array();
    for (const auto& t : obs.terms)
      j["terms"].push_back({{"pauli", t.pauli.str()},
                            {"coefficient", t.coefficient},
                            {"theta", dm::exact_theta(state, t.pauli)},
                            {"phi", dm::exact_phi(state, t.pauli)}});
    write_text(ref_out, j.dump(2) + "\n");
  } else if (est->parsed()) {
    const auto obs = load_observable(est_src);
    const auto state = load_state(est_src, obs);
    const auto cover = dm::greedy_cover(obs);
    dm::AllocationConfig ac;
    ac.budget = est_budget;
    ac.enable_double = !est_no_double;
    ac.seed = est_seed;
    ac.max_qubits = est_src.max_qubits;
    ac.posterior = posterior_config(est_src);
    const auto run = dm::run_allocation(obs, cover, state, ac);
    write_text(est_out, dm::to_json(dm::estimate(run.ledger, obs, ac.posterior)).dump(2) + "\n");
    if (!est_trace.empty()) write_text(est_trace, dm::trace_csv(run.trace));
  } else if (cur->parsed()) {
    const auto obs = load_observable(cur_src);
    const auto state = load_state(cur_src, obs);
    cur_cfg.arms = parse_arms(cur_arms);
    cur_cfg.max_qubits = cur_src.max_qubits;
    cur_cfg.posterior = posterior_config(cur_src);
    auto t = dm::curve_table(dm::run_curve(obs, dm::greedy_cover(obs), state, cur_cfg));
    t.comments.insert(t.comments.begin(),
                      "# value = M_eff * variance; mean and rms_deviation over reps; best/worst chosen at the "
                      "largest budget");
    write_text(cur_out, dm::to_csv(t));
  } else if (cal->parsed()) {
    const auto obs = load_observable(cal_src);
    const auto state = load_state(cal_src, obs);
    cal_cfg.arms = parse_arms(cal_arms);
    cal_cfg.mode = cal_mode == "adaptive" ? dm::CalibrationMode::adaptive : dm::CalibrationMode::replay;
    cal_cfg.max_qubits = cal_src.max_qubits;
    cal_cfg.posterior = posterior_config(cal_src);
    write_text(cal_out, dm::to_csv(dm::calibration_table(dm::run_calibration(obs, dm::greedy_cover(obs), state, cal_cfg))));
  } else if (du->parsed()) {
    const auto obs = load_observable(du_src);
    const auto state = load_state(du_src, obs);
    du_cfg.enable_double = !du_no_double;
    du_cfg.max_qubits = du_src.max_qubits;
    du_cfg.posterior = posterior_config(du_src);
    write_text(du_out, dm::to_csv(dm::double_usage_table(dm::run_double_usage(obs, dm::greedy_cover(obs), state, du_cfg))));
  }
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const dm::InvalidInput& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const dm::NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return kNumerical;
  } catch (const dm::ResourceError& e) {
    std::cerr << "resource error: " << e.what() << "\n";
    return kResource;
  }
}
