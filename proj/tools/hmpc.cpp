// hmpc: run scenarios, time the kinematic MPC over horizons, run the
// verification suites, export scenario trajectories.

#include <hmpc/checks.hpp>
#include <hmpc/robot_model.hpp>
#include <hmpc/simulator.hpp>
#include <hmpc/trajgen.hpp>

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <filesystem>
#include <functional>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using namespace hmpc;

namespace {

enum Exit { kOk = 0, kConfig = 2, kCheck = 3, kRuntime = 4 };

/// Setup problems: bad flags, config file, model file.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct RunOptions {
  std::string model;
  std::string scenario = "singularity_pass";
  std::string controller = "kin_mpc";
  int horizon = 10;
  double dt = 1e-3;
  std::string out = "out";
  std::uint64_t seed = 0;
  double noise = 0.0;
  double payload = 12.0;
  double svd_threshold = 1e-2;
  std::vector<double> Q_e, Q_d, Q_a, Q_u, eps_q, eps_v;
  double kp = PositionGains{}.kp;
  double kd = PositionGains{}.kd;
  int substeps = 1;
  bool parallel = false;
  bool literal_dtau = false;
  int max_ticks = 0;
};

// Registered options, so that explicit flags can override the config file.
struct Bound {
  CLI::Option* opt;
  std::string key;
  std::function<void(const nlohmann::json&, RunOptions&)> from_json;
  std::function<void(const RunOptions&, RunOptions&)> from_flag;
};

template <class T>
void bind_option(CLI::App& app, std::vector<Bound>& bound, RunOptions& cli, T RunOptions::*field, const std::string& flag,
          const std::string& key, const std::string& help) {
  CLI::Option* o = app.add_option(flag, cli.*field, help);
  if constexpr (std::is_same_v<T, std::vector<double>>) o->delimiter(',');
  bound.push_back({o, key, [field](const nlohmann::json& j, RunOptions& r) { r.*field = j.get<T>(); },
                   [field](const RunOptions& src, RunOptions& dst) { dst.*field = src.*field; }});
}

void bind_flag(CLI::App& app, std::vector<Bound>& bound, RunOptions& cli, bool RunOptions::*field,
               const std::string& flag, const std::string& key, const std::string& help) {
  CLI::Option* o = app.add_flag(flag, cli.*field, help);
  bound.push_back({o, key, [field](const nlohmann::json& j, RunOptions& r) { r.*field = j.get<bool>(); },
                   [field](const RunOptions& src, RunOptions& dst) { dst.*field = src.*field; }});
}

std::vector<Bound> add_run_options(CLI::App& app, RunOptions& cli) {
  std::vector<Bound> b;
  bind_option(app, b, cli, &RunOptions::model, "--model", "model", "Robot description JSON");
  bind_option(app, b, cli, &RunOptions::scenario, "--scenario", "scenario",
       "payload_pick_place, singularity_pass or circle_2dof");
  bind_option(app, b, cli, &RunOptions::controller, "--controller", "controller", "osc, kin_mpc, dyn_mpc or ik");
  bind_option(app, b, cli, &RunOptions::horizon, "--horizon", "horizon", "Prediction horizon n_p");
  bind_option(app, b, cli, &RunOptions::dt, "--dt", "dt", "Control period [s]");
  bind_option(app, b, cli, &RunOptions::out, "--out", "out", "Output directory");
  bind_option(app, b, cli, &RunOptions::seed, "--seed", "seed", "Seed for the initial perturbation");
  bind_option(app, b, cli, &RunOptions::noise, "--noise", "noise", "Uniform start perturbation [rad]");
  bind_option(app, b, cli, &RunOptions::payload, "--payload", "payload_mass", "Payload mass for payload_pick_place [kg]");
  bind_option(app, b, cli, &RunOptions::svd_threshold, "--svd-threshold", "svd_threshold", "Relative SVD cutoff");
  bind_option(app, b, cli, &RunOptions::Q_e, "--Qe", "Q_e", "Task weight diagonal (one value is broadcast)");
  bind_option(app, b, cli, &RunOptions::Q_d, "--Qd", "Q_d", "Joint velocity weight diagonal");
  bind_option(app, b, cli, &RunOptions::Q_a, "--Qa", "Q_a", "Joint acceleration weight diagonal (kinematic MPC)");
  bind_option(app, b, cli, &RunOptions::Q_u, "--Qu", "Q_u", "Torque weight diagonal (dynamic MPC)");
  bind_option(app, b, cli, &RunOptions::eps_q, "--eps-q", "eps_q", "Terminal position box");
  bind_option(app, b, cli, &RunOptions::eps_v, "--eps-v", "eps_v", "Terminal velocity box");
  bind_option(app, b, cli, &RunOptions::kp, "--kp", "kp", "Position loop stiffness");
  bind_option(app, b, cli, &RunOptions::kd, "--kd", "kd", "Position loop damping");
  bind_option(app, b, cli, &RunOptions::substeps, "--substeps", "substeps", "Plant substeps per tick");
  bind_option(app, b, cli, &RunOptions::max_ticks, "--max-ticks", "max_ticks", "Stop after this many ticks (0 = all)");
  bind_flag(app, b, cli, &RunOptions::parallel, "--parallel", "parallel", "OpenMP kernels in the dynamic MPC");
  bind_flag(app, b, cli, &RunOptions::literal_dtau, "--literal-dtau", "literal_dtau",
            "Use dt instead of dt / sigma as the normalized step");
  return b;
}

RunOptions resolve(const RunOptions& cli, const std::vector<Bound>& bound, const std::string& config_path) {
  RunOptions r;
  if (!config_path.empty()) {
    std::ifstream in(config_path);
    if (!in) throw ConfigError("cannot open config file '" + config_path + "'");
    nlohmann::json j;
    try {
      in >> j;
    } catch (const std::exception& e) {
      throw ConfigError("config file '" + config_path + "': " + e.what());
    }
    if (!j.is_object()) throw ConfigError("config file '" + config_path + "' must hold a JSON object");
    for (auto it = j.begin(); it != j.end(); ++it) {
      const Bound* b = nullptr;
      for (const Bound& x : bound) {
        if (x.key == it.key()) b = &x;
      }
      if (!b) throw ConfigError("config file '" + config_path + "': unknown key '" + it.key() + "'");
      try {
        b->from_json(it.value(), r);
      } catch (const std::exception& e) {
        throw ConfigError("config key '" + it.key() + "': " + e.what());
      }
    }
  }
  for (const Bound& b : bound) {
    if (b.opt->count() > 0) b.from_flag(cli, r);
  }
  return r;
}

Vec to_vec(const std::vector<double>& v) { return Eigen::Map<const Vec>(v.data(), static_cast<Eigen::Index>(v.size())); }

std::string default_model(const std::string& scenario) {
  return std::string(HMPC_MODELS_DIR) + (scenario == "circle_2dof" ? "/planar2.robot.json" : "/rs007n.robot.json");
}

RobotModel load(const RunOptions& o) {
  const std::string path = o.model.empty() ? default_model(o.scenario) : o.model;
  if (!fs::exists(path)) throw ConfigError("model file not found: '" + path + "'");
  try {
    return load_model(path);
  } catch (const std::exception& e) {
    throw ConfigError("model file '" + path + "': " + e.what());
  }
}

ScenarioConfig scenario_config(const RunOptions& o) {
  const auto& names = scenario_names();
  if (std::find(names.begin(), names.end(), o.scenario) == names.end()) {
    throw ConfigError("unknown scenario '" + o.scenario + "'");
  }
  if (o.horizon < 1) throw ConfigError("--horizon must be at least 1");
  if (!(o.dt > 0.0)) throw ConfigError("--dt must be positive");
  if (o.substeps < 1) throw ConfigError("--substeps must be at least 1");
  ScenarioConfig c;
  c.scenario = o.scenario;
  try {
    c.controller = parse_controller(o.controller);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  c.n_p = o.horizon;
  c.dt = o.dt;
  c.seed = o.seed;
  c.initial_noise = o.noise;
  c.payload_mass = o.payload;
  c.svd_threshold = o.svd_threshold;
  c.Q_e = to_vec(o.Q_e);
  c.Q_d = to_vec(o.Q_d);
  c.Q_a = to_vec(o.Q_a);
  c.Q_u = to_vec(o.Q_u);
  c.eps_q = to_vec(o.eps_q);
  c.eps_v = to_vec(o.eps_v);
  c.gains = {o.kp, o.kd};
  c.substeps = o.substeps;
  c.literal_dtau = o.literal_dtau;
  c.exec = o.parallel ? Exec::Parallel : Exec::Serial;
  c.max_ticks = o.max_ticks;
  return c;
}

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write '" + path.string() + "'");
  out << text;
}

fs::path make_out_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw ConfigError("cannot create output directory '" + dir + "': " + ec.message());
  return fs::path(dir);
}

int cmd_run(const RunOptions& o) {
  const ScenarioConfig cfg = scenario_config(o);
  const RobotModel model = load(o);
  const fs::path dir = make_out_dir(o.out);
  const RunResult r = run_scenario(model, cfg);
  const std::string stem = cfg.scenario + "_" + std::string(to_string(cfg.controller));
  write_file(dir / (stem + "_log.csv"), log_to_csv(r.log));
  write_file(dir / (stem + "_timing.csv"), timing_to_csv(r.metrics));
  const std::string report = metrics_report(r.metrics, cfg);
  write_file(dir / (stem + "_metrics.txt"), report);
  std::cout << report;
  return kOk;
}

int cmd_bench(const RunOptions& o, const std::vector<int>& horizons, int ticks) {
  if (horizons.empty()) throw ConfigError("--horizons must name at least one horizon");
  for (int h : horizons) {
    if (h < 1) throw ConfigError("horizons must be at least 1");
  }
  if (ticks < 1) throw ConfigError("--ticks must be positive");
  const ScenarioConfig cfg = scenario_config(o);
  const RobotModel model = load(o);
  const fs::path dir = make_out_dir(o.out);
  const std::vector<HorizonTiming> rows = bench_horizon(model, cfg, horizons, ticks);
  const std::string csv = horizon_timing_to_csv(rows);
  write_file(dir / "bench_horizon.csv", csv);
  std::cout << csv;
  for (const HorizonTiming& h : rows) {
    if (h.n_p == 10) {
      std::cout << "median at n_p=10: " << h.median_s * 1e3 << " ms (real-time budget 1 ms at 1 kHz)\n";
    }
  }
  if (!medians_nondecreasing(rows)) {
    std::cout << "FAIL median solve time decreases with the horizon\n";
    return kCheck;
  }
  std::cout << "PASS median solve time nondecreasing in the horizon\n";
  return kOk;
}

int cmd_check(const RunOptions& o, const std::vector<std::string>& suites, int samples, int qp_problems) {
  const std::string path = o.model.empty() ? default_model("payload_pick_place") : o.model;
  if (!fs::exists(path)) throw ConfigError("model file not found: '" + path + "'");
  std::optional<RobotModel> model;
  try {
    model = load_model(path);
  } catch (const ModelError& e) {
    std::cout << "FAIL model: " << e.what() << '\n';
    return kCheck;
  } catch (const std::exception& e) {
    throw ConfigError("model file '" + path + "': " + e.what());
  }
  std::cout << "PASS model: " << model->name << " validated\n";
  CheckOptions opt;
  opt.seed = o.seed == 0 ? 1 : o.seed;
  opt.derivative_samples = samples;
  opt.qp_problems = qp_problems;
  std::vector<CheckResult> results;
  try {
    results = run_checks(*model, suites.empty() ? check_suite_names() : suites, opt);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  bool ok = true;
  for (const CheckResult& r : results) {
    std::cout << format_check(r) << '\n';
    ok = ok && r.passed;
  }
  return ok ? kOk : kCheck;
}

int cmd_export(const RunOptions& o, const std::string& file) {
  const ScenarioConfig cfg = scenario_config(o);
  const RobotModel model = scenario_model(load(o), cfg);
  const TaskTrajectory traj = scenario_trajectory(cfg.scenario, model, cfg.dt);
  fs::path target;
  if (file.empty()) {
    target = make_out_dir(o.out) / (cfg.scenario + "_traj.csv");
  } else {
    target = file;
    if (target.has_parent_path()) make_out_dir(target.parent_path().string());
  }
  write_file(target, trajectory_to_csv(traj));
  std::cout << "wrote " << traj.size() << " samples to " << target.string() << '\n';
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Hierarchical-task MPC for serial manipulators"};
  app.require_subcommand(1);
  std::string config;

  RunOptions run_cli, bench_cli, check_cli, export_cli;

  CLI::App* run = app.add_subcommand("run", "Simulate one scenario with one controller");
  const auto run_bound = add_run_options(*run, run_cli);
  run->add_option("--config", config, "JSON config; explicit flags win");

  CLI::App* bench = app.add_subcommand("bench-horizon", "Per-tick controller time over horizons");
  const auto bench_bound = add_run_options(*bench, bench_cli);
  bench->add_option("--config", config, "JSON config; explicit flags win");
  std::vector<int> horizons{2, 5, 10, 20};
  int ticks = 500;
  bench->add_option("--horizons", horizons, "Horizons to time")->delimiter(',');
  bench->add_option("--ticks", ticks, "Ticks per horizon");

  CLI::App* check = app.add_subcommand("check", "Derivative, QP and identity verification suites");
  const auto check_bound = add_run_options(*check, check_cli);
  check->add_option("--config", config, "JSON config; explicit flags win");
  std::vector<std::string> suites;
  int samples = 1000;
  int qp_problems = 500;
  check->add_option("--checks", suites, "Subset of derivatives, qp, identity")->delimiter(',');
  check->add_option("--samples", samples, "Random states for derivatives and identity");
  check->add_option("--qp-problems", qp_problems, "Random QPs");

  CLI::App* exp = app.add_subcommand("export-traj", "Write a scenario trajectory as CSV");
  const auto export_bound = add_run_options(*exp, export_cli);
  exp->add_option("--config", config, "JSON config; explicit flags win");
  std::string export_file;
  exp->add_option("--file", export_file, "Output file (default <out>/<scenario>_traj.csv)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfig;
  }

  try {
    if (*run) return cmd_run(resolve(run_cli, run_bound, config));
    if (*bench) return cmd_bench(resolve(bench_cli, bench_bound, config), horizons, ticks);
    if (*check) return cmd_check(resolve(check_cli, check_bound, config), suites, samples, qp_problems);
    if (*exp) return cmd_export(resolve(export_cli, export_bound, config), export_file);
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kConfig;
  } catch (const std::exception& e) {
    std::cerr << "runtime failure: " << e.what() << '\n';
    return kRuntime;
  }
  return kConfig;
}
