#include <hmpc/simulator.hpp>

#include <hmpc/dynamics.hpp>
#include <hmpc/kinematics.hpp>
#include <hmpc/mpc_dynamic.hpp>
#include <hmpc/mpc_kinematic.hpp>
#include <hmpc/nominal.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <iomanip>
#include <limits>
#include <random>
#include <sstream>
#include <stdexcept>

namespace hmpc {

PlantState PlantState::at_rest(const Vec& q) {
  PlantState s;
  s.q = q;
  s.qd = Vec::Zero(q.size());
  s.last_u = Vec::Zero(q.size());
  return s;
}

namespace {

void check_plant_args(const RobotModel& model, const PlantState& state, double dt, int substeps) {
  require_size(state.q.size(), model.dof(), "plant q");
  require_size(state.qd.size(), model.dof(), "plant qd");
  if (!(dt > 0.0)) throw std::invalid_argument("plant dt must be positive");
  if (substeps < 1) throw std::invalid_argument("plant substeps must be at least 1");
}

// One semi-implicit Euler step; returns true when the torque was clamped.
bool integrate(const RobotModel& model, PlantState& s, const Vec& u, double h) {
  require_size(u.size(), model.dof(), "plant torque");
  if (!u.allFinite()) throw NumericalError("plant torque is not finite");
  const Vec uc = clamp_torque(model, u);
  s.qd = s.qd + h * forward_dynamics(model, s.q, s.qd, uc);
  s.q = s.q + h * s.qd;
  const bool clamped = uc != u;
  s.last_u = uc;
  return clamped;
}

}  // namespace

PlantState step_torque_plant(const RobotModel& model, const PlantState& state, const Vec& u, double dt,
                             int substeps) {
  check_plant_args(model, state, dt, substeps);
  PlantState s = state;
  bool clamped = false;
  const double h = dt / substeps;
  for (int k = 0; k < substeps; ++k) clamped = integrate(model, s, u, h) || clamped;
  if (clamped) ++s.saturated_steps;
  s.t = state.t + dt;
  return s;
}

PlantState step_position_plant(const RobotModel& model, const PlantState& state, const Vec& q_cmd, double dt,
                               const PositionGains& gains, int substeps) {
  check_plant_args(model, state, dt, substeps);
  require_size(q_cmd.size(), model.dof(), "position plant q_cmd");
  if (!q_cmd.allFinite()) throw NumericalError("position command is not finite");
  PlantState s = state;
  bool clamped = false;
  const double h = dt / substeps;
  for (int k = 0; k < substeps; ++k) {
    const Vec a = gains.kp * (q_cmd - s.q) - gains.kd * s.qd;
    const Vec u = mass_matrix(model, s.q) * a + bias_forces(model, s.q, s.qd);
    clamped = integrate(model, s, u, h) || clamped;
  }
  if (clamped) ++s.saturated_steps;
  s.t = state.t + dt;
  return s;
}

std::string_view to_string(ControllerKind c) {
  switch (c) {
    case ControllerKind::Osc:
      return "osc";
    case ControllerKind::KinMpc:
      return "kin_mpc";
    case ControllerKind::DynMpc:
      return "dyn_mpc";
    case ControllerKind::Ik:
      return "ik";
  }
  return "?";
}

ControllerKind parse_controller(std::string_view name) {
  for (ControllerKind c : {ControllerKind::Osc, ControllerKind::KinMpc, ControllerKind::DynMpc, ControllerKind::Ik}) {
    if (name == to_string(c)) return c;
  }
  throw std::invalid_argument("unknown controller '" + std::string(name) + "' (expected osc, kin_mpc, dyn_mpc or ik)");
}

bool uses_position_plant(ControllerKind c) { return c == ControllerKind::KinMpc || c == ControllerKind::Ik; }

RobotModel scenario_model(const RobotModel& base, const ScenarioConfig& cfg) {
  if (cfg.scenario == "payload_pick_place" && cfg.payload_mass > 0.0) {
    PayloadSpec p;
    p.mass = cfg.payload_mass;
    return attach_payload(base, p);
  }
  return base;
}

namespace {

constexpr double kSingularityQa = 6e-5;

// Override with one entry is broadcast.
Vec expand(const Vec& v, Eigen::Index n, const char* what) {
  if (v.size() == 1) return Vec::Constant(n, v(0));
  require_size(v.size(), n, what);
  return v;
}

Mat diag_or(const Vec& override_diag, const Mat& fallback, const char* what) {
  if (override_diag.size() == 0) return fallback;
  return expand(override_diag, fallback.rows(), what).asDiagonal();
}

std::optional<Posture> scenario_posture(const RobotModel& model, const TaskTrajectory& traj) {
  if (model.dof() != 6) return std::nullopt;
  Posture p;
  p.q_des = traj.q_start;
  p.kp.resize(6);
  p.kp << 100, 100, 100, 50, 50, 1;
  p.kd.resize(6);
  p.kd << 3, 5, 5, 0.2, 0.2, 0.1;
  return p;
}

}  // namespace

KinMpcConfig kin_mpc_config(const ScenarioConfig& cfg, int n, int rows) {
  KinMpcConfig k = KinMpcConfig::defaults(n, rows);
  k.n_p = cfg.n_p;
  k.dt = cfg.dt;
  k.svd_threshold = cfg.svd_threshold;
  k.Q_e = diag_or(cfg.Q_e, k.Q_e, "Q_e override");
  k.Q_d = diag_or(cfg.Q_d, k.Q_d, "Q_d override");
  // The singularity scenario needs some acceleration damping to cross q5 = 0 smoothly.
  if (cfg.scenario == "singularity_pass") k.Q_a = kSingularityQa * Mat::Identity(n, n);
  k.Q_a = diag_or(cfg.Q_a, k.Q_a, "Q_a override");
  if (cfg.eps_q.size() > 0) k.eps_q = expand(cfg.eps_q, n, "eps_q override");
  if (cfg.eps_v.size() > 0) k.eps_v = expand(cfg.eps_v, n, "eps_v override");
  return k;
}

DynMpcConfig dyn_mpc_config(const ScenarioConfig& cfg, int n, int rows, std::optional<Posture> posture) {
  DynMpcConfig d = DynMpcConfig::defaults(n, rows);
  d.n_p = cfg.n_p;
  d.dt = cfg.dt;
  d.svd_threshold = cfg.svd_threshold;
  d.Q_e = diag_or(cfg.Q_e, d.Q_e, "Q_e override");
  d.Q_d = diag_or(cfg.Q_d, d.Q_d, "Q_d override");
  d.Q_u = diag_or(cfg.Q_u, d.Q_u, "Q_u override");
  if (cfg.eps_q.size() > 0) d.eps_x.head(n) = expand(cfg.eps_q, n, "eps_q override");
  if (cfg.eps_v.size() > 0) d.eps_x.tail(n) = expand(cfg.eps_v, n, "eps_v override");
  d.posture = std::move(posture);
  d.literal_dtau = cfg.literal_dtau;
  d.exec = cfg.exec;
  return d;
}

RunResult run_scenario(const RobotModel& base, const ScenarioConfig& cfg) {
  const RobotModel model = scenario_model(base, cfg);
  return run_scenario(base, cfg, scenario_trajectory(cfg.scenario, model, cfg.dt));
}

RunResult run_scenario(const RobotModel& base, const ScenarioConfig& cfg, const TaskTrajectory& traj) {
  if (!(cfg.dt > 0.0)) throw std::invalid_argument("dt must be positive");
  if (cfg.n_p < 1) throw std::invalid_argument("horizon must be at least 1");
  if (std::abs(traj.dt - cfg.dt) > 1e-12) throw std::invalid_argument("trajectory dt differs from controller dt");
  RunResult result;
  if (traj.samples.empty()) return result;

  const RobotModel model = scenario_model(base, cfg);
  const int n = model.dof();
  require_size(traj.q_start.size(), n, "scenario start configuration");
  const std::vector<TaskSpec> tasks = sorted_tasks(traj.tasks);
  const int rows = task_dim(tasks);
  const std::optional<Posture> posture = scenario_posture(model, traj);

  Vec q0 = traj.q_start;
  if (cfg.initial_noise > 0.0) {
    std::mt19937_64 gen(cfg.seed);
    std::uniform_real_distribution<double> dist(-cfg.initial_noise, cfg.initial_noise);
    for (int j = 0; j < n; ++j) q0(j) += dist(gen);
  }

  std::optional<KinMpcController> kin;
  std::optional<DynMpcController> dyn;
  std::optional<OscController> osc;
  std::optional<IkController> ik;
  switch (cfg.controller) {
    case ControllerKind::KinMpc:
      kin.emplace(model, kin_mpc_config(cfg, n, rows));
      kin->reset(q0);
      break;
    case ControllerKind::DynMpc:
      dyn.emplace(model, dyn_mpc_config(cfg, n, rows, posture));
      break;
    case ControllerKind::Osc:
      osc.emplace(model, posture, cfg.svd_threshold);
      break;
    case ControllerKind::Ik:
      ik.emplace(model, cfg.dt, cfg.svd_threshold);
      ik->reset(q0);
      break;
  }

  const bool position_plant = uses_position_plant(cfg.controller);
  const Vec v_lim = model.v_limit();
  const Vec q_lo = model.q_min();
  const Vec q_hi = model.q_max();
  const int ticks = cfg.max_ticks > 0 ? std::min(cfg.max_ticks, traj.size()) : traj.size();

  RunMetrics& m = result.metrics;
  m.min_abs_q5_at_violation = std::numeric_limits<double>::infinity();
  PlantState plant = PlantState::at_rest(q0);
  Vec cmd_prev = q0, cmd_prev2 = q0;
  double acc_pos = 0.0, acc_ori = 0.0;
  for (int i = 0; i < ticks; ++i) {
    TickLog row;
    row.t = i * cfg.dt;
    const TaskError err = task_error(traj.samples[i].pose, forward_kinematics(model, plant.q));
    row.pos_err = err.position().norm();
    row.ori_err = err.orientation().norm();
    acc_pos += row.pos_err;
    acc_ori += row.ori_err;

    Vec x(2 * n);
    x << plant.q, plant.qd;
    Vec cmd;
    const auto start = std::chrono::steady_clock::now();
    switch (cfg.controller) {
      case ControllerKind::KinMpc: {
        const KinMpcStep s = kin->step(plant.q, traj, i);
        cmd = s.q_cmd;
        row.iterations = s.iterations;
        row.degraded = s.degraded;
        break;
      }
      case ControllerKind::DynMpc: {
        const DynMpcStep s = dyn->step(x, traj, i);
        cmd = s.u_cmd;
        row.iterations = s.iterations;
        row.degraded = s.degraded;
        break;
      }
      case ControllerKind::Osc:
        cmd = osc->step(x, traj, i);
        break;
      case ControllerKind::Ik:
        cmd = ik->step(traj, i);
        break;
    }
    const double elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

    const int saturated_before = plant.saturated_steps;
    const Vec qd_before = plant.qd;
    plant = position_plant ? step_position_plant(model, plant, cmd, cfg.dt, cfg.gains, cfg.substeps)
                           : step_torque_plant(model, plant, cmd, cfg.dt, cfg.substeps);
    if (row.degraded) ++plant.degraded_ticks;
    row.saturated = plant.saturated_steps != saturated_before;
    row.q = plant.q;
    row.qd = plant.qd;
    row.u = plant.last_u;
    row.cmd = cmd;

    m.max_abs_qdd = std::max(m.max_abs_qdd, ((plant.qd - qd_before) / cfg.dt).cwiseAbs().maxCoeff());
    if (position_plant) {
      const Vec vel = (cmd - cmd_prev) / cfg.dt;
      const Vec acc = (cmd - 2.0 * cmd_prev + cmd_prev2) / (cfg.dt * cfg.dt);
      m.max_cmd_qdd = std::max(m.max_cmd_qdd, acc.cwiseAbs().maxCoeff());
      m.max_cmd_velocity_ratio = std::max(m.max_cmd_velocity_ratio, vel.cwiseAbs().cwiseQuotient(v_lim).maxCoeff());
      if (((vel.cwiseAbs() - v_lim).array() > 1e-8).any()) {
        ++m.velocity_violations;
        if (n == 6) m.min_abs_q5_at_violation = std::min(m.min_abs_q5_at_violation, std::abs(cmd(4)));
      }
      if (((q_lo - cmd).array() > 1e-8).any() || ((cmd - q_hi).array() > 1e-8).any()) ++m.position_violations;
      cmd_prev2 = cmd_prev;
      cmd_prev = cmd;
    }

    m.t.push_back(row.t);
    m.accumulated_pos_err.push_back(acc_pos);
    m.accumulated_ori_err.push_back(acc_ori);
    m.solve_time.push_back(elapsed);
    result.log.push_back(std::move(row));
  }
  m.saturated_steps = plant.saturated_steps;
  m.degraded_ticks = plant.degraded_ticks;
  return result;
}

namespace {

void put_vec(std::ostringstream& os, const Vec& v) {
  for (Eigen::Index j = 0; j < v.size(); ++j) os << ',' << v(j);
}

void put_header(std::ostringstream& os, const char* name, Eigen::Index n) {
  for (Eigen::Index j = 0; j < n; ++j) os << ',' << name << j;
}

double percentile(std::vector<double> v, double p) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const std::size_t idx = static_cast<std::size_t>(std::ceil(p * (v.size() - 1)));
  return v[std::min(idx, v.size() - 1)];
}

}  // namespace

std::string log_to_csv(const std::vector<TickLog>& log) {
  std::ostringstream os;
  os << std::setprecision(17);
  os << 't';
  const Eigen::Index n = log.empty() ? 0 : log.front().q.size();
  const Eigen::Index nc = log.empty() ? 0 : log.front().cmd.size();
  put_header(os, "q", n);
  put_header(os, "qd", n);
  put_header(os, "u", n);
  put_header(os, "cmd", nc);
  os << ",pos_err,ori_err,iterations,degraded,saturated\n";
  for (const TickLog& r : log) {
    os << r.t;
    put_vec(os, r.q);
    put_vec(os, r.qd);
    put_vec(os, r.u);
    put_vec(os, r.cmd);
    os << ',' << r.pos_err << ',' << r.ori_err << ',' << r.iterations << ',' << (r.degraded ? 1 : 0) << ','
       << (r.saturated ? 1 : 0) << '\n';
  }
  return os.str();
}

std::string timing_to_csv(const RunMetrics& m) {
  std::ostringstream os;
  os << std::setprecision(17) << "t,solve_time_s\n";
  for (int k = 0; k < m.ticks(); ++k) os << m.t[k] << ',' << m.solve_time[k] << '\n';
  return os.str();
}

std::string metrics_report(const RunMetrics& m, const ScenarioConfig& cfg) {
  std::ostringstream os;
  os << std::setprecision(10);
  os << "scenario: " << cfg.scenario << '\n';
  os << "controller: " << to_string(cfg.controller) << '\n';
  os << "horizon: " << cfg.n_p << '\n';
  os << "dt: " << cfg.dt << '\n';
  os << "seed: " << cfg.seed << '\n';
  os << "ticks: " << m.ticks() << '\n';
  os << "accumulated_pos_err: " << (m.ticks() ? m.accumulated_pos_err.back() : 0.0) << '\n';
  os << "accumulated_ori_err: " << (m.ticks() ? m.accumulated_ori_err.back() : 0.0) << '\n';
  os << "max_abs_qdd: " << m.max_abs_qdd << '\n';
  if (uses_position_plant(cfg.controller)) {
    os << "max_cmd_qdd: " << m.max_cmd_qdd << '\n';
    os << "max_cmd_velocity_ratio: " << m.max_cmd_velocity_ratio << '\n';
    os << "velocity_violations: " << m.velocity_violations << '\n';
    os << "position_violations: " << m.position_violations << '\n';
  }
  os << "saturated_steps: " << m.saturated_steps << '\n';
  os << "degraded_ticks: " << m.degraded_ticks << '\n';
  os << "solve_time_median_s: " << percentile(m.solve_time, 0.5) << '\n';
  os << "solve_time_p99_s: " << percentile(m.solve_time, 0.99) << '\n';
  os << "solve_time_max_s: " << percentile(m.solve_time, 1.0) << '\n';
  return os.str();
}

std::vector<HorizonTiming> bench_horizon(const RobotModel& base, ScenarioConfig cfg, const std::vector<int>& horizons,
                                         int ticks) {
  if (horizons.empty()) throw std::invalid_argument("bench_horizon: no horizons given");
  if (ticks < 1) throw std::invalid_argument("bench_horizon: ticks must be positive");
  const RobotModel model = scenario_model(base, cfg);
  const TaskTrajectory traj = scenario_trajectory(cfg.scenario, model, cfg.dt);
  std::vector<HorizonTiming> out;
  for (int n_p : horizons) {
    cfg.n_p = n_p;
    cfg.max_ticks = ticks;
    const RunResult r = run_scenario(base, cfg, traj);
    HorizonTiming h;
    h.n_p = n_p;
    h.ticks = r.metrics.ticks();
    h.min_s = percentile(r.metrics.solve_time, 0.0);
    h.median_s = percentile(r.metrics.solve_time, 0.5);
    h.p99_s = percentile(r.metrics.solve_time, 0.99);
    out.push_back(h);
  }
  return out;
}

std::string horizon_timing_to_csv(const std::vector<HorizonTiming>& rows) {
  std::ostringstream os;
  os << std::setprecision(9) << "n_p,ticks,min_s,median_s,p99_s\n";
  for (const HorizonTiming& h : rows) {
    os << h.n_p << ',' << h.ticks << ',' << h.min_s << ',' << h.median_s << ',' << h.p99_s << '\n';
  }
  return os.str();
}

bool medians_nondecreasing(const std::vector<HorizonTiming>& rows) {
  for (std::size_t k = 1; k < rows.size(); ++k) {
    if (rows[k].median_s < rows[k - 1].median_s) return false;
  }
  return true;
}

}  // namespace hmpc
