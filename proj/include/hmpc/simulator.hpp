#pragma once

#include <hmpc/common.hpp>
#include <hmpc/kernels.hpp>
#include <hmpc/mpc_dynamic.hpp>
#include <hmpc/mpc_kinematic.hpp>
#include <hmpc/robot_model.hpp>
#include <hmpc/trajgen.hpp>

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace hmpc {

struct PlantState {
  double t = 0.0;
  Vec q;
  Vec qd;
  Vec last_u;  // torque applied during the last step, after clamping
  int saturated_steps = 0;
  int degraded_ticks = 0;

  static PlantState at_rest(const Vec& q);
};

/// Semi-implicit Euler under the clamped torque. Throws NumericalError on a
/// non-finite torque.
PlantState step_torque_plant(const RobotModel& model, const PlantState& state, const Vec& u, double dt,
                             int substeps = 1);

/// Inner joint loop of a position-controlled arm:
/// u = M(q) (kp (q_cmd - q) - kd qd) + b(q, qd), recomputed every substep.
struct PositionGains {
  double kp = 25600.0;
  double kd = 320.0;
};

PlantState step_position_plant(const RobotModel& model, const PlantState& state, const Vec& q_cmd, double dt,
                               const PositionGains& gains = {}, int substeps = 1);

enum class ControllerKind { Osc, KinMpc, DynMpc, Ik };

std::string_view to_string(ControllerKind c);
/// Accepts osc, kin_mpc, dyn_mpc, ik. Throws std::invalid_argument.
ControllerKind parse_controller(std::string_view name);
/// kin_mpc and ik run on the position plant, osc and dyn_mpc on the torque plant.
bool uses_position_plant(ControllerKind c);

/// Everything a run depends on besides the model.
struct ScenarioConfig {
  std::string scenario = "singularity_pass";
  ControllerKind controller = ControllerKind::KinMpc;
  int n_p = 10;
  double dt = 1e-3;
  std::uint64_t seed = 0;
  /// Uniform perturbation of the start configuration, drawn from seed.
  double initial_noise = 0.0;
  /// Payload attached for payload_pick_place.
  double payload_mass = 12.0;
  double svd_threshold = 1e-2;
  /// Diagonal weight overrides; empty keeps the scenario defaults, one entry is broadcast.
  Vec Q_e, Q_d, Q_a, Q_u;
  Vec eps_q, eps_v;
  PositionGains gains;
  int substeps = 1;
  bool literal_dtau = false;
  Exec exec = Exec::Serial;
  /// Run only the first max_ticks ticks when positive.
  int max_ticks = 0;
};

struct TickLog {
  double t = 0.0;
  Vec q, qd, u, cmd;
  double pos_err = 0.0;
  double ori_err = 0.0;
  int iterations = 0;
  bool degraded = false;
  bool saturated = false;
};

struct RunMetrics {
  std::vector<double> t;
  std::vector<double> accumulated_pos_err;  // running sum of position error norms
  std::vector<double> accumulated_ori_err;
  std::vector<double> solve_time;           // seconds per controller step
  double max_abs_qdd = 0.0;      // plant joint accelerations
  double max_cmd_qdd = 0.0;      // second differences of position commands
  double max_cmd_velocity_ratio = 0.0;  // max |cmd velocity| / limit
  int velocity_violations = 0;   // ticks whose command velocity exceeds the limit
  int position_violations = 0;   // ticks whose command leaves the joint range
  double min_abs_q5_at_violation = 0.0;  // joint 5 of the command at velocity violations, 6-DOF only
  int saturated_steps = 0;
  int degraded_ticks = 0;

  int ticks() const { return static_cast<int>(t.size()); }
};

struct RunResult {
  RunMetrics metrics;
  std::vector<TickLog> log;
};

/// Controller settings a run uses: defaults, scenario adjustments, then overrides.
KinMpcConfig kin_mpc_config(const ScenarioConfig& cfg, int n, int task_rows);
DynMpcConfig dyn_mpc_config(const ScenarioConfig& cfg, int n, int task_rows, std::optional<Posture> posture);

/// Model actually simulated for the scenario (payload attached where needed).
RobotModel scenario_model(const RobotModel& base, const ScenarioConfig& cfg);

/// Ticks the controller against the plant once per trajectory sample.
RunResult run_scenario(const RobotModel& base, const ScenarioConfig& cfg);
RunResult run_scenario(const RobotModel& base, const ScenarioConfig& cfg, const TaskTrajectory& traj);

/// Deterministic per-tick CSV (no wall-clock columns).
std::string log_to_csv(const std::vector<TickLog>& log);
/// t,solve_time_s
std::string timing_to_csv(const RunMetrics& m);
/// Key: value lines.
std::string metrics_report(const RunMetrics& m, const ScenarioConfig& cfg);

/// Per-tick controller time statistics for one horizon.
struct HorizonTiming {
  int n_p = 0;
  int ticks = 0;
  double min_s = 0.0;
  double median_s = 0.0;
  double p99_s = 0.0;
};

/// Runs cfg for `ticks` ticks at every horizon and summarizes solve times.
std::vector<HorizonTiming> bench_horizon(const RobotModel& base, ScenarioConfig cfg, const std::vector<int>& horizons,
                                         int ticks);
/// n_p,ticks,min_s,median_s,p99_s
std::string horizon_timing_to_csv(const std::vector<HorizonTiming>& rows);
/// True when median_s never decreases from one row to the next.
bool medians_nondecreasing(const std::vector<HorizonTiming>& rows);

}  // namespace hmpc
