// Serial vs OpenMP prediction kernels and full controller steps.

#include <hmpc/kernels.hpp>
#include <hmpc/mpc_dynamic.hpp>
#include <hmpc/mpc_kinematic.hpp>
#include <hmpc/nominal.hpp>
#include <hmpc/robot_model.hpp>
#include <hmpc/trajgen.hpp>

#include <benchmark/benchmark.h>

namespace {

using namespace hmpc;

const RobotModel& desk() {
  static const RobotModel m = load_model(std::string(HMPC_MODELS_DIR) + "/rs007n.robot.json");
  return m;
}

const TaskTrajectory& payload_traj() {
  static const TaskTrajectory t = scenario_trajectory("payload_pick_place", desk(), 1e-3);
  return t;
}

const TaskTrajectory& singular_traj() {
  static const TaskTrajectory t = scenario_trajectory("singularity_pass", desk(), 1e-3);
  return t;
}

NominalRollout rollout(int n_p) {
  const TaskTrajectory& t = payload_traj();
  return osc_rollout(desk(), t.q_start, Vec::Zero(6), t.window(0, n_p + 1), sorted_tasks(t.tasks), std::nullopt,
                     1e-3, 1e-2);
}

void BM_Linearize(benchmark::State& state, Exec exec) {
  const int n_p = static_cast<int>(state.range(0));
  const NominalRollout r = rollout(n_p);
  for (auto _ : state) benchmark::DoNotOptimize(linearize_horizon(desk(), r, n_p * 1e-3, 1e-3, false, exec));
}

void BM_Prediction(benchmark::State& state, Exec exec) {
  const int n_p = static_cast<int>(state.range(0));
  const auto stages = linearize_horizon(desk(), rollout(n_p), n_p * 1e-3, 1e-3, false, Exec::Serial);
  for (auto _ : state) benchmark::DoNotOptimize(build_prediction(stages, exec));
}

void BM_KinMpcStep(benchmark::State& state) {
  const int n_p = static_cast<int>(state.range(0));
  const TaskTrajectory& t = singular_traj();
  KinMpcConfig cfg = KinMpcConfig::defaults(6, 6);
  cfg.n_p = n_p;
  for (auto _ : state) {
    state.PauseTiming();
    KinMpcController c(desk(), cfg);
    c.reset(t.q_start);
    state.ResumeTiming();
    benchmark::DoNotOptimize(c.step(t.q_start, t, 100));
  }
}

void BM_DynMpcStep(benchmark::State& state, Exec exec) {
  const int n_p = static_cast<int>(state.range(0));
  const TaskTrajectory& t = payload_traj();
  DynMpcConfig cfg = DynMpcConfig::defaults(6, 6);
  cfg.n_p = n_p;
  cfg.exec = exec;
  DynMpcController c(desk(), cfg);
  Vec x(12);
  x << t.q_start, Vec::Zero(6);
  for (auto _ : state) benchmark::DoNotOptimize(c.step(x, t, 100));
}

}  // namespace

BENCHMARK_CAPTURE(BM_Linearize, serial, hmpc::Exec::Serial)->Arg(5)->Arg(10)->Arg(20)->Arg(40);
BENCHMARK_CAPTURE(BM_Linearize, parallel, hmpc::Exec::Parallel)->Arg(5)->Arg(10)->Arg(20)->Arg(40);
BENCHMARK_CAPTURE(BM_Prediction, serial, hmpc::Exec::Serial)->Arg(5)->Arg(10)->Arg(20)->Arg(40);
BENCHMARK_CAPTURE(BM_Prediction, parallel, hmpc::Exec::Parallel)->Arg(5)->Arg(10)->Arg(20)->Arg(40);
BENCHMARK(BM_KinMpcStep)->Arg(2)->Arg(5)->Arg(10)->Arg(20);
BENCHMARK_CAPTURE(BM_DynMpcStep, serial, hmpc::Exec::Serial)->Arg(5)->Arg(10);
BENCHMARK_CAPTURE(BM_DynMpcStep, parallel, hmpc::Exec::Parallel)->Arg(5)->Arg(10);

BENCHMARK_MAIN();
