#include <hmpc/nominal.hpp>
#include <hmpc/trajgen.hpp>

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>

#include "test_support.hpp"

namespace hmpc {
namespace {

using testing::desk_model;
using testing::Rng;

TEST(Spline, ConstantWaypoints) {
  const Vec3 p(0.1, 0.2, 0.3);
  const SplineSamples s = cubic_spline_position({0.0, 1.0}, {p, p}, 0.01);
  ASSERT_EQ(s.position.size(), 101u);
  for (std::size_t k = 0; k < s.position.size(); ++k) {
    EXPECT_LT((s.position[k] - p).norm(), 1e-15);
    EXPECT_LT(s.velocity[k].norm(), 1e-15);
  }
}

TEST(Spline, StraightLineStaysOnSegment) {
  const Vec3 a(0.0, 0.0, 0.0), b(1.0, -2.0, 0.5);
  const SplineSamples s = cubic_spline_position({0.0, 0.5, 2.0}, {a, 0.3 * b, b}, 0.001);
  const Vec3 dir = b.normalized();
  for (std::size_t k = 0; k < s.position.size(); ++k) {
    const Vec3 p = s.position[k];
    EXPECT_LT((p - p.dot(dir) * dir).norm(), 1e-12);
  }
  EXPECT_LT(s.velocity.front().norm(), 1e-12);
  EXPECT_LT(s.velocity.back().norm(), 1e-12);
}

TEST(Spline, InterpolatesAndIsTwiceDifferentiable) {
  Rng rng(41);
  const double dt = 1e-3;
  std::vector<double> t{0.0, 0.4, 0.9, 1.3, 2.0};
  std::vector<Vec3> pts;
  for (std::size_t i = 0; i < t.size(); ++i) pts.push_back(rng.vec(3));
  const SplineSamples s = cubic_spline_position(t, pts, dt);
  for (std::size_t i = 0; i < t.size(); ++i) {
    const int k = static_cast<int>(std::lround(t[i] / dt));
    EXPECT_LT((s.position[k] - pts[i]).norm(), 1e-12);
  }
  // C2 across interior knots: the acceleration step over a knot is no larger
  // than the steps on either side, and a central second difference matches it.
  for (std::size_t i = 1; i + 1 < t.size(); ++i) {
    const int k = static_cast<int>(std::lround(t[i] / dt));
    const double across = (s.acceleration[k + 1] - s.acceleration[k - 1]).norm();
    const double before = (s.acceleration[k - 1] - s.acceleration[k - 3]).norm();
    const double after = (s.acceleration[k + 3] - s.acceleration[k + 1]).norm();
    EXPECT_LE(across, 2.0 * std::max(before, after) + 1e-9) << i;
    const Vec3 central = (s.position[k + 1] - 2 * s.position[k] + s.position[k - 1]) / (dt * dt);
    EXPECT_LT((central - s.acceleration[k]).norm(), 1e-2 * (1.0 + s.acceleration[k].norm())) << i;
    const double dv = (s.velocity[k + 1] - s.velocity[k - 1]).norm();
    EXPECT_LT(dv, 2.0 * dt * (s.acceleration[k].norm() + after + before) + 1e-12) << i;
  }
}

TEST(Spline, RejectsDuplicateTimes) {
  EXPECT_THROW(cubic_spline_position({0.0, 0.0}, {Vec3::Zero(), Vec3::Ones()}, 0.1), std::invalid_argument);
  EXPECT_THROW(cubic_spline_position({0.0}, {Vec3::Zero()}, 0.1), std::invalid_argument);
}

TEST(Slerp, EndpointsAndShortestPath) {
  const Eigen::Quaterniond a = Eigen::Quaterniond::UnitRandom();
  const Eigen::Quaterniond b = Eigen::Quaterniond::UnitRandom();
  EXPECT_EQ(quaternion_interp(a, b, 0.0).coeffs(), a.coeffs());
  EXPECT_LT(quaternion_interp(a, b, 1.0).angularDistance(b), 1e-12);
  const Eigen::Quaterniond nb(-b.coeffs());
  for (double s : {0.1, 0.37, 0.8}) {
    EXPECT_LT(quaternion_interp(a, b, s).angularDistance(quaternion_interp(a, nb, s)), 1e-12);
  }
}

TEST(Slerp, HalfwayToQuarterTurn) {
  const Eigen::Quaterniond id = Eigen::Quaterniond::Identity();
  const Eigen::Quaterniond q90(Eigen::AngleAxisd(M_PI / 2, Vec3::UnitZ()));
  const Eigen::Quaterniond half = quaternion_interp(id, q90, 0.5);
  const Eigen::Quaterniond q45(Eigen::AngleAxisd(M_PI / 4, Vec3::UnitZ()));
  EXPECT_LT((half.coeffs() - q45.coeffs()).norm(), 1e-12);
}

TEST(Scenario, SingularityPassEndpoints) {
  const TaskTrajectory tr = scenario_trajectory("singularity_pass", desk_model(), 1e-3);
  EXPECT_DOUBLE_EQ(tr.duration(), 4.0);
  EXPECT_EQ(tr.size(), 4001);
  const Pose a = forward_kinematics(desk_model(), tr.q_start);
  const Pose b = forward_kinematics(desk_model(), singularity_pass_end());
  EXPECT_EQ(tr.samples.front().pose.translation, a.translation);
  EXPECT_EQ(tr.samples.front().pose.rotation.coeffs(), a.rotation.coeffs());
  EXPECT_LT((tr.samples.back().pose.translation - b.translation).norm(), 1e-12);
  EXPECT_LT(tr.samples.back().pose.rotation.angularDistance(b.rotation), 1e-12);
}

TEST(Scenario, FirstSampleIsStartPose) {
  for (const std::string& name : scenario_names()) {
    const RobotModel& m = name == "circle_2dof" ? testing::planar2() : desk_model();
    const TaskTrajectory tr = scenario_trajectory(name, m, 1e-3);
    const Pose a = forward_kinematics(m, tr.q_start);
    EXPECT_EQ(tr.samples.front().pose.translation, a.translation) << name;
    EXPECT_EQ(tr.samples.front().pose.rotation.coeffs(), a.rotation.coeffs()) << name;
    for (const TaskTarget& t : tr.samples) {
      EXPECT_NEAR(t.pose.rotation.norm(), 1.0, 1e-12);
      EXPECT_GE(t.pose.rotation.w(), 0.0);
    }
  }
  EXPECT_THROW(scenario_trajectory("nope", desk_model(), 1e-3), std::invalid_argument);
}

TEST(Scenario, SingularityPassReachesWristSingularity) {
  const TaskTrajectory tr = scenario_trajectory("singularity_pass", desk_model(), 1e-3);
  // A coarse threshold lets the wrist follow the pose path straight through q5 = 0.
  const NominalRollout coarse = ik_rollout(desk_model(), tr.q_start, tr.samples, tr.tasks, tr.dt, 0.1);
  int crossings = 0;
  for (std::size_t k = 1; k < coarse.q_hat.size(); ++k) {
    if ((coarse.q_hat[k - 1](4) < 0.0) != (coarse.q_hat[k](4) < 0.0)) ++crossings;
  }
  EXPECT_GE(crossings, 1);
  EXPECT_GT(coarse.q_hat.back()(4), 0.5);

  // The default threshold turns back near q5 = 0 and flips joints 4 and 6
  // by half a turn, which reaches the same end pose.
  const NominalRollout fine = ik_rollout(desk_model(), tr.q_start, tr.samples, tr.tasks, tr.dt, 1e-2);
  double closest = 1e9;
  for (const Vec& q : fine.q_hat) closest = std::min(closest, std::abs(q(4)));
  EXPECT_LT(closest, 0.1);
  const Vec& last = fine.q_hat.back();
  EXPECT_NEAR(std::abs(last(3) - singularity_pass_end()(3)), M_PI, 0.05);
  EXPECT_NEAR(last(4), -singularity_pass_end()(4), 0.05);
}

TEST(Scenario, TwistsMatchFiniteDifferences) {
  const TaskTrajectory tr = scenario_trajectory("payload_pick_place", desk_model(), 1e-3);
  for (int k = 1; k + 1 < tr.size(); k += 97) {
    const Pose& a = tr.samples[k - 1].pose;
    const Pose& b = tr.samples[k + 1].pose;
    Vec6 fd;
    fd << (b.translation - a.translation) / 2e-3, rotation_log(b.rotation_matrix() * a.rotation_matrix().transpose()) / 2e-3;
    EXPECT_LT((fd - tr.samples[k].twist).norm(), 1e-4) << k;
  }
}

TEST(Trajectory, WindowPadsWithFinalSample) {
  const TaskTrajectory tr = scenario_trajectory("circle_2dof", testing::planar2(), 1e-3);
  const auto w = tr.window(tr.final_index() - 2, 6);
  ASSERT_EQ(w.size(), 6u);
  for (int k = 2; k < 6; ++k) EXPECT_EQ(w[k].pose.translation, tr.samples.back().pose.translation);
}

TEST(Trajectory, CsvRoundTrip) {
  const TaskTrajectory tr = scenario_trajectory("payload_pick_place", desk_model(), 1e-3);
  const std::string path = (std::filesystem::temp_directory_path() / "hmpc_traj_test.csv").string();
  write_trajectory_csv(tr, path);
  const TaskTrajectory back = read_trajectory_csv(path);
  std::remove(path.c_str());
  ASSERT_EQ(back.size(), tr.size());
  EXPECT_NEAR(back.dt, tr.dt, 1e-15);
  for (int k = 0; k < tr.size(); ++k) {
    EXPECT_EQ(back.samples[k].pose.translation, tr.samples[k].pose.translation);
    EXPECT_LT(back.samples[k].pose.rotation.angularDistance(tr.samples[k].pose.rotation), 1e-14);
  }
  EXPECT_LT((back.samples[250].twist - tr.samples[250].twist).norm(), 1e-4);
  EXPECT_EQ(trajectory_to_csv(back), trajectory_to_csv(tr));
}

TEST(Trajectory, CsvErrors) {
  EXPECT_THROW(parse_trajectory_csv("a,b\n"), ParseError);
  EXPECT_THROW(parse_trajectory_csv("t,px,py,pz,qw,qx,qy,qz\n0,1,2\n"), ParseError);
  EXPECT_THROW(read_trajectory_csv("/nonexistent/file.csv"), ParseError);
}

}  // namespace
}  // namespace hmpc
