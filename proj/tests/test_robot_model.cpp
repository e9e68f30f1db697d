#include <hmpc/robot_model.hpp>

#include <gtest/gtest.h>

#include "test_support.hpp"

namespace hmpc {
namespace {

using testing::desk_model;
using testing::model_path;
using testing::pendulum;

const char* kOneJoint = R"({
  "name": "one",
  "joints": [{"kind": "revolute", "axis": [0, 0, 1],
              "origin": {"xyz": [0, 0, 0], "rpy": [0, 0, 0]},
              "limits": {"q": [-1, 1], "v": 1, "u": 1}}],
  "links": [{"mass": 1.0, "com": [1, 0, 0], "inertia": [1e-6, 0, 0, 1e-6, 0, 1e-6]}]
})";

TEST(RobotModel, LoadsDeskModelWithTorqueLimits) {
  const RobotModel& m = desk_model();
  ASSERT_EQ(m.dof(), 6);
  const std::vector<double> expected{239.0, 239.0, 124.5, 32.0, 40.96, 25.6};
  for (int i = 0; i < 6; ++i) EXPECT_EQ(m.joints[i].u_limit, expected[i]);
  EXPECT_EQ(m.gravity, Vec3(0, 0, -9.81));
}

TEST(RobotModel, MinimalChainIsValid) {
  const RobotModel m = parse_model(kOneJoint);
  EXPECT_EQ(m.dof(), 1);
  EXPECT_EQ(m.links[0].com, Vec3(1, 0, 0));
  EXPECT_EQ(m.gravity, Vec3(0, 0, -9.81));
}

TEST(RobotModel, InvertedJointBoundIsRejected) {
  std::string text = kOneJoint;
  text.replace(text.find("[-1, 1]"), 7, "[1, -1]");
  try {
    parse_model(text);
    FAIL() << "expected ModelError";
  } catch (const ModelError& e) {
    EXPECT_NE(std::string(e.what()).find("q_min"), std::string::npos);
  }
}

TEST(RobotModel, ValidationNamesViolatedInvariant) {
  RobotModel m = parse_model(kOneJoint);
  m.joints[0].axis = Vec3(0, 0, 2);
  EXPECT_THROW(validate(m), ModelError);

  m = parse_model(kOneJoint);
  m.joints[0].v_limit = 0.0;
  EXPECT_THROW(validate(m), ModelError);

  m = parse_model(kOneJoint);
  m.links[0].inertia = Vec3(1.0, 1.0, 5.0).asDiagonal();  // violates triangle inequality
  EXPECT_THROW(validate(m), ModelError);

  m = parse_model(kOneJoint);
  m.links[0].inertia(0, 0) = -1.0;
  EXPECT_THROW(validate(m), ModelError);
}

TEST(RobotModel, MalformedAndMissingFiles) {
  EXPECT_THROW(parse_model("{ not json"), ParseError);
  EXPECT_THROW(parse_model(R"({"joints": []})"), ParseError);
  try {
    load_model("/nonexistent/robot.robot.json");
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_NE(std::string(e.what()).find("/nonexistent/robot.robot.json"), std::string::npos);
  }
}

TEST(RobotModel, JsonRoundTripPreservesModel) {
  const RobotModel& m = desk_model();
  const RobotModel back = parse_model(model_to_json(m));
  ASSERT_EQ(back.dof(), m.dof());
  for (int k = 0; k < m.dof(); ++k) {
    EXPECT_TRUE(back.joints[k].parent_transform.isApprox(m.joints[k].parent_transform, 1e-12));
    EXPECT_TRUE(back.links[k].inertia.isApprox(m.links[k].inertia, 1e-12));
    EXPECT_EQ(back.joints[k].u_limit, m.joints[k].u_limit);
  }
}

TEST(RobotModel, RpyIsIntrinsicXyz) {
  const Vec3 rpy(0.3, -0.2, 0.7);
  const Mat3 expected = Eigen::AngleAxisd(0.3, Vec3::UnitX()).toRotationMatrix() *
                        Eigen::AngleAxisd(-0.2, Vec3::UnitY()).toRotationMatrix() *
                        Eigen::AngleAxisd(0.7, Vec3::UnitZ()).toRotationMatrix();
  EXPECT_TRUE(rpy_to_rotation(rpy).isApprox(expected, 1e-15));
}

TEST(Payload, ZeroMassIsIdentity) {
  const RobotModel& m = desk_model();
  const RobotModel out = attach_payload(m, PayloadSpec{});
  for (int k = 0; k < m.dof(); ++k) {
    EXPECT_EQ(out.links[k].mass, m.links[k].mass);
    EXPECT_EQ(out.links[k].com, m.links[k].com);
    EXPECT_EQ(out.links[k].inertia, m.links[k].inertia);
  }
}

TEST(Payload, TwelveKilogramPointMassAtFlange) {
  const RobotModel& m = desk_model();
  PayloadSpec p;
  p.mass = 12.0;
  const RobotModel out = attach_payload(m, p);
  const LinkInertia& before = m.links.back();
  const LinkInertia& after = out.links.back();
  EXPECT_EQ(after.mass, before.mass + 12.0);
  const Vec3 ee = m.ee_transform.translation();
  const Vec3 expected_com = (before.mass * before.com + 12.0 * ee) / (before.mass + 12.0);
  EXPECT_TRUE(after.com.isApprox(expected_com, 1e-14));
}

TEST(Payload, CompositeInertiaMatchesPointMassSum) {
  // Pendulum link is a unit point mass (plus a negligible isotropic inertia).
  const RobotModel& m = pendulum();
  PayloadSpec p;
  p.mass = 1.0;
  p.com_offset = Vec3(0, 0, 0.1);
  const RobotModel out = attach_payload(m, p);

  struct PointMass {
    double m;
    Vec3 r;
  };
  const std::vector<PointMass> masses{{1.0, m.links[0].com}, {1.0, m.ee_transform * p.com_offset}};
  double total = 0.0;
  Vec3 com = Vec3::Zero();
  for (const auto& pm : masses) {
    total += pm.m;
    com += pm.m * pm.r;
  }
  com /= total;
  Mat3 inertia = m.links[0].inertia;
  for (const auto& pm : masses) {
    const Vec3 d = pm.r - com;
    for (int a = 0; a < 3; ++a)
      for (int b = 0; b < 3; ++b) inertia(a, b) += pm.m * ((a == b ? d.squaredNorm() : 0.0) - d(a) * d(b));
  }
  EXPECT_DOUBLE_EQ(out.links[0].mass, 2.0);
  EXPECT_TRUE(out.links[0].com.isApprox(com, 1e-14));
  EXPECT_LT((out.links[0].inertia - inertia).cwiseAbs().maxCoeff(), 1e-14);
}

TEST(Payload, DetachRestoresOriginal) {
  testing::Rng rng(7);
  const RobotModel& m = desk_model();
  for (int trial = 0; trial < 50; ++trial) {
    PayloadSpec p;
    p.mass = rng.uniform(0.1, 20.0);
    p.com_offset = rng.vec(3, -0.2, 0.2);
    const Vec3 d = rng.vec(3, 0.01, 0.2);
    p.inertia = Vec3(d(1) + d(2), d(0) + d(2), d(0) + d(1)).asDiagonal();
    const RobotModel back = detach_payload(attach_payload(m, p), p);
    const LinkInertia& a = back.links.back();
    const LinkInertia& b = m.links.back();
    EXPECT_NEAR(a.mass, b.mass, 1e-12);
    EXPECT_LT((a.com - b.com).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_LT((a.inertia - b.inertia).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(Payload, RejectsNegativeMass) {
  PayloadSpec p;
  p.mass = -1.0;
  EXPECT_THROW(attach_payload(desk_model(), p), ModelError);
}

}  // namespace
}  // namespace hmpc
