#include <hmpc/robot_model.hpp>

#include <json.hpp>

#include <cmath>
#include <fstream>
#include <sstream>

namespace hmpc {

using json = nlohmann::json;

namespace {

Mat3 skew_sq(const Vec3& d) {
  // |d|^2 I - d d^T, the parallel-axis shift for a unit mass at offset d.
  return d.squaredNorm() * Mat3::Identity() - d * d.transpose();
}

void check_inertia(const Mat3& inertia, bool strict, const std::string& who) {
  if (!inertia.allFinite()) throw ModelError(who + ": inertia has non-finite entries");
  if ((inertia - inertia.transpose()).cwiseAbs().maxCoeff() > 1e-12 * (1.0 + inertia.norm())) {
    throw ModelError(who + ": inertia tensor is not symmetric");
  }
  Eigen::SelfAdjointEigenSolver<Mat3> eig(inertia);
  const Vec3 p = eig.eigenvalues();
  const double tol = 1e-12 * (1.0 + p.cwiseAbs().maxCoeff());
  if (strict ? p.minCoeff() <= 0.0 : p.minCoeff() < -tol) {
    throw ModelError(who + (strict ? ": inertia tensor is not positive definite"
                                   : ": inertia tensor is not positive semidefinite"));
  }
  if (p(0) + p(1) < p(2) - tol || p(0) + p(2) < p(1) - tol || p(1) + p(2) < p(0) - tol) {
    throw ModelError(who + ": principal moments violate the triangle inequality");
  }
}

Vec3 vec3_from(const json& j, const char* what) {
  if (!j.is_array() || j.size() != 3) throw ParseError(std::string(what) + " must be a 3-array");
  return Vec3(j[0].get<double>(), j[1].get<double>(), j[2].get<double>());
}

Eigen::Isometry3d transform_from(const json& j) {
  Eigen::Isometry3d t = Eigen::Isometry3d::Identity();
  if (j.contains("xyz")) t.translation() = vec3_from(j.at("xyz"), "xyz");
  if (j.contains("rpy")) t.linear() = rpy_to_rotation(vec3_from(j.at("rpy"), "rpy"));
  return t;
}

json transform_to_json(const Eigen::Isometry3d& t) {
  // Intrinsic XYZ: R = Rx(a) Ry(b) Rz(c).
  const Vec3 rpy = t.linear().eulerAngles(0, 1, 2);
  const Vec3 p = t.translation();
  return json{{"xyz", {p.x(), p.y(), p.z()}}, {"rpy", {rpy.x(), rpy.y(), rpy.z()}}};
}

}  // namespace

Vec RobotModel::q_min() const {
  Vec v(dof());
  for (int i = 0; i < dof(); ++i) v(i) = joints[i].q_min;
  return v;
}

Vec RobotModel::q_max() const {
  Vec v(dof());
  for (int i = 0; i < dof(); ++i) v(i) = joints[i].q_max;
  return v;
}

Vec RobotModel::v_limit() const {
  Vec v(dof());
  for (int i = 0; i < dof(); ++i) v(i) = joints[i].v_limit;
  return v;
}

Vec RobotModel::u_limit() const {
  Vec v(dof());
  for (int i = 0; i < dof(); ++i) v(i) = joints[i].u_limit;
  return v;
}

Mat3 rpy_to_rotation(const Vec3& rpy) {
  return (Eigen::AngleAxisd(rpy.x(), Vec3::UnitX()) * Eigen::AngleAxisd(rpy.y(), Vec3::UnitY()) *
          Eigen::AngleAxisd(rpy.z(), Vec3::UnitZ()))
      .toRotationMatrix();
}

void validate(const RobotModel& model) {
  if (model.joints.empty()) throw ModelError("model must have at least one joint");
  if (model.links.size() != model.joints.size()) {
    throw ModelError("model has " + std::to_string(model.joints.size()) + " joints but " +
                     std::to_string(model.links.size()) + " links");
  }
  if (!model.gravity.allFinite()) throw ModelError("gravity must be finite");
  for (int k = 0; k < model.dof(); ++k) {
    const JointSpec& j = model.joints[k];
    const std::string who = "joint " + std::to_string(k);
    if (std::abs(j.axis.norm() - 1.0) > 1e-12) throw ModelError(who + ": axis must have unit norm");
    if (!(j.q_min < j.q_max)) throw ModelError(who + ": q_min must be below q_max");
    if (!(j.v_limit > 0.0)) throw ModelError(who + ": velocity limit must be positive");
    if (!(j.u_limit > 0.0)) throw ModelError(who + ": torque limit must be positive");
    const LinkInertia& l = model.links[k];
    const std::string lwho = "link " + std::to_string(k);
    if (!(l.mass > 0.0)) throw ModelError(lwho + ": mass must be positive");
    if (!l.com.allFinite()) throw ModelError(lwho + ": center of mass must be finite");
    check_inertia(l.inertia, true, lwho);
  }
}

void validate(const PayloadSpec& payload) {
  if (!(payload.mass >= 0.0)) throw ModelError("payload: mass must be non-negative");
  if (!payload.com_offset.allFinite()) throw ModelError("payload: com offset must be finite");
  check_inertia(payload.inertia, false, "payload");
}

RobotModel parse_model(const std::string& json_text) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("malformed robot description: ") + e.what());
  }
  RobotModel model;
  try {
    model.name = doc.value("name", std::string("robot"));
    if (doc.contains("gravity")) model.gravity = vec3_from(doc.at("gravity"), "gravity");
    for (const json& jj : doc.at("joints")) {
      JointSpec j;
      const std::string kind = jj.value("kind", std::string("revolute"));
      if (kind == "revolute") {
        j.kind = JointKind::Revolute;
      } else if (kind == "prismatic") {
        j.kind = JointKind::Prismatic;
      } else {
        throw ParseError("unknown joint kind '" + kind + "'");
      }
      j.axis = vec3_from(jj.at("axis"), "axis");
      if (jj.contains("origin")) j.parent_transform = transform_from(jj.at("origin"));
      const json& lim = jj.at("limits");
      const json& q = lim.at("q");
      if (!q.is_array() || q.size() != 2) throw ParseError("limits.q must be [lo, hi]");
      j.q_min = q[0].get<double>();
      j.q_max = q[1].get<double>();
      j.v_limit = lim.at("v").get<double>();
      j.u_limit = lim.at("u").get<double>();
      model.joints.push_back(j);
    }
    for (const json& lj : doc.at("links")) {
      LinkInertia l;
      l.mass = lj.at("mass").get<double>();
      l.com = vec3_from(lj.at("com"), "com");
      const json& in = lj.at("inertia");
      if (!in.is_array() || in.size() != 6) throw ParseError("inertia must have 6 entries");
      const double ixx = in[0], ixy = in[1], ixz = in[2], iyy = in[3], iyz = in[4], izz = in[5];
      l.inertia << ixx, ixy, ixz, ixy, iyy, iyz, ixz, iyz, izz;
      model.links.push_back(l);
    }
    if (doc.contains("ee_transform")) model.ee_transform = transform_from(doc.at("ee_transform"));
  } catch (const json::exception& e) {
    throw ParseError(std::string("invalid robot description: ") + e.what());
  }
  validate(model);
  return model;
}

RobotModel load_model(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open robot description '" + path.string() + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_model(ss.str());
}

std::string model_to_json(const RobotModel& model) {
  json doc;
  doc["name"] = model.name;
  doc["gravity"] = {model.gravity.x(), model.gravity.y(), model.gravity.z()};
  doc["joints"] = json::array();
  for (const JointSpec& j : model.joints) {
    doc["joints"].push_back(
        {{"kind", j.kind == JointKind::Revolute ? "revolute" : "prismatic"},
         {"axis", {j.axis.x(), j.axis.y(), j.axis.z()}},
         {"origin", transform_to_json(j.parent_transform)},
         {"limits", {{"q", {j.q_min, j.q_max}}, {"v", j.v_limit}, {"u", j.u_limit}}}});
  }
  doc["links"] = json::array();
  for (const LinkInertia& l : model.links) {
    const Mat3& I = l.inertia;
    doc["links"].push_back({{"mass", l.mass},
                            {"com", {l.com.x(), l.com.y(), l.com.z()}},
                            {"inertia", {I(0, 0), I(0, 1), I(0, 2), I(1, 1), I(1, 2), I(2, 2)}}});
  }
  doc["ee_transform"] = transform_to_json(model.ee_transform);
  return doc.dump(2);
}

RobotModel attach_payload(const RobotModel& model, const PayloadSpec& payload) {
  validate(payload);
  if (payload.mass == 0.0 && payload.inertia.isZero(0.0)) return model;

  RobotModel out = model;
  LinkInertia& link = out.links.back();
  const Mat3& R = model.ee_transform.linear();
  const Vec3 c2 = model.ee_transform * payload.com_offset;
  const Mat3 I2 = R * payload.inertia * R.transpose();

  const double m1 = link.mass;
  const double m2 = payload.mass;
  const double m = m1 + m2;
  const Vec3 c = (m1 * link.com + m2 * c2) / m;
  link.inertia = link.inertia + m1 * skew_sq(link.com - c) + I2 + m2 * skew_sq(c2 - c);
  link.com = c;
  link.mass = m;
  return out;
}

RobotModel detach_payload(const RobotModel& model, const PayloadSpec& payload) {
  validate(payload);
  if (payload.mass == 0.0 && payload.inertia.isZero(0.0)) return model;

  RobotModel out = model;
  LinkInertia& link = out.links.back();
  const Mat3& R = model.ee_transform.linear();
  const Vec3 c2 = model.ee_transform * payload.com_offset;
  const Mat3 I2 = R * payload.inertia * R.transpose();

  const double m = link.mass;
  const double m2 = payload.mass;
  const double m1 = m - m2;
  if (!(m1 > 0.0)) throw ModelError("detach_payload: payload is heavier than the last link");
  const Vec3 c = link.com;
  const Vec3 c1 = (m * c - m2 * c2) / m1;
  link.inertia = link.inertia - I2 - m2 * skew_sq(c2 - c) - m1 * skew_sq(c1 - c);
  link.com = c1;
  link.mass = m1;
  return out;
}

}  // namespace hmpc
