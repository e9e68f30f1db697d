#include <hmpc/trajgen.hpp>

#include <hmpc/kinematics.hpp>

#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <stdexcept>

namespace hmpc {

std::vector<TaskTarget> TaskTrajectory::window(int i, int len) const {
  if (samples.empty()) throw std::invalid_argument("window of an empty trajectory");
  std::vector<TaskTarget> out;
  out.reserve(len);
  for (int k = 0; k < len; ++k) {
    const int idx = std::min(i + k, final_index());
    TaskTarget t = samples[idx];
    if (i + k > final_index()) {
      t.twist.setZero();
      t.accel.setZero();
    }
    out.push_back(t);
  }
  return out;
}

namespace {

int sample_count(double span, double dt) {
  if (!(dt > 0.0)) throw std::invalid_argument("dt must be positive");
  const double steps = span / dt;
  const double rounded = std::round(steps);
  if (std::abs(steps - rounded) > 1e-6) {
    throw std::invalid_argument("trajectory span is not a multiple of dt");
  }
  return static_cast<int>(rounded) + 1;
}

}  // namespace

SplineSamples cubic_spline_position(const std::vector<double>& times, const std::vector<Vec3>& points, double dt) {
  const int n = static_cast<int>(times.size());
  if (n < 2 || points.size() != times.size()) {
    throw std::invalid_argument("cubic spline needs at least two waypoints with matching times");
  }
  std::vector<double> h(n - 1);
  for (int i = 0; i + 1 < n; ++i) {
    h[i] = times[i + 1] - times[i];
    if (!(h[i] > 0.0)) throw std::invalid_argument("spline waypoint times must be strictly increasing");
  }

  // Second derivatives at the knots, zero first derivative at both ends.
  Mat A = Mat::Zero(n, n);
  Mat rhs = Mat::Zero(n, 3);
  auto slope = [&](int i) -> Eigen::RowVector3d { return ((points[i + 1] - points[i]) / h[i]).transpose(); };
  A(0, 0) = 2.0 * h[0];
  A(0, 1) = h[0];
  rhs.row(0) = 6.0 * slope(0);
  for (int i = 1; i + 1 < n; ++i) {
    A(i, i - 1) = h[i - 1];
    A(i, i) = 2.0 * (h[i - 1] + h[i]);
    A(i, i + 1) = h[i];
    rhs.row(i) = 6.0 * (slope(i) - slope(i - 1));
  }
  A(n - 1, n - 2) = h[n - 2];
  A(n - 1, n - 1) = 2.0 * h[n - 2];
  rhs.row(n - 1) = -6.0 * slope(n - 2);
  const Mat Mk = A.partialPivLu().solve(rhs);

  SplineSamples out;
  const int count = sample_count(times.back() - times.front(), dt);
  out.position.reserve(count);
  out.velocity.reserve(count);
  out.acceleration.reserve(count);
  int seg = 0;
  for (int k = 0; k < count; ++k) {
    const double t = k + 1 == count ? times.back() : times.front() + k * dt;
    while (seg + 2 < n && t > times[seg + 1]) ++seg;
    const double hs = h[seg];
    const double a = times[seg + 1] - t;
    const double b = t - times[seg];
    const Vec3 m0 = Mk.row(seg).transpose();
    const Vec3 m1 = Mk.row(seg + 1).transpose();
    const Vec3 c0 = points[seg] / hs - m0 * hs / 6.0;
    const Vec3 c1 = points[seg + 1] / hs - m1 * hs / 6.0;
    if (b == 0.0) {
      out.position.push_back(points[seg]);
    } else if (a == 0.0) {
      out.position.push_back(points[seg + 1]);
    } else {
      out.position.push_back(m0 * (a * a * a) / (6.0 * hs) + m1 * (b * b * b) / (6.0 * hs) + c0 * a + c1 * b);
    }
    out.velocity.push_back(-m0 * (a * a) / (2.0 * hs) + m1 * (b * b) / (2.0 * hs) - c0 + c1);
    out.acceleration.push_back(m0 * a / hs + m1 * b / hs);
  }
  return out;
}

Eigen::Quaterniond quaternion_interp(const Eigen::Quaterniond& a, const Eigen::Quaterniond& b, double s) {
  if (s == 0.0) return a;
  Eigen::Vector4d va = a.coeffs();
  Eigen::Vector4d vb = b.coeffs();
  double d = va.dot(vb);
  if (d < 0.0) {
    vb = -vb;
    d = -d;
  }
  Eigen::Vector4d out;
  if (d > 1.0 - 1e-12) {
    out = ((1.0 - s) * va + s * vb).normalized();
  } else {
    const double theta = std::acos(std::min(d, 1.0));
    const double sin_theta = std::sin(theta);
    out = (std::sin((1.0 - s) * theta) / sin_theta) * va + (std::sin(s * theta) / sin_theta) * vb;
    out.normalize();
  }
  Eigen::Quaterniond q;
  q.coeffs() = out;
  return q;
}

namespace {

struct Segment {
  double duration;
  Vec3 position;
  Eigen::Quaterniond rotation;
};

// Rest-to-rest segments; positions follow a two-point clamped spline and
// orientations a slerp with the same timing law.
std::vector<TaskTarget> build_segments(const Pose& start, const std::vector<Segment>& segments, double dt) {
  std::vector<TaskTarget> out;
  TaskTarget first;
  first.pose = start;
  out.push_back(first);
  Vec3 p0 = start.translation;
  Eigen::Quaterniond r0 = start.rotation;
  for (const Segment& seg : segments) {
    const SplineSamples sp = cubic_spline_position({0.0, seg.duration}, {p0, seg.position}, dt);
    const Vec3 w = rotation_log(seg.rotation.toRotationMatrix() * r0.toRotationMatrix().transpose());
    const int count = static_cast<int>(sp.position.size());
    for (int k = 1; k < count; ++k) {
      const double tau = std::min(1.0, k * dt / seg.duration);
      const double s = tau * tau * (3.0 - 2.0 * tau);
      const double sd = 6.0 * tau * (1.0 - tau) / seg.duration;
      const double sdd = (6.0 - 12.0 * tau) / (seg.duration * seg.duration);
      TaskTarget t;
      const Eigen::Quaterniond r = k + 1 == count ? seg.rotation : quaternion_interp(r0, seg.rotation, s);
      t.pose = Pose(r, sp.position[k]);
      t.twist << sp.velocity[k], w * sd;
      t.accel << sp.acceleration[k], w * sdd;
      if (k + 1 == count) {
        t.twist.setZero();
        t.accel.tail<3>().setZero();
      }
      out.push_back(t);
    }
    p0 = seg.position;
    r0 = seg.rotation;
  }
  return out;
}

Vec singularity_pass_start() {
  Vec q(6);
  q << 0.0, 0.0, -M_PI / 2, 0.0, -M_PI / 2, M_PI / 2;
  return q;
}

Vec payload_start() {
  Vec q(6);
  q << 0.0, 0.3, 1.6, 0.0, M_PI - 1.9, 0.0;
  return q;
}

}  // namespace

Vec singularity_pass_end() {
  Vec q(6);
  q << M_PI / 2, 0.0, -M_PI / 2, 0.0, M_PI / 4, M_PI / 2;
  return q;
}

const std::vector<std::string>& scenario_names() {
  static const std::vector<std::string> names{"payload_pick_place", "singularity_pass", "circle_2dof"};
  return names;
}

TaskTrajectory scenario_trajectory(std::string_view name, const RobotModel& model, double dt) {
  TaskTrajectory traj;
  traj.dt = dt;
  if (name == "singularity_pass") {
    if (model.dof() != 6) throw std::invalid_argument("singularity_pass needs a 6-DOF model");
    traj.q_start = singularity_pass_start();
    const Pose a = forward_kinematics(model, traj.q_start);
    const Pose b = forward_kinematics(model, singularity_pass_end());
    const double duration = 4.0;
    const SplineSamples sp = cubic_spline_position({0.0, duration}, {a.translation, b.translation}, dt);
    const Vec3 w = rotation_log(b.rotation_matrix() * a.rotation_matrix().transpose());
    const int count = static_cast<int>(sp.position.size());
    for (int k = 0; k < count; ++k) {
      const double tau = std::min(1.0, k * dt / duration);
      const double s = tau * tau * (3.0 - 2.0 * tau);
      const double sd = 6.0 * tau * (1.0 - tau) / duration;
      const double sdd = (6.0 - 12.0 * tau) / (duration * duration);
      TaskTarget t;
      const Eigen::Quaterniond r = k == 0 ? a.rotation : (k + 1 == count ? b.rotation : quaternion_interp(a.rotation, b.rotation, s));
      t.pose = Pose(r, sp.position[k]);
      t.twist << sp.velocity[k], w * sd;
      t.accel << sp.acceleration[k], w * sdd;
      traj.samples.push_back(t);
    }
    traj.tasks = default_hierarchy();
  } else if (name == "payload_pick_place") {
    if (model.dof() != 6) throw std::invalid_argument("payload_pick_place needs a 6-DOF model");
    traj.q_start = payload_start();
    const Pose a = forward_kinematics(model, traj.q_start);
    const Vec3 lift(0.0, 0.0, 0.15);
    const Vec3 shift(-0.1, 0.35, 0.0);
    const Eigen::Quaterniond turned =
        Eigen::Quaterniond(Eigen::AngleAxisd(M_PI / 2, Vec3::UnitZ())) * a.rotation;
    traj.samples = build_segments(a,
                                  {{0.5, a.translation + lift, a.rotation},
                                   {1.0, a.translation + lift + shift, turned},
                                   {0.5, a.translation + shift, turned}},
                                  dt);
    traj.tasks = default_hierarchy();
  } else if (name == "circle_2dof") {
    if (model.dof() != 2) throw std::invalid_argument("circle_2dof needs a 2-DOF model");
    traj.q_start = Eigen::Vector2d(0.3, 1.2);
    const Pose a = forward_kinematics(model, traj.q_start);
    const double radius = 0.1;
    const double duration = 2.0;
    const Vec3 center = a.translation - Vec3(radius, 0.0, 0.0);
    const int count = sample_count(duration, dt);
    for (int k = 0; k < count; ++k) {
      const double tau = std::min(1.0, k * dt / duration);
      const double s = tau * tau * (3.0 - 2.0 * tau);
      const double th = 2.0 * M_PI * s;
      const double thd = 2.0 * M_PI * 6.0 * tau * (1.0 - tau) / duration;
      const double thdd = 2.0 * M_PI * (6.0 - 12.0 * tau) / (duration * duration);
      TaskTarget t;
      const Vec3 radial(std::cos(th), std::sin(th), 0.0);
      const Vec3 tangent(-std::sin(th), std::cos(th), 0.0);
      t.pose = Pose(a.rotation, k == 0 ? a.translation : Vec3(center + radius * radial));
      t.twist.head<3>() = radius * thd * tangent;
      t.accel.head<3>() = radius * (thdd * tangent - thd * thd * radial);
      traj.samples.push_back(t);
    }
    TaskSpec pos;
    pos.priority = 1;
    pos.selector = TaskSelector::Position;
    pos.kp = Vec3(100, 100, 100);
    pos.kd = Vec3(20, 20, 20);
    traj.tasks = {pos};
  } else {
    throw std::invalid_argument("unknown scenario '" + std::string(name) + "'");
  }
  return traj;
}

std::string trajectory_to_csv(const TaskTrajectory& traj) {
  std::ostringstream os;
  os << std::setprecision(17);
  os << "t,px,py,pz,qw,qx,qy,qz\n";
  for (int k = 0; k < traj.size(); ++k) {
    const Pose& p = traj.samples[k].pose;
    os << k * traj.dt << ',' << p.translation.x() << ',' << p.translation.y() << ',' << p.translation.z() << ','
       << p.rotation.w() << ',' << p.rotation.x() << ',' << p.rotation.y() << ',' << p.rotation.z() << '\n';
  }
  return os.str();
}

void write_trajectory_csv(const TaskTrajectory& traj, const std::string& path) {
  std::ofstream f(path);
  if (!f) throw ParseError("cannot write trajectory file " + path);
  f << trajectory_to_csv(traj);
}

TaskTrajectory parse_trajectory_csv(const std::string& text) {
  std::istringstream is(text);
  std::string line;
  if (!std::getline(is, line) || line.rfind("t,px,py,pz,qw,qx,qy,qz", 0) != 0) {
    throw ParseError("trajectory CSV: missing header t,px,py,pz,qw,qx,qy,qz");
  }
  std::vector<double> times;
  TaskTrajectory traj;
  int lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string cell;
    double v[8];
    int c = 0;
    while (std::getline(ls, cell, ',') && c < 8) {
      try {
        v[c++] = std::stod(cell);
      } catch (const std::exception&) {
        throw ParseError("trajectory CSV line " + std::to_string(lineno) + ": bad number '" + cell + "'");
      }
    }
    if (c != 8) throw ParseError("trajectory CSV line " + std::to_string(lineno) + ": expected 8 columns");
    times.push_back(v[0]);
    TaskTarget t;
    t.pose = Pose(Eigen::Quaterniond(v[4], v[5], v[6], v[7]).normalized(), Vec3(v[1], v[2], v[3]));
    traj.samples.push_back(t);
  }
  if (traj.samples.empty()) throw ParseError("trajectory CSV has no samples");
  if (times.size() >= 2) {
    traj.dt = times[1] - times[0];
    if (!(traj.dt > 0.0)) throw ParseError("trajectory CSV times must increase");
    for (std::size_t k = 1; k < times.size(); ++k) {
      if (std::abs(times[k] - times[0] - k * traj.dt) > 1e-9 * (1.0 + times[k])) {
        throw ParseError("trajectory CSV samples are not evenly spaced");
      }
    }
  }
  // Central differences for velocity and acceleration, one-sided at the ends.
  const int n = traj.size();
  const double dt = traj.dt;
  auto diff = [&](int a, int b) -> Vec6 {
    Vec6 d;
    const Pose& pa = traj.samples[a].pose;
    const Pose& pb = traj.samples[b].pose;
    d << pb.translation - pa.translation, rotation_log(pb.rotation_matrix() * pa.rotation_matrix().transpose());
    return d / ((b - a) * dt);
  };
  if (n >= 2) {
    for (int k = 0; k < n; ++k) traj.samples[k].twist = diff(std::max(k - 1, 0), std::min(k + 1, n - 1));
    for (int k = 0; k < n; ++k) {
      const int a = std::max(k - 1, 0);
      const int b = std::min(k + 1, n - 1);
      traj.samples[k].accel = (traj.samples[b].twist - traj.samples[a].twist) / ((b - a) * dt);
    }
  }
  return traj;
}

TaskTrajectory read_trajectory_csv(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ParseError("cannot open trajectory file " + path);
  std::stringstream ss;
  ss << f.rdbuf();
  return parse_trajectory_csv(ss.str());
}

}  // namespace hmpc
