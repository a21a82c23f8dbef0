#include "skillnet/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace skillnet {

namespace {
constexpr double kZeroW = 1e-12;
}  // namespace

Eigen::Quaterniond canonicalize(Eigen::Quaterniond q) {
  q.normalize();
  double sign = 1.0;
  if (q.w() < -kZeroW) {
    sign = -1.0;
  } else if (std::abs(q.w()) <= kZeroW) {
    for (double c : {q.x(), q.y(), q.z()}) {
      if (std::abs(c) > kZeroW) {
        sign = c < 0 ? -1.0 : 1.0;
        break;
      }
    }
  }
  if (sign < 0) q.coeffs() *= -1.0;
  return q;
}

Pose::Pose(const Eigen::Vector3d& p, const Eigen::Quaterniond& q)
    : position(p), orientation(canonicalize(q)) {}

Pose Pose::planar(double x, double y, double z, double yaw) {
  return {Eigen::Vector3d(x, y, z),
          Eigen::Quaterniond(Eigen::AngleAxisd(yaw, Eigen::Vector3d::UnitZ()))};
}

Pose Pose::inverse() const {
  Eigen::Quaterniond qi = orientation.conjugate();
  return {-(qi * position), qi};
}

Eigen::Matrix4d Pose::matrix() const {
  Eigen::Matrix4d m = Eigen::Matrix4d::Identity();
  m.topLeftCorner<3, 3>() = orientation.toRotationMatrix();
  m.topRightCorner<3, 1>() = position;
  return m;
}

double Pose::yaw() const {
  Eigen::Matrix3d r = orientation.toRotationMatrix();
  return std::atan2(r(1, 0), r(0, 0));
}

bool Pose::operator==(const Pose& other) const {
  return position == other.position && orientation.coeffs() == other.orientation.coeffs();
}

Pose pose_compose(const Pose& a, const Pose& b) {
  return {a.orientation * b.position + a.position, a.orientation * b.orientation};
}

Frame::Frame(const Eigen::Vector3d& b, const Eigen::Matrix3d& a, int p)
    : origin(b), rotation(a), label(p) {}

Frame Frame::from_pose(const Pose& pose, int label) {
  return {pose.position, pose.orientation.toRotationMatrix(), label};
}

Pose Frame::as_pose() const { return {origin, Eigen::Quaterniond(rotation)}; }

double Frame::yaw() const { return std::atan2(rotation(1, 0), rotation(0, 0)); }

const Pose& WorldState::object(const std::string& id) const {
  for (const auto& o : objects) {
    if (o.id == id) return o.pose;
  }
  throw GeometryError("unknown object '" + id + "'");
}

Pose& WorldState::object(const std::string& id) {
  for (auto& o : objects) {
    if (o.id == id) return o.pose;
  }
  throw GeometryError("unknown object '" + id + "'");
}

bool WorldState::has_object(const std::string& id) const {
  return std::any_of(objects.begin(), objects.end(),
                     [&](const ObjectEntry& o) { return o.id == id; });
}

const Pose& WorldState::entity(const std::string& id) const {
  if (id == kRobotEntity) return robot;
  return object(id);
}

std::vector<std::string> WorldState::object_ids() const {
  std::vector<std::string> ids;
  ids.reserve(objects.size());
  for (const auto& o : objects) ids.push_back(o.id);
  return ids;
}

bool WorldState::operator==(const WorldState& other) const {
  if (!(robot == other.robot) || gripper_closed != other.gripper_closed ||
      objects.size() != other.objects.size()) {
    return false;
  }
  for (std::size_t i = 0; i < objects.size(); ++i) {
    if (objects[i].id != other.objects[i].id || !(objects[i].pose == other.objects[i].pose)) {
      return false;
    }
  }
  return true;
}

Eigen::Matrix<double, 7, 1> relative_transform(const Frame& from, const Frame& to) {
  Eigen::Matrix<double, 7, 1> out;
  out.head<3>() = from.rotation.transpose() * (to.origin - from.origin);
  Eigen::Quaterniond q = canonicalize(Eigen::Quaterniond(from.rotation.transpose() * to.rotation));
  out.tail<4>() << q.w(), q.x(), q.y(), q.z();
  return out;
}

Eigen::VectorXd skill_feature(const std::vector<Frame>& frames) {
  if (frames.size() < 2) {
    throw GeometryError("skill feature needs at least two frames (P >= 1)");
  }
  const auto p = static_cast<Eigen::Index>(frames.size() - 1);
  Eigen::VectorXd v(kTransformSize * p);
  for (Eigen::Index i = 0; i < p; ++i) {
    v.segment<kTransformSize>(kTransformSize * i) = relative_transform(frames[i], frames[i + 1]);
  }
  return v;
}

std::vector<Frame> FrameSpec::frames(const WorldState& s) const {
  std::vector<Frame> out;
  out.reserve(entities.size());
  int label = 0;
  for (const auto& e : entities) {
    const Pose& p = s.entity(e);
    out.push_back(Frame::from_pose(Pose::planar(p.position.x(), p.position.y(), p.position.z(), p.yaw()),
                                   label++));
  }
  return out;
}

std::size_t edge_feature_size(std::size_t n_objects, std::size_t n_frames) {
  return kTransformSize * (1 + n_objects) + kTransformSize * (n_frames - 1);
}

Eigen::VectorXd edge_feature(const WorldState& current, const WorldState& goal,
                             const std::vector<std::string>& objects,
                             const FrameSpec& goal_frames) {
  for (const auto& id : objects) {
    if (!current.has_object(id) || !goal.has_object(id)) {
      throw GeometryError("entity '" + id + "' missing from current or goal state");
    }
  }
  const Eigen::VectorXd goal_feature = skill_feature(goal_frames.frames(goal));
  const auto blocks = static_cast<Eigen::Index>(1 + objects.size());
  Eigen::VectorXd h(kTransformSize * blocks + goal_feature.size());
  // Blocks are expressed in the goal frame: goal orientations are never
  // flipped, so the translation part keeps a consistent handedness.
  h.head<kTransformSize>() =
      relative_transform(Frame::from_pose(goal.robot), Frame::from_pose(current.robot));
  for (Eigen::Index i = 1; i < blocks; ++i) {
    const auto& id = objects[static_cast<std::size_t>(i - 1)];
    h.segment<kTransformSize>(kTransformSize * i) = relative_transform(
        Frame::from_pose(goal.object(id)), Frame::from_pose(current.object(id)));
  }
  h.tail(goal_feature.size()) = goal_feature;
  return h;
}

Pose project_to_frame(const Frame& frame, const Pose& pose) {
  const Eigen::Matrix3d at = frame.rotation.transpose();
  return {at * (pose.position - frame.origin),
          Eigen::Quaterniond(at * pose.orientation.toRotationMatrix())};
}

Pose unproject_from_frame(const Frame& frame, const Pose& local) {
  return {frame.rotation * local.position + frame.origin,
          Eigen::Quaterniond(frame.rotation * local.orientation.toRotationMatrix())};
}

WorldState project_to_frame(const Frame& frame, const WorldState& s) {
  WorldState out = s;
  out.robot = project_to_frame(frame, s.robot);
  for (auto& o : out.objects) o.pose = project_to_frame(frame, o.pose);
  return out;
}

double wrap_angle(double a) {
  constexpr double two_pi = 2.0 * std::numbers::pi;
  a = std::fmod(a + std::numbers::pi, two_pi);
  if (a <= 0) a += two_pi;
  return a - std::numbers::pi;
}

double angular_distance(const Eigen::Quaterniond& a, const Eigen::Quaterniond& b) {
  const double d = std::min(1.0, std::abs(a.normalized().dot(b.normalized())));
  return 2.0 * std::acos(d);
}

}  // namespace skillnet
