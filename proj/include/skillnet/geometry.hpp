#pragma once

#include <map>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Geometry>

namespace skillnet {

/// Raised on malformed geometric input (empty frame lists, entity mismatch).
class GeometryError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Canonical representative of a rotation on the double cover: w > 0, or
/// when w vanishes, the first non-zero vector component positive.
Eigen::Quaterniond canonicalize(Eigen::Quaterniond q);

/// Rigid pose. Composition is rotate-then-translate: (a*b).p = a.q*b.p + a.p.
struct Pose {
  Eigen::Vector3d position = Eigen::Vector3d::Zero();
  Eigen::Quaterniond orientation = Eigen::Quaterniond::Identity();

  Pose() = default;
  Pose(const Eigen::Vector3d& p, const Eigen::Quaterniond& q);

  static Pose identity() { return {}; }
  static Pose planar(double x, double y, double z, double yaw);

  Pose inverse() const;
  Eigen::Matrix4d matrix() const;
  double yaw() const;

  bool operator==(const Pose& other) const;
};

Pose pose_compose(const Pose& a, const Pose& b);

/// Coordinate frame (b, A) attached to an entity of the scene.
struct Frame {
  Eigen::Vector3d origin = Eigen::Vector3d::Zero();
  Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
  int label = 0;

  Frame() = default;
  Frame(const Eigen::Vector3d& b, const Eigen::Matrix3d& a, int p = 0);
  static Frame from_pose(const Pose& pose, int label = 0);

  Pose as_pose() const;
  /// Yaw of the frame's x-axis in the world plane.
  double yaw() const;
};

struct ObjectEntry {
  std::string id;
  Pose pose;
};

/// Robot end-effector, gripper flag and all object poses. Object order is
/// fixed for the lifetime of a task since feature layouts depend on it.
struct WorldState {
  Pose robot;
  bool gripper_closed = false;
  std::vector<ObjectEntry> objects;

  const Pose& object(const std::string& id) const;
  Pose& object(const std::string& id);
  bool has_object(const std::string& id) const;
  /// Pose of "robot" or of a named object.
  const Pose& entity(const std::string& id) const;
  std::vector<std::string> object_ids() const;

  bool operator==(const WorldState& other) const;
};

inline constexpr const char* kRobotEntity = "robot";
inline constexpr int kTransformSize = 7;

/// (b_ij, alpha_ij): F_j expressed in F_i coordinates, 3 translation entries
/// followed by a canonical quaternion (w, x, y, z).
Eigen::Matrix<double, 7, 1> relative_transform(const Frame& from, const Frame& to);

/// Concatenated relative transforms between consecutive frames, length 7P.
Eigen::VectorXd skill_feature(const std::vector<Frame>& frames);

/// Ordered list of entity names from which a skill's frames are built.
struct FrameSpec {
  std::vector<std::string> entities;

  /// Planar frames: position plus the yaw of each entity.
  std::vector<Frame> frames(const WorldState& s) const;
};

/// (H_r, H_o1, ..., H_oH, v_G). Entities listed in `objects` must exist in
/// both states.
Eigen::VectorXd edge_feature(const WorldState& current, const WorldState& goal,
                             const std::vector<std::string>& objects,
                             const FrameSpec& goal_frames);

std::size_t edge_feature_size(std::size_t n_objects, std::size_t n_frames);

/// Pose expressed in frame-local coordinates: (A^T (x - b), quat(A^T R)).
Pose project_to_frame(const Frame& frame, const Pose& pose);
Pose unproject_from_frame(const Frame& frame, const Pose& local);
WorldState project_to_frame(const Frame& frame, const WorldState& s);

/// Wraps an angle into (-pi, pi].
double wrap_angle(double a);
/// Rotation angle between two orientations, in [0, pi].
double angular_distance(const Eigen::Quaterniond& a, const Eigen::Quaterniond& b);

}  // namespace skillnet
