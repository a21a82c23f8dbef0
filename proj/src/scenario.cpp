#include "skillnet/scenario.hpp"

#include <algorithm>
#include <random>
#include <stdexcept>

namespace skillnet {

namespace {

const Eigen::Quaterniond kFlip(Eigen::AngleAxisd(M_PI, Eigen::Vector3d::UnitX()));

Pose local_pose(const Eigen::Vector3d& p, double yaw = 0.0) {
  return Pose::planar(p.x(), p.y(), p.z(), yaw);
}

Pose object_pose_local(const ScenarioConfig& cfg, const Eigen::Vector2d& xy, double yaw,
                       bool up) {
  Pose p = Pose::planar(xy.x(), xy.y(), cfg.object_height, yaw);
  if (up) p = Pose(p.position, p.orientation * kFlip);
  return p;
}

Eigen::Vector3d destination_local(const ScenarioConfig& cfg, Destination d) {
  Eigen::Vector3d p = d == Destination::DropBin ? cfg.drop_bin : cfg.sort_area;
  p.z() = cfg.object_height;
  return p;
}

}  // namespace

const SkillSpec& ScenarioSpec::skill(const std::string& name) const {
  for (const auto& s : skills) {
    if (s.name == name) return s;
  }
  throw std::out_of_range("scenario '" + id + "' has no skill '" + name + "'");
}

std::map<std::string, SkillContext> ScenarioSpec::contexts() const {
  std::map<std::string, SkillContext> out;
  for (const auto& s : skills) out[s.name] = SkillContext{s.objects, FrameSpec{s.frames}};
  return out;
}

ScenarioSpec bin_sorting_spec(const ScenarioConfig& config) {
  ScenarioSpec spec;
  spec.id = "bin_sorting";
  spec.config = config;
  spec.skills = {
      {"pick_bin", {"back", "center", "front", "left", "right"}, {kBin, kObject}, {kBin, kObject}},
      {"press_shift", {"back_left", "back_right", "front_left", "front_right"}, {kBin, kObject},
       {kBin, kObject}},
      {"flip", {"default"}, {kRobotEntity, kObject}, {kObject}},
      {"scan", {"default"}, {kScanner, kObject}, {kScanner, kObject}},
      {"drop_bin", {"default"}, {kDropBin, kObject}, {kDropBin, kObject}},
      {"sort", {"default"}, {kSortArea, kObject}, {kSortArea, kObject}},
  };
  spec.ground_truth_edges = {
      {kStartNode, "pick_bin"}, {kStartNode, "press_shift"}, {"press_shift", "pick_bin"},
      {"pick_bin", "flip"},     {"pick_bin", "scan"},        {"flip", "scan"},
      {"scan", "drop_bin"},     {"scan", "sort"},            {"drop_bin", kStopNode},
      {"sort", kStopNode},
  };
  return spec;
}

ScenarioSpec assembly_spec() {
  ScenarioSpec spec;
  spec.id = "assembly";
  spec.skills = {
      {"inspect", {"default"}, {"platform", "cap"}, {"platform", "cap"}},
      {"pick", {"flat", "standing", "edge"}, {"platform", "cap"}, {"platform", "cap"}},
      {"re_orient", {"left", "right"}, {"platform", "cap"}, {"platform", "cap"}},
      {"translate", {"default"}, {"platform", "cap"}, {"platform", "cap"}},
      {"attach", {"default"}, {"peg", "cap"}, {"peg", "cap"}},
      {"drop", {"near", "far"}, {"pallet", "cap"}, {"pallet", "cap"}},
  };
  spec.ground_truth_edges = {
      {kStartNode, "inspect"}, {"inspect", "pick"},      {"inspect", "re_orient"},
      {"re_orient", "pick"},   {"re_orient", "translate"}, {"pick", "translate"},
      {"translate", "pick"},   {"pick", "attach"},       {"pick", "drop"},
      {"attach", kStopNode},   {"drop", kStopNode},
  };
  return spec;
}

WorldState transform_state(const WorldState& s, const Pose& g) {
  WorldState out = s;
  out.robot = pose_compose(g, s.robot);
  for (auto& o : out.objects) o.pose = pose_compose(g, o.pose);
  return out;
}

Scene transform_scene(const Scene& scene, const Pose& g) {
  Scene out = scene;
  out.state = transform_state(scene.state, g);
  out.task.start = transform_state(scene.task.start, g);
  out.task.goal = transform_state(scene.task.goal, g);
  return out;
}

Scene sample_scene(const ScenarioSpec& spec, std::uint64_t seed, const SceneRequest& request) {
  const ScenarioConfig& cfg = spec.config;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  auto uniform = [&](double lo, double hi) { return lo + (hi - lo) * unit(rng); };

  const double hx = cfg.bin_length / 2;
  const double hy = cfg.bin_width / 2;
  const double inset = cfg.near_wall / 2;

  Eigen::Vector2d xy;
  const auto corner_xy = [&](int c) {
    return Eigen::Vector2d((c & 1) ? hx - inset : -hx + inset, (c & 2) ? hy - inset : -hy + inset);
  };
  if (request.object_xy) {
    xy = *request.object_xy;
  } else if (request.corner) {
    xy = corner_xy(static_cast<int>(unit(rng) * 4.0) % 4);
    xy += Eigen::Vector2d(uniform(-cfg.jitter, cfg.jitter), uniform(-cfg.jitter, cfg.jitter));
  } else if (cfg.placement == PlacementMode::Uniform) {
    xy = {uniform(-hx + 0.01, hx - 0.01), uniform(-hy + 0.01, hy - 0.01)};
  } else {
    const int type = static_cast<int>(unit(rng) * 9.0) % 9;
    switch (type) {
      case 0: xy = {0.0, 0.0}; break;
      case 1: xy = {-hx + inset, 0.0}; break;
      case 2: xy = {hx - inset, 0.0}; break;
      case 3: xy = {0.0, -hy + inset}; break;
      case 4: xy = {0.0, hy - inset}; break;
      default: xy = corner_xy(type - 5); break;
    }
    xy += Eigen::Vector2d(uniform(-cfg.jitter, cfg.jitter), uniform(-cfg.jitter, cfg.jitter));
  }
  const double yaw =
      request.object_yaw ? *request.object_yaw : uniform(-cfg.max_object_yaw, cfg.max_object_yaw);
  const bool up = request.barcode_up ? *request.barcode_up : unit(rng) < 0.5;
  const Destination dest = request.destination
                               ? *request.destination
                               : (unit(rng) < 0.5 ? Destination::DropBin : Destination::Sort);

  WorldState local;
  local.robot = local_pose(cfg.home);
  local.gripper_closed = false;
  local.objects = {
      {kObject, object_pose_local(cfg, xy, yaw, up)},
      {kBin, Pose::identity()},
      {kScanner, local_pose(cfg.scanner)},
      {kDropBin, local_pose(cfg.drop_bin)},
      {kSortArea, local_pose(cfg.sort_area)},
  };
  if (cfg.pose_noise > 0) {
    std::normal_distribution<double> noise(0.0, cfg.pose_noise);
    auto& p = local.object(kObject).position;
    p.x() += noise(rng);
    p.y() += noise(rng);
  }
  WorldState goal = local;
  goal.object(kObject) = Pose(destination_local(cfg, dest), Eigen::Quaterniond::Identity());
  Pose workspace = cfg.workspace;
  if (cfg.workspace_jitter > 0 || cfg.workspace_yaw_jitter > 0) {
    const double dx = uniform(-cfg.workspace_jitter, cfg.workspace_jitter);
    const double dy = uniform(-cfg.workspace_jitter, cfg.workspace_jitter);
    const double dyaw = uniform(-cfg.workspace_yaw_jitter, cfg.workspace_yaw_jitter);
    workspace = pose_compose(Pose::planar(dx, dy, 0.0, dyaw), workspace);
  }

  Scene scene;
  scene.scenario = spec.id;
  scene.seed = seed;
  scene.state = transform_state(local, workspace);
  scene.task.start = scene.state;
  scene.task.goal = transform_state(goal, workspace);
  scene.task.goal_objects = {kObject};
  return scene;
}

Eigen::Vector2d object_in_bin(const WorldState& s) {
  const Pose local = project_to_frame(Frame::from_pose(s.object(kBin)), s.object(kObject));
  return local.position.head<2>();
}

bool barcode_up(const Pose& object) {
  return object.orientation.toRotationMatrix()(2, 2) < 0.0;
}

bool object_held(const WorldState& s) {
  return s.gripper_closed && (s.robot.position - s.object(kObject).position).norm() < 0.03;
}

std::string oracle_pick_branch(const ScenarioConfig& cfg, const Eigen::Vector2d& xy) {
  const double hx = cfg.bin_length / 2;
  const double hy = cfg.bin_width / 2;
  const std::pair<double, const char*> walls[] = {
      {xy.x() + hx, "left"}, {hx - xy.x(), "right"}, {xy.y() + hy, "front"}, {hy - xy.y(), "back"}};
  const auto nearest = std::min_element(std::begin(walls), std::end(walls),
                                        [](const auto& a, const auto& b) { return a.first < b.first; });
  return nearest->first < cfg.near_wall ? nearest->second : "center";
}

std::optional<std::string> oracle_corner(const ScenarioConfig& cfg, const Eigen::Vector2d& xy) {
  const double hx = cfg.bin_length / 2;
  const double hy = cfg.bin_width / 2;
  const bool left = xy.x() + hx < cfg.corner;
  const bool right = hx - xy.x() < cfg.corner;
  const bool front = xy.y() + hy < cfg.corner;
  const bool back = hy - xy.y() < cfg.corner;
  if ((left || right) && (front || back)) {
    return std::string(back ? "back" : "front") + (left ? "_left" : "_right");
  }
  return std::nullopt;
}

std::string oracle_next_skill(const ScenarioSpec& spec, const std::string& node,
                              const WorldState& s, const WorldState& goal) {
  const ScenarioConfig& cfg = spec.config;
  if (!object_held(s)) {
    if ((s.object(kObject).position - goal.object(kObject).position).norm() <= 1e-2) {
      return kStopNode;
    }
    return oracle_corner(cfg, object_in_bin(s)) ? "press_shift" : "pick_bin";
  }
  if (node == "scan") {
    const Eigen::Vector3d g = goal.object(kObject).position;
    const double to_drop = (g - s.object(kDropBin).position).head<2>().norm();
    const double to_sort = (g - s.object(kSortArea).position).head<2>().norm();
    return to_drop <= to_sort ? "drop_bin" : "sort";
  }
  return barcode_up(s.object(kObject)) ? "flip" : "scan";
}

std::string oracle_branch(const ScenarioSpec& spec, const std::string& skill,
                          const WorldState& s) {
  const Eigen::Vector2d xy = object_in_bin(s);
  if (skill == "pick_bin") return oracle_pick_branch(spec.config, xy);
  if (skill == "press_shift") {
    if (auto c = oracle_corner(spec.config, xy)) return *c;
    return std::string(xy.y() >= 0 ? "back" : "front") + (xy.x() < 0 ? "_left" : "_right");
  }
  return spec.skill(skill).branches.front();
}

std::optional<std::string> OracleInstructor::next_skill_query(
    const std::string& node, const WorldState& s, const WorldState& goal,
    const std::vector<std::string>& options) {
  ++edge_answers;
  const std::string answer = oracle_next_skill(spec_, node, s, goal);
  if (std::find(options.begin(), options.end(), answer) == options.end()) return options.front();
  return answer;
}

std::optional<std::string> OracleInstructor::branch_query(const std::string& skill,
                                                          const WorldState& s,
                                                          const std::vector<std::string>& options) {
  ++branch_answers;
  const std::string answer = oracle_branch(spec_, skill, s);
  if (std::find(options.begin(), options.end(), answer) == options.end()) return options.front();
  return answer;
}

std::optional<std::string> OracleInstructor::correct_skill(const std::string& node,
                                                          const WorldState& s,
                                                          const WorldState& goal,
                                                          const std::string& chosen,
                                                          const std::vector<std::string>& options) {
  if (!corrective || oracle_next_skill(spec_, node, s, goal) == chosen) return std::nullopt;
  return next_skill_query(node, s, goal, options);
}

std::optional<std::string> OracleInstructor::correct_branch(const std::string& skill,
                                                           const WorldState& s,
                                                           const std::string& chosen,
                                                           const std::vector<std::string>& options) {
  if (!corrective || oracle_branch(spec_, skill, s) == chosen) return std::nullopt;
  return branch_query(skill, s, options);
}

}  // namespace skillnet
