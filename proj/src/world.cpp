#include <algorithm>
#include <random>

#include "skillnet/scenario.hpp"

namespace skillnet {

namespace {

const Eigen::Quaterniond kFlip(Eigen::AngleAxisd(M_PI, Eigen::Vector3d::UnitX()));

Eigen::Quaterniond yaw_rotation(double yaw) {
  return Eigen::Quaterniond(Eigen::AngleAxisd(yaw, Eigen::Vector3d::UnitZ()));
}

double min_jerk(double t) { return t * t * t * (10.0 - 15.0 * t + 6.0 * t * t); }

// Scripted kinematic demonstrator. Waypoints are given in the bin frame.
class Script {
 public:
  Script(const WorldState& start, std::mt19937_64& rng, double noise)
      : s_(start), rng_(rng), noise_(noise) {
    steps_.push_back(s_);
    if (object_held(s_)) attach();
  }

  // `exact` waypoints (contacts) are reached without demonstrator jitter.
  void move(const Eigen::Vector3d& local, double local_yaw, int n, bool closed, bool exact = false) {
    const Pose& bin = s_.object(kBin);
    std::normal_distribution<double> jitter(0.0, noise_);
    Eigen::Vector3d offset(jitter(rng_), jitter(rng_), jitter(rng_));
    if (noise_ <= 0 || exact) offset.setZero();
    const Eigen::Vector3d target = bin.position + bin.orientation * local + offset;
    const double target_yaw = bin.yaw() + local_yaw;
    const Eigen::Vector3d p0 = s_.robot.position;
    const double y0 = s_.robot.yaw();
    const double dyaw = wrap_angle(target_yaw - y0);
    for (int i = 1; i <= n; ++i) {
      const double a = min_jerk(static_cast<double>(i) / n);
      s_.robot = Pose::planar(0, 0, 0, y0 + a * dyaw);
      s_.robot.position = p0 + a * (target - p0);
      s_.gripper_closed = closed;
      follow();
      steps_.push_back(s_);
    }
  }

  void hold(int n, bool closed) {
    for (int i = 0; i < n; ++i) {
      s_.gripper_closed = closed;
      follow();
      steps_.push_back(s_);
    }
  }

  void attach() {
    attached_ = true;
    relative_ = yaw_rotation(-s_.robot.yaw()) * s_.object(kObject).orientation;
  }
  void detach() { attached_ = false; }
  void flip() { relative_ = relative_ * kFlip; }
  void push(bool on) { pushing_ = on; }
  WorldState& state() { return s_; }
  std::vector<WorldState>& steps() { return steps_; }

 private:
  void follow() {
    Pose& obj = s_.object(kObject);
    if (attached_) {
      obj.position = s_.robot.position;
      obj.orientation = (yaw_rotation(s_.robot.yaw()) * relative_).normalized();
    } else if (pushing_) {
      obj.position.head<2>() = s_.robot.position.head<2>();
    }
  }

  WorldState s_;
  std::mt19937_64& rng_;
  double noise_;
  std::vector<WorldState> steps_;
  bool attached_ = false;
  bool pushing_ = false;
  Eigen::Quaterniond relative_ = Eigen::Quaterniond::Identity();
};

Eigen::Vector3d to_bin(const WorldState& s, const Eigen::Vector3d& world) {
  const Pose& bin = s.object(kBin);
  return bin.orientation.conjugate() * (world - bin.position);
}

double yaw_in_bin(const WorldState& s, const Pose& p) { return wrap_angle(p.yaw() - s.object(kBin).yaw()); }

struct CornerSigns {
  double sx, sy;
};

CornerSigns corner_signs(const std::string& corner) {
  return {corner.find("left") != std::string::npos ? -1.0 : 1.0,
          corner.rfind("front", 0) == 0 ? -1.0 : 1.0};
}

Eigen::Vector2d shift_target(const ScenarioConfig& cfg, const std::string& corner) {
  const auto [sx, sy] = corner_signs(corner);
  return {sx * (cfg.bin_length / 2 - cfg.shift_clearance),
          sy * (cfg.bin_width / 2 - cfg.shift_clearance)};
}

double pick_yaw(const std::string& branch) {
  (void)branch;
  return 0.0;
}

Eigen::Vector3d pick_approach(const std::string& branch) {
  if (branch == "left") return {0.06, 0.0, 0.10};
  if (branch == "right") return {-0.06, 0.0, 0.10};
  if (branch == "front") return {0.0, 0.06, 0.10};
  if (branch == "back") return {0.0, -0.06, 0.10};
  return {0.0, 0.0, 0.12};
}

Eigen::Vector3d slot_local(const WorldState& s, const std::string& entity, double height) {
  Eigen::Vector3d p = to_bin(s, s.object(entity).position);
  p.z() += height;
  return p;
}

std::string destination_entity(const std::string& skill) {
  return skill == "drop_bin" ? kDropBin : kSortArea;
}

// Snaps a released object onto a slot, keeping which side faces up.
Pose slot_pose(const WorldState& s, const std::string& entity, double height, bool up) {
  const Pose& slot = s.object(entity);
  Pose p(slot.position + slot.orientation * Eigen::Vector3d(0, 0, height), slot.orientation);
  if (up) p = Pose(p.position, p.orientation * kFlip);
  return p;
}

void script_skill(const ScenarioSpec& spec, Script& sc, const std::string& skill,
                  const std::string& branch) {
  const ScenarioConfig& cfg = spec.config;
  WorldState& s = sc.state();
  const Eigen::Vector3d obj = to_bin(s, s.object(kObject).position);
  if (skill == "pick_bin") {
    const double yaw = pick_yaw(branch);
    sc.hold(2, false);
    sc.move(obj + pick_approach(branch), yaw, 6, false);
    sc.hold(3, false);
    sc.move(obj + Eigen::Vector3d(0, 0, 0.06), yaw, 4, false);
    sc.hold(2, false);
    sc.move(obj, yaw, 4, false, true);
    sc.hold(2, false);
    sc.hold(5, true);
    sc.attach();
  } else if (skill == "press_shift") {
    const Eigen::Vector2d t = shift_target(cfg, branch);
    sc.hold(2, false);
    sc.move(obj + Eigen::Vector3d(0, 0, 0.08), 0.0, 6, false);
    sc.hold(3, false);
    sc.move(obj + Eigen::Vector3d(0, 0, 0.01), 0.0, 3, false);
    sc.hold(2, false);
    sc.push(true);
    sc.move(Eigen::Vector3d(t.x(), t.y(), obj.z() + 0.01), 0.0, 6, false);
    sc.push(false);
    s.object(kObject).position = s.object(kBin).position +
                                 s.object(kBin).orientation * Eigen::Vector3d(t.x(), t.y(), obj.z());
    sc.hold(3, false);
    sc.move(Eigen::Vector3d(t.x(), t.y(), obj.z() + 0.10), 0.0, 3, false);
    sc.hold(3, false);
  } else if (skill == "flip") {
    const double yaw = yaw_in_bin(s, s.robot);
    const Eigen::Vector3d start = to_bin(s, s.robot.position);
    sc.hold(2, true);
    sc.move(start + Eigen::Vector3d(0, 0, 0.12), yaw, 5, true);
    sc.flip();
    sc.hold(3, true);
    sc.move(start + Eigen::Vector3d(0, 0, 0.20), yaw, 4, true);
    sc.hold(3, true);
  } else if (skill == "scan") {
    sc.hold(2, true);
    sc.move(slot_local(s, kScanner, 0.05), 0.0, 8, true);
    sc.hold(5, true);
  } else if (skill == "drop_bin" || skill == "sort") {
    const std::string entity = destination_entity(skill);
    sc.hold(2, true);
    sc.move(slot_local(s, entity, cfg.object_height + 0.10), 0.0, 6, true);
    sc.hold(2, true);
    sc.move(slot_local(s, entity, cfg.object_height), 0.0, 4, true);
    sc.hold(2, true);
    sc.detach();
    s.object(kObject) = slot_pose(s, entity, cfg.object_height, barcode_up(s.object(kObject)));
    sc.hold(3, false);
    sc.move(slot_local(s, entity, cfg.object_height + 0.10), 0.0, 3, false);
    sc.hold(3, false);
  } else {
    throw std::invalid_argument("no scripted demonstrator for skill '" + skill + "'");
  }
}

// Object placement for demo i of n: spread along the wall (or across the
// center), fixed distance from the wall.
const Eigen::Vector2d kCenterSpread(0.11, 0.07);
constexpr int kMinCenterDemos = 4;

Eigen::Vector2d pick_placement(const ScenarioConfig& cfg, const std::string& branch, int i, int n) {
  const double hx = cfg.bin_length / 2;
  const double hy = cfg.bin_width / 2;
  const double inset = cfg.near_wall / 2;
  const double u = n > 1 ? -1.0 + 2.0 * i / (n - 1) : 0.0;
  // Wall demos spread along their wall, stopping short of the corner zones.
  if (branch == "left") return {-hx + inset, 0.08 * u};
  if (branch == "right") return {hx - inset, 0.08 * u};
  if (branch == "front") return {0.12 * u, -hy + inset};
  if (branch == "back") return {0.12 * u, hy - inset};
  // Center demos span the interior so the bin-frame covariance has full rank.
  static const double kSigns[4][2] = {{-1, -1}, {1, 1}, {-1, 1}, {1, -1}};
  const double shrink = 1.0 / (1 + i / 4);
  return {kCenterSpread.x() * kSigns[i % 4][0] * shrink, kCenterSpread.y() * kSigns[i % 4][1] * shrink};
}

}  // namespace

std::vector<Demonstration> synth_demos(const ScenarioSpec& spec, const std::string& skill,
                                       const std::string& branch, int n, std::uint64_t seed) {
  const ScenarioConfig& cfg = spec.config;
  std::mt19937_64 rng(seed);
  std::vector<Demonstration> out;
  for (int i = 0; i < n; ++i) {
    SceneRequest req;
    req.object_yaw = 0.0;
    if (skill == "pick_bin") {
      req.object_xy = pick_placement(cfg, branch, i, n);
    } else if (skill == "press_shift") {
      const auto [sx, sy] = corner_signs(branch);
      std::uniform_real_distribution<double> u(-cfg.jitter, cfg.jitter);
      req.object_xy = Eigen::Vector2d(sx * (cfg.bin_length / 2 - cfg.near_wall / 2) + u(rng),
                                      sy * (cfg.bin_width / 2 - cfg.near_wall / 2) + u(rng));
    } else {
      // Downstream skills start from every kind of pick.
      static const char* kPicks[] = {"left", "front", "center", "right", "back"};
      std::uniform_real_distribution<double> u(-1.0, 1.0);
      req.object_xy = pick_placement(cfg, kPicks[i % 5], 0, 1) +
                      Eigen::Vector2d(cfg.jitter * u(rng), cfg.jitter * u(rng));
      req.object_yaw = cfg.max_object_yaw * u(rng);
      // Half of the downstream demos follow a flip.
      req.barcode_up = skill == "flip" || i % 2 == 1;
      if (skill == "drop_bin") req.destination = Destination::DropBin;
      if (skill == "sort") req.destination = Destination::Sort;
    }
    const Scene scene = sample_scene(spec, rng(), req);

    // Reach the skill's precondition with the scripted demonstrator.
    std::vector<std::string> prefix;
    if (skill != "pick_bin" && skill != "press_shift") prefix.push_back("pick_bin");
    if ((skill == "scan" || skill == "drop_bin" || skill == "sort") && *req.barcode_up) {
      prefix.push_back("flip");
    }
    if (skill == "drop_bin" || skill == "sort") prefix.push_back("scan");
    WorldState s = scene.state;
    for (const auto& p : prefix) {
      Script pre(s, rng, 0.0);
      script_skill(spec, pre, p, oracle_branch(spec, p, s));
      s = pre.state();
    }
    Script sc(s, rng, 0.002);
    script_skill(spec, sc, skill, branch);
    out.push_back(Demonstration{skill, branch, std::move(sc.steps())});
  }
  return out;
}

EffectResult apply_skill_effect(const ScenarioSpec& spec, const WorldState& s,
                                const std::string& skill, const std::string& branch,
                                const Trajectory& traj) {
  const ScenarioConfig& cfg = spec.config;
  EffectResult r;
  r.state = s;
  if (traj.size() == 0) {
    r.ok = false;
    r.message = "empty trajectory";
    return r;
  }
  const bool held = object_held(s);
  const StateVector end = traj.final_state();
  const Eigen::Quaterniond relative =
      yaw_rotation(-s.robot.yaw()) * s.object(kObject).orientation;
  auto move_robot = [&](WorldState& w, const StateVector& x, bool carry) {
    w.robot = Pose::planar(x[0], x[1], x[2], x[3]);
    if (carry) {
      w.object(kObject).position = w.robot.position;
      w.object(kObject).orientation = (yaw_rotation(x[3]) * relative).normalized();
    }
  };
  auto fail = [&](std::string msg) {
    r.ok = false;
    r.message = skill + ": " + msg;
    return r;
  };

  const Eigen::Vector2d xy = object_in_bin(s);
  if (skill == "pick_bin") {
    if (held) return fail("object already held");
    if (oracle_corner(cfg, xy)) return fail("object is wedged in a corner");
    if (branch != oracle_pick_branch(cfg, xy)) return fail("branch '" + branch + "' collides with the bin");
    move_robot(r.state, end, false);
    if ((r.state.robot.position - s.object(kObject).position).norm() > cfg.grasp_tolerance) {
      return fail("gripper missed the object");
    }
    r.state.gripper_closed = true;
    r.state.object(kObject).position = r.state.robot.position;
    return r;
  }
  if (skill == "press_shift") {
    if (held) return fail("object is held");
    const auto corner = oracle_corner(cfg, xy);
    if (!corner) return fail("object is not in a corner");
    if (branch != *corner) return fail("pushed towards the wrong corner");
    move_robot(r.state, end, false);
    r.state.gripper_closed = false;
    const Eigen::Vector2d t = shift_target(cfg, branch);
    Pose& obj = r.state.object(kObject);
    obj.position = s.object(kBin).position +
                   s.object(kBin).orientation * Eigen::Vector3d(t.x(), t.y(), cfg.object_height);
    return r;
  }
  if (!held) return fail("object is not held");
  if (skill == "flip") {
    move_robot(r.state, end, true);
    Pose& obj = r.state.object(kObject);
    obj.orientation = (obj.orientation * kFlip).normalized();
    return r;
  }
  if (skill == "scan") {
    if (barcode_up(s.object(kObject))) return fail("barcode faces away from the scanner");
    move_robot(r.state, end, true);
    const Eigen::Vector3d scan_point = s.object(kScanner).position + Eigen::Vector3d(0, 0, 0.05);
    if ((r.state.robot.position - scan_point).norm() > cfg.release_tolerance) {
      return fail("object did not reach the scanner");
    }
    return r;
  }
  if (skill == "drop_bin" || skill == "sort") {
    std::size_t release = traj.size();
    for (std::size_t t = 0; t < traj.size(); ++t) {
      if (!traj.gripper_closed[t]) {
        release = t;
        break;
      }
    }
    if (release == traj.size()) return fail("gripper never opened");
    const std::string entity = destination_entity(skill);
    const Eigen::Vector3d at = traj.states[release].head<3>();
    const Eigen::Vector3d slot = s.object(entity).position;
    if ((at - slot).head<2>().norm() > cfg.release_tolerance) {
      return fail("released away from the " + entity);
    }
    move_robot(r.state, end, false);
    r.state.gripper_closed = false;
    r.state.object(kObject) =
        slot_pose(s, entity, cfg.object_height, barcode_up(s.object(kObject)));
    return r;
  }
  return fail("unknown skill");
}

WorldModel world_model(const ScenarioSpec& spec) {
  return [spec](const WorldState& s, const std::string& skill, const std::string& branch,
                const Trajectory& traj) { return apply_skill_effect(spec, s, skill, branch, traj); };
}

SelectorOptions ScenarioConfig::edge_selector() const {
  SelectorOptions o;
  o.basis = edge_basis;
  return o;
}

SkillModel fit_scenario_skill(const ScenarioSpec& spec, const std::string& skill,
                              const std::vector<Demonstration>& demos, FeatureMode mode) {
  const SkillSpec& sk = spec.skill(skill);
  SkillFitOptions options;
  options.components = spec.config.components;
  options.selector.basis = spec.config.branch_basis;
  options.feature_mode = mode;
  return fit_skill_model(sk.name, demos, sk.branches, FrameSpec{sk.frames}, sk.objects, options);
}

std::vector<Demonstration> synth_training_demos(const ScenarioSpec& spec, std::uint64_t seed) {
  std::vector<Demonstration> demos;
  std::uint64_t stream = seed;
  for (const auto& sk : spec.skills) {
    const int branches = static_cast<int>(sk.branches.size());
    const int per_branch = std::max(spec.config.demos_per_branch,
                                    (spec.config.min_demos_per_skill + branches - 1) / branches);
    for (const auto& b : sk.branches) {
      const int n = sk.name == "pick_bin" && b == "center" ? std::max(per_branch, kMinCenterDemos)
                                                           : per_branch;
      auto d = synth_demos(spec, sk.name, b, n, ++stream * 7919u);
      demos.insert(demos.end(), d.begin(), d.end());
    }
  }
  return demos;
}

SkillLibrary fit_skills(const ScenarioSpec& spec, const std::vector<Demonstration>& demos,
                        FeatureMode mode) {
  std::map<std::string, std::vector<Demonstration>> by_skill;
  for (const auto& d : demos) {
    spec.skill(d.skill);  // throws on an unknown skill
    by_skill[d.skill].push_back(d);
  }
  SkillLibrary lib;
  for (const auto& sk : spec.skills) {
    auto it = by_skill.find(sk.name);
    if (it != by_skill.end()) lib.emplace(sk.name, fit_scenario_skill(spec, sk.name, it->second, mode));
  }
  return lib;
}

SkillLibrary train_skills(const ScenarioSpec& spec, std::uint64_t seed, FeatureMode mode) {
  return fit_skills(spec, synth_training_demos(spec, seed), mode);
}

std::vector<Plan> assembly_plans(const ScenarioSpec& spec) {
  const std::vector<std::vector<std::string>> sequences = {
      {"inspect", "pick", "attach"},
      {"inspect", "pick", "translate", "pick", "drop"},
      {"inspect", "re_orient", "pick", "attach"},
      {"inspect", "re_orient", "translate", "pick", "drop"},
  };
  std::vector<Plan> plans;
  for (std::size_t i = 0; i < sequences.size(); ++i) {
    const auto& seq = sequences[i];
    for (const auto& name : seq) spec.skill(name);
    std::vector<WorldState> states;
    for (std::size_t t = 0; t <= seq.size(); ++t) {
      WorldState w;
      w.robot = Pose::planar(-0.3, 0.0, 0.3, 0.0);
      const double x = 0.1 * static_cast<double>(i) + 0.02 * static_cast<double>(t);
      w.objects = {{"cap", Pose::planar(x, 0.05 * static_cast<double>(t), 0.02, 0.1 * static_cast<double>(i))},
                   {"pallet", Pose::planar(0.4, -0.3, 0.0, 0.0)},
                   {"peg", Pose::planar(0.4, 0.3, 0.0, 0.0)},
                   {"platform", Pose::planar(0.0, 0.0, 0.0, 0.0)}};
      states.push_back(std::move(w));
    }
    plans.push_back(Plan::from(states, seq));
  }
  return plans;
}

}  // namespace skillnet
