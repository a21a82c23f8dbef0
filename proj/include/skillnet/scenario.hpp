#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "skillnet/exec.hpp"
#include "skillnet/network.hpp"
#include "skillnet/tphsmm.hpp"

namespace skillnet {

/// Object placement distribution for sampled task instances.
enum class PlacementMode {
  Uniform,    // uniform over the bin interior
  SceneTypes  // one of nine scene types (center, four walls, four corners) with jitter
};

/// Geometry and constants of the bin-sorting workspace. Every length is in
/// metres and expressed in the bin frame unless stated otherwise.
struct ScenarioConfig {
  double bin_length = 0.4;   // along the bin x-axis
  double bin_width = 0.3;    // along the bin y-axis
  double near_wall = 0.06;   // pick branch threshold
  double corner = 0.06;      // press_shift threshold, both axes
  double object_height = 0.02;
  double grasp_tolerance = 0.02;
  double release_tolerance = 0.05;
  double shift_clearance = 0.12;  // distance from both walls after press_shift
  double max_object_yaw = M_PI / 12.0;
  double jitter = 0.015;          // SceneTypes placement jitter
  double pose_noise = 0.0;        // optional perception noise (stddev, m)
  Eigen::Vector3d scanner{0.0, 0.40, 0.10};
  Eigen::Vector3d drop_bin{0.45, 0.25, 0.0};
  Eigen::Vector3d sort_area{0.45, -0.25, 0.0};
  Eigen::Vector3d home{-0.30, 0.0, 0.30};
  /// Rigid placement of the whole workspace in the world.
  Pose workspace = Pose::planar(0.5, 0.0, 0.0, 0.0);
  /// Per-scene random offset of the workspace placement (uniform, +-).
  double workspace_jitter = 0.05;     // m, both axes
  double workspace_yaw_jitter = 0.1745;  // rad
  PlacementMode placement = PlacementMode::SceneTypes;
  int demos_per_branch = 2;
  int min_demos_per_skill = 6;
  int components = 5;
  FeatureBasis branch_basis = FeatureBasis::Quadratic;
  FeatureBasis edge_basis = FeatureBasis::Linear;

  SelectorOptions edge_selector() const;
};

struct SkillSpec {
  std::string name;
  std::vector<std::string> branches;
  std::vector<std::string> frames;   // entity names, F_0 .. F_P
  std::vector<std::string> objects;  // O_a
};

/// Skill roster and ground-truth task network of a scenario.
struct ScenarioSpec {
  std::string id;
  std::vector<SkillSpec> skills;
  std::vector<Edge> ground_truth_edges;
  ScenarioConfig config;

  const SkillSpec& skill(const std::string& name) const;
  std::map<std::string, SkillContext> contexts() const;
};

ScenarioSpec bin_sorting_spec(const ScenarioConfig& config = {});
/// Topology-only analog of the assembly task (pick, inspect, re_orient,
/// translate, attach, drop).
ScenarioSpec assembly_spec();

inline constexpr const char* kObject = "obj";
inline constexpr const char* kBin = "bin";
inline constexpr const char* kScanner = "scanner";
inline constexpr const char* kDropBin = "drop_bin";
inline constexpr const char* kSortArea = "sort_area";

enum class Destination { DropBin, Sort };

struct SceneRequest {
  std::optional<Eigen::Vector2d> object_xy;  // bin coordinates
  std::optional<double> object_yaw;
  std::optional<bool> barcode_up;
  std::optional<Destination> destination;
  bool corner = false;  // place the object in a random corner
};

struct Scene {
  std::string scenario;
  std::uint64_t seed = 0;
  WorldState state;
  TaskInstance task;
};

Scene sample_scene(const ScenarioSpec& spec, std::uint64_t seed, const SceneRequest& request = {});

/// Applies a rigid planar motion to every pose of the state.
WorldState transform_state(const WorldState& s, const Pose& g);
Scene transform_scene(const Scene& scene, const Pose& g);

/// Object pose helpers in the bin frame.
Eigen::Vector2d object_in_bin(const WorldState& s);
bool barcode_up(const Pose& object);
bool object_held(const WorldState& s);

/// Geometric rules standing in for the operator.
std::string oracle_pick_branch(const ScenarioConfig& cfg, const Eigen::Vector2d& xy);
std::optional<std::string> oracle_corner(const ScenarioConfig& cfg, const Eigen::Vector2d& xy);
std::string oracle_next_skill(const ScenarioSpec& spec, const std::string& node,
                              const WorldState& s, const WorldState& goal);
std::string oracle_branch(const ScenarioSpec& spec, const std::string& skill, const WorldState& s);

class OracleInstructor : public InstructionProvider {
 public:
  explicit OracleInstructor(const ScenarioSpec& spec) : spec_(spec) {}
  std::optional<std::string> next_skill_query(const std::string& node, const WorldState& s,
                                              const WorldState& goal,
                                              const std::vector<std::string>& options) override;
  std::optional<std::string> branch_query(const std::string& skill, const WorldState& s,
                                          const std::vector<std::string>& options) override;
  std::optional<std::string> correct_skill(const std::string& node, const WorldState& s,
                                           const WorldState& goal, const std::string& chosen,
                                           const std::vector<std::string>& options) override;
  std::optional<std::string> correct_branch(const std::string& skill, const WorldState& s,
                                            const std::string& chosen,
                                            const std::vector<std::string>& options) override;

  /// Whether the oracle watches confident decisions and overrides wrong ones.
  bool corrective = true;
  int edge_answers = 0;
  int branch_answers = 0;

 private:
  const ScenarioSpec& spec_;
};

std::vector<Demonstration> synth_demos(const ScenarioSpec& spec, const std::string& skill,
                                       const std::string& branch, int n, std::uint64_t seed);

/// Kinematic effect of a skill; ok == false reports a skill failure.
EffectResult apply_skill_effect(const ScenarioSpec& spec, const WorldState& s,
                                const std::string& skill, const std::string& branch,
                                const Trajectory& traj);

WorldModel world_model(const ScenarioSpec& spec);

/// Fits one skill of the roster from the given demos.
SkillModel fit_scenario_skill(const ScenarioSpec& spec, const std::string& skill,
                              const std::vector<Demonstration>& demos,
                              FeatureMode mode = FeatureMode::Relative);

/// Synthetic demos for every skill and branch of the roster.
std::vector<Demonstration> synth_training_demos(const ScenarioSpec& spec, std::uint64_t seed);

/// Fits each roster skill that has at least one demo.
SkillLibrary fit_skills(const ScenarioSpec& spec, const std::vector<Demonstration>& demos,
                        FeatureMode mode = FeatureMode::Relative);

/// Fits every skill of the roster from synthetic demos.
SkillLibrary train_skills(const ScenarioSpec& spec, std::uint64_t seed,
                          FeatureMode mode = FeatureMode::Relative);

/// Synthetic complete plans of the assembly analog that cover its graph.
std::vector<Plan> assembly_plans(const ScenarioSpec& spec);

}  // namespace skillnet
