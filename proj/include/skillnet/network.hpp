#pragma once

#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "skillnet/classify.hpp"
#include "skillnet/geometry.hpp"
#include "skillnet/tphsmm.hpp"

namespace skillnet {

inline constexpr const char* kStartNode = "start";
inline constexpr const char* kStopNode = "stop";

class NetworkError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class MalformedPlanError : public NetworkError {
 public:
  using NetworkError::NetworkError;
};

class UnknownSkillError : public NetworkError {
 public:
  using NetworkError::NetworkError;
};

/// Alternating <start, s_0, a_0, s_1, ..., s_G, stop>.
struct Plan {
  std::vector<std::variant<std::string, WorldState>> items;

  static Plan from(const std::vector<WorldState>& states, const std::vector<std::string>& skills);
};

struct AugmentedState {
  WorldState current;
  WorldState goal;
};

using Edge = std::pair<std::string, std::string>;

/// Entities and frames that define a node's edge features.
struct SkillContext {
  std::vector<std::string> objects;
  FrameSpec frames;
};

struct EdgeDecision {
  std::vector<std::string> options;  // targets of the outgoing edges
  std::vector<double> scores;
  std::optional<std::string> chosen;  // empty: the operator must be asked

  bool query_needed() const { return !chosen.has_value(); }
  double max_score() const;
};

/// Geometric task network: skills as nodes, observed transitions as edges,
/// and a one-vs-rest edge selector per node conditioned on (s, s_G).
class TaskNetwork {
 public:
  TaskNetwork() = default;
  TaskNetwork(std::map<std::string, SkillContext> skills, SelectorOptions options = {},
              FeatureMode mode = FeatureMode::Relative);

  /// Adds every consecutive skill pair as an edge and archives the state
  /// between them together with the plan's goal.
  void ingest_plan(const Plan& plan);
  /// Refits every node's selector from its archives. Returns the non-stop
  /// nodes that have no outgoing edge.
  std::vector<std::string> build_edge_selectors();

  EdgeDecision next_skill(const std::string& node, const WorldState& s, const WorldState& goal,
                          double lower_bound) const;
  /// Folds an operator answer into tau^E of `node`, adding the edge if new.
  void apply_instruction(const std::string& node, const WorldState& s, const WorldState& goal,
                         const std::string& next);

  std::set<std::string> nodes() const;
  const std::set<Edge>& edges() const { return edges_; }
  std::vector<std::string> successors(const std::string& node) const;
  bool has_skill(const std::string& name) const;
  std::vector<std::string> skill_names() const;

  Eigen::VectorXd edge_feature(const std::string& node, const WorldState& s,
                               const WorldState& goal) const;

  const std::map<Edge, std::vector<AugmentedState>>& archives() const { return archives_; }
  const std::map<std::string, TrainingSet>& training_sets() const { return training_; }
  const std::map<std::string, LogisticSelector>& selectors() const { return selectors_; }
  const std::map<std::string, SkillContext>& skills() const { return skills_; }
  const SelectorOptions& selector_options() const { return options_; }
  FeatureMode feature_mode() const { return mode_; }

  /// Restores a serialised network verbatim (no refit).
  static TaskNetwork restore(std::map<std::string, SkillContext> skills, SelectorOptions options,
                             FeatureMode mode, std::set<Edge> edges,
                             std::map<Edge, std::vector<AugmentedState>> archives,
                             std::map<std::string, TrainingSet> training,
                             std::map<std::string, LogisticSelector> selectors);

 private:
  SkillContext context_for(const std::string& node, const WorldState& s) const;
  void refit(const std::string& node);

  std::map<std::string, SkillContext> skills_;
  SelectorOptions options_;
  FeatureMode mode_ = FeatureMode::Relative;
  std::set<Edge> edges_;
  std::map<Edge, std::vector<AugmentedState>> archives_;
  std::map<std::string, TrainingSet> training_;
  std::map<std::string, LogisticSelector> selectors_;
};

}  // namespace skillnet
