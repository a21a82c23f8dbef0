#pragma once

#include <functional>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "skillnet/network.hpp"
#include "skillnet/tphsmm.hpp"

namespace skillnet {

using SkillLibrary = std::map<std::string, SkillModel>;

class ProtocolError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

class InvalidAnswerError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct ExecConfig {
  double edge_bound = 0.8;
  double branch_bound = 0.8;
  double position_tolerance = 1e-2;     // m
  double angle_tolerance = 5.0 * M_PI / 180.0;  // rad
  int max_steps = 20;
  double query_timeout_s = 120.0;
  /// Never query: low-confidence decisions fall back to the argmax.
  bool autonomous = false;

  void validate() const;
};

struct TaskInstance {
  WorldState start;
  WorldState goal;
  /// Objects whose goal pose must be reached; empty means every object.
  std::vector<std::string> goal_objects;
};

/// True iff every goal-constrained object is within both tolerances (closed).
bool goal_reached(const WorldState& s, const WorldState& goal, const ExecConfig& cfg,
                  const std::vector<std::string>& goal_objects = {});

enum class Outcome { Running, Success, StepCap, Abort, SkillFailure };
const char* to_string(Outcome o);

struct StepRecord {
  WorldState state;  // state at decision time
  std::string from;
  std::string skill;
  std::string branch;
  double edge_confidence = 0.0;
  double branch_confidence = 0.0;
  bool edge_query = false;
  bool branch_query = false;
  bool edge_correction = false;
  bool branch_correction = false;
  std::size_t trajectory_length = 0;
  StateVector trajectory_end = StateVector::Zero();
};

struct ExecutionTrace {
  std::vector<StepRecord> steps;
  Outcome outcome = Outcome::Running;
  std::string diagnostic;
  int edge_queries = 0;
  int branch_queries = 0;
  /// Subset of the queries above that were operator corrections.
  int corrections = 0;
  /// Maximum scores of every decision taken, in order.
  std::vector<double> decision_confidences;

  int queries() const { return edge_queries + branch_queries; }
  /// min over decisions of the best option's score; 1 when no decision.
  double lowest_confidence() const;
};

struct EffectResult {
  WorldState state;
  bool ok = true;
  std::string message;
};

/// Kinematic world model applying a skill's effect.
using WorldModel = std::function<EffectResult(const WorldState&, const std::string& skill,
                                              const std::string& branch, const Trajectory&)>;

/// Replaces the branch selector (baselines).
using BranchOverride = std::function<std::string(const SkillModel&, const WorldState&)>;

/// The operator side of the loop. Returning nullopt means no answer arrived
/// in time and aborts the run.
class InstructionProvider {
 public:
  virtual ~InstructionProvider() = default;
  virtual std::optional<std::string> next_skill_query(const std::string& node,
                                                      const WorldState& s, const WorldState& goal,
                                                      const std::vector<std::string>& options) = 0;
  virtual std::optional<std::string> branch_query(const std::string& skill, const WorldState& s,
                                                  const std::vector<std::string>& options) = 0;

  /// Unsolicited operator correction of a confident decision. Returning an
  /// option other than `chosen` overrides it and is learned like an answer.
  virtual std::optional<std::string> correct_skill(const std::string& node, const WorldState& s,
                                                   const WorldState& goal, const std::string& chosen,
                                                   const std::vector<std::string>& options);
  virtual std::optional<std::string> correct_branch(const std::string& skill, const WorldState& s,
                                                    const std::string& chosen,
                                                    const std::vector<std::string>& options);
};

enum class QueryKind { Edge, Branch };

struct PendingQuery {
  QueryKind kind = QueryKind::Edge;
  std::string node;   // edge: source node; branch: skill
  std::vector<std::string> options;
  std::vector<double> scores;
};

enum class StepStatus { Executed, AwaitingInstruction, Done };

/// One task instance as a resumable state machine. step() advances until a
/// skill has been executed, an instruction is needed, or the run ends.
class TaskRun {
 public:
  TaskRun(TaskNetwork& net, SkillLibrary& skills, TaskInstance instance, ExecConfig cfg,
          WorldModel world, BranchOverride branch_override = {});

  /// Consulted after every confident decision; may override it.
  void set_corrector(InstructionProvider* corrector) { corrector_ = corrector; }

  StepStatus step();
  /// Folds the operator's answer to the pending query into the selectors.
  void answer(const std::string& id);
  void abort(const std::string& reason);

  bool done() const { return trace_.outcome != Outcome::Running; }
  const std::optional<PendingQuery>& pending() const { return pending_; }
  const ExecutionTrace& trace() const { return trace_; }
  const WorldState& state() const { return state_; }
  const std::string& node() const { return node_; }
  const TaskInstance& instance() const { return instance_; }
  /// Skill chosen for the step in progress, if any.
  const std::optional<std::string>& chosen_skill() const { return chosen_skill_; }

 private:
  enum class Phase { ChooseEdge, ChooseBranch };

  void finish(Outcome o, std::string diagnostic = {});
  StepStatus choose_edge();
  StepStatus choose_branch();
  StepStatus execute(const std::string& branch);

  TaskNetwork& net_;
  SkillLibrary& skills_;
  TaskInstance instance_;
  ExecConfig cfg_;
  WorldModel world_;
  BranchOverride branch_override_;
  InstructionProvider* corrector_ = nullptr;

  WorldState state_;
  std::string node_ = kStartNode;
  Phase phase_ = Phase::ChooseEdge;
  std::optional<std::string> chosen_skill_;
  StepRecord current_;
  std::optional<PendingQuery> pending_;
  ExecutionTrace trace_;
};

/// Decide, query if unsure, execute; repeated until the run ends. Blocking provider.
ExecutionTrace run_task(TaskNetwork& net, SkillLibrary& skills, const TaskInstance& instance,
                        const ExecConfig& cfg, InstructionProvider& provider,
                        const WorldModel& world, const BranchOverride& branch_override = {});

struct GtnStep {
  std::string next;
  EdgeDecision decision;
  bool queried = false;
};

/// next_skill, falling back to the provider and folding its answer in.
GtnStep ex_up_gtn(TaskNetwork& net, const std::string& node, const WorldState& s,
                  const WorldState& goal, const ExecConfig& cfg, InstructionProvider& provider);

struct BranchStep {
  std::string branch;
  BranchChoice choice;
  bool queried = false;
};

BranchStep ex_up_brs(SkillModel& skill, const WorldState& s, const ExecConfig& cfg,
                     InstructionProvider& provider);

/// Operator answer for a branch query: tau^B += (v(s), branch), then refit.
void apply_branch_instruction(SkillModel& skill, const WorldState& s, const std::string& branch);

}  // namespace skillnet
