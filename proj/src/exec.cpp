#include "skillnet/exec.hpp"

#include <algorithm>
#include <limits>

namespace skillnet {

void ExecConfig::validate() const {
  auto in_unit = [](double v) { return v > 0.0 && v < 1.0; };
  if (!in_unit(edge_bound) || !in_unit(branch_bound)) {
    throw std::invalid_argument("confidence bounds must lie in (0, 1)");
  }
  if (!(position_tolerance > 0) || !(angle_tolerance > 0)) {
    throw std::invalid_argument("goal tolerances must be positive");
  }
  if (max_steps < 1) throw std::invalid_argument("max_steps must be at least 1");
}

bool goal_reached(const WorldState& s, const WorldState& goal, const ExecConfig& cfg,
                  const std::vector<std::string>& goal_objects) {
  const std::vector<std::string> ids = goal_objects.empty() ? goal.object_ids() : goal_objects;
  for (const auto& id : ids) {
    const Pose& a = s.object(id);
    const Pose& b = goal.object(id);
    if ((a.position - b.position).norm() > cfg.position_tolerance) return false;
    if (angular_distance(a.orientation, b.orientation) > cfg.angle_tolerance) return false;
  }
  return true;
}

const char* to_string(Outcome o) {
  switch (o) {
    case Outcome::Running: return "running";
    case Outcome::Success: return "success";
    case Outcome::StepCap: return "step_cap";
    case Outcome::Abort: return "abort";
    case Outcome::SkillFailure: return "skill_failure";
  }
  return "unknown";
}

double ExecutionTrace::lowest_confidence() const {
  if (decision_confidences.empty()) return 1.0;
  return *std::min_element(decision_confidences.begin(), decision_confidences.end());
}

void apply_branch_instruction(SkillModel& skill, const WorldState& s, const std::string& branch) {
  if (skill.branches.count(branch) == 0) {
    throw InvalidAnswerError("skill '" + skill.name + "' has no branch '" + branch + "'");
  }
  auto [selector, data] = add_point_and_refit(skill.branch_selector, std::move(skill.branch_data),
                                              skill.feature(s), branch);
  skill.branch_selector = std::move(selector);
  skill.branch_data = std::move(data);
}

std::optional<std::string> InstructionProvider::correct_skill(const std::string&, const WorldState&,
                                                              const WorldState&, const std::string&,
                                                              const std::vector<std::string>&) {
  return std::nullopt;
}

std::optional<std::string> InstructionProvider::correct_branch(const std::string&, const WorldState&,
                                                               const std::string&,
                                                               const std::vector<std::string>&) {
  return std::nullopt;
}

namespace {

std::vector<std::string> edge_query_options(const TaskNetwork& net, const std::string& node) {
  std::vector<std::string> options = net.skill_names();
  if (node != kStartNode) options.emplace_back(kStopNode);
  return options;
}

std::vector<double> scores_for(const std::vector<std::string>& options, const EdgeDecision& d) {
  std::vector<double> out(options.size(), 0.0);
  for (std::size_t i = 0; i < options.size(); ++i) {
    const auto it = std::find(d.options.begin(), d.options.end(), options[i]);
    if (it != d.options.end()) out[i] = d.scores[static_cast<std::size_t>(it - d.options.begin())];
  }
  return out;
}

void check_option(const std::vector<std::string>& options, const std::string& id) {
  if (std::find(options.begin(), options.end(), id) == options.end()) {
    throw InvalidAnswerError("'" + id + "' is not one of the offered options");
  }
}

}  // namespace

TaskRun::TaskRun(TaskNetwork& net, SkillLibrary& skills, TaskInstance instance, ExecConfig cfg,
                 WorldModel world, BranchOverride branch_override)
    : net_(net),
      skills_(skills),
      instance_(std::move(instance)),
      cfg_(cfg),
      world_(std::move(world)),
      branch_override_(std::move(branch_override)),
      state_(instance_.start) {
  cfg_.validate();
}

void TaskRun::finish(Outcome o, std::string diagnostic) {
  trace_.outcome = o;
  trace_.diagnostic = std::move(diagnostic);
  pending_.reset();
}

void TaskRun::abort(const std::string& reason) {
  if (!done()) finish(Outcome::Abort, reason);
}

StepStatus TaskRun::step() {
  if (done()) return StepStatus::Done;
  if (pending_) throw ProtocolError("cannot step while an instruction is pending");
  return phase_ == Phase::ChooseEdge ? choose_edge() : choose_branch();
}

StepStatus TaskRun::choose_edge() {
  if (goal_reached(state_, instance_.goal, cfg_, instance_.goal_objects)) {
    finish(Outcome::Success);
    return StepStatus::Done;
  }
  if (static_cast<int>(trace_.steps.size()) >= cfg_.max_steps) {
    finish(Outcome::StepCap, "step cap of " + std::to_string(cfg_.max_steps) + " reached");
    return StepStatus::Done;
  }
  current_ = StepRecord{};
  current_.state = state_;
  current_.from = node_;

  const EdgeDecision d = net_.next_skill(node_, state_, instance_.goal, cfg_.edge_bound);
  current_.edge_confidence = d.max_score();
  std::optional<std::string> next = d.chosen;
  if (!next && cfg_.autonomous && !d.options.empty()) {
    next = d.options[static_cast<std::size_t>(
        std::max_element(d.scores.begin(), d.scores.end()) - d.scores.begin())];
  }
  if (!next) {
    if (cfg_.autonomous) {
      finish(Outcome::Abort, "no outgoing edge at node '" + node_ + "'");
      return StepStatus::Done;
    }
    PendingQuery q;
    q.kind = QueryKind::Edge;
    q.node = node_;
    q.options = edge_query_options(net_, node_);
    q.scores = scores_for(q.options, d);
    pending_ = std::move(q);
    return StepStatus::AwaitingInstruction;
  }
  trace_.decision_confidences.push_back(current_.edge_confidence);
  if (corrector_ && d.chosen) {
    const auto options = edge_query_options(net_, node_);
    const auto fix = corrector_->correct_skill(node_, state_, instance_.goal, *next, options);
    if (fix && *fix != *next) {
      check_option(options, *fix);
      net_.apply_instruction(node_, state_, instance_.goal, *fix);
      ++trace_.edge_queries;
      ++trace_.corrections;
      current_.edge_query = true;
      current_.edge_correction = true;
      next = fix;
    }
  }
  chosen_skill_ = *next;
  if (*next == kStopNode) {
    if (goal_reached(state_, instance_.goal, cfg_, instance_.goal_objects)) {
      finish(Outcome::Success);
    } else {
      finish(Outcome::Abort, "stop chosen before the goal was reached");
    }
    return StepStatus::Done;
  }
  phase_ = Phase::ChooseBranch;
  return choose_branch();
}

StepStatus TaskRun::choose_branch() {
  current_.skill = *chosen_skill_;
  const auto it = skills_.find(current_.skill);
  if (it == skills_.end()) {
    finish(Outcome::Abort, "no skill model for '" + current_.skill + "'");
    return StepStatus::Done;
  }
  SkillModel& skill = it->second;
  if (branch_override_) {
    current_.branch_confidence = 1.0;
    trace_.decision_confidences.push_back(1.0);
    return execute(branch_override_(skill, state_));
  }
  const BranchChoice c = select_branch(skill, state_, cfg_.branch_bound);
  current_.branch_confidence =
      c.scores.empty() ? 0.0 : *std::max_element(c.scores.begin(), c.scores.end());
  std::optional<std::string> branch = c.best;
  if (!branch && cfg_.autonomous) {
    branch = c.branches[static_cast<std::size_t>(
        std::max_element(c.scores.begin(), c.scores.end()) - c.scores.begin())];
  }
  if (!branch) {
    PendingQuery q;
    q.kind = QueryKind::Branch;
    q.node = current_.skill;
    q.options = skill.branch_ids();
    q.scores.assign(q.options.size(), 0.0);
    for (std::size_t i = 0; i < q.options.size(); ++i) {
      const auto pos = std::find(c.branches.begin(), c.branches.end(), q.options[i]);
      if (pos != c.branches.end()) q.scores[i] = c.scores[static_cast<std::size_t>(pos - c.branches.begin())];
    }
    pending_ = std::move(q);
    return StepStatus::AwaitingInstruction;
  }
  trace_.decision_confidences.push_back(current_.branch_confidence);
  if (corrector_ && c.best) {
    const auto options = skill.branch_ids();
    const auto fix = corrector_->correct_branch(current_.skill, state_, *branch, options);
    if (fix && *fix != *branch) {
      check_option(options, *fix);
      apply_branch_instruction(skill, state_, *fix);
      ++trace_.branch_queries;
      ++trace_.corrections;
      current_.branch_query = true;
      current_.branch_correction = true;
      branch = fix;
    }
  }
  return execute(*branch);
}

StepStatus TaskRun::execute(const std::string& branch) {
  SkillModel& skill = skills_.at(current_.skill);
  current_.branch = branch;
  const Trajectory traj = retrieve(skill, branch, state_);
  current_.trajectory_length = traj.size();
  current_.trajectory_end = traj.final_state();
  EffectResult effect = world_(state_, current_.skill, branch, traj);
  trace_.steps.push_back(current_);
  node_ = current_.skill;
  chosen_skill_.reset();
  phase_ = Phase::ChooseEdge;
  if (!effect.ok) {
    state_ = std::move(effect.state);
    finish(Outcome::SkillFailure, effect.message);
    return StepStatus::Done;
  }
  state_ = std::move(effect.state);
  return StepStatus::Executed;
}

void TaskRun::answer(const std::string& id) {
  if (!pending_) throw ProtocolError("no instruction is pending");
  const PendingQuery q = *pending_;
  check_option(q.options, id);
  if (q.kind == QueryKind::Edge) {
    net_.apply_instruction(node_, state_, instance_.goal, id);
    ++trace_.edge_queries;
    current_.edge_query = true;
    trace_.decision_confidences.push_back(current_.edge_confidence);
    pending_.reset();
    chosen_skill_ = id;
    phase_ = Phase::ChooseBranch;
    if (id == kStopNode) {
      if (goal_reached(state_, instance_.goal, cfg_, instance_.goal_objects)) {
        finish(Outcome::Success);
      } else {
        finish(Outcome::Abort, "stop chosen before the goal was reached");
      }
    }
    return;
  }
  apply_branch_instruction(skills_.at(q.node), state_, id);
  ++trace_.branch_queries;
  current_.branch_query = true;
  trace_.decision_confidences.push_back(current_.branch_confidence);
  pending_.reset();
  execute(id);
}

ExecutionTrace run_task(TaskNetwork& net, SkillLibrary& skills, const TaskInstance& instance,
                        const ExecConfig& cfg, InstructionProvider& provider,
                        const WorldModel& world, const BranchOverride& branch_override) {
  TaskRun run(net, skills, instance, cfg, world, branch_override);
  if (!cfg.autonomous) run.set_corrector(&provider);
  while (!run.done()) {
    if (run.step() != StepStatus::AwaitingInstruction) continue;
    const PendingQuery& q = *run.pending();
    const std::optional<std::string> answer =
        q.kind == QueryKind::Edge
            ? provider.next_skill_query(q.node, run.state(), instance.goal, q.options)
            : provider.branch_query(q.node, run.state(), q.options);
    if (!answer) {
      run.abort("instruction query timed out");
      break;
    }
    try {
      run.answer(*answer);
    } catch (const InvalidAnswerError& e) {
      run.abort(std::string("invalid instruction: ") + e.what());
    }
  }
  return run.trace();
}

GtnStep ex_up_gtn(TaskNetwork& net, const std::string& node, const WorldState& s,
                  const WorldState& goal, const ExecConfig& cfg, InstructionProvider& provider) {
  GtnStep out;
  out.decision = net.next_skill(node, s, goal, cfg.edge_bound);
  const auto options = edge_query_options(net, node);
  std::optional<std::string> answer;
  if (out.decision.chosen) {
    out.next = *out.decision.chosen;
    answer = provider.correct_skill(node, s, goal, out.next, options);
    if (!answer || *answer == out.next) return out;
  } else {
    answer = provider.next_skill_query(node, s, goal, options);
  }
  if (!answer) throw ProtocolError("instruction query timed out");
  check_option(options, *answer);
  net.apply_instruction(node, s, goal, *answer);
  out.next = *answer;
  out.queried = true;
  return out;
}

BranchStep ex_up_brs(SkillModel& skill, const WorldState& s, const ExecConfig& cfg,
                     InstructionProvider& provider) {
  BranchStep out;
  out.choice = select_branch(skill, s, cfg.branch_bound);
  const auto options = skill.branch_ids();
  std::optional<std::string> answer;
  if (out.choice.best) {
    out.branch = *out.choice.best;
    answer = provider.correct_branch(skill.name, s, out.branch, options);
    if (!answer || *answer == out.branch) return out;
  } else {
    answer = provider.branch_query(skill.name, s, options);
  }
  if (!answer) throw ProtocolError("instruction query timed out");
  check_option(options, *answer);
  apply_branch_instruction(skill, s, *answer);
  out.branch = *answer;
  out.queried = true;
  return out;
}

}  // namespace skillnet
