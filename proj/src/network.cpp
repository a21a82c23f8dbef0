#include "skillnet/network.hpp"

#include <algorithm>

namespace skillnet {

Plan Plan::from(const std::vector<WorldState>& states, const std::vector<std::string>& skills) {
  if (states.size() != skills.size() + 1) {
    throw MalformedPlanError("a plan needs exactly one more state than skills");
  }
  Plan p;
  p.items.emplace_back(std::string(kStartNode));
  for (std::size_t i = 0; i < skills.size(); ++i) {
    p.items.emplace_back(states[i]);
    p.items.emplace_back(skills[i]);
  }
  p.items.emplace_back(states.back());
  p.items.emplace_back(std::string(kStopNode));
  return p;
}

double EdgeDecision::max_score() const {
  return scores.empty() ? 0.0 : *std::max_element(scores.begin(), scores.end());
}

TaskNetwork::TaskNetwork(std::map<std::string, SkillContext> skills, SelectorOptions options,
                         FeatureMode mode)
    : skills_(std::move(skills)), options_(options), mode_(mode) {}

TaskNetwork TaskNetwork::restore(std::map<std::string, SkillContext> skills,
                                 SelectorOptions options, FeatureMode mode, std::set<Edge> edges,
                                 std::map<Edge, std::vector<AugmentedState>> archives,
                                 std::map<std::string, TrainingSet> training,
                                 std::map<std::string, LogisticSelector> selectors) {
  TaskNetwork net(std::move(skills), options, mode);
  net.edges_ = std::move(edges);
  net.archives_ = std::move(archives);
  net.training_ = std::move(training);
  net.selectors_ = std::move(selectors);
  return net;
}

bool TaskNetwork::has_skill(const std::string& name) const { return skills_.count(name) > 0; }

std::vector<std::string> TaskNetwork::skill_names() const {
  std::vector<std::string> out;
  for (const auto& [name, _] : skills_) out.push_back(name);
  return out;
}

std::set<std::string> TaskNetwork::nodes() const {
  std::set<std::string> out{kStartNode};
  for (const auto& [a, b] : edges_) {
    out.insert(a);
    out.insert(b);
  }
  return out;
}

std::vector<std::string> TaskNetwork::successors(const std::string& node) const {
  std::vector<std::string> out;
  for (auto it = edges_.lower_bound({node, ""}); it != edges_.end() && it->first == node; ++it) {
    out.push_back(it->second);
  }
  return out;
}

SkillContext TaskNetwork::context_for(const std::string& node, const WorldState& s) const {
  if (node == kStartNode) {
    // The virtual start node sees every entity.
    SkillContext ctx;
    ctx.objects = s.object_ids();
    ctx.frames.entities.push_back(kRobotEntity);
    for (const auto& id : ctx.objects) ctx.frames.entities.push_back(id);
    return ctx;
  }
  const auto it = skills_.find(node);
  if (it == skills_.end()) throw UnknownSkillError("unknown skill '" + node + "'");
  return it->second;
}

Eigen::VectorXd TaskNetwork::edge_feature(const std::string& node, const WorldState& s,
                                          const WorldState& goal) const {
  if (mode_ == FeatureMode::FullState) {
    const Eigen::VectorXd a = full_state_feature(s);
    const Eigen::VectorXd b = full_state_feature(goal);
    Eigen::VectorXd h(a.size() + b.size());
    h << a, b;
    return h;
  }
  const SkillContext ctx = context_for(node, s);
  return skillnet::edge_feature(s, goal, ctx.objects, ctx.frames);
}

void TaskNetwork::ingest_plan(const Plan& plan) {
  const auto& items = plan.items;
  if (items.size() < 3 || items.size() % 2 == 0) {
    throw MalformedPlanError("plan must alternate skills and states, bracketed by start/stop");
  }
  for (std::size_t i = 0; i < items.size(); ++i) {
    const bool expect_skill = i % 2 == 0;
    if (expect_skill != std::holds_alternative<std::string>(items[i])) {
      throw MalformedPlanError("plan item " + std::to_string(i) + " breaks the alternation");
    }
  }
  if (std::get<std::string>(items.front()) != kStartNode ||
      std::get<std::string>(items.back()) != kStopNode) {
    throw MalformedPlanError("plan must begin with start and end with stop");
  }
  for (std::size_t i = 2; i + 2 < items.size(); i += 2) {
    const auto& name = std::get<std::string>(items[i]);
    if (name == kStartNode || name == kStopNode || !has_skill(name)) {
      throw UnknownSkillError("plan references unknown skill '" + name + "'");
    }
  }

  const WorldState& goal = std::get<WorldState>(items[items.size() - 2]);
  for (std::size_t i = 0; i + 2 < items.size(); i += 2) {
    Edge e{std::get<std::string>(items[i]), std::get<std::string>(items[i + 2])};
    edges_.insert(e);
    archives_[e].push_back({std::get<WorldState>(items[i + 1]), goal});
  }
}

void TaskNetwork::refit(const std::string& node) {
  TrainingSet data;
  for (const auto& target : successors(node)) {
    const auto it = archives_.find({node, target});
    if (it == archives_.end()) continue;
    for (const auto& aug : it->second) {
      data.add(edge_feature(node, aug.current, aug.goal), target);
    }
  }
  if (data.empty()) return;
  selectors_[node] = fit_selector(data, options_);
  training_[node] = std::move(data);
}

std::vector<std::string> TaskNetwork::build_edge_selectors() {
  std::vector<std::string> dead_ends;
  for (const auto& node : nodes()) {
    if (node == kStopNode) continue;
    if (successors(node).empty()) {
      dead_ends.push_back(node);
      continue;
    }
    refit(node);
  }
  return dead_ends;
}

EdgeDecision TaskNetwork::next_skill(const std::string& node, const WorldState& s,
                                     const WorldState& goal, double lower_bound) const {
  EdgeDecision d;
  d.options = successors(node);
  if (d.options.empty()) return d;
  const auto it = selectors_.find(node);
  if (it == selectors_.end()) {
    d.scores.assign(d.options.size(), 0.0);
    return d;
  }
  const auto& sel = it->second;
  const auto raw = sel.predict(edge_feature(node, s, goal));
  d.scores.assign(d.options.size(), 0.0);
  for (std::size_t i = 0; i < d.options.size(); ++i) {
    const auto& cls = sel.classes();
    const auto pos = std::find(cls.begin(), cls.end(), d.options[i]);
    if (pos != cls.end()) d.scores[i] = raw[static_cast<std::size_t>(pos - cls.begin())];
  }
  double best = -1.0;
  for (std::size_t i = 0; i < d.options.size(); ++i) {
    if (d.scores[i] > lower_bound && d.scores[i] > best) {
      best = d.scores[i];
      d.chosen = d.options[i];
    }
  }
  return d;
}

void TaskNetwork::apply_instruction(const std::string& node, const WorldState& s,
                                    const WorldState& goal, const std::string& next) {
  if (node != kStartNode && !has_skill(node)) {
    throw UnknownSkillError("unknown source node '" + node + "'");
  }
  if (next != kStopNode && !has_skill(next)) {
    throw UnknownSkillError("instruction names unknown skill '" + next + "'");
  }
  Edge e{node, next};
  edges_.insert(e);
  archives_[e].push_back({s, goal});
  refit(node);
}

}  // namespace skillnet
