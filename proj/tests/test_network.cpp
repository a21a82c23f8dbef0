#include <set>

#include <gtest/gtest.h>

#include "skillnet/scenario.hpp"

using namespace skillnet;

namespace {

WorldState two_objects(double ax, double bx) {
  WorldState s;
  s.robot = Pose::planar(0, 0, 0.3, 0);
  s.objects = {{"a", Pose::planar(ax, 0, 0, 0)}, {"b", Pose::planar(bx, 0.2, 0, 0)}};
  return s;
}

std::map<std::string, SkillContext> toy_skills() {
  return {{"x", {{"a"}, FrameSpec{{"robot", "a"}}}}, {"y", {{"b"}, FrameSpec{{"robot", "b"}}}}};
}

}  // namespace

TEST(Network, AssemblyTopologyRecovered) {
  const ScenarioSpec spec = assembly_spec();
  TaskNetwork net(spec.contexts(), spec.config.edge_selector());
  for (const auto& p : assembly_plans(spec)) net.ingest_plan(p);
  const auto dangling = net.build_edge_selectors();
  EXPECT_TRUE(dangling.empty());
  const std::set<Edge> truth(spec.ground_truth_edges.begin(), spec.ground_truth_edges.end());
  EXPECT_EQ(net.edges(), truth);
  EXPECT_EQ(net.nodes().size(), 8u);
  EXPECT_TRUE(net.nodes().count(kStartNode));
  EXPECT_TRUE(net.nodes().count(kStopNode));
}

TEST(Network, PlanMustAlternate) {
  EXPECT_THROW(Plan::from({WorldState{}}, {"x"}), MalformedPlanError);
}

TEST(Network, EmptyNetworkHasNoOptions) {
  TaskNetwork net(toy_skills());
  const auto d = net.next_skill(kStartNode, two_objects(0, 1), two_objects(1, 1), 0.8);
  EXPECT_TRUE(d.options.empty());
  EXPECT_TRUE(d.query_needed());
}

TEST(Network, SingleSuccessorIsConfident) {
  TaskNetwork net(toy_skills());
  net.apply_instruction(kStartNode, two_objects(0, 1), two_objects(1, 1), "x");
  EXPECT_EQ(net.edges(), (std::set<Edge>{{kStartNode, "x"}}));
  const auto d = net.next_skill(kStartNode, two_objects(0.3, 1), two_objects(1, 1), 0.8);
  ASSERT_TRUE(d.chosen.has_value());
  EXPECT_EQ(*d.chosen, "x");
  EXPECT_DOUBLE_EQ(d.max_score(), 1.0);
}

TEST(Network, InstructionsSeparateContexts) {
  TaskNetwork net(toy_skills());
  // x when object a is still far from its goal, stop otherwise.
  for (int i = 0; i < 4; ++i) {
    net.apply_instruction("x", two_objects(0.1 * i, 1), two_objects(1, 1), "y");
    net.apply_instruction("x", two_objects(1 + 0.01 * i, 1), two_objects(1, 1), kStopNode);
  }
  EXPECT_EQ(net.successors("x"), (std::vector<std::string>{"stop", "y"}));
  EXPECT_EQ(net.training_sets().at("x").size(), 8u);
  const auto far = net.next_skill("x", two_objects(0.05, 1), two_objects(1, 1), 0.5);
  const auto near = net.next_skill("x", two_objects(1.0, 1), two_objects(1, 1), 0.5);
  ASSERT_TRUE(far.chosen && near.chosen);
  EXPECT_EQ(*far.chosen, "y");
  EXPECT_EQ(*near.chosen, kStopNode);
}

TEST(Network, UnknownSkillRejected) {
  TaskNetwork net(toy_skills());
  EXPECT_THROW(net.apply_instruction(kStartNode, {}, {}, "nope"), UnknownSkillError);
  EXPECT_THROW(net.apply_instruction("nope", {}, {}, "x"), UnknownSkillError);
}
