#include <set>
#include <sstream>

#include <gtest/gtest.h>

#include "skillnet/evaluation.hpp"

using namespace skillnet;

TEST(Scenario, RequestedSceneHonoured) {
  const ScenarioSpec spec = bin_sorting_spec();
  SceneRequest r;
  r.object_xy = Eigen::Vector2d(0.1, -0.05);
  r.object_yaw = 0.1;
  r.barcode_up = true;
  r.destination = Destination::Sort;
  const Scene scene = sample_scene(spec, 3, r);
  EXPECT_LT((object_in_bin(scene.state) - *r.object_xy).norm(), 1e-12);
  EXPECT_TRUE(barcode_up(scene.state.object(kObject)));
  EXPECT_FALSE(object_held(scene.state));
  const Eigen::Vector3d g = scene.task.goal.object(kObject).position;
  EXPECT_LT((g - scene.state.object(kSortArea).position).head<2>().norm(),
            (g - scene.state.object(kDropBin).position).head<2>().norm());
  // Same seed, same scene.
  EXPECT_EQ(sample_scene(spec, 3, r).state, scene.state);
}

TEST(Scenario, CornerRequestNeedsPressShift) {
  const ScenarioSpec spec = bin_sorting_spec();
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    SceneRequest r;
    r.corner = true;
    const Scene scene = sample_scene(spec, seed, r);
    EXPECT_TRUE(oracle_corner(spec.config, object_in_bin(scene.state)).has_value());
    EXPECT_EQ(oracle_next_skill(spec, kStartNode, scene.state, scene.task.goal), "press_shift");
  }
}

TEST(Scenario, OraclePickBranchByNearestWall) {
  const ScenarioConfig c;
  EXPECT_EQ(oracle_pick_branch(c, {0, 0}), "center");
  EXPECT_EQ(oracle_pick_branch(c, {-0.17, 0}), "left");
  EXPECT_EQ(oracle_pick_branch(c, {0.17, 0.01}), "right");
  EXPECT_EQ(oracle_pick_branch(c, {0.0, -0.12}), "front");
  EXPECT_EQ(oracle_pick_branch(c, {0.0, 0.12}), "back");
  EXPECT_EQ(oracle_corner(c, {-0.18, 0.13}), std::optional<std::string>("back_left"));
  EXPECT_FALSE(oracle_corner(c, {-0.18, 0.0}).has_value());
}

TEST(Scenario, RigidTransformMovesEveryPose) {
  const ScenarioSpec spec = bin_sorting_spec();
  const Scene scene = sample_scene(spec, 5);
  const Pose g = Pose::planar(0.3, -0.2, 0.0, 0.9);
  const Scene moved = transform_scene(scene, g);
  EXPECT_LT((moved.state.robot.position - (g.orientation * scene.state.robot.position + g.position)).norm(), 1e-12);
  for (std::size_t i = 0; i < scene.state.objects.size(); ++i) {
    const auto& a = scene.state.objects[i].pose;
    const auto& b = moved.state.objects[i].pose;
    EXPECT_LT((b.position - (g.orientation * a.position + g.position)).norm(), 1e-12);
  }
  // Bin coordinates are unchanged.
  EXPECT_LT((object_in_bin(moved.state) - object_in_bin(scene.state)).norm(), 1e-12);
}

TEST(Scenario, AssemblyPlansCoverGraph) {
  const ScenarioSpec spec = assembly_spec();
  std::set<Edge> seen;
  for (const auto& p : assembly_plans(spec)) {
    std::string prev;
    for (const auto& item : p.items) {
      if (const auto* s = std::get_if<std::string>(&item)) {
        if (!prev.empty()) seen.insert({prev, *s});
        prev = *s;
      }
    }
  }
  EXPECT_EQ(seen, std::set<Edge>(spec.ground_truth_edges.begin(), spec.ground_truth_edges.end()));
}

TEST(Evaluation, WindowedTrendMatchesLeastSquares) {
  EXPECT_DOUBLE_EQ(windowed_trend({1, 2}, 5), 0.0);
  EXPECT_NEAR(windowed_trend({0, 1, 2, 3, 4, 5}, 2), 1.0, 1e-12);
  // Moving averages of {0,0,3,3} with window 2: {0,1.5,3}; slope 1.5.
  EXPECT_NEAR(windowed_trend({0, 0, 3, 3}, 2), 1.5, 1e-12);
  EXPECT_THROW(windowed_trend({1}, 0), std::invalid_argument);
}

TEST(Evaluation, BranchMapGridAndCsv) {
  const ScenarioSpec spec = bin_sorting_spec();
  const SkillModel pick = train_pick_skill(spec, 2, 1);
  const BranchMap map = eval_branch_map(spec, pick, 10);
  ASSERT_EQ(map.points.size(), 100u);
  int agree = 0;
  for (const auto& p : map.points) {
    EXPECT_EQ(p.oracle, oracle_pick_branch(spec.config, {p.x, p.y}));
    agree += p.logistic == p.oracle;
  }
  EXPECT_NEAR(map.logistic_accuracy, agree / 100.0, 1e-12);
  std::ostringstream os;
  write_branch_map_csv(os, map, {"eval-branch-map", 1, "default"});
  std::istringstream in(os.str());
  std::string line;
  int rows = 0;
  bool header = false;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    if (!header) {
      EXPECT_EQ(line, "x,y,oracle,logistic,gaussian");
      header = true;
    } else {
      ++rows;
    }
  }
  EXPECT_EQ(rows, 100);
}
