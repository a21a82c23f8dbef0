#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "skillnet/scenario.hpp"

namespace skillnet {

// ---- Branch map (logistic selector vs Gaussian preconditions) ----

struct BranchMapPoint {
  double x = 0.0;  // bin coordinates
  double y = 0.0;
  std::string oracle;
  std::string logistic;
  std::string gaussian;
};

struct BranchMap {
  int grid = 0;
  std::vector<BranchMapPoint> points;  // x-major order
  double logistic_accuracy = 0.0;
  double gaussian_accuracy = 0.0;
};

/// pick_bin fitted from exactly `demos_per_branch` synthetic demos per branch.
SkillModel train_pick_skill(const ScenarioSpec& spec, int demos_per_branch, std::uint64_t seed);

/// Predicted pick branch over a grid x grid lattice of object positions
/// spanning the bin interior (1 cm margin), barcode down, zero yaw.
BranchMap eval_branch_map(const ScenarioSpec& spec, const SkillModel& pick, int grid = 50);

// ---- Learning curve ----

struct CurveOptions {
  int instances = 20;
  std::uint64_t seed = 1;
  int window = 5;  // moving-average window of the confidence trend
  ExecConfig exec;
};

struct CurveRow {
  int instance = 0;
  std::uint64_t scene_seed = 0;
  int edge_queries = 0;
  int branch_queries = 0;
  int corrections = 0;
  int cumulative_edge_queries = 0;
  int cumulative_branch_queries = 0;
  double lowest_confidence = 1.0;
  int steps = 0;
  Outcome outcome = Outcome::Running;
};

struct LearningCurve {
  std::vector<CurveRow> rows;
  double confidence_trend = 0.0;  // slope of the windowed lowest confidence

  /// Queries (edge + branch) summed over the last `n` instances.
  int late_queries(int n) const;
  /// Success rate over the last `n` instances.
  double late_success(int n) const;
};

/// Moving average over `window` consecutive values followed by the
/// least-squares slope against the window index. Zero for too few values.
double windowed_trend(const std::vector<double>& values, int window);

/// Fresh network and skills, `instances` sampled scenes, scripted oracle.
LearningCurve eval_learning_curve(const ScenarioSpec& spec, const CurveOptions& options = {});

// ---- Baselines ----

enum class Variant {
  GTN,  // relative features, logistic branch selectors
  TPH,  // GTN edges, Gaussian-precondition branch choice
  FUL,  // absolute full-state features for both selectors
};

const char* to_string(Variant v);

struct BaselineOptions {
  int train_instances = 30;
  int test_scenes = 50;
  std::uint64_t seed = 1;
  /// Rigid motion applied to the held-out scenes for the invariance test.
  Pose shift = Pose::planar(0.30, 0.30, 0.0, 0.0);
  ExecConfig exec;
};

struct BaselineRow {
  Variant variant = Variant::GTN;
  double learn_seconds = 0.0;   // skill fitting plus the interactive training phase
  double decide_seconds = 0.0;  // mean time of one edge or branch decision
  double skill_success = 0.0;   // executed skills without a failure, held-out scenes
  double task_success = 0.0;    // held-out scenes
  double shifted_task_success = 0.0;
  double decision_accuracy = 0.0;  // decisions agreeing with the oracle, held-out scenes
  double shifted_decision_accuracy = 0.0;
  int training_queries = 0;
};

/// Trains every variant interactively on the same scenes, then runs each
/// autonomously on identical held-out scenes, untouched and rigidly shifted.
std::vector<BaselineRow> compare_baselines(const ScenarioSpec& spec,
                                           const BaselineOptions& options = {});

// ---- CSV output ----

/// Every CSV starts with `# key=value` comment lines describing the run.
struct CsvMeta {
  std::string command;
  std::uint64_t seed = 0;
  std::string config;  // config file path or "default"
};

void write_branch_map_csv(std::ostream& os, const BranchMap& map, const CsvMeta& meta);
void write_curve_csv(std::ostream& os, const LearningCurve& curve, const CsvMeta& meta);
void write_baselines_csv(std::ostream& os, const std::vector<BaselineRow>& rows,
                         const CsvMeta& meta);
void write_trace_csv(std::ostream& os, const ExecutionTrace& trace, const CsvMeta& meta);

}  // namespace skillnet
