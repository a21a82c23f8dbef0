#include "skillnet/evaluation.hpp"

#include <algorithm>
#include <chrono>
#include <map>
#include <memory>
#include <stdexcept>
#include <ostream>

namespace skillnet {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

void write_meta(std::ostream& os, const CsvMeta& meta) {
  os << "# command=" << meta.command << "\n";
  os << "# seed=" << meta.seed << "\n";
  os << "# config=" << (meta.config.empty() ? "default" : meta.config) << "\n";
}

}  // namespace

SkillModel train_pick_skill(const ScenarioSpec& spec, int demos_per_branch, std::uint64_t seed) {
  std::vector<Demonstration> demos;
  std::uint64_t stream = seed;
  for (const auto& b : spec.skill("pick_bin").branches) {
    auto d = synth_demos(spec, "pick_bin", b, demos_per_branch, ++stream * 7919u);
    demos.insert(demos.end(), d.begin(), d.end());
  }
  return fit_scenario_skill(spec, "pick_bin", demos);
}

BranchMap eval_branch_map(const ScenarioSpec& spec, const SkillModel& pick, int grid) {
  if (grid < 2) throw std::invalid_argument("branch map grid needs at least 2 points per axis");
  const ScenarioConfig& cfg = spec.config;
  const GaussianPrecondition gauss = fit_gaussian_precondition(pick.branch_data);
  const double hx = cfg.bin_length / 2 - 0.01;
  const double hy = cfg.bin_width / 2 - 0.01;
  BranchMap map;
  map.grid = grid;
  int logistic_ok = 0;
  int gaussian_ok = 0;
  for (int i = 0; i < grid; ++i) {
    for (int j = 0; j < grid; ++j) {
      BranchMapPoint p;
      p.x = -hx + 2 * hx * i / (grid - 1);
      p.y = -hy + 2 * hy * j / (grid - 1);
      SceneRequest req;
      req.object_xy = Eigen::Vector2d(p.x, p.y);
      req.object_yaw = 0.0;
      req.barcode_up = false;
      const Scene scene = sample_scene(spec, 1, req);
      const Eigen::VectorXd v = pick.feature(scene.state);
      p.oracle = oracle_pick_branch(cfg, {p.x, p.y});
      p.logistic = pick.branch_selector.classes()[pick.branch_selector.argmax(v)];
      p.gaussian = gauss.predict(v);
      logistic_ok += p.logistic == p.oracle;
      gaussian_ok += p.gaussian == p.oracle;
      map.points.push_back(std::move(p));
    }
  }
  const double n = static_cast<double>(map.points.size());
  map.logistic_accuracy = logistic_ok / n;
  map.gaussian_accuracy = gaussian_ok / n;
  return map;
}

double windowed_trend(const std::vector<double>& values, int window) {
  if (window < 1) throw std::invalid_argument("trend window must be positive");
  const int n = static_cast<int>(values.size()) - window + 1;
  if (n < 2) return 0.0;
  std::vector<double> avg(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    double s = 0.0;
    for (int k = 0; k < window; ++k) s += values[static_cast<std::size_t>(i + k)];
    avg[static_cast<std::size_t>(i)] = s / window;
  }
  const double mx = (n - 1) / 2.0;
  double my = 0.0;
  for (double a : avg) my += a;
  my /= n;
  double sxy = 0.0;
  double sxx = 0.0;
  for (int i = 0; i < n; ++i) {
    sxy += (i - mx) * (avg[static_cast<std::size_t>(i)] - my);
    sxx += (i - mx) * (i - mx);
  }
  return sxy / sxx;
}

int LearningCurve::late_queries(int n) const {
  int q = 0;
  const int start = std::max(0, static_cast<int>(rows.size()) - n);
  for (std::size_t i = static_cast<std::size_t>(start); i < rows.size(); ++i) {
    q += rows[i].edge_queries + rows[i].branch_queries;
  }
  return q;
}

double LearningCurve::late_success(int n) const {
  const int start = std::max(0, static_cast<int>(rows.size()) - n);
  const int count = static_cast<int>(rows.size()) - start;
  if (count == 0) return 0.0;
  int ok = 0;
  for (std::size_t i = static_cast<std::size_t>(start); i < rows.size(); ++i) {
    ok += rows[i].outcome == Outcome::Success;
  }
  return static_cast<double>(ok) / count;
}

LearningCurve eval_learning_curve(const ScenarioSpec& spec, const CurveOptions& options) {
  SkillLibrary lib = train_skills(spec, options.seed);
  TaskNetwork net(spec.contexts(), spec.config.edge_selector(), FeatureMode::Relative);
  OracleInstructor oracle(spec);
  const WorldModel world = world_model(spec);
  ExecConfig cfg = options.exec;
  cfg.autonomous = false;

  LearningCurve curve;
  std::vector<double> lowest;
  int edge_total = 0;
  int branch_total = 0;
  for (int i = 0; i < options.instances; ++i) {
    const std::uint64_t scene_seed = options.seed * 1000 + static_cast<std::uint64_t>(i);
    const Scene scene = sample_scene(spec, scene_seed);
    const ExecutionTrace trace = run_task(net, lib, scene.task, cfg, oracle, world);
    CurveRow row;
    row.instance = i + 1;
    row.scene_seed = scene_seed;
    row.edge_queries = trace.edge_queries;
    row.branch_queries = trace.branch_queries;
    row.corrections = trace.corrections;
    edge_total += trace.edge_queries;
    branch_total += trace.branch_queries;
    row.cumulative_edge_queries = edge_total;
    row.cumulative_branch_queries = branch_total;
    row.lowest_confidence = trace.lowest_confidence();
    row.steps = static_cast<int>(trace.steps.size());
    row.outcome = trace.outcome;
    lowest.push_back(row.lowest_confidence);
    curve.rows.push_back(row);
  }
  curve.confidence_trend = windowed_trend(lowest, options.window);
  return curve;
}

const char* to_string(Variant v) {
  switch (v) {
    case Variant::GTN: return "GTN";
    case Variant::TPH: return "TPH";
    case Variant::FUL: return "FUL";
  }
  return "unknown";
}

namespace {

struct VariantModel {
  SkillLibrary lib;
  TaskNetwork net;
  BranchOverride override_fn;
};

BranchOverride gaussian_branches(const SkillLibrary& lib) {
  auto gauss = std::make_shared<std::map<std::string, GaussianPrecondition>>();
  for (const auto& [name, skill] : lib) {
    if (skill.branches.size() > 1) (*gauss)[name] = fit_gaussian_precondition(skill.branch_data);
  }
  return [gauss](const SkillModel& skill, const WorldState& s) {
    const auto it = gauss->find(skill.name);
    if (it == gauss->end()) return skill.branch_ids().front();
    return it->second.predict(skill.feature(s));
  };
}

struct TestStats {
  int runs = 0;
  int successes = 0;
  int skills = 0;
  int skill_failures = 0;
  int decisions = 0;
  int correct = 0;
  double decide_seconds = 0.0;
  int timed = 0;
};

void run_tests(const ScenarioSpec& spec, VariantModel& m, const std::vector<Scene>& scenes,
               const ExecConfig& cfg, TestStats& stats) {
  OracleInstructor oracle(spec);
  oracle.corrective = false;
  const WorldModel world = world_model(spec);
  for (const auto& scene : scenes) {
    // Copies keep the held-out runs from feeding back into the models.
    TaskNetwork net = m.net;
    SkillLibrary lib = m.lib;
    const ExecutionTrace trace =
        run_task(net, lib, scene.task, cfg, oracle, world, m.override_fn);
    ++stats.runs;
    stats.successes += trace.outcome == Outcome::Success;
    stats.skills += static_cast<int>(trace.steps.size());
    stats.skill_failures += trace.outcome == Outcome::SkillFailure;
    for (const auto& step : trace.steps) {
      const auto t0 = Clock::now();
      (void)net.next_skill(step.from, step.state, scene.task.goal, cfg.edge_bound);
      if (m.override_fn) {
        (void)m.override_fn(lib.at(step.skill), step.state);
      } else {
        (void)select_branch(lib.at(step.skill), step.state, cfg.branch_bound);
      }
      stats.decide_seconds += seconds_since(t0);
      stats.timed += 2;
      stats.decisions += 2;
      stats.correct += oracle_next_skill(spec, step.from, step.state, scene.task.goal) == step.skill;
      stats.correct += oracle_branch(spec, step.skill, step.state) == step.branch;
    }
  }
}

}  // namespace

std::vector<BaselineRow> compare_baselines(const ScenarioSpec& spec, const BaselineOptions& options) {
  std::vector<Scene> train;
  std::vector<Scene> test;
  std::vector<Scene> shifted;
  const std::uint64_t base = options.seed * 100000;
  for (int i = 0; i < options.train_instances; ++i) {
    train.push_back(sample_scene(spec, base + static_cast<std::uint64_t>(i)));
  }
  for (int i = 0; i < options.test_scenes; ++i) {
    test.push_back(sample_scene(spec, base + 50000 + static_cast<std::uint64_t>(i)));
    shifted.push_back(transform_scene(test.back(), options.shift));
  }

  std::vector<BaselineRow> rows;
  for (Variant v : {Variant::GTN, Variant::TPH, Variant::FUL}) {
    const FeatureMode mode = v == Variant::FUL ? FeatureMode::FullState : FeatureMode::Relative;
    BaselineRow row;
    row.variant = v;

    const auto t0 = Clock::now();
    VariantModel m{train_skills(spec, options.seed, mode),
                   TaskNetwork(spec.contexts(), spec.config.edge_selector(), mode), {}};
    if (v == Variant::TPH) m.override_fn = gaussian_branches(m.lib);
    OracleInstructor oracle(spec);
    const WorldModel world = world_model(spec);
    ExecConfig train_cfg = options.exec;
    train_cfg.autonomous = false;
    for (const auto& scene : train) {
      const ExecutionTrace trace =
          run_task(m.net, m.lib, scene.task, train_cfg, oracle, world, m.override_fn);
      row.training_queries += trace.queries();
    }
    row.learn_seconds = seconds_since(t0);

    ExecConfig test_cfg = options.exec;
    test_cfg.autonomous = true;
    TestStats plain;
    TestStats moved;
    run_tests(spec, m, test, test_cfg, plain);
    run_tests(spec, m, shifted, test_cfg, moved);
    auto ratio = [](int a, int b) { return b == 0 ? 0.0 : static_cast<double>(a) / b; };
    row.task_success = ratio(plain.successes, plain.runs);
    row.shifted_task_success = ratio(moved.successes, moved.runs);
    row.skill_success = ratio(plain.skills - plain.skill_failures, plain.skills);
    row.decision_accuracy = ratio(plain.correct, plain.decisions);
    row.shifted_decision_accuracy = ratio(moved.correct, moved.decisions);
    row.decide_seconds = plain.timed == 0 ? 0.0 : plain.decide_seconds / plain.timed;
    rows.push_back(row);
  }
  return rows;
}

void write_branch_map_csv(std::ostream& os, const BranchMap& map, const CsvMeta& meta) {
  write_meta(os, meta);
  os << "# logistic_accuracy=" << map.logistic_accuracy << "\n";
  os << "# gaussian_accuracy=" << map.gaussian_accuracy << "\n";
  os << "x,y,oracle,logistic,gaussian\n";
  for (const auto& p : map.points) {
    os << p.x << "," << p.y << "," << p.oracle << "," << p.logistic << "," << p.gaussian << "\n";
  }
}

void write_curve_csv(std::ostream& os, const LearningCurve& curve, const CsvMeta& meta) {
  write_meta(os, meta);
  os << "# confidence_trend=" << curve.confidence_trend << "\n";
  os << "instance,scene_seed,edge_queries,branch_queries,corrections,cumulative_edge_queries,"
        "cumulative_branch_queries,lowest_confidence,steps,outcome\n";
  for (const auto& r : curve.rows) {
    os << r.instance << "," << r.scene_seed << "," << r.edge_queries << "," << r.branch_queries
       << "," << r.corrections << "," << r.cumulative_edge_queries << ","
       << r.cumulative_branch_queries << "," << r.lowest_confidence << "," << r.steps << ","
       << to_string(r.outcome) << "\n";
  }
}

void write_baselines_csv(std::ostream& os, const std::vector<BaselineRow>& rows,
                         const CsvMeta& meta) {
  write_meta(os, meta);
  os << "variant,learn_seconds,decide_seconds,skill_success,task_success,shifted_task_success,"
        "decision_accuracy,shifted_decision_accuracy,training_queries\n";
  for (const auto& r : rows) {
    os << to_string(r.variant) << "," << r.learn_seconds << "," << r.decide_seconds << ","
       << r.skill_success << "," << r.task_success << "," << r.shifted_task_success << ","
       << r.decision_accuracy << "," << r.shifted_decision_accuracy << "," << r.training_queries
       << "\n";
  }
}

void write_trace_csv(std::ostream& os, const ExecutionTrace& trace, const CsvMeta& meta) {
  write_meta(os, meta);
  os << "# outcome=" << to_string(trace.outcome) << "\n";
  if (!trace.diagnostic.empty()) os << "# diagnostic=" << trace.diagnostic << "\n";
  os << "# edge_queries=" << trace.edge_queries << "\n";
  os << "# branch_queries=" << trace.branch_queries << "\n";
  os << "# corrections=" << trace.corrections << "\n";
  os << "step,from,skill,branch,edge_confidence,branch_confidence,edge_query,branch_query,"
        "edge_correction,branch_correction,trajectory_length\n";
  for (std::size_t i = 0; i < trace.steps.size(); ++i) {
    const StepRecord& r = trace.steps[i];
    os << i << "," << r.from << "," << r.skill << "," << r.branch << "," << r.edge_confidence << ","
       << r.branch_confidence << "," << r.edge_query << "," << r.branch_query << ","
       << r.edge_correction << "," << r.branch_correction << "," << r.trajectory_length << "\n";
  }
}

}  // namespace skillnet
