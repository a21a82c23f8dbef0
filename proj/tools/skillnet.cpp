#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "skillnet/bundle.hpp"
#include "skillnet/evaluation.hpp"
#include "skillnet/service.hpp"

namespace fs = std::filesystem;
using namespace skillnet;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitRuntime = 2;

struct Globals {
  std::uint64_t seed = 1;
  std::string config;  // empty: built-in defaults
  std::string data_dir;
};

fs::path data_path(const Globals& g, const std::string& explicit_path, const char* fallback) {
  if (!explicit_path.empty()) return explicit_path;
  return fs::path(g.data_dir) / fallback;
}

RunConfig run_config(const Globals& g) {
  return g.config.empty() ? RunConfig{} : load_run_config(g.config);
}

CsvMeta meta(const Globals& g, const std::string& command) {
  return {command, g.seed, g.config.empty() ? "default" : g.config};
}

Provenance provenance(const Globals& g, const std::string& command) {
  return {g.seed, utc_timestamp(), command, g.config.empty() ? "default" : g.config};
}

std::ofstream open_out(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  return out;
}

void check_written(std::ofstream& out, const fs::path& path) {
  out.flush();
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Geometric task networks: skill learning, interactive execution and evaluation"};
  app.require_subcommand(1);
  app.fallthrough();

  Globals g;
  if (const char* env = std::getenv("SKILLNET_DATA_DIR")) g.data_dir = env;
  else g.data_dir = "data";
  app.add_option("--seed", g.seed, "Random seed")->capture_default_str();
  app.add_option("--config", g.config, "Run configuration JSON ({\"scenario\":{..},\"exec\":{..}})")
      ->check(CLI::ExistingFile);
  app.add_option("--data-dir", g.data_dir, "Default directory for inputs and outputs "
                                           "(env SKILLNET_DATA_DIR)")
      ->capture_default_str();

  // demo-gen
  auto* demo_gen = app.add_subcommand("demo-gen", "Synthesize demonstrations");
  std::string demo_out, demo_skill;
  std::optional<int> demo_per_branch;
  demo_gen->add_option("--out", demo_out, "Demo file (default <data-dir>/demos.json)");
  demo_gen->add_option("--skill", demo_skill, "Only this skill (default: every skill)");
  demo_gen->add_option("--per-branch", demo_per_branch, "Demos per branch (with --skill)")
      ->check(CLI::PositiveNumber);

  // train
  auto* train = app.add_subcommand("train", "Fit skill models from demos into a bundle");
  std::string train_demos, train_out;
  int train_instances = 0;
  train->add_option("--demos", train_demos, "Demo file (default <data-dir>/demos.json)");
  train->add_option("--out", train_out, "Bundle file (default <data-dir>/bundle.json)");
  train->add_option("--instances", train_instances,
                    "Interactive training instances with the scripted operator")
      ->check(CLI::NonNegativeNumber)
      ->capture_default_str();

  // run
  auto* run = app.add_subcommand("run", "Run one task instance with the scripted operator");
  std::string run_bundle, run_out, run_save;
  bool run_autonomous = false, run_no_corrections = false;
  run->add_option("--bundle", run_bundle, "Bundle file (default: empty network)");
  run->add_option("--out", run_out, "Trace CSV (default <data-dir>/trace.csv)");
  run->add_option("--save-bundle", run_save, "Write the updated bundle here");
  run->add_flag("--autonomous", run_autonomous, "Never query; take the best option");
  run->add_flag("--no-corrections", run_no_corrections,
                "Operator answers queries but never overrides confident decisions");

  // eval-branch-map
  auto* branch_map = app.add_subcommand("eval-branch-map", "Pick-branch map over the bin");
  std::string map_out;
  int map_grid = 50, map_demos = 2;
  branch_map->add_option("--out", map_out, "CSV (default <data-dir>/branch_map.csv)");
  branch_map->add_option("--grid", map_grid, "Lattice points per axis")
      ->check(CLI::Range(2, 1000))
      ->capture_default_str();
  branch_map->add_option("--demos-per-branch", map_demos, "Synthetic demos per branch")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();

  // eval-curve
  auto* curve = app.add_subcommand("eval-curve", "Learning curve from a fresh network");
  std::string curve_out;
  int curve_instances = 20, curve_window = 5;
  curve->add_option("--out", curve_out, "CSV (default <data-dir>/curve.csv)");
  curve->add_option("--instances", curve_instances, "Task instances")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  curve->add_option("--window", curve_window, "Confidence-trend window")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();

  // eval-baselines
  auto* baselines = app.add_subcommand("eval-baselines", "GTN vs TPH vs FUL");
  std::string base_out;
  int base_train = 30, base_test = 50;
  baselines->add_option("--out", base_out, "CSV (default <data-dir>/baselines.csv)");
  baselines->add_option("--train", base_train, "Interactive training instances")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  baselines->add_option("--test", base_test, "Held-out scenes")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();

  // serve
  auto* serve = app.add_subcommand("serve", "Start the session service");
  std::string serve_host = "127.0.0.1";
  int serve_port = 8080;
  std::optional<double> serve_timeout;
  serve->add_option("--host", serve_host, "Bind address")->capture_default_str();
  serve->add_option("--port", serve_port, "Port (0 picks a free one)")
      ->check(CLI::Range(0, 65535))
      ->capture_default_str();
  serve->add_option("--query-timeout", serve_timeout, "Seconds before an unanswered query aborts");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    std::cout << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    std::cout << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n\n" << app.help();
    return kExitUsage;
  }

  try {
    const RunConfig rc = run_config(g);
    ScenarioSpec spec = bin_sorting_spec(rc.scenario);

    if (*demo_gen) {
      std::vector<Demonstration> demos;
      if (!demo_skill.empty()) {
        const SkillSpec& sk = spec.skill(demo_skill);
        const int n = demo_per_branch.value_or(spec.config.demos_per_branch);
        std::uint64_t stream = g.seed;
        for (const auto& b : sk.branches) {
          auto d = synth_demos(spec, sk.name, b, n, ++stream * 7919u);
          demos.insert(demos.end(), d.begin(), d.end());
        }
      } else {
        if (demo_per_branch) spec.config.demos_per_branch = *demo_per_branch;
        demos = synth_training_demos(spec, g.seed);
      }
      const fs::path out = data_path(g, demo_out, "demos.json");
      save_demos(demos, out, provenance(g, "demo-gen"));
      std::cout << "wrote " << demos.size() << " demos to " << out.string() << "\n";
      return kExitOk;
    }

    if (*train) {
      const auto demos = load_demos(data_path(g, train_demos, "demos.json"));
      ModelBundle bundle = empty_bundle(spec, rc.exec);
      bundle.skills = fit_skills(spec, demos);
      bundle.provenance = provenance(g, "train");
      int queries = 0;
      if (train_instances > 0) {
        OracleInstructor oracle(spec);
        const WorldModel world = world_model(spec);
        for (int i = 0; i < train_instances; ++i) {
          const Scene scene = sample_scene(spec, g.seed * 100000 + static_cast<std::uint64_t>(i));
          queries += run_task(bundle.network, bundle.skills, scene.task, rc.exec, oracle, world).queries();
        }
      }
      const fs::path out = data_path(g, train_out, "bundle.json");
      save_bundle(bundle, out);
      std::cout << "fitted " << bundle.skills.size() << " skills from " << demos.size() << " demos";
      if (train_instances > 0) std::cout << ", " << queries << " queries over " << train_instances << " instances";
      std::cout << "; wrote " << out.string() << "\n";
      return kExitOk;
    }

    if (*run) {
      ModelBundle bundle;
      if (run_bundle.empty()) {
        bundle = empty_bundle(spec, rc.exec);
        bundle.provenance = provenance(g, "run");
      } else {
        bundle = load_bundle(run_bundle);
        spec = bundle_spec(bundle);
        if (!g.config.empty()) bundle.exec = rc.exec;
      }
      std::vector<std::string> missing;
      for (const auto& sk : spec.skills)
        if (!bundle.skills.count(sk.name)) missing.push_back(sk.name);
      if (!missing.empty()) {
        // Skills without demos in the bundle come from synthetic demos.
        SkillLibrary synthetic = train_skills(spec, g.seed);
        for (const auto& name : missing) bundle.skills.emplace(name, synthetic.at(name));
        if (!run_bundle.empty()) {
          std::cerr << "note: " << missing.size() << " skill(s) missing from the bundle were fitted "
                       "from synthetic demos\n";
        }
      }
      ExecConfig exec = bundle.exec;
      if (run_autonomous) exec.autonomous = true;
      OracleInstructor oracle(spec);
      oracle.corrective = !run_no_corrections;
      const Scene scene = sample_scene(spec, g.seed);
      const ExecutionTrace trace =
          run_task(bundle.network, bundle.skills, scene.task, exec, oracle, world_model(spec));
      const fs::path out = data_path(g, run_out, "trace.csv");
      auto os = open_out(out);
      write_trace_csv(os, trace, meta(g, "run"));
      check_written(os, out);
      if (!run_save.empty()) save_bundle(bundle, run_save);
      std::cout << "outcome=" << to_string(trace.outcome) << " steps=" << trace.steps.size()
                << " queries=" << trace.queries() << " (edge " << trace.edge_queries << ", branch "
                << trace.branch_queries << ")\n";
      return kExitOk;
    }

    if (*branch_map) {
      const SkillModel pick = train_pick_skill(spec, map_demos, g.seed);
      const BranchMap map = eval_branch_map(spec, pick, map_grid);
      const fs::path out = data_path(g, map_out, "branch_map.csv");
      auto os = open_out(out);
      write_branch_map_csv(os, map, meta(g, "eval-branch-map"));
      check_written(os, out);
      std::cout << "logistic_accuracy=" << map.logistic_accuracy
                << " gaussian_accuracy=" << map.gaussian_accuracy << " rows=" << map.points.size()
                << "\n";
      return kExitOk;
    }

    if (*curve) {
      CurveOptions opt;
      opt.instances = curve_instances;
      opt.window = curve_window;
      opt.seed = g.seed;
      opt.exec = rc.exec;
      const LearningCurve lc = eval_learning_curve(spec, opt);
      const fs::path out = data_path(g, curve_out, "curve.csv");
      auto os = open_out(out);
      write_curve_csv(os, lc, meta(g, "eval-curve"));
      check_written(os, out);
      const int late = std::min(5, curve_instances);
      std::cout << "late_queries=" << lc.late_queries(late) << " late_success=" << lc.late_success(late)
                << " confidence_trend=" << lc.confidence_trend << "\n";
      return kExitOk;
    }

    if (*baselines) {
      BaselineOptions opt;
      opt.train_instances = base_train;
      opt.test_scenes = base_test;
      opt.seed = g.seed;
      opt.exec = rc.exec;
      const auto rows = compare_baselines(spec, opt);
      const fs::path out = data_path(g, base_out, "baselines.csv");
      auto os = open_out(out);
      write_baselines_csv(os, rows, meta(g, "eval-baselines"));
      check_written(os, out);
      for (const auto& r : rows)
        std::cout << to_string(r.variant) << " task_success=" << r.task_success
                  << " shifted_task_success=" << r.shifted_task_success
                  << " decision_accuracy=" << r.decision_accuracy
                  << " shifted_decision_accuracy=" << r.shifted_decision_accuracy << "\n";
      return kExitOk;
    }

    if (*serve) {
      ServiceOptions opt;
      opt.data_dir = g.data_dir;
      opt.query_timeout_s = serve_timeout;
      opt.skill_seed = g.seed;
      SessionManager manager(opt);
      HttpService http(manager);
      const int port = http.bind(serve_host, serve_port);
      if (port < 0) throw std::runtime_error("cannot bind " + serve_host + ":" + std::to_string(serve_port));
      std::cout << "listening on http://" << serve_host << ":" << port << "/v1" << std::endl;
      return http.serve() ? kExitOk : kExitRuntime;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitUsage;
}
