#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "skillnet/exec.hpp"
#include "skillnet/network.hpp"
#include "skillnet/scenario.hpp"
#include "skillnet/tphsmm.hpp"

namespace skillnet {

using json = nlohmann::json;

inline constexpr const char* kBundleVersion = "1.0";
inline constexpr int kBundleMajor = 1;

class BundleError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Incompatible major format version.
class VersionError : public BundleError {
 public:
  using BundleError::BundleError;
};

/// Unparsable text or a field of the wrong type or shape.
class MalformedBundleError : public BundleError {
 public:
  using BundleError::BundleError;
};

class MissingFieldError : public BundleError {
 public:
  using BundleError::BundleError;
};

struct Provenance {
  std::uint64_t seed = 0;
  std::string created;  // ISO-8601 UTC
  std::string command;
  std::string config;   // config path or "default"
};

/// Everything needed to resume learning or run a task: skills, network with
/// its training sets, and the scenario the models belong to.
struct ModelBundle {
  std::string version = kBundleVersion;
  std::string scenario = "bin_sorting";
  ScenarioConfig config;
  ExecConfig exec;
  SkillLibrary skills;
  TaskNetwork network;
  Provenance provenance;
};

/// Deterministic text: the same bundle always yields the same bytes.
std::string dump_bundle(const ModelBundle& bundle);
ModelBundle parse_bundle(const std::string& text);

void save_bundle(const ModelBundle& bundle, const std::filesystem::path& path);
ModelBundle load_bundle(const std::filesystem::path& path);

/// Fresh network for the bundle's scenario: no edges, no training data.
ModelBundle empty_bundle(const ScenarioSpec& spec, const ExecConfig& exec = {});
/// Scenario roster rebuilt from the bundle's id and config.
ScenarioSpec bundle_spec(const ModelBundle& bundle);

void save_demos(const std::vector<Demonstration>& demos, const std::filesystem::path& path,
                const Provenance& provenance = {});
std::vector<Demonstration> load_demos(const std::filesystem::path& path);

/// Run configuration file: {"scenario": {...}, "exec": {...}}, every key
/// optional. Unknown keys are rejected.
struct RunConfig {
  ScenarioConfig scenario;
  ExecConfig exec;
};
RunConfig load_run_config(const std::filesystem::path& path);
RunConfig parse_run_config(const json& j);
json run_config_json(const RunConfig& config);

std::string utc_timestamp();

// Codecs shared with the session service.
namespace codec {

json to_json(const Pose& p);
json to_json(const WorldState& s);
json to_json(const Eigen::VectorXd& v);
json to_json(const TrainingSet& t);
json to_json(const LogisticSelector& s);
json to_json(const SkillModel& m);
json to_json(const TaskNetwork& n);
json to_json(const Demonstration& d);
json to_json(const ScenarioConfig& c);
json to_json(const ExecConfig& c);
json to_json(const Provenance& p);

Pose pose_from(const json& j, const std::string& path);
WorldState state_from(const json& j, const std::string& path);
Eigen::VectorXd vector_from(const json& j, const std::string& path);
TrainingSet training_from(const json& j, const std::string& path);
LogisticSelector selector_from(const json& j, const std::string& path);
SkillModel skill_from(const json& j, const std::string& path);
TaskNetwork network_from(const json& j, const std::string& path);
Demonstration demo_from(const json& j, const std::string& path);
ScenarioConfig scenario_config_from(const json& j, const std::string& path);
ExecConfig exec_config_from(const json& j, const std::string& path);
Provenance provenance_from(const json& j, const std::string& path);

}  // namespace codec
}  // namespace skillnet
