#include "skillnet/bundle.hpp"

#include <chrono>
#include <ctime>
#include <fstream>
#include <sstream>

namespace skillnet {
namespace {

[[noreturn]] void malformed(const std::string& path, const std::string& what) {
  throw MalformedBundleError(path + ": " + what);
}

const json& field(const json& j, const char* key, const std::string& path) {
  if (!j.is_object()) malformed(path, "expected an object");
  auto it = j.find(key);
  if (it == j.end()) throw MissingFieldError(path + "." + key + ": missing");
  return *it;
}

double number(const json& j, const std::string& path) {
  if (!j.is_number()) malformed(path, "expected a number");
  return j.get<double>();
}

long long integer(const json& j, const std::string& path) {
  if (!j.is_number_integer()) malformed(path, "expected an integer");
  return j.get<long long>();
}

std::uint64_t unsigned_integer(const json& j, const std::string& path) {
  if (!j.is_number_unsigned() && !(j.is_number_integer() && j.get<long long>() >= 0))
    malformed(path, "expected a non-negative integer");
  return j.get<std::uint64_t>();
}

bool boolean(const json& j, const std::string& path) {
  if (!j.is_boolean()) malformed(path, "expected a boolean");
  return j.get<bool>();
}

std::string text(const json& j, const std::string& path) {
  if (!j.is_string()) malformed(path, "expected a string");
  return j.get<std::string>();
}

const json& array(const json& j, const std::string& path) {
  if (!j.is_array()) malformed(path, "expected an array");
  return j;
}

const json& object(const json& j, const std::string& path) {
  if (!j.is_object()) malformed(path, "expected an object");
  return j;
}

std::string at(const std::string& path, std::size_t i) {
  return path + "[" + std::to_string(i) + "]";
}

std::vector<std::string> strings(const json& j, const std::string& path) {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < array(j, path).size(); ++i) out.push_back(text(j[i], at(path, i)));
  return out;
}

json to_json(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

Eigen::MatrixXd matrix_from(const json& j, const std::string& path) {
  array(j, path);
  const auto rows = static_cast<Eigen::Index>(j.size());
  const auto cols = rows == 0 ? Eigen::Index(0) : static_cast<Eigen::Index>(array(j[0], at(path, 0)).size());
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    const json& row = array(j[r], at(path, r));
    if (static_cast<Eigen::Index>(row.size()) != cols) malformed(at(path, r), "ragged matrix");
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = number(row[c], at(at(path, r), c));
  }
  return m;
}

Eigen::Vector3d vector3_from(const json& j, const std::string& path) {
  Eigen::VectorXd v = codec::vector_from(j, path);
  if (v.size() != 3) malformed(path, "expected 3 entries");
  return v;
}

json to_json3(const Eigen::Vector3d& v) { return json::array({v.x(), v.y(), v.z()}); }

const char* mode_name(FeatureMode m) { return m == FeatureMode::Relative ? "relative" : "full_state"; }
FeatureMode mode_from(const json& j, const std::string& path) {
  const std::string s = text(j, path);
  if (s == "relative") return FeatureMode::Relative;
  if (s == "full_state") return FeatureMode::FullState;
  malformed(path, "unknown feature mode '" + s + "'");
}

const char* basis_name(FeatureBasis b) { return b == FeatureBasis::Linear ? "linear" : "quadratic"; }
FeatureBasis basis_from(const json& j, const std::string& path) {
  const std::string s = text(j, path);
  if (s == "linear") return FeatureBasis::Linear;
  if (s == "quadratic") return FeatureBasis::Quadratic;
  malformed(path, "unknown basis '" + s + "'");
}

const char* placement_name(PlacementMode p) {
  return p == PlacementMode::Uniform ? "uniform" : "scene_types";
}
PlacementMode placement_from(const json& j, const std::string& path) {
  const std::string s = text(j, path);
  if (s == "uniform") return PlacementMode::Uniform;
  if (s == "scene_types") return PlacementMode::SceneTypes;
  malformed(path, "unknown placement '" + s + "'");
}

json to_json(const SelectorOptions& o) {
  return {{"lambda", o.lambda},
          {"max_iterations", o.max_iterations},
          {"gradient_tolerance", o.gradient_tolerance},
          {"basis", basis_name(o.basis)}};
}

SelectorOptions selector_options_from(const json& j, const std::string& path) {
  SelectorOptions o;
  o.lambda = number(field(j, "lambda", path), path + ".lambda");
  o.max_iterations = static_cast<int>(integer(field(j, "max_iterations", path), path + ".max_iterations"));
  o.gradient_tolerance = number(field(j, "gradient_tolerance", path), path + ".gradient_tolerance");
  o.basis = basis_from(field(j, "basis", path), path + ".basis");
  return o;
}

json to_json(const BranchModel& b) {
  json comps = json::array();
  for (const auto& c : b.components) {
    json means = json::array(), covs = json::array();
    for (const auto& m : c.means) means.push_back(codec::to_json(m));
    for (const auto& s : c.covariances) covs.push_back(to_json(s));
    comps.push_back({{"prior", c.prior}, {"means", means}, {"covariances", covs}});
  }
  json durations = json::array();
  for (const auto& d : b.durations) durations.push_back({{"mean", d.mean}, {"stddev", d.stddev}});
  return {{"components", comps},
          {"transitions", to_json(b.transitions)},
          {"initial", codec::to_json(b.initial)},
          {"durations", durations}};
}

BranchModel branch_from(const json& j, const std::string& path) {
  BranchModel b;
  const std::string cp = path + ".components";
  const json& comps = array(field(j, "components", path), cp);
  for (std::size_t k = 0; k < comps.size(); ++k) {
    const std::string p = at(cp, k);
    TPGMMComponent c;
    c.prior = number(field(comps[k], "prior", p), p + ".prior");
    const json& means = array(field(comps[k], "means", p), p + ".means");
    for (std::size_t f = 0; f < means.size(); ++f)
      c.means.push_back(codec::vector_from(means[f], at(p + ".means", f)));
    const json& covs = array(field(comps[k], "covariances", p), p + ".covariances");
    for (std::size_t f = 0; f < covs.size(); ++f)
      c.covariances.push_back(matrix_from(covs[f], at(p + ".covariances", f)));
    if (c.means.size() != c.covariances.size()) malformed(p, "means/covariances count mismatch");
    b.components.push_back(std::move(c));
  }
  b.transitions = matrix_from(field(j, "transitions", path), path + ".transitions");
  b.initial = codec::vector_from(field(j, "initial", path), path + ".initial");
  const std::string dp = path + ".durations";
  const json& durations = array(field(j, "durations", path), dp);
  for (std::size_t k = 0; k < durations.size(); ++k) {
    const std::string p = at(dp, k);
    b.durations.push_back({number(field(durations[k], "mean", p), p + ".mean"),
                           number(field(durations[k], "stddev", p), p + ".stddev")});
  }
  const auto K = static_cast<Eigen::Index>(b.components.size());
  if (b.transitions.rows() != K || b.transitions.cols() != K || b.initial.size() != K ||
      static_cast<Eigen::Index>(b.durations.size()) != K)
    malformed(path, "component count mismatch");
  return b;
}

}  // namespace

namespace codec {

json to_json(const Pose& p) {
  const auto& q = p.orientation;
  return {{"position", to_json3(p.position)},
          {"orientation", json::array({q.w(), q.x(), q.y(), q.z()})}};
}

Pose pose_from(const json& j, const std::string& path) {
  Pose p;
  p.position = vector3_from(field(j, "position", path), path + ".position");
  Eigen::VectorXd q = vector_from(field(j, "orientation", path), path + ".orientation");
  if (q.size() != 4) malformed(path + ".orientation", "expected 4 entries (w, x, y, z)");
  // Stored verbatim; canonicalising here would break byte-identical re-saves.
  p.orientation = Eigen::Quaterniond(q[0], q[1], q[2], q[3]);
  return p;
}

json to_json(const WorldState& s) {
  json objects = json::array();
  for (const auto& o : s.objects) objects.push_back({{"id", o.id}, {"pose", to_json(o.pose)}});
  return {{"robot", to_json(s.robot)}, {"gripper_closed", s.gripper_closed}, {"objects", objects}};
}

WorldState state_from(const json& j, const std::string& path) {
  WorldState s;
  s.robot = pose_from(field(j, "robot", path), path + ".robot");
  s.gripper_closed = boolean(field(j, "gripper_closed", path), path + ".gripper_closed");
  const std::string op = path + ".objects";
  const json& objects = array(field(j, "objects", path), op);
  for (std::size_t i = 0; i < objects.size(); ++i) {
    const std::string p = at(op, i);
    s.objects.push_back({text(field(objects[i], "id", p), p + ".id"),
                         pose_from(field(objects[i], "pose", p), p + ".pose")});
  }
  return s;
}

json to_json(const Eigen::VectorXd& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

Eigen::VectorXd vector_from(const json& j, const std::string& path) {
  array(j, path);
  Eigen::VectorXd v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) v[static_cast<Eigen::Index>(i)] = number(j[i], at(path, i));
  return v;
}

json to_json(const TrainingSet& t) {
  json features = json::array();
  for (const auto& f : t.features) features.push_back(to_json(f));
  return {{"features", features}, {"labels", t.labels}};
}

TrainingSet training_from(const json& j, const std::string& path) {
  TrainingSet t;
  const std::string fp = path + ".features";
  const json& features = array(field(j, "features", path), fp);
  for (std::size_t i = 0; i < features.size(); ++i) t.features.push_back(vector_from(features[i], at(fp, i)));
  t.labels = strings(field(j, "labels", path), path + ".labels");
  if (t.labels.size() != t.features.size()) malformed(path, "features/labels count mismatch");
  for (std::size_t i = 1; i < t.features.size(); ++i)
    if (t.features[i].size() != t.features[0].size()) malformed(at(fp, i), "dimension mismatch");
  return t;
}

json to_json(const LogisticSelector& s) {
  json weights = json::array();
  for (const auto& w : s.weights()) weights.push_back(to_json(w));
  return {{"classes", s.classes()},
          {"weights", weights},
          {"standardizer",
           {{"mean", to_json(s.standardizer().mean)}, {"scale", to_json(s.standardizer().scale)}}},
          {"options", ::skillnet::to_json(s.options())},
          {"input_dim", s.input_dim()}};
}

LogisticSelector selector_from(const json& j, const std::string& path) {
  auto classes = strings(field(j, "classes", path), path + ".classes");
  std::vector<Eigen::VectorXd> weights;
  const std::string wp = path + ".weights";
  const json& w = array(field(j, "weights", path), wp);
  for (std::size_t i = 0; i < w.size(); ++i) weights.push_back(vector_from(w[i], at(wp, i)));
  if (!weights.empty() && weights.size() != classes.size())
    malformed(wp, "one weight vector per class expected");
  const std::string sp = path + ".standardizer";
  const json& sj = field(j, "standardizer", path);
  Standardizer st;
  st.mean = vector_from(field(sj, "mean", sp), sp + ".mean");
  st.scale = vector_from(field(sj, "scale", sp), sp + ".scale");
  if (st.mean.size() != st.scale.size()) malformed(sp, "mean/scale size mismatch");
  auto options = selector_options_from(field(j, "options", path), path + ".options");
  const auto dim = static_cast<Eigen::Index>(integer(field(j, "input_dim", path), path + ".input_dim"));
  return LogisticSelector::from_parts(std::move(classes), std::move(weights), std::move(st),
                                      options, dim);
}

json to_json(const SkillModel& m) {
  json branches = json::object();
  for (const auto& [id, b] : m.branches) branches[id] = ::skillnet::to_json(b);
  return {{"name", m.name},
          {"frames", m.frames.entities},
          {"objects", m.objects},
          {"feature_mode", mode_name(m.feature_mode)},
          {"branches", branches},
          {"branch_selector", to_json(m.branch_selector)},
          {"branch_data", to_json(m.branch_data)}};
}

SkillModel skill_from(const json& j, const std::string& path) {
  SkillModel m;
  m.name = text(field(j, "name", path), path + ".name");
  m.frames.entities = strings(field(j, "frames", path), path + ".frames");
  m.objects = strings(field(j, "objects", path), path + ".objects");
  m.feature_mode = mode_from(field(j, "feature_mode", path), path + ".feature_mode");
  const std::string bp = path + ".branches";
  for (const auto& [id, b] : object(field(j, "branches", path), bp).items())
    m.branches[id] = branch_from(b, bp + "." + id);
  m.branch_selector = selector_from(field(j, "branch_selector", path), path + ".branch_selector");
  m.branch_data = training_from(field(j, "branch_data", path), path + ".branch_data");
  return m;
}

json to_json(const TaskNetwork& n) {
  json skills = json::object();
  for (const auto& [name, ctx] : n.skills())
    skills[name] = {{"objects", ctx.objects}, {"frames", ctx.frames.entities}};
  json edges = json::array();
  for (const auto& [a, b] : n.edges()) edges.push_back(json::array({a, b}));
  json archives = json::array();
  for (const auto& [edge, states] : n.archives()) {
    json list = json::array();
    for (const auto& s : states) list.push_back({{"current", to_json(s.current)}, {"goal", to_json(s.goal)}});
    archives.push_back({{"from", edge.first}, {"to", edge.second}, {"states", list}});
  }
  json training = json::object();
  for (const auto& [node, t] : n.training_sets()) training[node] = to_json(t);
  json selectors = json::object();
  for (const auto& [node, s] : n.selectors()) selectors[node] = to_json(s);
  return {{"feature_mode", mode_name(n.feature_mode())},
          {"selector_options", ::skillnet::to_json(n.selector_options())},
          {"skills", skills},
          {"edges", edges},
          {"archives", archives},
          {"training_sets", training},
          {"selectors", selectors}};
}

TaskNetwork network_from(const json& j, const std::string& path) {
  const FeatureMode mode = mode_from(field(j, "feature_mode", path), path + ".feature_mode");
  const SelectorOptions options =
      selector_options_from(field(j, "selector_options", path), path + ".selector_options");
  std::map<std::string, SkillContext> skills;
  const std::string kp = path + ".skills";
  for (const auto& [name, ctx] : object(field(j, "skills", path), kp).items()) {
    const std::string p = kp + "." + name;
    skills[name] = {strings(field(ctx, "objects", p), p + ".objects"),
                    FrameSpec{strings(field(ctx, "frames", p), p + ".frames")}};
  }
  std::set<Edge> edges;
  const std::string ep = path + ".edges";
  const json& ej = array(field(j, "edges", path), ep);
  for (std::size_t i = 0; i < ej.size(); ++i) {
    auto pair = strings(ej[i], at(ep, i));
    if (pair.size() != 2) malformed(at(ep, i), "expected [from, to]");
    edges.insert({pair[0], pair[1]});
  }
  std::map<Edge, std::vector<AugmentedState>> archives;
  const std::string ap = path + ".archives";
  const json& aj = array(field(j, "archives", path), ap);
  for (std::size_t i = 0; i < aj.size(); ++i) {
    const std::string p = at(ap, i);
    Edge e{text(field(aj[i], "from", p), p + ".from"), text(field(aj[i], "to", p), p + ".to")};
    auto& list = archives[e];
    const json& states = array(field(aj[i], "states", p), p + ".states");
    for (std::size_t k = 0; k < states.size(); ++k) {
      const std::string sp = at(p + ".states", k);
      list.push_back({state_from(field(states[k], "current", sp), sp + ".current"),
                      state_from(field(states[k], "goal", sp), sp + ".goal")});
    }
  }
  std::map<std::string, TrainingSet> training;
  const std::string tp = path + ".training_sets";
  for (const auto& [node, t] : object(field(j, "training_sets", path), tp).items())
    training[node] = training_from(t, tp + "." + node);
  std::map<std::string, LogisticSelector> selectors;
  const std::string sp = path + ".selectors";
  for (const auto& [node, s] : object(field(j, "selectors", path), sp).items())
    selectors[node] = selector_from(s, sp + "." + node);
  return TaskNetwork::restore(std::move(skills), options, mode, std::move(edges), std::move(archives),
                              std::move(training), std::move(selectors));
}

json to_json(const Demonstration& d) {
  json steps = json::array();
  for (const auto& s : d.steps) steps.push_back(to_json(s));
  return {{"skill", d.skill}, {"branch", d.branch}, {"steps", steps}};
}

Demonstration demo_from(const json& j, const std::string& path) {
  Demonstration d;
  d.skill = text(field(j, "skill", path), path + ".skill");
  d.branch = text(field(j, "branch", path), path + ".branch");
  const std::string sp = path + ".steps";
  const json& steps = array(field(j, "steps", path), sp);
  for (std::size_t i = 0; i < steps.size(); ++i) d.steps.push_back(state_from(steps[i], at(sp, i)));
  return d;
}

json to_json(const ScenarioConfig& c) {
  return {{"bin_length", c.bin_length},
          {"bin_width", c.bin_width},
          {"near_wall", c.near_wall},
          {"corner", c.corner},
          {"object_height", c.object_height},
          {"grasp_tolerance", c.grasp_tolerance},
          {"release_tolerance", c.release_tolerance},
          {"shift_clearance", c.shift_clearance},
          {"max_object_yaw", c.max_object_yaw},
          {"jitter", c.jitter},
          {"pose_noise", c.pose_noise},
          {"scanner", to_json3(c.scanner)},
          {"drop_bin", to_json3(c.drop_bin)},
          {"sort_area", to_json3(c.sort_area)},
          {"home", to_json3(c.home)},
          {"workspace", to_json(c.workspace)},
          {"workspace_jitter", c.workspace_jitter},
          {"workspace_yaw_jitter", c.workspace_yaw_jitter},
          {"placement", placement_name(c.placement)},
          {"demos_per_branch", c.demos_per_branch},
          {"min_demos_per_skill", c.min_demos_per_skill},
          {"components", c.components},
          {"branch_basis", basis_name(c.branch_basis)},
          {"edge_basis", basis_name(c.edge_basis)}};
}

ScenarioConfig scenario_config_from(const json& j, const std::string& path) {
  ScenarioConfig c;
  for (const auto& [k, v] : object(j, path).items()) {
    const std::string p = path + "." + k;
    if (k == "bin_length") c.bin_length = number(v, p);
    else if (k == "bin_width") c.bin_width = number(v, p);
    else if (k == "near_wall") c.near_wall = number(v, p);
    else if (k == "corner") c.corner = number(v, p);
    else if (k == "object_height") c.object_height = number(v, p);
    else if (k == "grasp_tolerance") c.grasp_tolerance = number(v, p);
    else if (k == "release_tolerance") c.release_tolerance = number(v, p);
    else if (k == "shift_clearance") c.shift_clearance = number(v, p);
    else if (k == "max_object_yaw") c.max_object_yaw = number(v, p);
    else if (k == "jitter") c.jitter = number(v, p);
    else if (k == "pose_noise") c.pose_noise = number(v, p);
    else if (k == "scanner") c.scanner = vector3_from(v, p);
    else if (k == "drop_bin") c.drop_bin = vector3_from(v, p);
    else if (k == "sort_area") c.sort_area = vector3_from(v, p);
    else if (k == "home") c.home = vector3_from(v, p);
    else if (k == "workspace") c.workspace = pose_from(v, p);
    else if (k == "workspace_jitter") c.workspace_jitter = number(v, p);
    else if (k == "workspace_yaw_jitter") c.workspace_yaw_jitter = number(v, p);
    else if (k == "placement") c.placement = placement_from(v, p);
    else if (k == "demos_per_branch") c.demos_per_branch = static_cast<int>(integer(v, p));
    else if (k == "min_demos_per_skill") c.min_demos_per_skill = static_cast<int>(integer(v, p));
    else if (k == "components") c.components = static_cast<int>(integer(v, p));
    else if (k == "branch_basis") c.branch_basis = basis_from(v, p);
    else if (k == "edge_basis") c.edge_basis = basis_from(v, p);
    else malformed(p, "unknown key");
  }
  return c;
}

json to_json(const ExecConfig& c) {
  return {{"edge_bound", c.edge_bound},
          {"branch_bound", c.branch_bound},
          {"position_tolerance", c.position_tolerance},
          {"angle_tolerance", c.angle_tolerance},
          {"max_steps", c.max_steps},
          {"query_timeout_s", c.query_timeout_s},
          {"autonomous", c.autonomous}};
}

ExecConfig exec_config_from(const json& j, const std::string& path) {
  ExecConfig c;
  for (const auto& [k, v] : object(j, path).items()) {
    const std::string p = path + "." + k;
    if (k == "edge_bound") c.edge_bound = number(v, p);
    else if (k == "branch_bound") c.branch_bound = number(v, p);
    else if (k == "position_tolerance") c.position_tolerance = number(v, p);
    else if (k == "angle_tolerance") c.angle_tolerance = number(v, p);
    else if (k == "max_steps") c.max_steps = static_cast<int>(integer(v, p));
    else if (k == "query_timeout_s") c.query_timeout_s = number(v, p);
    else if (k == "autonomous") c.autonomous = boolean(v, p);
    else malformed(p, "unknown key");
  }
  return c;
}

json to_json(const Provenance& p) {
  return {{"seed", p.seed}, {"created", p.created}, {"command", p.command}, {"config", p.config}};
}

Provenance provenance_from(const json& j, const std::string& path) {
  Provenance p;
  p.seed = unsigned_integer(field(j, "seed", path), path + ".seed");
  p.created = text(field(j, "created", path), path + ".created");
  p.command = text(field(j, "command", path), path + ".command");
  p.config = text(field(j, "config", path), path + ".config");
  return p;
}

}  // namespace codec

namespace {

void check_version(const json& j) {
  const std::string v = text(field(j, "format_version", "$"), "$.format_version");
  int major = -1, minor = -1;
  char dot = 0;
  std::istringstream in(v);
  if (!(in >> major >> dot >> minor) || dot != '.' || !in.eof())
    malformed("$.format_version", "expected 'major.minor', got '" + v + "'");
  if (major != kBundleMajor)
    throw VersionError("format version " + v + " is incompatible with " + kBundleVersion);
}

json parse_text(const std::string& contents) {
  try {
    return json::parse(contents);
  } catch (const json::parse_error& e) {
    throw MalformedBundleError(std::string("not valid JSON: ") + e.what());
  }
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw BundleError("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::filesystem::path& path, const std::string& contents) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw BundleError("cannot write " + path.string());
  out << contents;
  if (!out) throw BundleError("write failed: " + path.string());
}

}  // namespace

std::string dump_bundle(const ModelBundle& b) {
  json skills = json::object();
  for (const auto& [name, m] : b.skills) skills[name] = codec::to_json(m);
  json j = {{"format_version", b.version},
            {"scenario", {{"id", b.scenario}, {"config", codec::to_json(b.config)}}},
            {"exec", codec::to_json(b.exec)},
            {"provenance", codec::to_json(b.provenance)},
            {"skills", skills},
            {"network", codec::to_json(b.network)}};
  return j.dump(1) + "\n";
}

ModelBundle parse_bundle(const std::string& contents) {
  const json j = parse_text(contents);
  if (!j.is_object()) malformed("$", "expected an object");
  check_version(j);
  ModelBundle b;
  b.version = j["format_version"].get<std::string>();
  const json& sc = field(j, "scenario", "$");
  b.scenario = text(field(sc, "id", "$.scenario"), "$.scenario.id");
  b.config = codec::scenario_config_from(field(sc, "config", "$.scenario"), "$.scenario.config");
  b.exec = codec::exec_config_from(field(j, "exec", "$"), "$.exec");
  b.provenance = codec::provenance_from(field(j, "provenance", "$"), "$.provenance");
  for (const auto& [name, m] : object(field(j, "skills", "$"), "$.skills").items())
    b.skills[name] = codec::skill_from(m, "$.skills." + name);
  b.network = codec::network_from(field(j, "network", "$"), "$.network");
  return b;
}

void save_bundle(const ModelBundle& bundle, const std::filesystem::path& path) {
  write_file(path, dump_bundle(bundle));
}

ModelBundle load_bundle(const std::filesystem::path& path) { return parse_bundle(read_file(path)); }

ModelBundle empty_bundle(const ScenarioSpec& spec, const ExecConfig& exec) {
  ModelBundle b;
  b.scenario = spec.id;
  b.config = spec.config;
  b.exec = exec;
  b.network = TaskNetwork(spec.contexts(), spec.config.edge_selector(), FeatureMode::Relative);
  return b;
}

ScenarioSpec bundle_spec(const ModelBundle& bundle) {
  if (bundle.scenario == "bin_sorting") return bin_sorting_spec(bundle.config);
  if (bundle.scenario == "assembly") return assembly_spec();
  throw MalformedBundleError("$.scenario.id: unknown scenario '" + bundle.scenario + "'");
}

void save_demos(const std::vector<Demonstration>& demos, const std::filesystem::path& path,
                const Provenance& provenance) {
  json list = json::array();
  for (const auto& d : demos) list.push_back(codec::to_json(d));
  json j = {{"format_version", kBundleVersion},
            {"provenance", codec::to_json(provenance)},
            {"demos", list}};
  write_file(path, j.dump(1) + "\n");
}

std::vector<Demonstration> load_demos(const std::filesystem::path& path) {
  const json j = parse_text(read_file(path));
  if (!j.is_object()) malformed("$", "expected an object");
  check_version(j);
  std::vector<Demonstration> out;
  const json& list = array(field(j, "demos", "$"), "$.demos");
  for (std::size_t i = 0; i < list.size(); ++i) out.push_back(codec::demo_from(list[i], at("$.demos", i)));
  return out;
}

RunConfig parse_run_config(const json& j) {
  RunConfig c;
  for (const auto& [k, v] : object(j, "$").items()) {
    if (k == "scenario") c.scenario = codec::scenario_config_from(v, "$.scenario");
    else if (k == "exec") c.exec = codec::exec_config_from(v, "$.exec");
    else malformed("$." + k, "unknown key");
  }
  return c;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  return parse_run_config(parse_text(read_file(path)));
}

json run_config_json(const RunConfig& config) {
  return {{"scenario", codec::to_json(config.scenario)}, {"exec", codec::to_json(config.exec)}};
}

std::string utc_timestamp() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

}  // namespace skillnet
