#include "skillnet/service.hpp"

#include <algorithm>
#include <random>
#include <set>
#include <sstream>

#include <httplib.h>

namespace skillnet {

const char* to_string(SessionStatus s) {
  switch (s) {
    case SessionStatus::Idle: return "idle";
    case SessionStatus::Running: return "running";
    case SessionStatus::AwaitingInstruction: return "awaiting_instruction";
    case SessionStatus::Done: return "done";
  }
  return "unknown";
}

json ServiceError::to_json() const {
  return {{"version", kWireVersion}, {"error", {{"code", code_}, {"message", what()}}}};
}

json Event::to_json() const { return {{"type", type}, {"session", session}, {"payload", payload}}; }

namespace {

ServiceError bad_request(const std::string& msg) { return {"bad_request", 400, msg}; }
ServiceError protocol_error(const std::string& msg) { return {"protocol_error", 409, msg}; }

const char* kind_name(QueryKind k) { return k == QueryKind::Edge ? "edge" : "branch"; }

json options_json(const std::vector<std::string>& ids, const std::vector<double>& scores) {
  json out = json::array();
  for (std::size_t i = 0; i < ids.size(); ++i)
    out.push_back({{"id", ids[i]}, {"rho", i < scores.size() ? scores[i] : 0.0}});
  return out;
}

json position_json(const Eigen::Vector3d& p) { return json::array({p.x(), p.y(), p.z()}); }

json record_json(const StepRecord& r) {
  return {{"from", r.from},
          {"skill", r.skill},
          {"branch", r.branch},
          {"edge_confidence", r.edge_confidence},
          {"branch_confidence", r.branch_confidence},
          {"edge_query", r.edge_query},
          {"branch_query", r.branch_query},
          {"edge_correction", r.edge_correction},
          {"branch_correction", r.branch_correction},
          {"trajectory_length", r.trajectory_length},
          {"state", codec::to_json(r.state)}};
}

json trace_json(const ExecutionTrace& t) {
  json steps = json::array();
  for (const auto& r : t.steps) steps.push_back(record_json(r));
  return {{"steps", steps},
          {"outcome", to_string(t.outcome)},
          {"diagnostic", t.diagnostic},
          {"edge_queries", t.edge_queries},
          {"branch_queries", t.branch_queries},
          {"corrections", t.corrections},
          {"lowest_confidence", t.lowest_confidence()}};
}

std::optional<Destination> destination_from(const std::string& s) {
  if (s == "drop_bin") return Destination::DropBin;
  if (s == "sort") return Destination::Sort;
  return std::nullopt;
}

}  // namespace

SessionRequest parse_session_request(const json& body) {
  SessionRequest r;
  if (body.is_null()) return r;
  if (!body.is_object()) throw bad_request("request body must be a JSON object");
  for (const auto& [k, v] : body.items()) {
    if (k == "bundle") {
      if (!v.is_string()) throw bad_request("bundle: expected a string");
      r.bundle = v.get<std::string>();
    } else if (k == "seed") {
      if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<long long>() >= 0))
        throw bad_request("seed: expected a non-negative integer");
      r.seed = v.get<std::uint64_t>();
    } else if (k == "scene") {
      if (!v.is_object()) throw bad_request("scene: expected an object");
      for (const auto& [sk, sv] : v.items()) {
        if (sk == "object_xy") {
          if (!sv.is_array() || sv.size() != 2 || !sv[0].is_number() || !sv[1].is_number())
            throw bad_request("scene.object_xy: expected [x, y]");
          r.scene.object_xy = Eigen::Vector2d(sv[0].get<double>(), sv[1].get<double>());
        } else if (sk == "object_yaw") {
          if (!sv.is_number()) throw bad_request("scene.object_yaw: expected a number");
          r.scene.object_yaw = sv.get<double>();
        } else if (sk == "barcode_up") {
          if (!sv.is_boolean()) throw bad_request("scene.barcode_up: expected a boolean");
          r.scene.barcode_up = sv.get<bool>();
        } else if (sk == "destination") {
          auto d = sv.is_string() ? destination_from(sv.get<std::string>()) : std::nullopt;
          if (!d) throw bad_request("scene.destination: expected \"drop_bin\" or \"sort\"");
          r.scene.destination = d;
        } else if (sk == "corner") {
          if (!sv.is_boolean()) throw bad_request("scene.corner: expected a boolean");
          r.scene.corner = sv.get<bool>();
        } else {
          throw bad_request("scene." + sk + ": unknown key");
        }
      }
    } else {
      throw bad_request(k + ": unknown key");
    }
  }
  return r;
}

class Session {
 public:
  std::string id;
  std::uint64_t seed = 0;
  ModelBundle bundle;
  ScenarioSpec spec;
  Scene scene;
  std::unique_ptr<TaskRun> run;
  SessionStatus status = SessionStatus::Idle;
  double timeout_s = 120.0;
  std::chrono::steady_clock::time_point query_since;
  std::optional<PendingQuery> pending;  // copy with the state it was asked at
  WorldState pending_state;
  std::vector<Event> events;
  bool closed = false;
  std::mutex mutex;
  std::condition_variable cv;

  void emit(const std::string& type, json payload) {
    events.push_back({events.size() + 1, type, id, std::move(payload)});
    cv.notify_all();
  }

  json done_payload() const {
    const auto& t = run->trace();
    return {{"outcome", to_string(t.outcome)},
            {"diagnostic", t.diagnostic},
            {"steps", t.steps.size()},
            {"edge_queries", t.edge_queries},
            {"branch_queries", t.branch_queries},
            {"queries", t.queries()}};
  }

  void finish_if_done() {
    if (run->done() && status != SessionStatus::Done) {
      status = SessionStatus::Done;
      pending.reset();
      emit("done", done_payload());
    }
  }

  void check_timeout(std::chrono::steady_clock::time_point now) {
    if (status != SessionStatus::AwaitingInstruction) return;
    const double waited = std::chrono::duration<double>(now - query_since).count();
    if (waited <= timeout_s) return;
    run->abort("no instruction within " + std::to_string(timeout_s) + " s");
    finish_if_done();
  }

  json feature_summary(const PendingQuery& q) const {
    const WorldState& s = run->state();
    Eigen::VectorXd v = q.kind == QueryKind::Edge
                            ? bundle.network.edge_feature(q.node, s, run->instance().goal)
                            : bundle.skills.at(q.node).feature(s);
    json objects = json::object();
    for (const auto& o : s.objects) objects[o.id] = position_json(o.pose.position);
    return {{"dim", v.size()},
            {"feature", codec::to_json(v)},
            {"robot", position_json(s.robot.position)},
            {"gripper_closed", s.gripper_closed},
            {"objects", objects}};
  }

  json pending_json() const {
    if (!pending) return nullptr;
    return {{"kind", kind_name(pending->kind)},
            {"node", pending->node},
            {"options", options_json(pending->options, pending->scores)},
            {"feature_summary", feature_summary(*pending)}};
  }

  json edge_scores(const std::string& node, const WorldState& s) const {
    const EdgeDecision d =
        bundle.network.next_skill(node, s, run->instance().goal, bundle.exec.edge_bound);
    return options_json(d.options, d.scores);
  }

  json branch_scores(const std::string& skill, const WorldState& s) const {
    const BranchChoice c = select_branch(bundle.skills.at(skill), s, bundle.exec.branch_bound);
    return options_json(c.branches, c.scores);
  }

  json snapshot() const {
    const WorldState& s = run->state();
    const TaskNetwork& net = bundle.network;
    json nodes = json::array();
    for (const auto& n : net.nodes()) nodes.push_back(n);
    json edges = json::array();
    std::map<std::string, std::map<std::string, double>> rho;
    for (const auto& [from, to] : net.edges()) {
      if (rho.count(from)) continue;
      const EdgeDecision d = net.next_skill(from, s, run->instance().goal, bundle.exec.edge_bound);
      for (std::size_t i = 0; i < d.options.size(); ++i) rho[from][d.options[i]] = d.scores[i];
    }
    for (const auto& [from, to] : net.edges())
      edges.push_back({{"from", from}, {"to", to}, {"rho", rho[from][to]}});
    json branch = nullptr;
    const auto& skill = run->chosen_skill();
    if (skill && bundle.skills.count(*skill) && !run->done())
      branch = {{"skill", *skill}, {"options", branch_scores(*skill, s)}};
    return {{"version", kWireVersion},
            {"session", id},
            {"status", to_string(status)},
            {"seed", seed},
            {"scenario", bundle.scenario},
            {"node", run->node()},
            {"scene",
             {{"state", codec::to_json(s)},
              {"goal", codec::to_json(run->instance().goal)},
              {"goal_objects", run->instance().goal_objects}}},
            {"graph", {{"nodes", nodes}, {"edges", edges}}},
            {"branch", branch},
            {"pending", pending_json()},
            {"trace", trace_json(run->trace())}};
  }
};

SessionManager::SessionManager(ServiceOptions options) : options_(std::move(options)) {
  salt_ = std::random_device{}();
}

SessionManager::~SessionManager() = default;

std::string SessionManager::fresh_id() {
  const std::uint64_t n = ++counter_;
  std::ostringstream ss;
  ss << "s" << n << "-" << std::hex << ((salt_ * 0x9E3779B97F4A7C15ULL + n) >> 40);
  return ss.str();
}

std::shared_ptr<Session> SessionManager::find(const std::string& id) const {
  std::lock_guard lock(mutex_);
  auto it = sessions_.find(id);
  if (it == sessions_.end()) throw ServiceError("unknown_session", 404, "no session '" + id + "'");
  return it->second;
}

std::string SessionManager::create(const SessionRequest& request) {
  auto session = std::make_shared<Session>();
  if (request.bundle.empty()) {
    session->spec = bin_sorting_spec();
    session->bundle = empty_bundle(session->spec);
  } else {
    std::filesystem::path path = request.bundle;
    if (path.is_relative()) path = options_.data_dir / path;
    try {
      session->bundle = load_bundle(path);
      session->spec = bundle_spec(session->bundle);
    } catch (const VersionError& e) {
      throw ServiceError("bundle_version", 422, e.what());
    } catch (const BundleError& e) {
      throw ServiceError("bad_bundle", 422, e.what());
    }
  }
  if (session->bundle.scenario != "bin_sorting")
    throw ServiceError("bad_bundle", 422,
                       "scenario '" + session->bundle.scenario + "' has no executable world model");
  if (session->bundle.skills.empty()) {
    // Skills come from synthetic demos; shared default for the stock config.
    std::lock_guard lock(mutex_);
    if (!default_skills_) default_skills_ = train_skills(bin_sorting_spec(), options_.skill_seed);
    session->bundle.skills = *default_skills_;
  }
  session->seed = request.seed;
  session->timeout_s = options_.query_timeout_s.value_or(session->bundle.exec.query_timeout_s);
  session->scene = sample_scene(session->spec, request.seed, request.scene);
  ExecConfig exec = session->bundle.exec;
  exec.autonomous = false;
  session->run = std::make_unique<TaskRun>(session->bundle.network, session->bundle.skills,
                                           session->scene.task, exec, world_model(session->spec));
  std::lock_guard lock(mutex_);
  session->id = fresh_id();
  session->emit("session_created", {{"status", "idle"},
                                    {"seed", request.seed},
                                    {"scenario", session->bundle.scenario}});
  sessions_[session->id] = session;
  return session->id;
}

json SessionManager::step(const std::string& id) {
  auto s = find(id);
  std::lock_guard lock(s->mutex);
  s->check_timeout(options_.clock());
  if (s->status == SessionStatus::Done) throw protocol_error("session is done");
  if (s->status == SessionStatus::AwaitingInstruction)
    throw protocol_error("an instruction is pending; submit it before stepping");
  s->status = SessionStatus::Running;
  const StepStatus st = s->run->step();
  json out = {{"version", kWireVersion}, {"session", id}};
  if (st == StepStatus::AwaitingInstruction) {
    s->status = SessionStatus::AwaitingInstruction;
    s->pending = *s->run->pending();
    s->pending_state = s->run->state();
    s->query_since = options_.clock();
    json payload = s->pending_json();
    s->emit("instruction_request", payload);
    out["pending"] = payload;
  } else if (st == StepStatus::Executed) {
    json record = record_json(s->run->trace().steps.back());
    s->emit("step", record);
    out["decision"] = record;
  }
  s->finish_if_done();
  if (s->status == SessionStatus::Done) out["outcome"] = s->done_payload();
  out["status"] = to_string(s->status);
  return out;
}

json SessionManager::instruct(const std::string& id, const std::string& answer) {
  auto s = find(id);
  std::lock_guard lock(s->mutex);
  s->check_timeout(options_.clock());
  if (s->status != SessionStatus::AwaitingInstruction || !s->pending)
    throw ServiceError("no_pending_query", 409, "no instruction is pending");
  const PendingQuery q = *s->pending;
  const WorldState at = s->pending_state;
  const std::size_t steps_before = s->run->trace().steps.size();
  try {
    s->run->answer(answer);
  } catch (const InvalidAnswerError& e) {
    throw ServiceError("invalid_answer", 400, e.what());
  }
  s->pending.reset();
  s->status = SessionStatus::Running;

  json refreshed;
  std::size_t training_size = 0;
  if (q.kind == QueryKind::Edge) {
    refreshed = s->edge_scores(q.node, at);
    training_size = s->bundle.network.training_sets().at(q.node).size();
  } else {
    refreshed = s->branch_scores(q.node, at);
    training_size = s->bundle.skills.at(q.node).branch_data.size();
  }
  json ack = {{"kind", kind_name(q.kind)},
              {"node", q.node},
              {"answer", answer},
              {"options", refreshed},
              {"training_set_size", training_size}};
  s->emit("instruction_applied", ack);
  json out = {{"version", kWireVersion}, {"session", id}, {"ack", true}};
  out.update(ack);
  if (s->run->trace().steps.size() > steps_before) {
    json record = record_json(s->run->trace().steps.back());
    s->emit("step", record);
    out["decision"] = record;
  }
  s->finish_if_done();
  out["status"] = to_string(s->status);
  return out;
}

json SessionManager::snapshot(const std::string& id) {
  auto s = find(id);
  std::lock_guard lock(s->mutex);
  s->check_timeout(options_.clock());
  return s->snapshot();
}

SessionStatus SessionManager::status(const std::string& id) {
  auto s = find(id);
  std::lock_guard lock(s->mutex);
  s->check_timeout(options_.clock());
  return s->status;
}

void SessionManager::close(const std::string& id) {
  std::shared_ptr<Session> s;
  {
    std::lock_guard lock(mutex_);
    auto it = sessions_.find(id);
    if (it == sessions_.end()) throw ServiceError("unknown_session", 404, "no session '" + id + "'");
    s = it->second;
    sessions_.erase(it);
  }
  std::lock_guard lock(s->mutex);
  s->closed = true;
  s->cv.notify_all();
}

std::vector<std::string> SessionManager::ids() const {
  std::lock_guard lock(mutex_);
  std::vector<std::string> out;
  for (const auto& [id, s] : sessions_) out.push_back(id);
  return out;
}

std::vector<Event> SessionManager::events(const std::string& id, std::uint64_t after,
                                          std::chrono::milliseconds wait) {
  auto s = find(id);
  std::unique_lock lock(s->mutex);
  s->check_timeout(options_.clock());
  if (wait.count() > 0)
    s->cv.wait_for(lock, wait, [&] { return s->closed || s->events.size() > after; });
  std::vector<Event> out;
  for (std::size_t i = after; i < s->events.size(); ++i) out.push_back(s->events[i]);
  return out;
}

bool SessionManager::drained(const std::string& id, std::uint64_t after) {
  auto s = find(id);
  std::lock_guard lock(s->mutex);
  return s->status == SessionStatus::Done && after >= s->events.size();
}

// ---- HTTP ----

struct HttpService::Impl {
  SessionManager& manager;
  httplib::Server server;

  explicit Impl(SessionManager& m) : manager(m) {}

  static void send(httplib::Response& res, int status, const json& body) {
    res.status = status;
    res.set_content(body.dump(), "application/json");
  }

  template <class F>
  static httplib::Server::Handler guarded(F f) {
    return [f](const httplib::Request& req, httplib::Response& res) {
      try {
        f(req, res);
      } catch (const ServiceError& e) {
        send(res, e.http_status(), e.to_json());
      } catch (const json::exception& e) {
        send(res, 400, ServiceError("bad_request", 400, e.what()).to_json());
      } catch (const ProtocolError& e) {
        send(res, 409, ServiceError("protocol_error", 409, e.what()).to_json());
      } catch (const std::exception& e) {
        send(res, 500, ServiceError("internal", 500, e.what()).to_json());
      }
    };
  }

  static json body_of(const httplib::Request& req) {
    if (req.body.empty()) return nullptr;
    try {
      return json::parse(req.body);
    } catch (const json::parse_error& e) {
      throw ServiceError("bad_request", 400, std::string("body is not valid JSON: ") + e.what());
    }
  }

  void routes() {
    server.set_default_headers({{"Access-Control-Allow-Origin", "*"},
                                {"Access-Control-Allow-Headers", "Content-Type, Last-Event-ID"},
                                {"Access-Control-Allow-Methods", "GET, POST, DELETE, OPTIONS"}});
    server.Options(R"(.*)", [](const httplib::Request&, httplib::Response& res) { res.status = 204; });

    server.Get("/v1/health", guarded([](const httplib::Request&, httplib::Response& res) {
      send(res, 200, {{"version", kWireVersion}, {"status", "ok"}});
    }));

    server.Get("/v1/sessions", guarded([this](const httplib::Request&, httplib::Response& res) {
      send(res, 200, {{"version", kWireVersion}, {"sessions", manager.ids()}});
    }));

    server.Post("/v1/sessions", guarded([this](const httplib::Request& req, httplib::Response& res) {
      const std::string id = manager.create(parse_session_request(body_of(req)));
      send(res, 201, {{"version", kWireVersion}, {"session", id}, {"status", "idle"}});
    }));

    server.Get(R"(/v1/sessions/([^/]+))",
               guarded([this](const httplib::Request& req, httplib::Response& res) {
                 send(res, 200, manager.snapshot(req.matches[1]));
               }));

    server.Delete(R"(/v1/sessions/([^/]+))",
                  guarded([this](const httplib::Request& req, httplib::Response& res) {
                    manager.close(req.matches[1]);
                    send(res, 200, {{"version", kWireVersion}, {"session", req.matches[1]}, {"closed", true}});
                  }));

    server.Post(R"(/v1/sessions/([^/]+)/step)",
                guarded([this](const httplib::Request& req, httplib::Response& res) {
                  send(res, 200, manager.step(req.matches[1]));
                }));

    server.Post(R"(/v1/sessions/([^/]+)/instruction)",
                guarded([this](const httplib::Request& req, httplib::Response& res) {
                  const json body = body_of(req);
                  if (!body.is_object() || !body.contains("answer") || !body["answer"].is_string())
                    throw ServiceError("bad_request", 400, "expected {\"answer\": \"<id>\"}");
                  send(res, 200, manager.instruct(req.matches[1], body["answer"].get<std::string>()));
                }));

    server.Get(R"(/v1/sessions/([^/]+)/events)",
               guarded([this](const httplib::Request& req, httplib::Response& res) {
                 const std::string id = req.matches[1];
                 std::uint64_t after = 0;
                 if (req.has_param("after")) after = std::stoull(req.get_param_value("after"));
                 if (req.has_header("Last-Event-ID")) after = std::stoull(req.get_header_value("Last-Event-ID"));
                 manager.status(id);  // 404 before the stream starts
                 res.set_header("Cache-Control", "no-cache");
                 res.set_chunked_content_provider(
                     "text/event-stream",
                     [this, id, after](std::size_t, httplib::DataSink& sink) mutable {
                       try {
                         auto evs = manager.events(id, after, std::chrono::milliseconds(500));
                         if (evs.empty()) {
                           if (manager.drained(id, after)) {
                             sink.done();
                             return true;
                           }
                           const std::string ping = ": keep-alive\n\n";
                           return sink.write(ping.data(), ping.size());
                         }
                         for (const auto& e : evs) {
                           const std::string chunk = "id: " + std::to_string(e.seq) + "\nevent: " + e.type +
                                                     "\ndata: " + e.to_json().dump() + "\n\n";
                           if (!sink.write(chunk.data(), chunk.size())) return false;
                           after = e.seq;
                         }
                       } catch (const ServiceError&) {
                         sink.done();  // session closed
                       }
                       return true;
                     });
               }));
  }
};

HttpService::HttpService(SessionManager& manager) : impl_(std::make_unique<Impl>(manager)) {
  impl_->routes();
}

HttpService::~HttpService() { stop(); }

bool HttpService::listen(const std::string& host, int port) { return impl_->server.listen(host, port); }

int HttpService::bind(const std::string& host, int port) {
  if (port == 0) return impl_->server.bind_to_any_port(host);
  return impl_->server.bind_to_port(host, port) ? port : -1;
}

bool HttpService::serve() { return impl_->server.listen_after_bind(); }

void HttpService::stop() {
  if (impl_) impl_->server.stop();
}

}  // namespace skillnet
