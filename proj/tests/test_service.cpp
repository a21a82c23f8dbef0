#include <chrono>
#include <filesystem>
#include <thread>

#include <fstream>

#include <gtest/gtest.h>

#include "skillnet/service.hpp"

#include <httplib.h>  // after Eigen: resolv.h defines _res

using namespace skillnet;
using namespace std::chrono_literals;

namespace {

struct FakeClock {
  std::chrono::steady_clock::time_point now{};
  std::function<std::chrono::steady_clock::time_point()> fn() {
    return [this] { return now; };
  }
};

std::string expect_error(const std::function<void()>& f) {
  try {
    f();
  } catch (const ServiceError& e) {
    return e.code() + "/" + std::to_string(e.http_status());
  }
  return "none";
}

/// Answers the pending query of a session the way the geometric oracle would.
std::string oracle_answer(const json& snap) {
  const ScenarioSpec spec = bin_sorting_spec();
  const WorldState s = codec::state_from(snap["scene"]["state"], "state");
  const WorldState goal = codec::state_from(snap["scene"]["goal"], "goal");
  const json& p = snap["pending"];
  if (p["kind"] == "edge") return oracle_next_skill(spec, p["node"], s, goal);
  return oracle_branch(spec, p["node"], s);
}

/// Steps and answers until done; returns the number of queries answered.
int drive(SessionManager& m, const std::string& id) {
  int answered = 0;
  for (int guard = 0; guard < 200 && m.status(id) != SessionStatus::Done; ++guard) {
    if (m.status(id) == SessionStatus::AwaitingInstruction) {
      m.instruct(id, oracle_answer(m.snapshot(id)));
      ++answered;
    } else {
      m.step(id);
    }
  }
  return answered;
}

}  // namespace

TEST(Service, SessionsHaveDistinctIdsAndIsolatedModels) {
  SessionManager m;
  SessionRequest r;
  r.seed = 3;
  const std::string a = m.create(r), b = m.create(r);
  EXPECT_NE(a, b);
  EXPECT_EQ(m.ids().size(), 2u);
  drive(m, a);
  EXPECT_EQ(m.status(a), SessionStatus::Done);
  EXPECT_FALSE(m.snapshot(a)["graph"]["edges"].empty());
  EXPECT_TRUE(m.snapshot(b)["graph"]["edges"].empty());
  EXPECT_EQ(m.snapshot(b)["status"], "idle");
}

TEST(Service, OracleSessionSucceedsAndTraceMatchesEvents) {
  SessionManager m;
  SessionRequest r;
  r.seed = 7;
  const std::string id = m.create(r);
  const int answered = drive(m, id);
  const json snap = m.snapshot(id);
  EXPECT_EQ(snap["trace"]["outcome"], "success");
  EXPECT_EQ(snap["trace"]["edge_queries"].get<int>() + snap["trace"]["branch_queries"].get<int>(), answered);
  const auto evs = m.events(id, 0);
  std::size_t steps = 0;
  for (std::size_t i = 0; i < evs.size(); ++i) {
    EXPECT_EQ(evs[i].seq, i + 1);
    EXPECT_EQ(evs[i].session, id);
    steps += evs[i].type == "step";
  }
  EXPECT_EQ(evs.front().type, "session_created");
  EXPECT_EQ(evs.back().type, "done");
  EXPECT_EQ(steps, snap["trace"]["steps"].size());
  EXPECT_TRUE(m.drained(id, evs.back().seq));
  EXPECT_FALSE(m.drained(id, evs.back().seq - 1));
}

TEST(Service, ProtocolErrorsCarryCodes) {
  SessionManager m;
  const std::string id = m.create({});
  EXPECT_EQ(expect_error([&] { m.instruct(id, "scan"); }), "no_pending_query/409");
  const json r = m.step(id);
  ASSERT_EQ(r["status"], "awaiting_instruction");
  EXPECT_EQ(r["pending"]["kind"], "edge");
  EXPECT_EQ(r["pending"]["options"].size(), 6u);
  EXPECT_EQ(expect_error([&] { m.step(id); }), "protocol_error/409");
  EXPECT_EQ(expect_error([&] { m.instruct(id, "teleport"); }), "invalid_answer/400");
  EXPECT_EQ(m.status(id), SessionStatus::AwaitingInstruction);
  EXPECT_EQ(expect_error([&] { m.snapshot("nope"); }), "unknown_session/404");
  m.close(id);
  EXPECT_EQ(expect_error([&] { m.step(id); }), "unknown_session/404");
}

TEST(Service, InstructedOptionRankedFirst) {
  SessionManager m;
  const std::string id = m.create({});
  m.step(id);
  const std::string answer = oracle_answer(m.snapshot(id));
  const json ack = m.instruct(id, answer);
  EXPECT_EQ(ack["answer"], answer);
  EXPECT_EQ(ack["training_set_size"], 1);
  ASSERT_FALSE(ack["options"].empty());
  double best = -1;
  std::string best_id;
  for (const auto& o : ack["options"]) {
    if (o["rho"].get<double>() > best) {
      best = o["rho"];
      best_id = o["id"];
    }
  }
  EXPECT_EQ(best_id, answer);
}

TEST(Service, PendingQueryTimesOut) {
  FakeClock clock;
  ServiceOptions opt;
  opt.clock = clock.fn();
  opt.query_timeout_s = 120;
  SessionManager m(opt);
  const std::string id = m.create({});
  m.step(id);
  clock.now += 119s;
  EXPECT_EQ(m.status(id), SessionStatus::AwaitingInstruction);
  clock.now += 2s;
  EXPECT_EQ(m.status(id), SessionStatus::Done);
  const json snap = m.snapshot(id);
  EXPECT_EQ(snap["trace"]["outcome"], "abort");
  EXPECT_EQ(m.events(id, 0).back().type, "done");
  EXPECT_EQ(expect_error([&] { m.instruct(id, "scan"); }), "no_pending_query/409");
}

TEST(Service, BadRequestsAndBundles) {
  EXPECT_EQ(expect_error([] { parse_session_request({{"sed", 1}}); }), "bad_request/400");
  EXPECT_EQ(expect_error([] { parse_session_request({{"scene", {{"destination", "moon"}}}}); }),
            "bad_request/400");
  const SessionRequest r = parse_session_request(
      {{"seed", 5}, {"scene", {{"object_xy", {0.1, 0.05}}, {"barcode_up", true}, {"destination", "sort"}}}});
  EXPECT_EQ(r.seed, 5u);
  ASSERT_TRUE(r.scene.object_xy.has_value());
  EXPECT_DOUBLE_EQ(r.scene.object_xy->x(), 0.1);

  const auto dir = std::filesystem::temp_directory_path() / "skillnet_service_test";
  std::filesystem::create_directories(dir);
  {
    std::ofstream(dir / "junk.json") << "{\"format_version\": \"1.0\"}";
    json j = json::parse(dump_bundle(empty_bundle(bin_sorting_spec())));
    j["format_version"] = "9.0";
    std::ofstream(dir / "future.json") << j.dump();
  }
  ServiceOptions opt;
  opt.data_dir = dir;
  SessionManager m(opt);
  SessionRequest bad;
  bad.bundle = "junk.json";
  EXPECT_EQ(expect_error([&] { m.create(bad); }), "bad_bundle/422");
  bad.bundle = "future.json";
  EXPECT_EQ(expect_error([&] { m.create(bad); }).substr(0, 14), "bundle_version");
  std::filesystem::remove_all(dir);
}

TEST(Http, EndToEndOverLoopback) {
  SessionManager m;
  HttpService http(m);
  const int port = http.bind("127.0.0.1", 0);
  ASSERT_GT(port, 0);
  std::thread server([&] { http.serve(); });
  httplib::Client cli("127.0.0.1", port);
  cli.set_read_timeout(10, 0);

  auto health = cli.Get("/v1/health");
  ASSERT_TRUE(health);
  EXPECT_EQ(health->status, 200);
  EXPECT_EQ(health->get_header_value("Access-Control-Allow-Origin"), "*");

  auto created = cli.Post("/v1/sessions", R"({"seed": 4})", "application/json");
  ASSERT_TRUE(created);
  EXPECT_EQ(created->status, 201);
  const std::string id = json::parse(created->body)["session"];
  const std::string base = "/v1/sessions/" + id;

  auto bad = cli.Post("/v1/sessions", "{oops", "application/json");
  ASSERT_TRUE(bad);
  EXPECT_EQ(bad->status, 400);
  EXPECT_EQ(json::parse(bad->body)["error"]["code"], "bad_request");

  // Drive the run over HTTP with the oracle.
  for (int guard = 0; guard < 200; ++guard) {
    const json snap = json::parse(cli.Get(base)->body);
    if (snap["status"] == "done") break;
    if (snap["status"] == "awaiting_instruction") {
      auto r = cli.Post(base + "/instruction", json{{"answer", oracle_answer(snap)}}.dump(), "application/json");
      ASSERT_EQ(r->status, 200) << r->body;
    } else {
      auto r = cli.Post(base + "/step", "", "application/json");
      ASSERT_EQ(r->status, 200) << r->body;
    }
  }
  auto again = cli.Post(base + "/step", "", "application/json");
  EXPECT_EQ(again->status, 409);
  EXPECT_EQ(json::parse(cli.Get(base)->body)["trace"]["outcome"], "success");

  // The finished session's stream replays every event and then ends.
  auto sse = cli.Get(base + "/events");
  ASSERT_TRUE(sse);
  EXPECT_EQ(sse->get_header_value("Content-Type"), "text/event-stream");
  EXPECT_NE(sse->body.find("event: session_created"), std::string::npos);
  EXPECT_NE(sse->body.find("event: done"), std::string::npos);
  const std::size_t total = m.events(id, 0).size();
  httplib::Headers resume = {{"Last-Event-ID", std::to_string(total - 1)}};
  auto tail = cli.Get(base + "/events", resume);
  ASSERT_TRUE(tail);
  EXPECT_EQ(tail->body.find("session_created"), std::string::npos);
  EXPECT_NE(tail->body.find("id: " + std::to_string(total)), std::string::npos);

  EXPECT_EQ(cli.Get("/v1/sessions/missing")->status, 404);
  EXPECT_EQ(cli.Delete(base)->status, 200);
  EXPECT_EQ(cli.Get(base)->status, 404);

  http.stop();
  server.join();
}
