#pragma once

#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "skillnet/bundle.hpp"

namespace skillnet {

inline constexpr const char* kWireVersion = "1";

enum class SessionStatus { Idle, Running, AwaitingInstruction, Done };
const char* to_string(SessionStatus s);

/// Error with a machine-readable code and the HTTP status it maps to.
class ServiceError : public std::runtime_error {
 public:
  ServiceError(std::string code, int http_status, const std::string& message)
      : std::runtime_error(message), code_(std::move(code)), http_status_(http_status) {}
  const std::string& code() const { return code_; }
  int http_status() const { return http_status_; }
  json to_json() const;

 private:
  std::string code_;
  int http_status_;
};

struct SessionRequest {
  /// Bundle path, relative paths resolve against the data directory. Empty:
  /// a fresh bundle (no edges, default skills) for the bin-sorting scenario.
  std::string bundle;
  std::uint64_t seed = 1;
  SceneRequest scene;
};

/// Parses the body of a create request; throws ServiceError("bad_request").
SessionRequest parse_session_request(const json& body);

struct Event {
  std::uint64_t seq = 0;  // per session, starting at 1
  std::string type;
  std::string session;
  json payload;

  /// {type, session, payload}
  json to_json() const;
};

struct ServiceOptions {
  std::filesystem::path data_dir = ".";
  /// Overrides the bundle's query timeout when set.
  std::optional<double> query_timeout_s;
  /// Training seed for fresh bundles (skills are fitted from synthetic demos).
  std::uint64_t skill_seed = 1;
  std::function<std::chrono::steady_clock::time_point()> clock = [] {
    return std::chrono::steady_clock::now();
  };
};

class Session;

/// Live HIL sessions. Commands on one session are serialised; different
/// sessions run in parallel. Every session owns an isolated model copy.
class SessionManager {
 public:
  explicit SessionManager(ServiceOptions options = {});
  ~SessionManager();

  std::string create(const SessionRequest& request);
  /// Advances one outer-loop iteration. Response: {status, decision?, pending?, outcome?}.
  json step(const std::string& id);
  /// Answers the pending query. Response carries the refreshed scores.
  json instruct(const std::string& id, const std::string& answer);
  json snapshot(const std::string& id);
  void close(const std::string& id);
  std::vector<std::string> ids() const;

  /// Events with seq > after. Waits up to `wait` when none is available yet.
  std::vector<Event> events(const std::string& id, std::uint64_t after,
                            std::chrono::milliseconds wait = std::chrono::milliseconds(0));
  /// True once the session is done and `after` covers its last event.
  bool drained(const std::string& id, std::uint64_t after);

  SessionStatus status(const std::string& id);

 private:
  std::shared_ptr<Session> find(const std::string& id) const;
  std::string fresh_id();

  ServiceOptions options_;
  mutable std::mutex mutex_;
  std::map<std::string, std::shared_ptr<Session>> sessions_;
  std::uint64_t counter_ = 0;
  std::uint64_t salt_ = 0;
  std::optional<SkillLibrary> default_skills_;
};

/// JSON over HTTP with a server-sent event stream; routes under /v1.
class HttpService {
 public:
  explicit HttpService(SessionManager& manager);
  ~HttpService();

  /// Binds and serves until stop(); port 0 picks a free port.
  bool listen(const std::string& host, int port);
  /// Binds without serving; serve() then blocks. Returns the bound port or -1.
  int bind(const std::string& host, int port);
  bool serve();
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace skillnet
