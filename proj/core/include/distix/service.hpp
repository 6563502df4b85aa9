#pragma once

// Session API behind the re-timing editor. `Api` holds the routing and
// session logic independent of any transport; `Server` exposes it over
// HTTP/1.1.

#include <atomic>
#include <chrono>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <vector>

#include "distix/retime.hpp"

namespace distix::service {

struct ServiceOptions {
  std::size_t session_cap = 64;
  std::chrono::seconds idle_ttl{30 * 60};
  // Previews and renders refuse canvases larger than this on either side.
  int max_side = 1024;
  int max_iters = 8;
  std::size_t max_timesteps = 1000;
  // Estimate missing flows by block matching once both frames are present.
  bool auto_flow = false;
  int threads = 1;
  InterpConfig config;
};

struct ApiRequest {
  std::string method;
  std::string path;
  std::map<std::string, std::string> query;
  std::string body;
};

struct ApiResponse {
  int status = 200;
  std::string content_type = "application/json";
  std::string body;
};

class Session {
 public:
  using Clock = std::chrono::steady_clock;

  explicit Session(std::string id);

  const std::string& id() const { return id_; }

 private:
  friend class Api;

  std::string id_;
  // Writers (asset and script uploads, render output) take it exclusively,
  // readers only long enough to copy the snapshot pointers below.
  mutable std::shared_mutex mutex_;
  std::optional<Size> canvas_;
  std::map<std::string, std::shared_ptr<const Frame>> frames_;
  std::map<std::string, std::shared_ptr<const FlowField>> flows_;
  std::map<std::string, std::shared_ptr<const MaskImage>> masks_;
  std::shared_ptr<const retime::RetimeScript> script_;
  std::vector<std::shared_ptr<const std::string>> rendered_;
  std::atomic<Clock::rep> last_used_;
};

class Api {
 public:
  explicit Api(ServiceOptions options = {});

  ApiResponse handle(const ApiRequest& request);

  std::size_t session_count() const;
  // Drops sessions idle for longer than the TTL. Returns how many.
  std::size_t expire_idle();
  const ServiceOptions& options() const { return options_; }

 private:
  std::shared_ptr<Session> find(const std::string& id);
  ApiResponse create_session();
  ApiResponse delete_session(const std::string& id);
  ApiResponse session_status(Session& s);
  ApiResponse put_asset(Session& s, const std::string& name, const std::string& body);
  ApiResponse put_script(Session& s, const std::string& body);
  ApiResponse preview(Session& s, const std::map<std::string, std::string>& query);
  ApiResponse render(Session& s, const std::string& body);
  ApiResponse get_frame(Session& s, const std::string& file);

  ServiceOptions options_;
  mutable std::mutex sessions_mutex_;
  std::map<std::string, std::shared_ptr<Session>> sessions_;
  std::uint64_t id_counter_ = 0;
  std::uint64_t id_salt_;
};

// HTTP front end. Every response carries permissive CORS headers so the
// browser editor can be served from elsewhere.
class Server {
 public:
  explicit Server(ServiceOptions options = {});
  ~Server();
  Server(const Server&) = delete;
  Server& operator=(const Server&) = delete;

  // Blocks until stop(). Returns false when the socket could not be bound.
  bool listen(const std::string& host, int port);
  // Binds an ephemeral port and returns it, without serving yet.
  int bind_any(const std::string& host);
  // Serves on a socket bound by bind_any; blocks until stop().
  bool serve_bound();
  void stop();
  bool running() const;

  Api& api() { return api_; }

 private:
  struct Impl;
  Api api_;
  std::unique_ptr<Impl> impl_;
};

}  // namespace distix::service
