#include "distix/service.hpp"

#include <algorithm>
#include <charconv>
#include <random>
#include <sstream>

#include "distix/flow_estimate.hpp"
#include "distix/image_io.hpp"
#include "httplib.h"
#include "json.hpp"

namespace distix::service {

using nlohmann::json;

namespace {

ApiResponse json_response(int status, const json& body) { return {status, "application/json", body.dump()}; }

ApiResponse error_response(int status, const std::string& message) {
  return json_response(status, json{{"error", message}});
}

std::span<const std::uint8_t> as_bytes(const std::string& s) {
  return {reinterpret_cast<const std::uint8_t*>(s.data()), s.size()};
}

std::vector<std::string> split_path(const std::string& path) {
  std::vector<std::string> parts;
  std::string current;
  for (char c : path) {
    if (c == '/') {
      if (!current.empty()) parts.push_back(std::move(current));
      current.clear();
    } else {
      current.push_back(c);
    }
  }
  if (!current.empty()) parts.push_back(std::move(current));
  return parts;
}

bool valid_asset_name(const std::string& name) {
  if (name.empty() || name.size() > 64) return false;
  return std::all_of(name.begin(), name.end(), [](char c) {
    return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '_' || c == '-' ||
           c == '.';
  });
}

std::optional<double> parse_number(const std::string& text) {
  double v = 0.0;
  const char* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, v);
  if (ec != std::errc() || ptr != end || !std::isfinite(v)) return std::nullopt;
  return v;
}

std::optional<int> parse_int(const std::string& text) {
  int v = 0;
  const char* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, v);
  if (ec != std::errc() || ptr != end) return std::nullopt;
  return v;
}

int status_for(const Error& e) {
  switch (e.kind()) {
    case ErrorKind::DimensionMismatch: return 409;
    case ErrorKind::Format: return 415;
    default: return 400;
  }
}

Session::Clock::rep now_ticks() { return Session::Clock::now().time_since_epoch().count(); }

struct Snapshot {
  std::shared_ptr<const Frame> i0, i1;
  std::shared_ptr<const FlowField> v01, v10;
  std::shared_ptr<const retime::RetimeScript> script;
  std::optional<Size> canvas;
};

}  // namespace

Session::Session(std::string id) : id_(std::move(id)), last_used_(Clock::now().time_since_epoch().count()) {
  script_ = std::make_shared<const retime::RetimeScript>();
}

Api::Api(ServiceOptions options) : options_(std::move(options)) {
  std::random_device rd;
  id_salt_ = (static_cast<std::uint64_t>(rd()) << 32) ^ rd();
}

std::size_t Api::session_count() const {
  std::lock_guard lock(sessions_mutex_);
  return sessions_.size();
}

std::size_t Api::expire_idle() {
  const auto ttl = std::chrono::duration_cast<Session::Clock::duration>(options_.idle_ttl).count();
  const auto now = now_ticks();
  std::lock_guard lock(sessions_mutex_);
  return std::erase_if(sessions_, [&](const auto& kv) { return now - kv.second->last_used_.load() > ttl; });
}

std::shared_ptr<Session> Api::find(const std::string& id) {
  const auto ttl = std::chrono::duration_cast<Session::Clock::duration>(options_.idle_ttl).count();
  std::lock_guard lock(sessions_mutex_);
  auto it = sessions_.find(id);
  if (it == sessions_.end()) return nullptr;
  const auto now = now_ticks();
  if (now - it->second->last_used_.load() > ttl) {
    sessions_.erase(it);
    return nullptr;
  }
  it->second->last_used_.store(now);
  return it->second;
}

ApiResponse Api::handle(const ApiRequest& req) {
  const std::vector<std::string> parts = split_path(req.path);
  if (parts.empty() || parts[0] != "sessions") return error_response(404, "no such endpoint");
  if (req.method == "OPTIONS") return {204, "text/plain", ""};

  if (parts.size() == 1) {
    if (req.method == "POST") return create_session();
    return error_response(405, "method not allowed");
  }
  if (parts.size() == 2 && req.method == "DELETE") return delete_session(parts[1]);

  std::shared_ptr<Session> session = find(parts[1]);
  if (!session) return error_response(404, "unknown session");
  Session& s = *session;

  try {
    if (parts.size() == 2) {
      if (req.method == "GET") return session_status(s);
    } else if (parts.size() == 4 && parts[2] == "assets") {
      if (req.method == "PUT") return put_asset(s, parts[3], req.body);
    } else if (parts.size() == 3 && parts[2] == "script") {
      if (req.method == "PUT") return put_script(s, req.body);
      if (req.method == "GET") {
        std::shared_lock lock(s.mutex_);
        return json_response(200, json::parse(retime::validation_report(*s.script_)));
      }
    } else if (parts.size() == 3 && parts[2] == "preview") {
      if (req.method == "GET") return preview(s, req.query);
    } else if (parts.size() == 3 && parts[2] == "render") {
      if (req.method == "POST") return render(s, req.body);
    } else if (parts.size() == 4 && parts[2] == "frames") {
      if (req.method == "GET") return get_frame(s, parts[3]);
    } else {
      return error_response(404, "no such endpoint");
    }
  } catch (const Error& e) {
    return error_response(status_for(e), e.what());
  }
  return error_response(405, "method not allowed");
}

ApiResponse Api::create_session() {
  expire_idle();
  std::lock_guard lock(sessions_mutex_);
  if (sessions_.size() >= options_.session_cap) return error_response(503, "session capacity reached");
  std::mt19937_64 rng(id_salt_ ^ (0x9e3779b97f4a7c15ULL * ++id_counter_));
  std::string id;
  do {
    std::ostringstream out;
    out << std::hex;
    out.width(16);
    out.fill('0');
    out << rng();
    out.width(16);
    out << rng();
    id = out.str();
  } while (sessions_.count(id) != 0);
  sessions_.emplace(id, std::make_shared<Session>(id));
  return json_response(201, json{{"id", id}});
}

ApiResponse Api::delete_session(const std::string& id) {
  std::lock_guard lock(sessions_mutex_);
  if (sessions_.erase(id) == 0) return error_response(404, "unknown session");
  return {204, "text/plain", ""};
}

ApiResponse Api::session_status(Session& s) {
  std::shared_lock lock(s.mutex_);
  json j;
  j["id"] = s.id();
  j["frames"] = json::array();
  for (const auto& [name, f] : s.frames_) j["frames"].push_back(name);
  j["flows"] = json::array();
  for (const auto& [name, f] : s.flows_) j["flows"].push_back(name);
  j["masks"] = json::array();
  for (const auto& [name, f] : s.masks_) j["masks"].push_back(name);
  if (s.canvas_) j["canvas"] = {{"height", s.canvas_->height}, {"width", s.canvas_->width}};
  j["complete"] = s.frames_.count("i0") && s.frames_.count("i1") &&
                  ((s.flows_.count("v01") && s.flows_.count("v10")) || options_.auto_flow);
  j["rendered"] = s.rendered_.size();
  return json_response(200, j);
}

ApiResponse Api::put_asset(Session& s, const std::string& name, const std::string& body) {
  if (!valid_asset_name(name)) return error_response(400, "invalid asset name");
  const auto bytes = as_bytes(body);
  const bool image = looks_like_png(bytes) || looks_like_pnm(bytes);
  const bool flo = looks_like_flo(bytes);
  const bool frame_slot = name == "i0" || name == "i1";
  const bool flow_slot = name == "v01" || name == "v10";

  std::shared_ptr<const Frame> frame;
  std::shared_ptr<const FlowField> flow;
  std::shared_ptr<const MaskImage> mask;
  Size size;
  try {
    if (flow_slot) {
      if (!flo) return error_response(415, "flow assets must be .flo data");
      flow = std::make_shared<const FlowField>(decode_flo(bytes));
      size = flow->size();
    } else {
      if (!image) return error_response(415, frame_slot ? "frames must be PNG or PNM" : "masks must be PNG or PNM");
      Frame decoded = decode_image(bytes);
      size = decoded.size();
      if (frame_slot) {
        frame = std::make_shared<const Frame>(std::move(decoded));
      } else {
        mask = std::make_shared<const MaskImage>(retime::binarize_mask(decoded));
      }
    }
  } catch (const Error& e) {
    return error_response(415, e.what());
  }

  std::unique_lock lock(s.mutex_);
  // Canvas from every other asset; replacing the only asset may resize.
  std::optional<Size> canvas;
  auto consider = [&](const auto& map) {
    for (const auto& [n, a] : map) {
      if (n != name && !canvas) canvas = a->size();
    }
  };
  consider(s.frames_);
  consider(s.flows_);
  consider(s.masks_);
  if (canvas && *canvas != size) {
    return error_response(409, "asset '" + name + "' is " + to_string(size) + " but the session canvas is " +
                                   to_string(*canvas));
  }
  s.frames_.erase(name);
  s.flows_.erase(name);
  s.masks_.erase(name);
  std::string kind;
  if (frame) {
    s.frames_[name] = frame;
    kind = "frame";
  } else if (flow) {
    s.flows_[name] = flow;
    kind = "flow";
  } else {
    s.masks_[name] = mask;
    kind = "mask";
  }
  s.canvas_ = size;
  return json_response(200, json{{"name", name}, {"kind", kind}, {"height", size.height}, {"width", size.width}});
}

ApiResponse Api::put_script(Session& s, const std::string& body) {
  std::map<std::string, std::shared_ptr<const MaskImage>> masks;
  {
    std::shared_lock lock(s.mutex_);
    masks = s.masks_;
  }
  auto resolve = [&](const std::string& name) -> std::optional<MaskImage> {
    auto it = masks.find(name);
    if (it == masks.end()) return std::nullopt;
    return *it->second;
  };
  std::shared_ptr<const retime::RetimeScript> script;
  try {
    script = std::make_shared<const retime::RetimeScript>(retime::parse_script(body, resolve));
  } catch (const Error& e) {
    switch (e.kind()) {
      case ErrorKind::Format: return error_response(400, e.what());
      case ErrorKind::Io: return error_response(404, e.what());
      default: return error_response(422, e.what());
    }
  }
  const std::string report = retime::validation_report(*script);
  std::unique_lock lock(s.mutex_);
  s.script_ = std::move(script);
  return {200, "application/json", report};
}

namespace {

// Copies the pointers needed for a render. Flows are estimated when allowed
// and missing; they are then stored so later calls reuse them.
std::optional<std::string> take_snapshot(std::shared_mutex& mutex,
                                         std::map<std::string, std::shared_ptr<const Frame>>& frames,
                                         std::map<std::string, std::shared_ptr<const FlowField>>& flows,
                                         const std::shared_ptr<const retime::RetimeScript>& script,
                                         const std::optional<Size>& canvas, bool auto_flow, Snapshot& out) {
  std::vector<std::string> missing;
  {
    std::shared_lock lock(mutex);
    auto get_frame = [&](const char* n) { return frames.count(n) ? frames.at(n) : nullptr; };
    auto get_flow = [&](const char* n) { return flows.count(n) ? flows.at(n) : nullptr; };
    out = {get_frame("i0"), get_frame("i1"), get_flow("v01"), get_flow("v10"), script, canvas};
  }
  if (auto_flow && out.i0 && out.i1 && (!out.v01 || !out.v10)) {
    if (!out.v01) out.v01 = std::make_shared<const FlowField>(block_match(*out.i0, *out.i1));
    if (!out.v10) out.v10 = std::make_shared<const FlowField>(block_match(*out.i1, *out.i0));
    std::unique_lock lock(mutex);
    if (!flows.count("v01")) flows["v01"] = out.v01;
    if (!flows.count("v10")) flows["v10"] = out.v10;
  }
  if (!out.i0) missing.push_back("i0");
  if (!out.i1) missing.push_back("i1");
  if (!out.v01) missing.push_back("v01");
  if (!out.v10) missing.push_back("v10");
  if (missing.empty()) return std::nullopt;
  std::string msg = "session incomplete, missing:";
  for (const auto& m : missing) msg += " " + m;
  return msg;
}

}  // namespace

ApiResponse Api::preview(Session& s, const std::map<std::string, std::string>& query) {
  auto t_it = query.find("t");
  if (t_it == query.end()) return error_response(400, "query parameter t is required");
  const std::optional<double> t = parse_number(t_it->second);
  if (!t || *t < 0.0 || *t > 1.0) return error_response(400, "t must be a number in [0, 1]");
  int iters = 1;
  if (auto it = query.find("iters"); it != query.end()) {
    const std::optional<int> n = parse_int(it->second);
    if (!n || *n < 1 || *n > options_.max_iters) {
      return error_response(400, "iters must be an integer in [1, " + std::to_string(options_.max_iters) + "]");
    }
    iters = *n;
  }

  Snapshot snap;
  std::shared_ptr<const retime::RetimeScript> script;
  std::optional<Size> canvas;
  {
    std::shared_lock lock(s.mutex_);
    script = s.script_;
    canvas = s.canvas_;
  }
  if (auto missing = take_snapshot(s.mutex_, s.frames_, s.flows_, script, canvas, options_.auto_flow, snap)) {
    return error_response(409, *missing);
  }
  if (snap.i0->height() > options_.max_side || snap.i0->width() > options_.max_side) {
    return error_response(413, "canvas exceeds " + std::to_string(options_.max_side) + " px per side");
  }
  const Frame out = retime::render_at(*snap.i0, *snap.i1, *snap.v01, *snap.v10, *snap.script, *t, iters,
                                      options_.config);
  const Bytes png = encode_png(out);
  return {200, "image/png", std::string(png.begin(), png.end())};
}

ApiResponse Api::render(Session& s, const std::string& body) {
  json j;
  try {
    j = json::parse(body);
  } catch (const json::exception&) {
    return error_response(400, "render body must be JSON");
  }
  if (!j.is_object() || !j.contains("timesteps") || !j["timesteps"].is_array()) {
    return error_response(400, "render body needs a timesteps array");
  }
  std::vector<double> timesteps;
  for (const json& v : j["timesteps"]) {
    if (!v.is_number()) return error_response(400, "timesteps must be numbers");
    const double t = v.get<double>();
    if (!(t >= 0.0 && t <= 1.0)) return error_response(400, "timesteps must lie in [0, 1]");
    timesteps.push_back(t);
  }
  if (timesteps.empty()) return error_response(400, "timesteps is empty");
  if (timesteps.size() > options_.max_timesteps) return error_response(400, "too many timesteps");
  int iters = 1;
  if (j.contains("iters")) {
    if (!j["iters"].is_number_integer()) return error_response(400, "iters must be an integer");
    iters = j["iters"].get<int>();
    if (iters < 1 || iters > options_.max_iters) return error_response(400, "iters out of range");
  }

  Snapshot snap;
  std::shared_ptr<const retime::RetimeScript> script;
  std::optional<Size> canvas;
  {
    std::shared_lock lock(s.mutex_);
    script = s.script_;
    canvas = s.canvas_;
  }
  if (auto missing = take_snapshot(s.mutex_, s.frames_, s.flows_, script, canvas, options_.auto_flow, snap)) {
    return error_response(409, *missing);
  }
  if (snap.i0->height() > options_.max_side || snap.i0->width() > options_.max_side) {
    return error_response(413, "canvas exceeds " + std::to_string(options_.max_side) + " px per side");
  }

  retime::RenderJob job{*snap.i0, *snap.i1, *snap.v01, *snap.v10, *snap.script, timesteps, iters, options_.config,
                        options_.threads};
  const std::vector<Frame> frames = retime::render_retimed(job);
  std::vector<std::shared_ptr<const std::string>> encoded;
  json urls = json::array();
  for (std::size_t k = 0; k < frames.size(); ++k) {
    const Bytes png = encode_png(frames[k]);
    encoded.push_back(std::make_shared<const std::string>(png.begin(), png.end()));
    urls.push_back("/sessions/" + s.id() + "/frames/" + std::to_string(k) + ".png");
  }
  {
    std::unique_lock lock(s.mutex_);
    s.rendered_ = std::move(encoded);
  }
  return json_response(200, json{{"frames", urls}});
}

ApiResponse Api::get_frame(Session& s, const std::string& file) {
  const std::string suffix = ".png";
  if (file.size() <= suffix.size() || file.compare(file.size() - suffix.size(), suffix.size(), suffix) != 0) {
    return error_response(404, "no such frame");
  }
  const std::optional<int> k = parse_int(file.substr(0, file.size() - suffix.size()));
  std::shared_lock lock(s.mutex_);
  if (!k || *k < 0 || static_cast<std::size_t>(*k) >= s.rendered_.size()) return error_response(404, "no such frame");
  return {200, "image/png", *s.rendered_[*k]};
}

// ---------------------------------------------------------------------------

struct Server::Impl {
  httplib::Server http;
};

Server::Server(ServiceOptions options) : api_(std::move(options)), impl_(std::make_unique<Impl>()) {
  impl_->http.set_default_headers({{"Access-Control-Allow-Origin", "*"},
                                   {"Access-Control-Allow-Methods", "GET, POST, PUT, DELETE, OPTIONS"},
                                   {"Access-Control-Allow-Headers", "Content-Type"}});
  impl_->http.set_payload_max_length(256u << 20);
  auto adapt = [this](const char* method) {
    return [this, method](const httplib::Request& req, httplib::Response& res) {
      ApiRequest request{method, req.path, {}, req.body};
      for (const auto& [k, v] : req.params) request.query.emplace(k, v);
      ApiResponse response;
      try {
        response = api_.handle(request);
      } catch (const std::exception& e) {
        response = error_response(500, e.what());
      }
      res.status = response.status;
      res.set_content(response.body, response.content_type);
    };
  };
  impl_->http.Get(".*", adapt("GET"));
  impl_->http.Post(".*", adapt("POST"));
  impl_->http.Put(".*", adapt("PUT"));
  impl_->http.Delete(".*", adapt("DELETE"));
  impl_->http.Options(".*", adapt("OPTIONS"));
}

Server::~Server() { stop(); }

bool Server::listen(const std::string& host, int port) { return impl_->http.listen(host, port); }

int Server::bind_any(const std::string& host) { return impl_->http.bind_to_any_port(host); }

bool Server::serve_bound() { return impl_->http.listen_after_bind(); }

void Server::stop() {
  if (impl_) impl_->http.stop();
}

bool Server::running() const { return impl_->http.is_running(); }

}  // namespace distix::service
