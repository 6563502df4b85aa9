#include "doctest.h"
#include "support.hpp"

#include <thread>

#include "distix/image_io.hpp"
#include "distix/service.hpp"
#include "httplib.h"
#include "json.hpp"

using namespace distix;
using namespace distix::service;
using nlohmann::json;

namespace {

std::string as_string(const Bytes& b) { return {b.begin(), b.end()}; }

Frame from_png(const std::string& body) {
  return decode_image(std::span(reinterpret_cast<const std::uint8_t*>(body.data()), body.size()));
}

// A session fixture whose assets survive the PNG and .flo round trips, so
// the service and a direct call see the same inputs.
struct Assets {
  Frame i0, i1;
  FlowField v01, v10;
  explicit Assets(int h = 20, int w = 20) {
    std::mt19937_64 rng(31);
    const testing::PairFixture p =
        testing::make_pair(testing::random_scene(rng, h, w, 2, lab::VelocityProfile::constant(), 3, 5));
    i0 = from_png(as_string(encode_png(p.i0)));
    i1 = from_png(as_string(encode_png(p.i1)));
    v01 = decode_flo(encode_flo(p.v01));
    v10 = decode_flo(encode_flo(p.v10));
  }
};

struct Client {
  Api& api;
  ApiResponse send(const std::string& method, const std::string& path, const std::string& body = {},
                   std::map<std::string, std::string> query = {}) {
    return api.handle({method, path, std::move(query), body});
  }
  std::string create() {
    const ApiResponse r = send("POST", "/sessions");
    REQUIRE(r.status == 201);
    return json::parse(r.body)["id"];
  }
  void upload(const std::string& id, const Assets& a) {
    REQUIRE(send("PUT", "/sessions/" + id + "/assets/i0", as_string(encode_png(a.i0))).status == 200);
    REQUIRE(send("PUT", "/sessions/" + id + "/assets/i1", as_string(encode_png(a.i1))).status == 200);
    REQUIRE(send("PUT", "/sessions/" + id + "/assets/v01", as_string(encode_flo(a.v01))).status == 200);
    REQUIRE(send("PUT", "/sessions/" + id + "/assets/v10", as_string(encode_flo(a.v10))).status == 200);
  }
};

}  // namespace

TEST_CASE("session lifecycle and capacity") {
  Api api;
  Client c{api};
  const std::string id = c.create();
  CHECK(id.size() == 32);
  CHECK(api.session_count() == 1);
  const json status = json::parse(c.send("GET", "/sessions/" + id).body);
  CHECK(status["complete"] == false);
  for (int k = 1; k < 64; ++k) c.create();
  const ApiResponse full = c.send("POST", "/sessions");
  CHECK(full.status == 503);
  CHECK(json::parse(full.body).contains("error"));
  CHECK(c.send("DELETE", "/sessions/" + id).status == 204);
  CHECK(c.send("GET", "/sessions/" + id).status == 404);
  CHECK(c.send("POST", "/sessions").status == 201);

  // Another id of the right shape is not a key to anything.
  std::string forged = id;
  forged[0] = forged[0] == 'a' ? 'b' : 'a';
  CHECK(c.send("GET", "/sessions/" + forged + "/preview", {}, {{"t", "0.5"}}).status == 404);
  CHECK(c.send("GET", "/nothing").status == 404);
  CHECK(c.send("PUT", "/sessions").status == 405);
}

TEST_CASE("idle sessions expire") {
  ServiceOptions o;
  o.idle_ttl = std::chrono::seconds(0);
  Api api(o);
  Client c{api};
  const std::string id = c.create();
  std::this_thread::sleep_for(std::chrono::milliseconds(5));
  CHECK(c.send("GET", "/sessions/" + id).status == 404);
  CHECK(api.session_count() == 0);
}

TEST_CASE("asset uploads") {
  Api api;
  Client c{api};
  const std::string id = c.create();
  const std::string base = "/sessions/" + id + "/assets/";
  const Assets a;
  CHECK(c.send("PUT", base + "i0", as_string(encode_png(a.i0))).status == 200);
  const ApiResponse wrong = c.send("PUT", base + "i1", as_string(encode_png(Frame(10, 20, 3))));
  CHECK(wrong.status == 409);
  CHECK(json::parse(wrong.body)["error"].get<std::string>().find("canvas") != std::string::npos);
  CHECK(c.send("PUT", base + "i1", "GIF89a not an image").status == 415);
  CHECK(c.send("PUT", base + "v01", as_string(encode_png(a.i0))).status == 415);
  CHECK(c.send("PUT", base + "i1", "\x89PNG\r\n\x1a\n broken").status == 415);
  CHECK(c.send("PUT", base + "bad%20name", as_string(encode_png(a.i0))).status == 400);
  const ApiResponse mask = c.send("PUT", base + "car", as_string(encode_png(Frame(20, 20, 1, 1.0))));
  CHECK(mask.status == 200);
  CHECK(json::parse(mask.body)["kind"] == "mask");
  // Missing assets are named on preview.
  const ApiResponse incomplete = c.send("GET", "/sessions/" + id + "/preview", {}, {{"t", "0.5"}});
  CHECK(incomplete.status == 409);
  CHECK(incomplete.body.find("v10") != std::string::npos);
}

TEST_CASE("scripts") {
  Api api;
  Client c{api};
  const std::string id = c.create();
  const std::string path = "/sessions/" + id + "/script";
  CHECK(c.send("PUT", "/sessions/" + id + "/assets/car", as_string(encode_png(Frame(8, 8, 1, 1.0)))).status == 200);
  const std::string layer = R"({"layers": [{"mask": "car", "curve": {"kind": "linear", "points": )";
  const ApiResponse ok = c.send("PUT", path, layer + R"([[0, 1], [1, 0]]}}]})");
  CHECK(ok.status == 200);
  CHECK(json::parse(ok.body)["layers"][0]["kind"] == "linear");
  CHECK(json::parse(c.send("GET", path).body)["layers"].size() == 1);

  const ApiResponse bad = c.send("PUT", path, layer + R"([[0, 0], [1, 1.5]]}}]})");
  CHECK(bad.status == 422);
  CHECK(json::parse(bad.body)["error"].get<std::string>().find("point 1") != std::string::npos);
  CHECK(c.send("PUT", path, R"({"layers": [{"mask": "bus", "curve": {"points": [[0, 0], [1, 1]]}}]})").status ==
        404);
  CHECK(c.send("PUT", path, "{not json").status == 400);
  // A rejected script leaves the previous one in place.
  CHECK(json::parse(c.send("GET", path).body)["layers"][0]["mask"] == "car");
}

TEST_CASE("preview and render") {
  Api api;
  Client c{api};
  const std::string id = c.create();
  const Assets a;
  c.upload(id, a);
  const std::string s = "/sessions/" + id;
  CHECK(json::parse(c.send("GET", s).body)["complete"] == true);

  const ApiResponse p0 = c.send("GET", s + "/preview", {}, {{"t", "0"}});
  REQUIRE(p0.status == 200);
  CHECK(p0.content_type == "image/png");
  CHECK(from_png(p0.body) == a.i0);
  CHECK(c.send("GET", s + "/preview", {}, {{"t", "2"}}).status == 400);
  CHECK(c.send("GET", s + "/preview", {}, {{"t", "half"}}).status == 400);
  CHECK(c.send("GET", s + "/preview").status == 400);
  CHECK(c.send("GET", s + "/preview", {}, {{"t", "0.5"}, {"iters", "99"}}).status == 400);

  // Same inputs, same bytes.
  const ApiResponse pa = c.send("GET", s + "/preview", {}, {{"t", "0.4"}, {"iters", "2"}});
  const ApiResponse pb = c.send("GET", s + "/preview", {}, {{"t", "0.4"}, {"iters", "2"}});
  CHECK(pa.body == pb.body);

  const ApiResponse r = c.send("POST", s + "/render", R"({"timesteps": [0, 0.5, 1]})");
  REQUIRE(r.status == 200);
  const json urls = json::parse(r.body)["frames"];
  REQUIRE(urls.size() == 3);
  const Frame mid = interpolate(a.i0, a.i1, a.v01, a.v10, uniform_map(0.5, 20, 20));
  const ApiResponse f1 = c.send("GET", urls[1].get<std::string>());
  CHECK(f1.status == 200);
  CHECK(f1.body == as_string(encode_png(mid)));
  CHECK(c.send("GET", s + "/frames/3.png").status == 404);
  CHECK(c.send("GET", s + "/frames/x.png").status == 404);
  CHECK(json::parse(c.send("GET", s).body)["rendered"] == 3);

  CHECK(c.send("POST", s + "/render", R"({"timesteps": []})").status == 400);
  CHECK(c.send("POST", s + "/render", R"({"timesteps": [0.5, 1.2]})").status == 400);
  CHECK(c.send("POST", s + "/render", R"({"timesteps": ["a"]})").status == 400);
  CHECK(c.send("POST", s + "/render", R"({"timesteps": [0.5], "iters": 0})").status == 400);
  CHECK(c.send("POST", s + "/render", "timesteps").status == 400);
}

TEST_CASE("oversize canvases are refused") {
  ServiceOptions o;
  o.max_side = 16;
  Api api(o);
  Client c{api};
  const std::string id = c.create();
  c.upload(id, Assets());
  CHECK(c.send("GET", "/sessions/" + id + "/preview", {}, {{"t", "0.5"}}).status == 413);
  CHECK(c.send("POST", "/sessions/" + id + "/render", R"({"timesteps": [0.5]})").status == 413);
}

TEST_CASE("flows can be estimated when missing") {
  ServiceOptions o;
  o.auto_flow = true;
  Api api(o);
  Client c{api};
  const std::string id = c.create();
  const Assets a;
  CHECK(c.send("PUT", "/sessions/" + id + "/assets/i0", as_string(encode_png(a.i0))).status == 200);
  CHECK(c.send("PUT", "/sessions/" + id + "/assets/i1", as_string(encode_png(a.i1))).status == 200);
  CHECK(c.send("GET", "/sessions/" + id + "/preview", {}, {{"t", "0.5"}}).status == 200);
  CHECK(json::parse(c.send("GET", "/sessions/" + id).body)["flows"].size() == 2);
}

TEST_CASE("http front end") {
  Server server;
  const int port = server.bind_any("127.0.0.1");
  REQUIRE(port > 0);
  std::thread serving([&] { server.serve_bound(); });
  httplib::Client http("127.0.0.1", port);
  http.set_connection_timeout(5);

  auto created = http.Post("/sessions", "", "application/json");
  for (int tries = 0; !created && tries < 50; ++tries) {
    std::this_thread::sleep_for(std::chrono::milliseconds(20));
    created = http.Post("/sessions", "", "application/json");
  }
  REQUIRE(created);
  CHECK(created->status == 201);
  CHECK(created->get_header_value("Access-Control-Allow-Origin") == "*");
  const std::string id = json::parse(created->body)["id"];

  const Assets a;
  const std::string base = "/sessions/" + id + "/assets/";
  CHECK(http.Put(base + "i0", as_string(encode_png(a.i0)), "image/png")->status == 200);
  CHECK(http.Put(base + "i1", as_string(encode_png(a.i1)), "image/png")->status == 200);
  CHECK(http.Put(base + "v01", as_string(encode_flo(a.v01)), "application/octet-stream")->status == 200);
  CHECK(http.Put(base + "v10", as_string(encode_flo(a.v10)), "application/octet-stream")->status == 200);
  auto preview = http.Get("/sessions/" + id + "/preview?t=1");
  REQUIRE(preview);
  CHECK(preview->status == 200);
  CHECK(from_png(preview->body) == a.i1);
  auto bad = http.Get("/sessions/" + id + "/preview?t=2");
  CHECK(bad->status == 400);
  auto options = http.Options("/sessions/" + id + "/preview");
  CHECK(options->status == 204);

  server.stop();
  serving.join();
  CHECK_FALSE(server.running());
}
