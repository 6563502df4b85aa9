#include "doctest.h"
#include "support.hpp"

#include <cmath>
#include <string>

#include "distix/image_io.hpp"
#include "distix/indexing.hpp"

using namespace distix;
using distix::testing::uniform;

namespace {

double single(Vec2 v0t, Vec2 v01, bool clamp = true) {
  return distance_map_from_flows(FlowField(1, 1, v0t), FlowField(1, 1, v01), kDefaultFlowEps, clamp).at(0, 0);
}

Vec2 rotate(Vec2 v, double a) { return {v.x * std::cos(a) - v.y * std::sin(a), v.x * std::sin(a) + v.y * std::cos(a)}; }

}  // namespace

TEST_CASE("distance from a pair of flows") {
  CHECK(single({1, 0}, {2, 0}) == 0.5);
  CHECK(single({0, 3}, {2, 0}) == 0.0);
  CHECK(single({1, 1}, {2, 0}) == 0.5);
  CHECK(single({2, -1}, {2, -1}) == 1.0);
  CHECK(single({0.3, 0.2}, {0, 0}) == kStationaryDistance);
  CHECK(single({-1, 0}, {2, 0}) == 0.0);
  CHECK(single({3, 0}, {2, 0}) == 1.0);
  CHECK(single({3, 0}, {2, 0}, false) == 1.5);
  CHECK_THROWS_AS(distance_map_from_flows(FlowField(1, 2), FlowField(2, 1)), Error);
  CHECK_THROWS_AS(distance_map_from_flows(FlowField(1, 1), FlowField(1, 1), 0.0), Error);
}

TEST_CASE("distance is invariant under a common rotation") {
  std::mt19937_64 rng(17);
  for (int i = 0; i < 200; ++i) {
    const Vec2 a{uniform(rng, -5, 5), uniform(rng, -5, 5)};
    const Vec2 b{uniform(rng, -5, 5), uniform(rng, -5, 5)};
    const double ang = uniform(rng, 0, 6.28);
    CHECK(single(rotate(a, ang), rotate(b, ang)) == doctest::Approx(single(a, b)).epsilon(1e-5));
  }
}

TEST_CASE("uniform maps") {
  const DistanceMap m = uniform_map(0.3, 2, 3);
  CHECK(is_uniform(m));
  CHECK(m.at(1, 2) == 0.3);
  CHECK_THROWS_AS(uniform_map(1.2, 2, 2), Error);
  CHECK_THROWS_AS(uniform_map(-0.1, 2, 2), Error);
  DistanceMap n = m;
  n.at(0, 0) = 0.4;
  CHECK_FALSE(is_uniform(n));
  DistanceMap wide(1, 2);
  wide.at(0, 0) = -0.5;
  wide.at(0, 1) = 1.5;
  const DistanceMap c = clamp01(wide);
  CHECK(c.at(0, 0) == 0.0);
  CHECK(c.at(0, 1) == 1.0);
}

TEST_CASE("two-channel distance") {
  TwoChannelDistance q = two_channel_distance(FlowField(1, 1, {0.5, 0.25}), FlowField(1, 1, {2, 1}));
  CHECK(q.dx.at(0, 0) == 0.25);
  CHECK(q.dy.at(0, 0) == 0.25);
  // Zero y motion falls back to the scalar ratio.
  q = two_channel_distance(FlowField(1, 1, {1, 0.3}), FlowField(1, 1, {2, 0}));
  CHECK(q.dx.at(0, 0) == 0.5);
  CHECK(q.dy.at(0, 0) == doctest::Approx(single({1, 0.3}, {2, 0})));
}

TEST_CASE("PFM") {
  DistanceMap one(1, 1, 0.5);
  const Bytes b = encode_pfm(one);
  const std::string head(b.begin(), b.begin() + 3);
  CHECK(head == "Pf\n");
  CHECK(decode_pfm(b) == one);

  SUBCASE("color PFM is rejected") {
    const std::string pf = "PF\n1 1\n-1.0\n";
    Bytes c(pf.begin(), pf.end());
    c.resize(c.size() + 12);
    try {
      decode_pfm(c);
      FAIL("accepted PF");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::Format);
    }
  }
  SUBCASE("rows run bottom to top") {
    DistanceMap m(2, 1);
    m.at(0, 0) = 0.25;
    m.at(1, 0) = 0.75;
    const Bytes e = encode_pfm(m);
    CHECK(le::get_f32(e, e.size() - 8) == 0.75f);
  }
  SUBCASE("big-endian scale") {
    const std::string hdr = "Pf\n1 1\n1.0\n";
    Bytes c(hdr.begin(), hdr.end());
    for (std::uint8_t v : {0x3f, 0x00, 0x00, 0x00}) c.push_back(v);
    CHECK(decode_pfm(c).at(0, 0) == 0.5);
  }
  SUBCASE("random 5x4") {
    std::mt19937_64 rng(8);
    DistanceMap m(4, 5);
    for (double& v : m.data()) v = static_cast<float>(uniform(rng, 0, 1));
    CHECK(decode_pfm(encode_pfm(m)) == m);
  }
  SUBCASE("truncated") {
    Bytes c(b.begin(), b.end() - 1);
    CHECK_THROWS_AS(decode_pfm(c), Error);
  }
}

TEST_CASE("transport moves values along the flow") {
  DistanceMap m(1, 4, 0.0);
  m.at(0, 0) = 0.8;
  FlowField f(1, 4);
  f.at(0, 0) = {2, 0};
  const DistanceMap t = transport_map(m, f, 4.0);
  CHECK(t.at(0, 2) == doctest::Approx(0.8));
  // Pixels nobody lands on keep their value.
  CHECK(t.at(0, 0) == 0.8);
  const DistanceMap u = uniform_map(0.4, 1, 4);
  CHECK(transport_map(u, f, 4.0) == u);
}

TEST_CASE("visualization ramp") {
  DistanceMap m(1, 2);
  m.at(0, 1) = 1.0;
  const Frame v = visualize_map(m);
  CHECK(v.channels() == 3);
  CHECK(v.at(0, 0, 2) > v.at(0, 0, 1));
  CHECK(v.at(0, 1, 0) > 0.9);
}
