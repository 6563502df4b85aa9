#include "doctest.h"
#include "support.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>

#include "cli.hpp"
#include "distix/image_io.hpp"
#include "json.hpp"

using namespace distix;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Run {
  int code;
  std::string out, err;
};

Run invoke(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

// Fresh scratch directory per test case.
struct Scratch {
  fs::path dir;
  explicit Scratch(const std::string& name) : dir(fs::temp_directory_path() / ("distix_cli_" + name)) {
    fs::remove_all(dir);
    fs::create_directories(dir);
  }
  ~Scratch() { fs::remove_all(dir); }
  std::string operator/(const std::string& f) const { return (dir / f).string(); }
};

// Writes a small two-frame scene; returns the frame truth at t = 0.
Frame write_pair(const Scratch& s) {
  std::mt19937_64 rng(17);
  const testing::PairFixture p =
      testing::make_pair(testing::random_scene(rng, 20, 20, 2, lab::VelocityProfile::constant(), 3, 5));
  save_frame(p.i0, s / "i0.png");
  save_frame(p.i1, s / "i1.png");
  write_flo(p.v01, s / "v01.flo");
  write_flo(p.v10, s / "v10.flo");
  return load_frame(s / "i0.png");
}

}  // namespace

TEST_CASE("usage and help") {
  const Run help = invoke({"--help"});
  CHECK(help.code == cli::kExitOk);
  CHECK(help.out.find("interp") != std::string::npos);
  CHECK(invoke({}).code == cli::kExitUsage);
  CHECK(invoke({"interp", "--i0"}).code == cli::kExitUsage);
  CHECK(invoke({"frobnicate"}).code == cli::kExitUsage);
}

TEST_CASE("distmap") {
  const Scratch s("distmap");
  write_flo(FlowField(3, 4, {2.0, 1.0}), s / "v01.flo");
  write_flo(FlowField(3, 4, {1.0, 0.5}), s / "v0t.flo");
  const Run r = invoke({"distmap", "--v0t", s / "v0t.flo", "--v01", s / "v01.flo", "-o", s / "d.pfm", "--png", s / "d.png"});
  REQUIRE(r.code == cli::kExitOk);
  const DistanceMap d = read_pfm(s / "d.pfm");
  for (double v : d.data()) CHECK(v == 0.5);
  CHECK(fs::exists(s / "d.png"));

  const Run missing = invoke({"distmap", "--v0t", s / "nope.flo", "--v01", s / "v01.flo", "-o", s / "e.pfm"});
  CHECK(missing.code == cli::kExitIo);
  CHECK(missing.err.find("nope.flo") != std::string::npos);

  write_flo(FlowField(3, 5), s / "small.flo");
  CHECK(invoke({"distmap", "--v0t", s / "small.flo", "--v01", s / "v01.flo", "-o", s / "e.pfm"}).code ==
        cli::kExitMismatch);
}

TEST_CASE("interp") {
  const Scratch s("interp");
  const Frame i0 = write_pair(s);
  const std::vector<std::string> pair{"--i0", s / "i0.png", "--i1", s / "i1.png", "--v01", s / "v01.flo",
                                      "--v10", s / "v10.flo"};
  auto with = [&](std::vector<std::string> head, const std::vector<std::string>& tail) {
    head.insert(head.end(), pair.begin(), pair.end());
    head.insert(head.end(), tail.begin(), tail.end());
    return head;
  };
  REQUIRE(invoke(with({"interp"}, {"--t", "0", "-o", s / "out.png"})).code == cli::kExitOk);
  CHECK(load_frame(s / "out.png") == i0);

  REQUIRE(invoke(with({"interp"}, {"--t", "0.25", "0.75", "-o", s / "many.png"})).code == cli::kExitOk);
  CHECK(fs::exists(s / "many_000.png"));
  CHECK(fs::exists(s / "many_001.png"));

  const Run dbg = invoke(with({"--iters", "2", "interp"}, {"--t", "0.5", "--debug-schedule"}));
  REQUIRE(dbg.code == cli::kExitOk);
  const json j = json::parse(dbg.out);
  CHECK(j[0]["schedule"] == json::parse("[[0.25, 0.0], [0.5, 0.25]]"));

  CHECK(invoke(with({"interp"}, {"--t", "1.5", "-o", s / "x.png"})).code == cli::kExitUsage);
  CHECK(invoke(with({"interp"}, {"-o", s / "x.png"})).code != cli::kExitOk);

  save_frame(Frame(10, 20, 3), s / "odd.png");
  const Run mismatch = invoke({"interp", "--i0", s / "i0.png", "--i1", s / "odd.png", "--v01", s / "v01.flo", "--v10",
                            s / "v10.flo", "--t", "0.5", "-o", s / "x.png"});
  CHECK(mismatch.code == cli::kExitMismatch);
}

TEST_CASE("retime") {
  const Scratch s("retime");
  write_pair(s);
  {
    std::ofstream f(s / "identity.json");
    f << R"({"layers": []})";
  }
  const Run r = invoke({"retime", "--script", s / "identity.json", "--i0", s / "i0.png", "--i1", s / "i1.png", "--v01",
                     s / "v01.flo", "--v10", s / "v10.flo", "--t", "0.5", "-o", s / "frames"});
  REQUIRE(r.code == cli::kExitOk);
  REQUIRE(invoke({"interp", "--i0", s / "i0.png", "--i1", s / "i1.png", "--v01", s / "v01.flo", "--v10", s / "v10.flo",
               "--t", "0.5", "-o", s / "direct.png"})
              .code == cli::kExitOk);
  CHECK(read_file_bytes(s / "frames/frame_000.png") == read_file_bytes(s / "direct.png"));
  CHECK(fs::exists(s / "frames/frames.json"));

  {
    std::ofstream f(s / "bad.json");
    f << R"({"layers": [{"mask": "gone.png", "curve": {"points": [[0, 0], [1, 1]]}}]})";
  }
  const Run missing = invoke({"retime", "--script", s / "bad.json", "--i0", s / "i0.png", "--i1", s / "i1.png", "--v01",
                           s / "v01.flo", "--v10", s / "v10.flo", "-o", s / "frames"});
  CHECK(missing.code == cli::kExitIo);
  CHECK(missing.err.find("gone.png") != std::string::npos);
}

TEST_CASE("lab gen is deterministic") {
  const Scratch s("lab");
  REQUIRE(invoke({"--seed", "7", "lab", "gen", "--timesteps", "0.5", "--out", s / "a"}).code == cli::kExitOk);
  REQUIRE(invoke({"--seed", "7", "lab", "gen", "--timesteps", "0.5", "--out", s / "b"}).code == cli::kExitOk);
  const Bytes raw = read_file_bytes(s / "a/manifest.json");
  const json ma = json::parse(std::string(raw.begin(), raw.end()));
  CHECK(ma["samples"].size() == 2);
  for (const std::string f : {"manifest.json", "sample_000.png", "sample_001_d.pfm", "i1.png"}) {
    CHECK(read_file_bytes(s / ("a/" + f)) == read_file_bytes(s / ("b/" + f)));
  }
  const Run train = invoke({"lab", "train", "--timesteps", "0.5", "--epochs", "5"});
  REQUIRE(train.code == cli::kExitOk);
  CHECK(json::parse(train.out)["epochs"] == 5);
}

TEST_CASE("metrics") {
  const Scratch s("metrics");
  save_frame(testing::textured_frame(16, 16, 3), s / "x.png");
  const Run r = invoke({"metrics", s / "x.png", s / "x.png"});
  REQUIRE(r.code == cli::kExitOk);
  const json j = json::parse(r.out);
  CHECK(j["psnr"] == 99.0);
  CHECK(j["ssim"].get<double>() == doctest::Approx(1.0));
  save_frame(Frame(4, 4, 3), s / "tiny.png");
  CHECK(json::parse(invoke({"metrics", s / "tiny.png", s / "tiny.png"}).out)["ssim"].is_null());
  CHECK(invoke({"metrics", s / "x.png", s / "tiny.png"}).code == cli::kExitMismatch);
}
