#include "cli.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <sstream>

#include "CLI11.hpp"
#include "distix/flow_estimate.hpp"
#include "distix/image_io.hpp"
#include "distix/indexing.hpp"
#include "distix/interpolator.hpp"
#include "distix/iterative.hpp"
#include "distix/lab.hpp"
#include "distix/metrics.hpp"
#include "distix/retime.hpp"
#include "distix/service.hpp"
#include "distix/spline.hpp"
#include "json.hpp"

namespace distix::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct CliConfig {
  double eps = kDefaultFlowEps;
  bool clamp = true;
  int iters = 1;
  std::string mask_mode = "splat_weight";
  double sharpness = InterpConfig{}.splat_sharpness;
  int threads = 0;  // 0: DISTIX_THREADS or 1
  std::uint64_t seed = 0;
  std::string output_dir;

  InterpConfig interp() const {
    InterpConfig c;
    c.eps = eps;
    c.mask_mode = parse_mask_mode(mask_mode);
    c.splat_sharpness = sharpness;
    c.validate();
    return c;
  }

  int worker_threads() const {
    if (threads > 0) return threads;
    if (const char* env = std::getenv("DISTIX_THREADS")) {
      const int n = std::atoi(env);
      if (n > 0) return n;
    }
    return 1;
  }

  fs::path output(const std::string& path) const {
    fs::path p(path);
    if (!output_dir.empty() && p.is_relative()) p = fs::path(output_dir) / p;
    if (p.has_parent_path()) fs::create_directories(p.parent_path());
    return p;
  }
};

int exit_code_for(const Error& e) {
  switch (e.kind()) {
    case ErrorKind::Io:
    case ErrorKind::Format: return kExitIo;
    case ErrorKind::DimensionMismatch: return kExitMismatch;
    case ErrorKind::InvalidArgument:
    case ErrorKind::Domain: return kExitUsage;
    case ErrorKind::Divergence: return kExitFailure;
  }
  return kExitFailure;
}

// out.png with k -> out_003.png when several outputs share one name.
fs::path indexed_path(const fs::path& base, std::size_t k, std::size_t count) {
  if (count <= 1) return base;
  std::ostringstream name;
  name << base.stem().string() << '_' << std::setw(3) << std::setfill('0') << k << base.extension().string();
  return base.parent_path() / name.str();
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) fail(ErrorKind::Io, "cannot write " + path.string());
  f << text;
  if (!f) fail(ErrorKind::Io, "failed writing " + path.string());
}

std::string read_text(const fs::path& path) {
  const Bytes b = read_file_bytes(path);
  return std::string(b.begin(), b.end());
}

struct FramePair {
  Frame i0, i1;
  FlowField v01, v10;
};

FramePair load_pair(const std::string& i0, const std::string& i1, const std::string& v01, const std::string& v10,
                    bool block) {
  FramePair p{load_frame(i0), load_frame(i1), {}, {}};
  if (!v01.empty()) {
    p.v01 = read_flo(v01);
  } else if (block) {
    p.v01 = block_match(p.i0, p.i1);
  } else {
    fail(ErrorKind::InvalidArgument, "--v01 is required (or pass --block-match)");
  }
  if (!v10.empty()) {
    p.v10 = read_flo(v10);
  } else if (block) {
    p.v10 = block_match(p.i1, p.i0);
  } else {
    fail(ErrorKind::InvalidArgument, "--v10 is required (or pass --block-match)");
  }
  require_same_size(p.i0.size(), p.i1.size(), "frames");
  require_same_size(p.i0.size(), p.v01.size(), "v01");
  require_same_size(p.i0.size(), p.v10.size(), "v10");
  return p;
}

// --- distmap ----------------------------------------------------------------

struct DistmapArgs {
  std::string v0t, v01, output, png;
  bool two_channel = false;
  bool multi = false;
  bool outer = false;
  std::vector<std::string> frames, flows;
  double t = 0.5;
};

int cmd_distmap(const CliConfig& cfg, const DistmapArgs& a, std::ostream& out) {
  DistanceMap map;
  if (a.multi) {
    if (a.frames.size() != 4) fail(ErrorKind::InvalidArgument, "--multi needs --frames with 4 images (I-1 I0 I1 I2)");
    if (a.flows.size() != 3) fail(ErrorKind::InvalidArgument, "--multi needs --flows V0->-1 V0->1 V0->2");
    if (!(a.t >= 0.0 && a.t <= 1.0)) fail(ErrorKind::InvalidArgument, "--t must lie in [0, 1]");
    spline::MultiFrameSet set{load_frame(a.frames[0]), load_frame(a.frames[1]), load_frame(a.frames[2]),
                              load_frame(a.frames[3]), read_flo(a.flows[0]), read_flo(a.flows[1]),
                              read_flo(a.flows[2])};
    set.validate();
    const spline::SplineTrajectory traj = spline::fit_trajectory(set);
    map = a.outer ? spline::outer_distance_map(traj, a.t, cfg.eps)
                  : spline::dense_distance_map(traj, a.t, set.v0_to_1, cfg.eps);
    if (a.outer && cfg.clamp) map = clamp01(std::move(map));
    if (traj.flagged_count() > 0) out << "warning: " << traj.flagged_count() << " pixels used the linear fallback\n";
  } else {
    if (a.v0t.empty() || a.v01.empty()) fail(ErrorKind::InvalidArgument, "--v0t and --v01 are required");
    const FlowField v0t = read_flo(a.v0t);
    const FlowField v01 = read_flo(a.v01);
    map = distance_map_from_flows(v0t, v01, cfg.eps, cfg.clamp);
    if (a.two_channel) {
      const TwoChannelDistance two = two_channel_distance(v0t, v01, cfg.eps);
      const fs::path base = cfg.output(a.output);
      write_pfm(two.dx, base.parent_path() / (base.stem().string() + "_dx.pfm"));
      write_pfm(two.dy, base.parent_path() / (base.stem().string() + "_dy.pfm"));
    }
  }
  write_pfm(map, cfg.output(a.output));
  if (!a.png.empty()) save_frame(visualize_map(map), cfg.output(a.png));
  return kExitOk;
}

// --- interp -------------------------------------------------------------------

struct InterpArgs {
  std::string i0, i1, v01, v10, map, output;
  std::vector<double> t;
  bool debug_schedule = false;
  bool block_match = false;
};

int cmd_interp(const CliConfig& cfg, const InterpArgs& a, std::ostream& out) {
  if (cfg.iters < 1) fail(ErrorKind::InvalidArgument, "--iters must be at least 1");
  if (a.t.empty() == a.map.empty()) fail(ErrorKind::InvalidArgument, "give exactly one of --t or --map");
  if (a.debug_schedule) {
    json dump = json::array();
    for (double t : a.t) {
      json steps = json::array();
      if (t > 0.0) {
        for (const IterStep& s : make_schedule(t, cfg.iters).steps) steps.push_back({s.d_target, s.d_ref});
      }
      dump.push_back({{"t", t}, {"iters", cfg.iters}, {"schedule", steps}});
    }
    out << dump.dump() << '\n';
  }
  if (a.output.empty()) {
    if (a.debug_schedule) return kExitOk;
    fail(ErrorKind::InvalidArgument, "-o/--output is required");
  }
  const FramePair p = load_pair(a.i0, a.i1, a.v01, a.v10, a.block_match);
  const InterpConfig config = cfg.interp();
  const fs::path base = cfg.output(a.output);
  if (!a.map.empty()) {
    const DistanceMap d = read_pfm(a.map);
    require_same_size(p.i0.size(), d.size(), "distance map");
    save_frame(iterative_interpolate(p.i0, p.i1, p.v01, p.v10, d, cfg.iters, config), base);
    return kExitOk;
  }
  for (std::size_t k = 0; k < a.t.size(); ++k) {
    const double t = a.t[k];
    const Frame f = cfg.iters == 1 ? interpolate(p.i0, p.i1, p.v01, p.v10, uniform_map(t, p.i0.height(), p.i0.width()), config)
                                   : iterative_interpolate(p.i0, p.i1, p.v01, p.v10, t, cfg.iters, config);
    save_frame(f, indexed_path(base, k, a.t.size()));
  }
  return kExitOk;
}

// --- retime -------------------------------------------------------------------

struct RetimeArgs {
  std::string script, i0, i1, v01, v10, output = "retime";
  std::vector<double> t;
  int steps = 0;
  bool block_match = false;
  bool write_maps = false;
  double feather = -1.0;
};

int cmd_retime(const CliConfig& cfg, const RetimeArgs& a, std::ostream& out) {
  if (cfg.iters < 1) fail(ErrorKind::InvalidArgument, "--iters must be at least 1");
  const fs::path script_dir = fs::path(a.script).parent_path();
  const std::string text = read_text(a.script);
  auto resolve = [&](const std::string& name) -> std::optional<MaskImage> {
    fs::path p(name);
    if (p.is_relative()) p = script_dir / p;
    if (!fs::exists(p)) return std::nullopt;
    return retime::binarize_mask(load_frame(p));
  };
  retime::RetimeScript script;
  try {
    script = retime::parse_script(text, resolve);
  } catch (const Error& e) {
    // A missing mask file is an I/O failure, not a usage error.
    if (e.kind() == ErrorKind::Format) fail(ErrorKind::Format, a.script + ": " + e.what());
    throw;
  }
  if (a.feather >= 0.0) script.feather = a.feather;

  std::vector<double> timesteps = a.t;
  if (timesteps.empty()) {
    const int n = a.steps > 0 ? a.steps : 9;
    for (int k = 0; k < n; ++k) timesteps.push_back(n == 1 ? 0.0 : static_cast<double>(k) / (n - 1));
  }
  const FramePair p = load_pair(a.i0, a.i1, a.v01, a.v10, a.block_match);
  retime::RenderJob job{p.i0, p.i1, p.v01, p.v10, script, timesteps, cfg.iters, cfg.interp(), cfg.worker_threads()};
  const std::vector<Frame> frames = retime::render_retimed(job);
  const fs::path dir = cfg.output(a.output + "/x").parent_path();
  json manifest = json::array();
  for (std::size_t k = 0; k < frames.size(); ++k) {
    std::ostringstream name;
    name << "frame_" << std::setw(3) << std::setfill('0') << k;
    save_frame(frames[k], dir / (name.str() + ".png"));
    if (a.write_maps) {
      write_pfm(retime::compose_maps(script, timesteps[k], p.i0.height(), p.i0.width()), dir / (name.str() + ".pfm"));
    }
    manifest.push_back({{"t", timesteps[k]}, {"frame", name.str() + ".png"}});
  }
  write_text(dir / "frames.json", manifest.dump(2) + "\n");
  out << "wrote " << frames.size() << " frames to " << dir.string() << '\n';
  return kExitOk;
}

// --- lab ----------------------------------------------------------------------

struct LabArgs {
  int profiles = 2;
  std::vector<double> timesteps{0.25, 0.5, 0.75};
  std::string output;
  std::string indexing = "distance";
  int epochs = lab::TrainOptions{}.epochs;
  double lr = lab::TrainOptions{}.lr;
  double momentum = lab::TrainOptions{}.momentum;
};

std::vector<lab::TripletSample> lab_dataset(const CliConfig& cfg, const LabArgs& a) {
  return lab::make_dataset(lab::default_scene(), a.profiles, a.timesteps, cfg.seed, cfg.worker_threads());
}

lab::TrainOptions lab_options(const LabArgs& a) { return {a.epochs, a.lr, a.momentum}; }

std::string curve_csv(const std::vector<double>& curve) {
  std::ostringstream s;
  s.precision(12);
  s << "epoch,loss\n";
  for (std::size_t e = 0; e < curve.size(); ++e) s << e << ',' << curve[e] << '\n';
  return s.str();
}

int cmd_lab_gen(const CliConfig& cfg, const LabArgs& a, std::ostream& out) {
  if (a.output.empty()) fail(ErrorKind::InvalidArgument, "--out is required");
  const auto data = lab_dataset(cfg, a);
  const fs::path dir = cfg.output(a.output + "/x").parent_path();
  save_frame(data.front().i0, dir / "i0.png");
  save_frame(data.front().i1, dir / "i1.png");
  write_flo(data.front().v01, dir / "v01.flo");
  json manifest;
  manifest["seed"] = cfg.seed;
  manifest["profiles"] = a.profiles;
  manifest["samples"] = json::array();
  for (std::size_t k = 0; k < data.size(); ++k) {
    std::ostringstream name;
    name << "sample_" << std::setw(3) << std::setfill('0') << k;
    save_frame(data[k].it, dir / (name.str() + ".png"));
    write_pfm(data[k].d_true, dir / (name.str() + "_d.pfm"));
    write_flo(data[k].v0t, dir / (name.str() + "_v0t.flo"));
    manifest["samples"].push_back({{"name", name.str()},
                                   {"t", data[k].t},
                                   {"profile", lab::to_string(data[k].profile.kind)},
                                   {"amount", data[k].profile.amount}});
  }
  write_text(dir / "manifest.json", manifest.dump(2) + "\n");
  out << "wrote " << data.size() << " samples to " << dir.string() << '\n';
  return kExitOk;
}

int cmd_lab_train(const CliConfig& cfg, const LabArgs& a, std::ostream& out) {
  const auto data = lab_dataset(cfg, a);
  const lab::Indexing indexing = lab::parse_indexing(a.indexing);
  lab::TinyModel model = lab::make_model(cfg.seed);
  const std::vector<double> curve = lab::train(model, lab::build_batch(data, indexing), lab_options(a));
  if (!a.output.empty()) write_text(cfg.output(a.output), curve_csv(curve));
  json summary{{"indexing", a.indexing}, {"epochs", a.epochs}, {"samples", data.size()}};
  summary["final_loss"] = curve.empty() ? json(nullptr) : json(curve.back());
  out << summary.dump() << '\n';
  return kExitOk;
}

int cmd_lab_report(const CliConfig& cfg, const LabArgs& a, std::ostream& out) {
  const auto data = lab_dataset(cfg, a);
  lab::TinyModel mt = lab::make_model(cfg.seed);
  lab::TinyModel md = lab::make_model(cfg.seed);
  const auto ct = lab::train(mt, lab::build_batch(data, lab::Indexing::Time), lab_options(a));
  const auto cd = lab::train(md, lab::build_batch(data, lab::Indexing::Distance), lab_options(a));
  const lab::ModeAverageReport report = lab::mode_average_report(data, mt, md);
  if (!a.output.empty()) write_text(cfg.output(a.output), report.to_csv());
  json summary{{"conflicting_pixels", report.conflicting_pixels},
               {"time_mean_deviation", report.time_mean_deviation},
               {"distance_mean_error", report.distance_mean_error},
               {"time_averages", report.time_averages()},
               {"distance_resolves", report.distance_resolves()}};
  if (!ct.empty()) summary["time_final_loss"] = ct.back();
  if (!cd.empty()) summary["distance_final_loss"] = cd.back();
  out << summary.dump() << '\n';
  return kExitOk;
}

// --- metrics ------------------------------------------------------------------

struct MetricsArgs {
  std::string a, b;
  bool maps = false;
};

int cmd_metrics(const MetricsArgs& a, std::ostream& out) {
  json j;
  if (a.maps) {
    j["map_loss"] = metrics::map_loss(read_pfm(a.a), read_pfm(a.b));
  } else {
    const Frame fa = load_frame(a.a);
    const Frame fb = load_frame(a.b);
    j["psnr"] = metrics::psnr(fa, fb);
    try {
      j["ssim"] = metrics::ssim(fa, fb);
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::InvalidArgument) throw;
      j["ssim"] = nullptr;
      j["ssim_note"] = e.what();
    }
    j["lpips"] = "n/a (out of scope)";
    j["niqe"] = "n/a (out of scope)";
  }
  out << j.dump() << '\n';
  return kExitOk;
}

// --- serve / flow ---------------------------------------------------------------

struct ServeArgs {
  std::string host = "127.0.0.1";
  int port = 8080;
  std::size_t session_cap = 64;
  int ttl = 30 * 60;
  bool auto_flow = false;
};

int cmd_serve(const CliConfig& cfg, const ServeArgs& a, std::ostream& out, std::ostream& err) {
  service::ServiceOptions options;
  options.session_cap = a.session_cap;
  options.idle_ttl = std::chrono::seconds(a.ttl);
  options.auto_flow = a.auto_flow;
  options.threads = cfg.worker_threads();
  options.config = cfg.interp();
  service::Server server(options);
  out << "distix serve listening on " << a.host << ':' << a.port << std::endl;
  if (!server.listen(a.host, a.port)) {
    err << "cannot bind " << a.host << ':' << a.port << '\n';
    return kExitIo;
  }
  return kExitOk;
}

struct FlowArgs {
  std::string from, to, output;
  int radius = BlockMatchOptions{}.radius;
  int block = BlockMatchOptions{}.block;
  bool no_subpixel = false;
};

int cmd_flow(const CliConfig& cfg, const FlowArgs& a) {
  const Frame from = load_frame(a.from);
  const Frame to = load_frame(a.to);
  write_flo(block_match(from, to, {a.radius, a.block, !a.no_subpixel}), cfg.output(a.output));
  return kExitOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CliConfig cfg;
  CLI::App app{"distix: distance-indexed frame interpolation"};
  app.name("distix");
  app.fallthrough();
  app.require_subcommand(1);
  app.add_option("--eps", cfg.eps, "flow magnitude below which motion counts as zero")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  app.add_flag("--clamp,!--no-clamp", cfg.clamp, "clamp distance ratios to [0, 1] (default on)");
  app.add_option("--iters", cfg.iters, "reference-based iterations (1 = direct)")
      ->check(CLI::Range(1, 64))
      ->capture_default_str();
  app.add_option("--mask-mode", cfg.mask_mode, "occlusion mask: splat_weight | photometric | fixed")
      ->check(CLI::IsMember({"splat_weight", "photometric", "fixed"}))
      ->capture_default_str();
  app.add_option("--sharpness", cfg.sharpness, "splat priority of moving over static content (0 = plain)")
      ->check(CLI::NonNegativeNumber)
      ->capture_default_str();
  app.add_option("--threads", cfg.threads, "worker threads for batch renders (env DISTIX_THREADS)")
      ->check(CLI::NonNegativeNumber);
  app.add_option("--seed", cfg.seed, "seed for every randomized step")->capture_default_str();
  app.add_option("-O,--output-dir", cfg.output_dir, "directory prefixed to relative output paths");

  std::function<int()> action;

  DistmapArgs dm;
  auto* distmap = app.add_subcommand("distmap", "distance map from flows (or from four frames with --multi)");
  distmap->add_option("--v0t", dm.v0t, "flow I0 -> It (.flo)");
  distmap->add_option("--v01", dm.v01, "flow I0 -> I1 (.flo)");
  distmap->add_option("-o,--output", dm.output, "output PFM")->required();
  distmap->add_option("--png", dm.png, "also write a color visualization");
  distmap->add_flag("--two-channel", dm.two_channel, "also write per-axis ratios as <out>_dx.pfm / <out>_dy.pfm");
  distmap->add_flag("--multi", dm.multi, "fit B-spline trajectories to four frames");
  distmap->add_option("--frames", dm.frames, "I-1 I0 I1 I2 (with --multi)")->expected(4);
  distmap->add_option("--flows", dm.flows, "V0->-1 V0->1 V0->2 (with --multi)")->expected(3);
  distmap->add_option("--t", dm.t, "time in [0, 1] (with --multi)")->capture_default_str();
  distmap->add_flag("--outer", dm.outer, "write the map over the I-1 -> I2 span instead (with --multi)");
  distmap->callback([&] { action = [&] { return cmd_distmap(cfg, dm, out); }; });

  InterpArgs ia;
  auto* interp = app.add_subcommand("interp", "interpolate a frame at t or along a distance map");
  interp->add_option("--i0", ia.i0, "first frame")->required();
  interp->add_option("--i1", ia.i1, "second frame")->required();
  interp->add_option("--v01", ia.v01, "flow I0 -> I1 (.flo)");
  interp->add_option("--v10", ia.v10, "flow I1 -> I0 (.flo)");
  interp->add_option("--t", ia.t, "one or more times in [0, 1]")->check(CLI::Range(0.0, 1.0));
  interp->add_option("--map", ia.map, "per-pixel distance map (PFM) instead of --t");
  interp->add_option("-o,--output", ia.output, "output image (.png/.ppm/.pgm); several t get _NNN suffixes");
  interp->add_flag("--debug-schedule", ia.debug_schedule, "print the iteration schedule as JSON");
  interp->add_flag("--block-match", ia.block_match, "estimate missing flows by block matching");
  interp->callback([&] { action = [&] { return cmd_interp(cfg, ia, out); }; });

  RetimeArgs ra;
  auto* retime = app.add_subcommand("retime", "render per-object re-timed frames from a script");
  retime->add_option("--script", ra.script, "script JSON (mask paths relative to it)")->required();
  retime->add_option("--i0", ra.i0, "first frame")->required();
  retime->add_option("--i1", ra.i1, "second frame")->required();
  retime->add_option("--v01", ra.v01, "flow I0 -> I1 (.flo)");
  retime->add_option("--v10", ra.v10, "flow I1 -> I0 (.flo)");
  retime->add_option("--t", ra.t, "output times in [0, 1]")->check(CLI::Range(0.0, 1.0));
  retime->add_option("--steps", ra.steps, "evenly spaced outputs over [0, 1] when --t is absent (default 9)")
      ->check(CLI::PositiveNumber);
  retime->add_option("-o,--output", ra.output, "output directory")->capture_default_str();
  retime->add_option("--feather", ra.feather, "mask border ramp in px (overrides the script)")
      ->check(CLI::NonNegativeNumber);
  retime->add_flag("--maps", ra.write_maps, "also write the composed distance maps");
  retime->add_flag("--block-match", ra.block_match, "estimate missing flows by block matching");
  retime->callback([&] { action = [&] { return cmd_retime(cfg, ra, out); }; });

  LabArgs la;
  auto* labcmd = app.add_subcommand("lab", "synthetic velocity-ambiguity experiments");
  labcmd->require_subcommand(1);
  auto add_lab_common = [&](CLI::App* sub) {
    sub->add_option("--profiles", la.profiles, "velocity profiles sharing the same endpoints")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    sub->add_option("--timesteps", la.timesteps, "sample times")->check(CLI::Range(0.0, 1.0));
  };
  auto add_train_opts = [&](CLI::App* sub) {
    sub->add_option("--epochs", la.epochs, "full-batch descent steps")->check(CLI::NonNegativeNumber)->capture_default_str();
    sub->add_option("--lr", la.lr, "learning rate")->check(CLI::PositiveNumber)->capture_default_str();
    sub->add_option("--momentum", la.momentum, "heavy-ball coefficient in [0, 1)")
        ->check(CLI::Range(0.0, 0.999999))
        ->capture_default_str();
  };
  auto* gen = labcmd->add_subcommand("gen", "write a dataset (PNG frames, PFM maps, .flo flows, manifest)");
  add_lab_common(gen);
  gen->add_option("--out", la.output, "dataset directory")->required();
  gen->callback([&] { action = [&] { return cmd_lab_gen(cfg, la, out); }; });
  auto* train = labcmd->add_subcommand("train", "train one regressor and write its loss curve (CSV)");
  add_lab_common(train);
  add_train_opts(train);
  train->add_option("--indexing", la.indexing, "time | distance")
      ->check(CLI::IsMember({"time", "distance"}))
      ->capture_default_str();
  train->add_option("-o,--out", la.output, "loss curve CSV");
  train->callback([&] { action = [&] { return cmd_lab_train(cfg, la, out); }; });
  auto* report = labcmd->add_subcommand("report", "train both indexings and report mode averaging (CSV)");
  add_lab_common(report);
  add_train_opts(report);
  report->add_option("-o,--out", la.output, "per-pixel CSV");
  report->callback([&] { action = [&] { return cmd_lab_report(cfg, la, out); }; });

  MetricsArgs ma;
  auto* metrics = app.add_subcommand("metrics", "PSNR / SSIM of two images (or map loss of two PFMs) as JSON");
  metrics->add_option("a", ma.a, "first input")->required();
  metrics->add_option("b", ma.b, "second input")->required();
  metrics->add_flag("--maps", ma.maps, "inputs are PFM distance maps; report map_loss");
  metrics->callback([&] { action = [&] { return cmd_metrics(ma, out); }; });

  ServeArgs sa;
  auto* serve = app.add_subcommand("serve", "run the HTTP session service");
  serve->add_option("--host", sa.host, "bind address")->capture_default_str();
  serve->add_option("--port", sa.port, "TCP port")->check(CLI::Range(1, 65535))->capture_default_str();
  serve->add_option("--session-cap", sa.session_cap, "maximum live sessions")->check(CLI::PositiveNumber)->capture_default_str();
  serve->add_option("--ttl", sa.ttl, "idle session lifetime in seconds")->check(CLI::PositiveNumber)->capture_default_str();
  serve->add_flag("--auto-flow", sa.auto_flow, "estimate missing flows by block matching");
  serve->callback([&] { action = [&] { return cmd_serve(cfg, sa, out, err); }; });

  FlowArgs fa;
  auto* flow = app.add_subcommand("flow", "block-matching flow between two images (.flo)");
  flow->add_option("--from", fa.from, "source frame")->required();
  flow->add_option("--to", fa.to, "target frame")->required();
  flow->add_option("-o,--output", fa.output, "output .flo")->required();
  flow->add_option("--radius", fa.radius, "search radius px")->check(CLI::NonNegativeNumber)->capture_default_str();
  flow->add_option("--block", fa.block, "SAD window half-size")->check(CLI::NonNegativeNumber)->capture_default_str();
  flow->add_flag("--no-subpixel", fa.no_subpixel, "keep integer displacements");
  flow->callback([&] { action = [&] { return cmd_flow(cfg, fa); }; });

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }
  if (!action) {
    err << app.help();
    return kExitUsage;
  }
  try {
    return action();
  } catch (const Error& e) {
    err << "distix: " << e.what() << '\n';
    return exit_code_for(e);
  } catch (const fs::filesystem_error& e) {
    err << "distix: " << e.what() << '\n';
    return kExitIo;
  } catch (const std::exception& e) {
    err << "distix: " << e.what() << '\n';
    return kExitFailure;
  }
}

}  // namespace distix::cli
