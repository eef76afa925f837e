#include "commands.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <random>
#include <set>

#include <CLI11.hpp>

#include "evio/evaluation.hpp"
#include "evio/features.hpp"
#include "evio/frame_enhance.hpp"
#include "evio/motion_compensation.hpp"
#include "evio/odometry.hpp"
#include "evio/parallel.hpp"
#include "evio/simulator.hpp"

namespace fs = std::filesystem;

namespace evio::cli {

namespace {

void add_config_options(CLI::App& sub, ConfigArgs& c) {
  sub.add_option("--config", c.config, "Config file of `key = value` lines");
  sub.add_option("--set", c.sets, "Override one key, `key=value` (repeatable)");
  sub.add_option("--threads", c.threads, "Worker threads (EVIO_THREADS overrides)");
}

template <typename Fn>
auto usage_guard(Fn&& fn) {
  try {
    return fn();
  } catch (const Error& e) {
    throw UsageError(e.what());
  }
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error(Errc::Io, "cannot write " + path);
  return out;
}

double median_of(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  return v[v.size() / 2];
}

std::unique_ptr<DepthSource> make_depth_source(const std::string& spec, const Dataset& ds,
                                               const std::string& data_dir, const Camera& cam) {
  if (spec == "gt") {
    if (ds.depth_dir.empty()) {
      throw Error(Errc::Io, "missing " + (fs::path(data_dir) / "depth").string());
    }
    return std::make_unique<FileDepth>(ds.depth_dir);
  }
  if (spec.rfind("const:", 0) == 0) {
    double d = 0.0;
    try {
      std::size_t used = 0;
      d = std::stod(spec.substr(6), &used);
      if (used != spec.size() - 6) throw std::invalid_argument("trailing");
    } catch (const std::exception&) {
      throw UsageError("--depth-source const:X needs a number, got " + spec);
    }
    if (!(d > 0.0)) throw UsageError("--depth-source const:X needs X > 0");
    return std::make_unique<ConstantDepth>(d, cam.width(), cam.height());
  }
  if (spec.rfind("file:", 0) == 0) {
    const fs::path dir = spec.substr(5);
    if (!fs::is_directory(dir)) throw Error(Errc::Io, "missing " + dir.string());
    return std::make_unique<FileDepth>(dir);
  }
  throw UsageError("--depth-source must be gt, const:X or file:DIR");
}

PipelineConfig run_config(const RunArgs& a) {
  PipelineConfig cfg = a.cfg.resolve();
  OdometryConfig& o = cfg.odometry;
  usage_guard([&] {
    if (a.frame_mode) set_config_value(cfg, "compensation.frame_mode", *a.frame_mode);
    if (a.ref_time) set_config_value(cfg, "compensation.ref_time", *a.ref_time);
    if (a.warp_depth) set_config_value(cfg, "compensation.warp_depth", *a.warp_depth);
    if (a.predictor) set_config_value(cfg, "estimator.predictor", *a.predictor);
    if (a.method) set_config_value(cfg, "enhance.method", *a.method);
    return 0;
  });
  if (!a.grid.empty()) {
    if (a.grid.size() != 2 || a.grid[0] < 1 || a.grid[1] < 1) {
      throw UsageError("--grid needs two positive integers R C");
    }
    o.tracker.grid_rows = a.grid[0];
    o.tracker.grid_cols = a.grid[1];
  }
  if (a.no_align) o.alignment = false;
  if (a.no_depth_prior) o.depth.enabled = false;
  o.threads = resolve_threads(o.threads);
  return cfg;
}

struct LoadedRun {
  PipelineConfig cfg;
  Dataset ds;
  std::vector<EventPacket> packets;
  std::unique_ptr<DepthSource> depth;
};

LoadedRun load_run(const RunArgs& a) {
  LoadedRun r;
  r.cfg = run_config(a);
  r.ds = load_dataset(a.data, r.cfg.sensor);
  r.depth = make_depth_source(a.depth_source, r.ds, a.data, r.ds.camera);
  r.packets = packetize(r.ds.events, r.cfg.odometry.window, r.cfg.odometry.overlap);
  return r;
}

void print_timing(const OdometryResult& res) {
  const StageTimes& t = res.timing;
  auto rate = [](double n, double s) { return s > 0.0 ? n / s : 0.0; };
  std::printf("frames            %zu\n", res.frames.size());
  std::printf("tracking_lost     %zu\n", res.lost.size());
  std::printf("scale             %.6f\n", res.scale);
  std::printf("time_total_s      %.3f\n", t.total);
  std::printf("packets_per_s     %.1f\n", rate(static_cast<double>(t.frames), t.total));
  std::printf("warp_events_per_s %.0f\n", rate(static_cast<double>(t.events), t.compensate));
  std::printf("enhance_frames_per_s %.1f\n", rate(static_cast<double>(t.frames), t.enhance));
  std::printf("stage_s compensate %.3f accumulate %.3f enhance %.3f track %.3f estimate %.3f depth %.3f\n",
              t.compensate, t.accumulate, t.enhance, t.track, t.estimate, t.depth);
}

GrayImage frame_from_dataset(const std::string& dir, int index, const PipelineConfig& cfg) {
  const Dataset ds = load_dataset(dir, cfg.sensor);
  const auto packets = packetize(ds.events, cfg.odometry.window, cfg.odometry.overlap);
  if (index < 0 || static_cast<std::size_t>(index) >= packets.size()) {
    throw UsageError("--packet out of range (dataset has " + std::to_string(packets.size()) +
                     " packets)");
  }
  const EventPacket& p = packets[static_cast<std::size_t>(index)];
  const Camera cam = ds.camera.pinhole();
  const CompensatedPacket c = compensate_packet(p, Pose::identity(), Pose::identity(),
                                                WarpDepth(1.0), ds.camera, {}, {});
  return frame_to_gray(accumulate_frame(c.events, cam, cfg.odometry.frame_mode, p.t0));
}

}  // namespace

PipelineConfig ConfigArgs::resolve() const {
  PipelineConfig cfg;
  if (!config.empty()) {
    if (!fs::exists(config)) throw Error(Errc::Io, "missing " + config);
    cfg = load_config(config);
  }
  for (const std::string& s : sets) {
    const auto eq = s.find('=');
    if (eq == std::string::npos) throw UsageError("--set expects key=value, got " + s);
    usage_guard([&] {
      set_config_value(cfg, s.substr(0, eq), s.substr(eq + 1));
      return 0;
    });
  }
  if (threads) cfg.odometry.threads = *threads;
  return cfg;
}

void add_simulate(CLI::App& app, SimulateArgs& a) {
  CLI::App* s = app.add_subcommand("simulate", "Render a synthetic dataset");
  add_config_options(*s, a.cfg);
  s->add_option("--out", a.out, "Output dataset directory")->required();
  s->add_option("--trajectory", a.trajectory, "static|line|circle|square|yaw-spin|spline");
  s->add_option("--duration", a.duration, "Seconds");
  s->add_option("--pattern", a.pattern, "constant|checkerboard|stripes|blobs");
  s->add_option("--seed", a.seed, "Event noise seed");
}

void add_run(CLI::App& app, RunArgs& a) {
  CLI::App* s = app.add_subcommand("run", "Run the odometry front-end on a dataset");
  add_config_options(*s, a.cfg);
  s->add_option("--data", a.data, "Dataset directory")->required();
  s->add_option("--out", a.out, "Trajectory output")->capture_default_str();
  s->add_option("--depth-source", a.depth_source, "gt | const:X | file:DIR")->capture_default_str();
  s->add_option("--frame-mode", a.frame_mode, "count | signed");
  s->add_option("--ref-time", a.ref_time, "start | mid");
  s->add_option("--warp-depth", a.warp_depth, "scene | landmarks");
  s->add_option("--predictor", a.predictor, "imu | cv");
  s->add_option("--enhance.method", a.method, "sobel | laplacian | canny | clahe-only");
  s->add_option("--grid", a.grid, "Selection grid R C")->expected(2);
  s->add_flag("--no-align", a.no_align, "Disable the alignment correction");
  s->add_flag("--no-depth-prior", a.no_depth_prior, "Disable the ROI depth prior");
  s->add_flag("--quiet", a.quiet, "Only write the trajectory");
}

void add_enhance(CLI::App& app, EnhanceArgs& a) {
  CLI::App* s = app.add_subcommand("enhance", "Enhance one event frame");
  add_config_options(*s, a.cfg);
  auto* in = s->add_option("--in", a.input, "8-bit PGM input");
  auto* data = s->add_option("--data", a.data, "Dataset directory; uses --packet");
  in->excludes(data);
  s->add_option("--packet", a.packet, "Packet index with --data")->capture_default_str();
  s->add_option("--out", a.out, "8-bit PGM output")->required();
  s->add_option("--dump-stages", a.dump_stages, "Directory for every intermediate stage");
  s->add_option("--enhance.method", a.method, "sobel | laplacian | canny | clahe-only");
}

void add_track(CLI::App& app, TrackArgs& a) {
  CLI::App* s = app.add_subcommand("track", "Run the front-end and dump feature tracks as CSV");
  add_config_options(*s, a.run.cfg);
  s->add_option("--data", a.run.data, "Dataset directory")->required();
  s->add_option("--depth-source", a.run.depth_source, "gt | const:X | file:DIR")->capture_default_str();
  s->add_option("--enhance.method", a.run.method, "sobel | laplacian | canny | clahe-only");
  s->add_option("--grid", a.run.grid, "Selection grid R C")->expected(2);
  s->add_option("--csv", a.csv, "Output CSV (stdout when omitted)");
}

void add_eval(CLI::App& app, EvalArgs& a) {
  CLI::App* s = app.add_subcommand("eval", "Absolute pose error against ground truth");
  s->add_option("--est", a.est, "Estimated trajectory")->required();
  s->add_option("--gt", a.gt, "Ground-truth trajectory")->required();
  s->add_option("--align", a.align, "se3 | sim3 | none")->capture_default_str();
  s->add_option("--csv", a.csv, "Per-pose residual CSV");
  s->add_option("--max-dt", a.max_dt, "Association tolerance, s")->capture_default_str();
}

void add_bench(CLI::App& app, BenchArgs& a) {
  CLI::App* s = app.add_subcommand("bench", "Stage timings as CSV");
  add_config_options(*s, a.cfg);
  s->add_option("--data", a.data, "Dataset for the pipeline stage");
  s->add_option("--events", a.events, "Synthetic events for the warp stage")->capture_default_str();
  s->add_option("--repeat", a.repeat, "Runs per stage; the median is reported")->capture_default_str();
  s->add_option("--out", a.out, "CSV output (stdout when omitted)");
}

void add_config(CLI::App& app, ConfigCmdArgs& a) {
  CLI::App* s = app.add_subcommand("config", "Print or check configuration");
  add_config_options(*s, a.cfg);
  s->add_flag("--defaults", a.defaults, "Print every key with its default");
  s->add_option("--check", a.check, "Validate a config file");
}

int cmd_simulate(const SimulateArgs& a) {
  PipelineConfig cfg = a.cfg.resolve();
  usage_guard([&] {
    if (a.trajectory) set_config_value(cfg, "sim.trajectory", *a.trajectory);
    if (a.pattern) set_config_value(cfg, "sim.pattern", *a.pattern);
    return 0;
  });
  if (a.duration) {
    if (!(*a.duration > 0.0)) throw UsageError("--duration must be positive");
    cfg.sim.trajectory.duration = *a.duration;
  }
  if (a.seed) cfg.sim.events.seed = *a.seed;
  const SimulationResult sim = simulate(make_simulation(cfg));
  export_dataset(sim, a.out);
  std::printf("events %zu imu %zu groundtruth %zu depth_maps %zu -> %s\n", sim.events.size(),
              sim.imu.size(), sim.groundtruth.size(), sim.depth_frames.size(), a.out.c_str());
  return 0;
}

int cmd_run(const RunArgs& a) {
  LoadedRun r = load_run(a);
  const OdometryInput input{r.packets, r.ds.imu, r.ds.camera, r.depth.get(), nullptr};
  const OdometryResult res = run_odometry(input, r.cfg.odometry);
  const auto traj = res.trajectory();
  save_trajectory(a.out, traj);
  if (a.quiet) return 0;
  std::printf("trajectory        %s\n", a.out.c_str());
  print_timing(res);
  if (!r.ds.groundtruth.empty() && !traj.empty()) {
    const Association as = associate(traj, r.ds.groundtruth, kDefaultMaxDt);
    const Alignment al = align(as.pairs, AlignMode::Se3);
    const ApeStats st = ape_stats(apply_alignment(as.pairs, al));
    std::printf("ape_rmse_se3      %.6f\n", st.rmse);
  }
  return 0;
}

int cmd_enhance(const EnhanceArgs& a) {
  PipelineConfig cfg = a.cfg.resolve();
  if (a.method) {
    usage_guard([&] {
      set_config_value(cfg, "enhance.method", *a.method);
      return 0;
    });
  }
  GrayImage img;
  if (!a.input.empty()) {
    if (!fs::exists(a.input)) throw Error(Errc::Io, "missing " + a.input);
    img = from_u8(read_pgm8(a.input));
  } else if (!a.data.empty()) {
    img = frame_from_dataset(a.data, a.packet, cfg);
  } else {
    throw UsageError("enhance needs --in or --data");
  }
  const EnhanceStages st = enhance_event_frame_stages(img, cfg.odometry.enhance);
  write_pgm8(a.out, to_u8(st.output));
  if (!a.dump_stages.empty()) {
    const fs::path dir = a.dump_stages;
    fs::create_directories(dir);
    write_pgm8(dir / "0_input.pgm", to_u8(img));
    write_pgm8(dir / "1_blur.pgm", to_u8(st.blur));
    write_pgm8(dir / "2_clahe.pgm", to_u8(st.clahe));
    write_pgm8(dir / "3_sharpened.pgm", to_u8(st.enhanced));
    write_pgm8(dir / "4_edges.pgm", to_u8(st.edge));
    write_pgm8(dir / "5_output.pgm", to_u8(st.output));
  }
  return 0;
}

int cmd_track(const TrackArgs& a) {
  LoadedRun r = load_run(a.run);
  std::ofstream file;
  if (!a.csv.empty()) file = open_out(a.csv);
  std::ostream& out = a.csv.empty() ? std::cout : file;
  out << "frame_id,track_id,x,y,response,status\n";
  std::set<int> reported_lost;
  const FrameObserver observer = [&](std::size_t frame, const GrayImage&, const FeatureTracker& tr) {
    const std::vector<int>& fresh = tr.new_ids();
    for (const Track& t : tr.tracks()) {
      const char* status = nullptr;
      if (t.status == TrackStatus::Live) {
        status = std::find(fresh.begin(), fresh.end(), t.id) != fresh.end() ? "new" : "live";
      } else if (reported_lost.insert(t.id).second) {
        status = "lost";
      } else {
        continue;
      }
      const Vec2& p = t.positions.back();
      char line[160];
      std::snprintf(line, sizeof(line), "%zu,%d,%.4f,%.4f,%.6g,%s\n", frame, t.id, p.x(), p.y(),
                    static_cast<double>(t.response), status);
      out << line;
    }
  };
  const OdometryInput input{r.packets, r.ds.imu, r.ds.camera, r.depth.get(), nullptr};
  run_odometry(input, r.cfg.odometry, observer);
  return 0;
}

int cmd_eval(const EvalArgs& a) {
  const AlignMode mode = usage_guard([&] { return parse_align_mode(a.align); });
  if (!(a.max_dt > 0.0)) throw UsageError("--max-dt must be positive");
  for (const std::string& p : {a.est, a.gt}) {
    if (!fs::exists(p)) throw Error(Errc::Io, "missing " + p);
  }
  const auto est = load_trajectory(a.est);
  const auto gt = load_trajectory(a.gt);
  const Association as = associate(est, gt, static_cast<TimeNs>(std::llround(a.max_dt * kNsPerSec)));
  const Alignment al = align(as.pairs, mode);
  if (!al.warning.empty()) std::fprintf(stderr, "warning: %s\n", al.warning.c_str());
  const auto aligned = apply_alignment(as.pairs, al);
  const ApeStats st = ape_stats(aligned);
  std::printf("pairs   %zu\ndropped %zu\nalign   %s\nscale   %.6f\n", as.pairs.size(), as.dropped,
              std::string(to_string(al.mode)).c_str(), al.scale);
  std::printf("rmse    %.6f\nmean    %.6f\nmedian  %.6f\nmax     %.6f\nmin     %.6f\n", st.rmse,
              st.mean, st.median, st.max, st.min);
  if (!a.csv.empty()) {
    std::ofstream out = open_out(a.csv);
    write_ape_csv(out, aligned, st);
  }
  return 0;
}

int cmd_bench(const BenchArgs& a) {
  const PipelineConfig cfg = a.cfg.resolve();
  if (a.repeat < 1) throw UsageError("--repeat must be >= 1");
  if (a.events < 1) throw UsageError("--events must be >= 1");
  const int threads = resolve_threads(cfg.odometry.threads);
  const Camera cam = sensor_camera(cfg.sensor);

  std::ofstream file;
  if (!a.out.empty()) file = open_out(a.out);
  std::ostream& out = a.out.empty() ? std::cout : file;
  out << "stage,n,p50_ms,events_per_s\n";
  auto report = [&](const char* stage, std::size_t n, const std::vector<double>& secs) {
    const double p50 = median_of(secs);
    char line[160];
    std::snprintf(line, sizeof(line), "%s,%zu,%.3f,%.0f\n", stage, n, p50 * 1e3,
                  p50 > 0.0 ? static_cast<double>(n) / p50 : 0.0);
    out << line;
  };
  using Clock = std::chrono::steady_clock;
  auto timed = [&](auto&& fn) {
    std::vector<double> secs;
    for (int i = 0; i < a.repeat; ++i) {
      const auto t0 = Clock::now();
      fn();
      secs.push_back(std::chrono::duration<double>(Clock::now() - t0).count());
    }
    return secs;
  };

  // Synthetic packet: uniform pixels over 20 ms under a fixed screw motion.
  EventPacket packet;
  packet.t0 = 0;
  packet.t1 = 20'000'000;
  std::mt19937 rng(1);
  std::uniform_int_distribution<int> ux(0, cam.width() - 1), uy(0, cam.height() - 1);
  std::uniform_int_distribution<TimeNs> ut(packet.t0, packet.t1 - 1);
  packet.events.resize(a.events);
  for (Event& e : packet.events) {
    e.t = ut(rng);
    e.x = static_cast<std::int16_t>(ux(rng));
    e.y = static_cast<std::int16_t>(uy(rng));
    e.p = (rng() & 1U) != 0 ? 1 : -1;
  }
  std::sort(packet.events.begin(), packet.events.end(),
            [](const Event& l, const Event& r) { return l.t < r.t; });
  const Pose T1 = se3_exp({Vec3(0.05, 0.02, 0.0), Vec3(0.01, 0.02, 0.03)});
  CompensationOptions opts;
  opts.threads = threads;
  CompensatedPacket comp;
  report("warp", packet.size(), timed([&] {
           comp = compensate_packet(packet, Pose::identity(), T1, WarpDepth(3.0), cam, {}, opts);
         }));
  EventFrame frame;
  report("accumulate", packet.size(),
         timed([&] { frame = accumulate_frame(comp.events, cam, FrameMode::Count); }));
  const GrayImage gray = frame_to_gray(frame);
  GrayImage enhanced;
  report("enhance", gray.size(),
         timed([&] { enhanced = enhance_event_frame(gray, cfg.odometry.enhance); }));
  std::size_t corners = 0;
  report("detect", gray.size(), timed([&] {
           corners = detect_fast(enhanced, cfg.odometry.tracker.fast_threshold, true).size();
         }));
  (void)corners;

  if (!a.data.empty()) {
    const Dataset ds = load_dataset(a.data, cfg.sensor);
    std::unique_ptr<DepthSource> depth;
    if (!ds.depth_dir.empty()) {
      depth = std::make_unique<FileDepth>(ds.depth_dir);
    } else {
      depth = std::make_unique<ConstantDepth>(3.0, ds.camera.width(), ds.camera.height());
    }
    const auto packets = packetize(ds.events, cfg.odometry.window, cfg.odometry.overlap);
    OdometryConfig ocfg = cfg.odometry;
    ocfg.threads = threads;
    const OdometryInput input{packets, ds.imu, ds.camera, depth.get(), nullptr};
    report("pipeline", packets.size(), timed([&] { run_odometry(input, ocfg); }));
  }
  return 0;
}

int cmd_config(const ConfigCmdArgs& a) {
  if (!a.check.empty()) {
    if (!fs::exists(a.check)) throw Error(Errc::Io, "missing " + a.check);
    load_config(a.check);
    std::printf("ok\n");
    return 0;
  }
  write_config(std::cout, a.defaults ? PipelineConfig{} : a.cfg.resolve());
  return 0;
}

}  // namespace evio::cli
