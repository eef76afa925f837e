#include "evio/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <istream>
#include <ostream>

#include "evio/error.hpp"

namespace evio {

namespace {

[[noreturn]] void bad_value(std::string_view v, std::string_view what) {
  throw Error(Errc::ParseError, "expected " + std::string(what) + ", got '" + std::string(v) + "'");
}

std::string format(double v) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, r.ptr);
}
std::string format(int v) { return std::to_string(v); }
std::string format(std::uint32_t v) { return std::to_string(v); }
std::string format(bool v) { return v ? "true" : "false"; }

template <typename T>
void parse_number(std::string_view v, T& out, std::string_view what) {
  T tmp{};
  const auto r = std::from_chars(v.data(), v.data() + v.size(), tmp);
  if (r.ec != std::errc() || r.ptr != v.data() + v.size()) bad_value(v, what);
  out = tmp;
}
void parse(std::string_view v, double& out) { parse_number(v, out, "a number"); }
void parse(std::string_view v, int& out) { parse_number(v, out, "an integer"); }
void parse(std::string_view v, std::uint32_t& out) { parse_number(v, out, "an unsigned integer"); }
void parse(std::string_view v, bool& out) {
  if (v == "true" || v == "1" || v == "on") {
    out = true;
  } else if (v == "false" || v == "0" || v == "off") {
    out = false;
  } else {
    bad_value(v, "true or false");
  }
}

std::string_view to_string(FrameMode m) { return m == FrameMode::Count ? "count" : "signed"; }
FrameMode parse_frame_mode(std::string_view v) {
  if (v == "count") return FrameMode::Count;
  if (v == "signed") return FrameMode::Signed;
  throw Error(Errc::ParseError, "frame mode must be count or signed");
}
std::string_view to_string(RefTime r) { return r == RefTime::Start ? "start" : "mid"; }
RefTime parse_ref_time(std::string_view v) {
  if (v == "start") return RefTime::Start;
  if (v == "mid") return RefTime::Mid;
  throw Error(Errc::ParseError, "reference time must be start or mid");
}
std::string_view to_string(SigmaMode m) {
  return m == SigmaMode::Constant ? "constant" : "depth_sq";
}
SigmaMode parse_sigma_mode(std::string_view v) {
  if (v == "constant") return SigmaMode::Constant;
  if (v == "depth_sq") return SigmaMode::ProportionalToDepthSq;
  throw Error(Errc::ParseError, "sigma mode must be constant or depth_sq");
}

struct Entry {
  ConfigKey key;
  std::function<std::string(const PipelineConfig&)> get;
  std::function<void(PipelineConfig&, std::string_view)> set;
};

// `acc` is a generic accessor returning a reference to the field.
template <typename Acc>
Entry value(const char* name, const char* doc, Acc acc) {
  return {{name, doc},
          [acc](const PipelineConfig& c) { return format(acc(c)); },
          [acc](PipelineConfig& c, std::string_view v) { parse(v, acc(c)); }};
}

template <typename Acc>
Entry seconds(const char* name, const char* doc, Acc acc) {
  return {{name, doc},
          [acc](const PipelineConfig& c) { return format_seconds(acc(c)); },
          [acc](PipelineConfig& c, std::string_view v) {
            TimeNs t = 0;
            if (!parse_seconds(v, t)) bad_value(v, "seconds");
            acc(c) = t;
          }};
}

// Enum-valued keys go through the module's own to_string / parse pair.
template <typename Acc, typename Parse>
Entry choice(const char* name, const char* doc, Acc acc, Parse parse_fn) {
  return {{name, doc},
          [acc](const PipelineConfig& c) { return std::string(to_string(acc(c))); },
          [acc, parse_fn](PipelineConfig& c, std::string_view v) {
            try {
              acc(c) = parse_fn(v);
            } catch (const Error& e) {
              throw Error(Errc::ParseError, e.what());
            }
          }};
}

#define ACC(path) [](auto& c) -> auto& { return c.path; }

std::vector<Entry> build_entries() {
  return {
      value("sensor.width", "sensor width, px", ACC(sensor.width)),
      value("sensor.height", "sensor height, px", ACC(sensor.height)),
      value("threads", "worker threads inside a packet (EVIO_THREADS overrides)",
            ACC(odometry.threads)),

      seconds("stream.window", "packet length, s", ACC(odometry.window)),
      seconds("stream.overlap", "overlap between consecutive packets, s", ACC(odometry.overlap)),

      choice("compensation.frame_mode", "count | signed", ACC(odometry.frame_mode),
             parse_frame_mode),
      choice("compensation.ref_time", "warp target inside the packet: start | mid",
             ACC(odometry.ref_time), parse_ref_time),
      value("compensation.alignment", "apply the frame alignment correction",
            ACC(odometry.alignment)),
      choice("compensation.warp_depth", "scene | landmarks", ACC(odometry.warp_depth),
             parse_warp_depth),

      value("enhance.sigma", "Gaussian blur sigma, px", ACC(odometry.enhance.sigma)),
      value("enhance.lambda", "sharpening gain", ACC(odometry.enhance.lambda)),
      choice("enhance.method", "sobel | laplacian | canny | clahe-only",
             ACC(odometry.enhance.method), parse_edge_method),
      value("enhance.thinning", "thin the edge map before erosion", ACC(odometry.enhance.thinning)),
      value("enhance.erode_size", "erosion box size, odd px", ACC(odometry.enhance.erode_size)),
      value("enhance.alpha", "weight of the sharpened image", ACC(odometry.enhance.alpha)),
      value("enhance.beta", "weight of the eroded edge map", ACC(odometry.enhance.beta)),
      value("enhance.clahe_tile_rows", "CLAHE tile rows", ACC(odometry.enhance.clahe_tile_rows)),
      value("enhance.clahe_tile_cols", "CLAHE tile columns", ACC(odometry.enhance.clahe_tile_cols)),
      value("enhance.clahe_clip", "CLAHE clip limit", ACC(odometry.enhance.clahe_clip)),
      value("enhance.canny_low", "Canny low threshold", ACC(odometry.enhance.canny_low)),
      value("enhance.canny_high", "Canny high threshold", ACC(odometry.enhance.canny_high)),

      value("features.fast_threshold", "FAST intensity threshold",
            ACC(odometry.tracker.fast_threshold)),
      value("features.grid_rows", "selection grid rows", ACC(odometry.tracker.grid_rows)),
      value("features.grid_cols", "selection grid columns", ACC(odometry.tracker.grid_cols)),
      value("features.border", "no new tracks closer to the border, px",
            ACC(odometry.tracker.border)),

      value("klt.window", "window side, odd px", ACC(odometry.tracker.klt.window)),
      value("klt.levels", "pyramid levels", ACC(odometry.tracker.klt.levels)),
      value("klt.max_iters", "iterations per level", ACC(odometry.tracker.klt.max_iters)),
      value("klt.eps", "update norm for convergence, px", ACC(odometry.tracker.klt.eps)),
      value("klt.min_eigen", "minimum per-pixel eigenvalue", ACC(odometry.tracker.klt.min_eigen)),
      value("klt.max_residual", "maximum RMS residual", ACC(odometry.tracker.klt.max_residual)),
      value("klt.min_ncc", "minimum patch NCC of a live track", ACC(odometry.tracker.klt.min_ncc)),

      value("depth.enabled", "use the ROI depth prior and scale refit", ACC(odometry.depth.enabled)),
      value("depth.alpha", "smoothing weight of the new ROI depth", ACC(odometry.depth.alpha)),
      value("depth.roi_fraction", "centred ROI size per dimension", ACC(odometry.depth.roi_fraction)),
      value("depth.d_min", "lower clamp, m", ACC(odometry.depth.d_min)),
      value("depth.d_max", "upper clamp, m", ACC(odometry.depth.d_max)),
      value("depth.sigma", "prior variance", ACC(odometry.depth.sigma)),
      choice("depth.sigma_mode", "constant | depth_sq", ACC(odometry.depth.sigma_mode),
             parse_sigma_mode),
      value("depth.keyframe_interval", "frames between keyframes",
            ACC(odometry.depth.keyframe_interval)),

      value("ransac.max_iters", "hypotheses", ACC(odometry.ransac.max_iters)),
      value("ransac.threshold", "inlier reprojection threshold, px", ACC(odometry.ransac.threshold)),
      value("ransac.min_inliers", "minimum inliers", ACC(odometry.ransac.min_inliers)),
      value("ransac.seed", "sampler seed", ACC(odometry.ransac.seed)),

      choice("estimator.predictor", "imu | cv", ACC(odometry.predictor), parse_predictor),
      value("estimator.velocity_window", "frames spanned by the velocity estimate",
            ACC(odometry.velocity_window)),
      value("estimator.min_parallax_deg", "parallax before triangulating, deg",
            ACC(odometry.min_parallax_deg)),
      value("estimator.triangulation_weight", "weight of the triangulated inverse depth",
            ACC(odometry.triangulation_weight)),
      value("estimator.max_triangulation_error", "reprojection limit, px",
            ACC(odometry.max_triangulation_error)),

      choice("sim.trajectory", "static | line | circle | square | yaw-spin | spline",
             ACC(sim.trajectory.kind), parse_trajectory),
      value("sim.duration", "s", ACC(sim.trajectory.duration)),
      value("sim.height", "camera height, m", ACC(sim.trajectory.height)),
      value("sim.radius", "circle radius, m", ACC(sim.trajectory.radius)),
      value("sim.frequency", "circle revolutions per second", ACC(sim.trajectory.frequency)),
      value("sim.side", "square side, m", ACC(sim.trajectory.side)),
      value("sim.lap_time", "square and spline lap, s", ACC(sim.trajectory.lap_time)),
      value("sim.yaw_rate", "yaw-spin rate, rad/s", ACC(sim.trajectory.yaw_rate)),
      value("sim.wobble_amplitude", "roll/pitch oscillation, rad",
            ACC(sim.trajectory.wobble_amplitude)),
      value("sim.trajectory_seed", "spline control point seed", ACC(sim.trajectory.seed)),
      choice("sim.pattern", "constant | checkerboard | stripes | blobs", ACC(sim.pattern.kind),
             parse_pattern),
      value("sim.pattern_contrast", "log-intensity contrast", ACC(sim.pattern.contrast)),
      value("sim.pattern_period", "texture period, m", ACC(sim.pattern.period)),
      value("sim.pattern_seed", "blob jitter seed", ACC(sim.pattern.seed)),
      value("sim.contrast_threshold", "event threshold C", ACC(sim.events.contrast)),
      seconds("sim.refractory", "per-pixel refractory period, s", ACC(sim.events.refractory)),
      value("sim.noise_rate", "noise events per pixel per second", ACC(sim.events.noise_rate)),
      value("sim.seed", "event noise seed", ACC(sim.events.seed)),
      value("sim.sample_rate", "rendering rate, Hz", ACC(sim.events.sample_rate)),
      value("sim.imu_rate", "Hz", ACC(sim.imu_rate)),
      value("sim.gyro_sigma", "gyro noise, rad/s", ACC(sim.imu_noise.gyro_sigma)),
      value("sim.accel_sigma", "accelerometer noise, m/s^2", ACC(sim.imu_noise.accel_sigma)),
      value("sim.imu_seed", "IMU noise seed", ACC(sim.imu_noise.seed)),
      value("sim.groundtruth_rate", "Hz", ACC(sim.groundtruth_rate)),
      value("sim.depth_rate", "exported depth maps per second, 0 for none", ACC(sim.depth_rate)),
  };
}

#undef ACC

const std::vector<Entry>& entries() {
  static const std::vector<Entry> e = build_entries();
  return e;
}

const Entry& find(std::string_view key) {
  for (const Entry& e : entries()) {
    if (e.key.name == key) return e;
  }
  throw Error(Errc::UnknownConfigKey, "unknown config key: " + std::string(key));
}

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace

const std::vector<ConfigKey>& config_keys() {
  static const std::vector<ConfigKey> keys = [] {
    std::vector<ConfigKey> k;
    for (const Entry& e : entries()) k.push_back(e.key);
    return k;
  }();
  return keys;
}

void set_config_value(PipelineConfig& cfg, std::string_view key, std::string_view value) {
  find(key).set(cfg, trim(value));
}

std::string get_config_value(const PipelineConfig& cfg, std::string_view key) {
  return find(key).get(cfg);
}

void apply_config(std::istream& in, PipelineConfig& cfg) {
  std::string line;
  std::size_t no = 0;
  while (std::getline(in, line)) {
    ++no;
    std::string_view s = line;
    if (const auto hash = s.find('#'); hash != std::string_view::npos) s = s.substr(0, hash);
    s = trim(s);
    if (s.empty()) continue;
    const auto eq = s.find('=');
    if (eq == std::string_view::npos) {
      throw Error(Errc::ParseError, "expected 'key = value'", no);
    }
    try {
      set_config_value(cfg, trim(s.substr(0, eq)), s.substr(eq + 1));
    } catch (const Error& e) {
      throw Error(e.code(), e.what(), no);
    }
  }
}

PipelineConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::Io, "cannot open " + path.string());
  PipelineConfig cfg;
  apply_config(in, cfg);
  return cfg;
}

void write_config(std::ostream& out, const PipelineConfig& cfg) {
  std::string_view group;
  for (const Entry& e : entries()) {
    const std::string_view name = e.key.name;
    const std::string_view g = name.substr(0, name.find('.'));
    if (!group.empty() && g != group) out << '\n';
    group = g;
    out << "# " << e.key.doc << '\n' << name << " = " << e.get(cfg) << '\n';
  }
}

Camera sensor_camera(const SensorSize& sensor) {
  return Camera(240.0, 240.0, sensor.width / 2, sensor.height / 2, sensor.width, sensor.height);
}

SimulationConfig make_simulation(const PipelineConfig& cfg) {
  SimulationConfig s;
  s.scene = Scene::floor(cfg.sim.pattern);
  s.trajectory = cfg.sim.trajectory;
  s.camera = sensor_camera(cfg.sensor);
  s.events = cfg.sim.events;
  s.imu_rate = cfg.sim.imu_rate;
  s.imu_noise = cfg.sim.imu_noise;
  s.groundtruth_rate = cfg.sim.groundtruth_rate;
  s.depth_rate = cfg.sim.depth_rate;
  return s;
}

}  // namespace evio
