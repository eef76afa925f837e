#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <string>

#include "evio/depth_prior.hpp"
#include "evio/error.hpp"
#include "evio/simulator.hpp"

using namespace evio;

namespace {

constexpr double kPi = 3.14159265358979323846;

// Camera at height h looking straight down: camera x = world x, camera y = -world y.
Pose looking_down(double h) {
  Pose p;
  p.rotation = Rotation::from_quaternion(0.0, 1.0, 0.0, 0.0);
  p.translation = Vec3(0, 0, h);
  return p;
}

const Camera kSmall(60, 60, 31.5, 23.5, 64, 48);

SimulationConfig small_config(TrajectoryKind kind, double duration) {
  SimulationConfig cfg;
  cfg.camera = kSmall;
  cfg.trajectory.kind = kind;
  cfg.trajectory.duration = duration;
  cfg.events.refractory = 0;
  cfg.depth_rate = 0;
  return cfg;
}

// Sub-pixel column where the row crosses `level`, nearest to `guess`.
double crossing_near(const GrayImage& img, int y, double level, double guess) {
  double best = 1e9;
  for (int x = 0; x + 1 < img.width(); ++x) {
    const double a = img(x, y) - level, b = img(x + 1, y) - level;
    if ((a < 0) == (b < 0) || a == b) continue;
    const double c = x + a / (a - b);
    if (std::abs(c - guess) < std::abs(best - guess)) best = c;
  }
  return best;
}

}  // namespace

TEST_CASE("constant pattern renders a constant image") {
  Pattern p;
  p.kind = PatternKind::Constant;
  p.base = 0.3;
  const GrayImage img = render_log_intensity(Scene::floor(p), looking_down(2.0), default_camera());
  for (float v : img.pixels()) REQUIRE(v == static_cast<float>(0.3 + 0.6 * 0.5));
}

TEST_CASE("checkerboard edges project to their analytic columns") {
  Pattern p;
  p.period = 0.31;
  const double h = 3.0;
  const Camera cam = default_camera();
  const GrayImage img = render_log_intensity(Scene::floor(p), looking_down(h), cam);
  // Row through the middle of a square in world y (b = period / 2).
  const int row = static_cast<int>(std::lround(cam.cy() - cam.fy() * 0.5 * p.period / h));
  const double level = p.base + 0.5 * p.contrast;
  int checked = 0;
  for (int k = -7; k <= 7; ++k) {
    const double u = cam.cx() + cam.fx() * k * p.period / h;
    if (u < 2 || u > cam.width() - 3) continue;
    CHECK(std::abs(crossing_near(img, row, level, u) - u) <= 0.5);
    ++checked;
  }
  CHECK(checked >= 12);
}

TEST_CASE("supersampling changes only pixels next to edges") {
  Pattern p;
  p.period = 0.29;
  const double h = 2.5;
  const Camera cam = default_camera();
  const Scene scene = Scene::floor(p);
  const GrayImage a = render_log_intensity(scene, looking_down(h), cam, false);
  const GrayImage b = render_log_intensity(scene, looking_down(h), cam, true);
  const double step = cam.fx() * p.period / h;
  auto edge_distance = [&](double pix, double centre) {
    const double q = (pix - centre) / step;
    return std::abs(q - std::round(q)) * step;
  };
  int differing = 0;
  for (int y = 0; y < cam.height(); ++y) {
    for (int x = 0; x < cam.width(); ++x) {
      if (std::abs(a(x, y) - b(x, y)) < 1e-6) continue;
      ++differing;
      CHECK(std::min(edge_distance(x, cam.cx()), edge_distance(y, cam.cy())) <= 1.0);
    }
  }
  CHECK(differing > 0);
}

TEST_CASE("z-depth of a floor and of a tilted view") {
  const Camera cam = default_camera();
  const Scene scene = Scene::floor(Pattern{});
  const DepthMap flat = render_depth(scene, looking_down(2.75), cam);
  for (float d : flat.pixels()) REQUIRE(d == doctest::Approx(2.75).epsilon(1e-6));

  Pose tilted = looking_down(3.0);
  tilted.rotation = tilted.rotation * Rotation::exp(Vec3(0.2, -0.1, 0.3));
  const DepthMap d = render_depth(scene, tilted, cam);
  const Mat3 R = tilted.rotation.matrix();
  for (int y = 0; y < cam.height(); y += 13) {
    for (int x = 0; x < cam.width(); x += 17) {
      // Ray (xn, yn, 1) scaled by z meets the plane world z = 0.
      const Vec3 ray((x - cam.cx()) / cam.fx(), (y - cam.cy()) / cam.fy(), 1.0);
      const double z = -tilted.translation.z() / (R.row(2).dot(ray));
      CHECK(d(x, y) == doctest::Approx(z).epsilon(1e-6));
    }
  }
}

TEST_CASE("a static camera produces no events") {
  const SimulationResult sim = simulate(small_config(TrajectoryKind::Static, 0.3));
  CHECK(sim.events.empty());
}

TEST_CASE("a ramp of 3.5 thresholds fires exactly three positive events") {
  EventGenConfig cfg;
  cfg.refractory = 0;
  EventGenerator gen(1, 1, cfg);
  const int n = 100;
  const TimeNs T = 1'000'000;
  for (int k = 0; k <= n; ++k) {
    GrayImage f(1, 1, static_cast<float>(3.5 * cfg.contrast * k / n));
    gen.add_frame(T * k / n, f);
  }
  REQUIRE(gen.events().size() == 3);
  for (int i = 0; i < 3; ++i) {
    CHECK(gen.events()[i].p == 1);
    // Linear ramp: the i-th crossing is at (i + 1) / 3.5 of the run.
    CHECK(std::abs(static_cast<double>(gen.events()[i].t) - T * (i + 1) / 3.5) <= 2000.0);
  }
}

TEST_CASE("refractory suppression keeps the reference moving") {
  EventGenConfig cfg;
  cfg.refractory = 1'000'000'000;
  EventGenerator gen(1, 1, cfg);
  gen.add_frame(0, GrayImage(1, 1, 0.0f));
  gen.add_frame(1000, GrayImage(1, 1, 0.5f));
  CHECK(gen.events().size() == 1);
  // Reference sits at 2C = 0.4, so 0.5 -> 0.3 crosses 0.2 only after the next level down.
  gen.add_frame(2000, GrayImage(1, 1, 0.1f));
  CHECK(gen.events().size() == 1);
}

TEST_CASE("event generator input validation") {
  CHECK_THROWS_AS(EventGenerator(0, 5, {}), Error);
  EventGenerator gen(2, 2, {});
  gen.add_frame(10, GrayImage(2, 2));
  CHECK_THROWS_AS(gen.add_frame(10, GrayImage(2, 2)), Error);
  CHECK_THROWS_AS(gen.add_frame(20, GrayImage(3, 2)), Error);
}

TEST_CASE("per-pixel counts agree with a fine-step integration") {
  // Full square sequence over the blob scene, on a central crop of the default sensor.
  SimulationConfig cfg;
  cfg.camera = Camera(240, 240, 31.5, 23.5, 64, 48);
  cfg.scene = Scene::floor(Pattern{PatternKind::Blobs});
  cfg.trajectory.kind = TrajectoryKind::Square;
  cfg.events.refractory = 0;
  cfg.depth_rate = 0;
  const Camera& cam = cfg.camera;
  const SimulationResult sim = simulate(cfg);
  std::vector<int> counts(cam.width() * cam.height(), 0);
  for (const Event& e : sim.events) ++counts[e.y * cam.width() + e.x];

  // Oracle: 10 kHz frames, each pixel steps its reference by C per crossing.
  const Trajectory traj(cfg.trajectory);
  const double C = cfg.events.contrast;
  std::vector<double> ref;
  std::vector<int> oracle(counts.size(), 0);
  for (int k = 0; k <= 100000; ++k) {
    const GrayImage L = render_log_intensity(cfg.scene, traj.pose_at(TimeNs(k) * 100'000), cam);
    if (k == 0) {
      ref.assign(L.pixels().begin(), L.pixels().end());
      continue;
    }
    for (std::size_t i = 0; i < ref.size(); ++i) {
      while (L.data()[i] >= ref[i] + C) ref[i] += C, ++oracle[i];
      while (L.data()[i] <= ref[i] - C) ref[i] -= C, ++oracle[i];
    }
  }
  std::size_t agree = 0, active = 0;
  for (std::size_t i = 0; i < counts.size(); ++i) {
    agree += counts[i] == oracle[i];
    active += oracle[i] > 0;
  }
  CHECK(active > counts.size() / 2);
  CHECK(static_cast<double>(agree) >= 0.999 * counts.size());
}

TEST_CASE("halving the integration step barely changes the event count") {
  SimulationConfig cfg = small_config(TrajectoryKind::Square, 3.0);
  cfg.camera = Camera(240, 240, 31.5, 23.5, 64, 48);
  cfg.scene = Scene::floor(Pattern{PatternKind::Blobs});
  const double n1 = static_cast<double>(simulate(cfg).events.size());
  cfg.events.sample_rate = 2000;
  const double n2 = static_cast<double>(simulate(cfg).events.size());
  CHECK(n1 > 1000);
  CHECK(std::abs(n2 - n1) / n1 < 1e-3);
}

TEST_CASE("a closed loop leaves every pixel polarity-balanced") {
  SimulationConfig cfg = small_config(TrajectoryKind::Circle, 2.0);
  const SimulationResult sim = simulate(cfg);
  std::vector<int> net(kSmall.width() * kSmall.height(), 0);
  for (const Event& e : sim.events) net[e.y * kSmall.width() + e.x] += e.p;
  int worst = 0;
  for (int v : net) worst = std::max(worst, std::abs(v));
  CHECK(worst <= 1);
  CHECK(sim.events.size() > 1000);
}

TEST_CASE("imu on a straight line measures gravity only") {
  TrajectoryParams p;
  p.kind = TrajectoryKind::Line;
  p.duration = 2.0;
  const auto imu = generate_imu(Trajectory(p), 200.0);
  CHECK(imu.size() == 401);
  for (const ImuSample& s : imu) {
    CHECK(s.gyro.norm() < 1e-12);
    // R = diag(1, -1, -1), so R^T (0, 0, 9.81) = (0, 0, -9.81).
    CHECK((s.accel - Vec3(0, 0, -9.81)).norm() < 1e-12);
  }
}

TEST_CASE("imu on a circle has centripetal magnitude r w^2") {
  TrajectoryParams p;
  p.kind = TrajectoryKind::Circle;
  p.radius = 1.3;
  p.frequency = 0.4;
  p.duration = 2.5;
  const double w = 2 * kPi * p.frequency;
  for (const ImuSample& s : generate_imu(Trajectory(p), 100.0)) {
    CHECK(std::hypot(s.accel.x(), s.accel.y()) == doctest::Approx(p.radius * w * w).epsilon(1e-12));
    CHECK(s.accel.z() == doctest::Approx(-9.81));
  }
}

TEST_CASE("imu matches finite differences of the trajectory") {
  TrajectoryParams p;
  p.kind = TrajectoryKind::Spline;
  p.wobble_amplitude = 0.1;
  p.duration = 4.0;
  const Trajectory traj(p);
  const double h = 1e-4;
  double worst_a = 0, worst_w = 0;
  const double knot = p.lap_time / p.spline_points;
  for (const ImuSample& s : generate_imu(traj, 50.0)) {
    const double t = static_cast<double>(s.t) / kNsPerSec;
    // Acceleration jumps at spline knots; skip stencils that straddle one.
    const double r = std::fmod(t, knot);
    if (r < 2 * h || knot - r < 2 * h) continue;
    const Pose P = traj.pose(t);
    const Vec3 acc = (traj.pose(t + h).translation - 2 * P.translation + traj.pose(t - h).translation) / (h * h);
    const Vec3 accel = P.rotation.inverse() * (acc - kGravity);
    const Vec3 w = (traj.pose(t - h).rotation.inverse() * traj.pose(t + h).rotation).log() / (2 * h);
    worst_a = std::max(worst_a, (accel - s.accel).norm());
    worst_w = std::max(worst_w, (w - s.gyro).norm());
  }
  CHECK(worst_a < 1e-3);
  CHECK(worst_w < 1e-6);
}

TEST_CASE("imu noise is seeded") {
  TrajectoryParams p;
  p.kind = TrajectoryKind::Static;
  p.duration = 20.0;
  ImuNoise n;
  n.gyro_sigma = 0.01;
  n.accel_sigma = 0.1;
  const auto a = generate_imu(Trajectory(p), 500.0, n);
  const auto b = generate_imu(Trajectory(p), 500.0, n);
  n.seed = 99;
  const auto c = generate_imu(Trajectory(p), 500.0, n);
  double ss = 0;
  bool same = true, differs = false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    same = same && a[i].gyro == b[i].gyro && a[i].accel == b[i].accel;
    differs = differs || a[i].gyro != c[i].gyro;
    ss += a[i].gyro.squaredNorm();
  }
  CHECK(same);
  CHECK(differs);
  CHECK(std::sqrt(ss / (3.0 * a.size())) == doctest::Approx(0.01).epsilon(0.05));
}

TEST_CASE("depth frames equal the render-time z-buffer") {
  SimulationConfig cfg = small_config(TrajectoryKind::Line, 0.5);
  cfg.depth_rate = 10;
  cfg.trajectory.wobble_amplitude = 0.05;
  const SimulationResult sim = simulate(cfg);
  REQUIRE(sim.depth_frames.size() == 6);
  const Trajectory traj(cfg.trajectory);
  for (const auto& [t, d] : sim.depth_frames) {
    CHECK(d == render_depth(cfg.scene, traj.pose_at(t), kSmall));
    const DepthMap back = depth_from_pgm16(depth_to_pgm16(d));
    for (std::size_t i = 0; i < d.size(); ++i) REQUIRE(std::abs(back.data()[i] - d.data()[i]) <= 1e-3f);
  }
}

TEST_CASE("simulation is deterministic and exports a loadable dataset") {
  SimulationConfig cfg = small_config(TrajectoryKind::Square, 0.4);
  cfg.events.noise_rate = 1.0;
  cfg.depth_rate = 10;
  const SimulationResult a = simulate(cfg);
  const SimulationResult b = simulate(cfg);
  CHECK(a.events == b.events);
  CHECK(a.event_depth == b.event_depth);
  CHECK(a.groundtruth.size() == 81);

  const auto dir = std::filesystem::temp_directory_path() / "evio_test_sim";
  std::filesystem::remove_all(dir);
  export_dataset(a, dir);
  const Dataset ds = load_dataset(dir, {kSmall.width(), kSmall.height()});
  CHECK(ds.events == a.events);
  CHECK(ds.imu.size() == a.imu.size());
  CHECK(ds.groundtruth.size() == a.groundtruth.size());
  CHECK(ds.camera.fx() == kSmall.fx());
  CHECK(ds.camera.cx() == kSmall.cx());
  CHECK(FileDepth(ds.depth_dir).frame_count() == a.depth_frames.size());
  std::ifstream gt(dir / "groundtruth.txt");
  int lines = 0;
  for (std::string line; std::getline(gt, line);) lines += !line.empty() && line[0] != '#';
  CHECK(lines == 81);
  std::filesystem::remove_all(dir);
  CHECK_THROWS_AS(load_dataset(dir, {}), Error);
}

TEST_CASE("name parsing") {
  CHECK(parse_trajectory("Yaw-Spin") == TrajectoryKind::YawSpin);
  CHECK(parse_pattern("checker") == PatternKind::Checkerboard);
  CHECK(to_string(parse_pattern("blobs")) == "blobs");
  CHECK_THROWS_AS(parse_trajectory("zigzag"), Error);
  TrajectoryParams p;
  p.kind = TrajectoryKind::Square;
  p.corner_radius = 1.5;
  CHECK_THROWS_AS(Trajectory{p}, Error);
}
