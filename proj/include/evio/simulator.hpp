#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <random>
#include <string_view>
#include <utility>
#include <vector>

#include "evio/depth_prior.hpp"
#include "evio/event_stream.hpp"
#include "evio/geometry.hpp"
#include "evio/image.hpp"

namespace evio {

enum class PatternKind { Constant, Checkerboard, Stripes, Blobs };

std::string_view to_string(PatternKind k);
PatternKind parse_pattern(std::string_view name);

/// Log-intensity texture on a plane: base + contrast * v(a, b), v in [0, 1].
struct Pattern {
  PatternKind kind = PatternKind::Checkerboard;
  double base = 0.0;
  double contrast = 0.6;
  /// Checker square size, stripe half-period, or blob grid spacing (m).
  double period = 0.3;
  /// Width of the intensity ramp across an edge (m).
  double edge_width = 0.01;
  /// Blob radius (m).
  double radius = 0.025;
  std::uint32_t seed = 7;

  double value(double a, double b) const;
  double log_intensity(double a, double b) const { return base + contrast * value(a, b); }
};

/// Textured plane z = 0 of its own frame, normal +z; `pose` maps plane to world.
struct Plane {
  Pose pose;
  double half_extent_x = 20.0;
  double half_extent_y = 20.0;
  Pattern pattern;
};

struct Scene {
  std::vector<Plane> planes;
  double background = 0.0;  // log intensity where no plane is hit

  /// A single large floor plane through the world origin.
  static Scene floor(const Pattern& pattern);
};

enum class TrajectoryKind { Static, Line, Circle, Square, YawSpin, Spline };

std::string_view to_string(TrajectoryKind k);
TrajectoryKind parse_trajectory(std::string_view name);

struct TrajectoryParams {
  TrajectoryKind kind = TrajectoryKind::Circle;
  double duration = 10.0;  // s
  double height = 3.0;     // camera height above the floor, m
  double radius = 1.0;     // circle
  double frequency = 0.5;  // circle revolutions per second
  Vec3 velocity = Vec3(0.4, 0.0, 0.0);  // line
  double side = 2.0;                    // square
  double corner_radius = 0.25;
  double lap_time = 10.0;   // square and spline loop period, s
  double yaw_rate = 1.5;    // yaw-spin, rad/s
  double spline_extent = 1.0;
  int spline_points = 6;
  std::uint32_t seed = 11;
  /// Roll / pitch oscillation added on top of any trajectory.
  double wobble_amplitude = 0.0;  // rad
  double wobble_frequency = 0.5;  // Hz
};

struct TrajectoryState {
  Pose pose;                                   // world <- camera
  Vec3 velocity = Vec3::Zero();                // world frame
  Vec3 acceleration = Vec3::Zero();            // world frame
  Vec3 angular_velocity = Vec3::Zero();        // camera frame
};

/// Analytic camera motion above a floor. The camera looks straight down (camera x = world x,
/// camera z = -world z) before yaw and wobble are applied.
class Trajectory {
 public:
  explicit Trajectory(TrajectoryParams params);

  TrajectoryState state(double t) const;
  Pose pose(double t) const { return state(t).pose; }
  Pose pose_at(TimeNs t) const { return pose(static_cast<double>(t) / kNsPerSec); }
  const TrajectoryParams& params() const { return params_; }
  double duration() const { return params_.duration; }

  /// Poses at t = 0, 1/rate, ... up to the duration.
  std::vector<StampedPose> sample(double rate) const;

 private:
  TrajectoryParams params_;
  std::vector<Vec3> control_;
};

/// Ray-cast every pixel against the scene. `depth` (optional) receives z-depth, 0 where
/// nothing is hit. With `supersample`, each pixel averages a 2 x 2 grid of rays.
GrayImage render_log_intensity(const Scene& scene, const Pose& pose, const Camera& cam,
                               bool supersample = false, DepthMap* depth = nullptr);
DepthMap render_depth(const Scene& scene, const Pose& pose, const Camera& cam);

struct EventGenConfig {
  double contrast = 0.2;        // log-intensity threshold C
  TimeNs refractory = 100'000;  // ns
  double noise_rate = 0.0;      // Hz per pixel
  std::uint32_t seed = 1;
  double sample_rate = 1000.0;  // Hz
  bool supersample = false;
};

/// Linear per-pixel event model. Log-intensity frames are fed in time order; between two
/// frames each pixel's intensity is linear in time, and an event fires each time it moves
/// C away from the pixel's reference level, at the interpolated crossing time. The
/// reference advances by C at every crossing, also when the refractory period suppresses
/// the event.
class EventGenerator {
 public:
  EventGenerator(int width, int height, const EventGenConfig& cfg);

  /// The first frame only initializes the reference levels. `depth` (optional) supplies
  /// per-pixel z-depth, interpolated to each event time.
  void add_frame(TimeNs t, const GrayImage& log_intensity, const DepthMap* depth = nullptr);

  /// Events so far, sorted by (t, y, x); depth per event (0 without depth input).
  const std::vector<Event>& events() const { return events_; }
  const std::vector<float>& event_depth() const { return depth_; }
  std::vector<Event> take_events() { return std::move(events_); }
  std::vector<float> take_depth() { return std::move(depth_); }

 private:
  int width_, height_;
  EventGenConfig cfg_;
  bool started_ = false;
  TimeNs t_prev_ = 0;
  std::vector<double> ref_;
  std::vector<float> prev_;
  std::vector<float> prev_depth_;
  std::vector<TimeNs> last_event_;
  std::mt19937_64 rng_;
  std::vector<Event> events_;
  std::vector<float> depth_;
};

struct ImuNoise {
  double gyro_sigma = 0.0;   // rad/s
  double accel_sigma = 0.0;  // m/s^2
  std::uint32_t seed = 3;
};

inline const Vec3 kGravity(0.0, 0.0, -9.81);

/// gyro = body angular velocity; accel = R^T (a - g).
std::vector<ImuSample> generate_imu(const Trajectory& traj, double rate, const ImuNoise& noise = {});

/// Depth maps rendered from the scene at the ground-truth pose, optionally scaled by a
/// constant factor and perturbed by multiplicative Gaussian noise.
class GroundTruthDepth final : public DepthSource {
 public:
  GroundTruthDepth(Scene scene, Trajectory traj, Camera cam, double scale = 1.0,
                   double noise_sigma = 0.0, std::uint32_t seed = 5);
  DepthMap depth_at(TimeNs t) const override;

 private:
  Scene scene_;
  Trajectory traj_;
  Camera cam_;
  double scale_;
  double noise_;
  std::uint32_t seed_;
};

/// Default DAVIS-346-like camera: 346 x 260, f = 240 px, centred principal point.
Camera default_camera();

struct SimulationConfig {
  Scene scene = Scene::floor(Pattern{});
  TrajectoryParams trajectory;
  Camera camera = default_camera();
  EventGenConfig events;
  double imu_rate = 1000.0;
  ImuNoise imu_noise;
  double groundtruth_rate = 200.0;
  /// Depth frames kept for export; 0 keeps none.
  double depth_rate = 20.0;
};

struct SimulationResult {
  Camera camera;
  std::vector<Event> events;
  std::vector<float> event_depth;
  std::vector<ImuSample> imu;
  std::vector<StampedPose> groundtruth;
  std::vector<std::pair<TimeNs, DepthMap>> depth_frames;
};

SimulationResult simulate(const SimulationConfig& cfg);

/// Writes events.txt, imu.txt, groundtruth.txt, calib.txt and depth/<t_ns>.pgm.
void export_dataset(const SimulationResult& sim, const std::filesystem::path& dir);

struct Dataset {
  Camera camera;
  std::vector<Event> events;
  std::vector<ImuSample> imu;
  std::vector<StampedPose> groundtruth;  // empty when groundtruth.txt is absent
  std::filesystem::path depth_dir;       // empty when depth/ is absent
};

/// Reads a dataset directory. events.txt and calib.txt are required; imu.txt,
/// groundtruth.txt and depth/ are optional.
Dataset load_dataset(const std::filesystem::path& dir, SensorSize sensor);

}  // namespace evio
