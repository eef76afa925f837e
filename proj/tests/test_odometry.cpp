#include <doctest.h>

#include <cmath>

#include "evio/error.hpp"
#include "evio/evaluation.hpp"
#include "evio/odometry.hpp"
#include "evio/simulator.hpp"

using namespace evio;

namespace {

struct Sequence {
  SimulationConfig sim;
  SimulationResult data;
  std::vector<EventPacket> packets;
};

Sequence make_sequence(TrajectoryKind kind, double duration, double noise_rate = 0.0) {
  Sequence s;
  s.sim.scene = Scene::floor(Pattern{PatternKind::Blobs});
  s.sim.trajectory.kind = kind;
  s.sim.trajectory.duration = duration;
  s.sim.events.noise_rate = noise_rate;
  s.sim.depth_rate = 0;
  s.data = simulate(s.sim);
  const OdometryConfig cfg;
  s.packets = packetize(s.data.events, cfg.window, cfg.overlap);
  return s;
}

OdometryResult run(const Sequence& s, const OdometryConfig& cfg, double map_scale = 1.0) {
  const GroundTruthDepth depth(s.sim.scene, Trajectory(s.sim.trajectory), s.sim.camera);
  const GroundTruthDepth map(s.sim.scene, Trajectory(s.sim.trajectory), s.sim.camera, map_scale);
  const OdometryInput in{s.packets, s.data.imu, s.data.camera, &depth, &map};
  return run_odometry(in, cfg);
}

double se3_rmse(const OdometryResult& r, const Sequence& s) {
  const Association a = associate(r.trajectory(), s.data.groundtruth);
  return ape_stats(apply_alignment(a.pairs, align(a.pairs, AlignMode::Se3))).rmse;
}

}  // namespace

TEST_CASE("a static camera stays at the identity") {
  // Dense background noise: no patch survives the tracker's NCC gate, the prediction holds.
  const Sequence s = make_sequence(TrajectoryKind::Static, 1.0, 0.5);
  REQUIRE(s.packets.size() > 50);
  const OdometryResult r = run(s, OdometryConfig{});
  REQUIRE(r.frames.size() == s.packets.size());
  for (const FrameState& f : r.frames) {
    CHECK(f.pose.translation.norm() < 1e-3);
    CHECK(rotation_distance(f.pose.rotation, Rotation()) < 1e-3);
  }

  // Noiseless: packets carry no events at all.
  Sequence quiet = make_sequence(TrajectoryKind::Static, 0.5);
  REQUIRE(quiet.data.events.empty());
  for (int k = 0; k < 20; ++k) quiet.packets.push_back({k * 10'000'000LL, k * 10'000'000LL + 20'000'000, {}});
  const OdometryResult q = run(quiet, OdometryConfig{});
  REQUIRE(q.frames.size() == 20);
  for (const FrameState& f : q.frames) CHECK(f.pose.translation.norm() < 1e-3);
}

TEST_CASE("first frame is pinned and timestamps follow the packets") {
  const Sequence s = make_sequence(TrajectoryKind::Circle, 0.5);
  OdometryConfig cfg;
  const OdometryResult r = run(s, cfg);
  REQUIRE(r.frames.size() == s.packets.size());
  CHECK(r.frames[0].pose.translation == Vec3::Zero());
  for (std::size_t i = 0; i < r.frames.size(); ++i) CHECK(r.frames[i].timestamp == s.packets[i].t0);
  cfg.ref_time = RefTime::Mid;
  const OdometryResult m = run(s, cfg);
  CHECK(m.frames[3].timestamp == (s.packets[3].t0 + s.packets[3].t1) / 2);
}

TEST_CASE("out-of-order packets are rejected") {
  Sequence s = make_sequence(TrajectoryKind::Line, 0.2);
  std::swap(s.packets[2], s.packets[3]);
  try {
    run(s, OdometryConfig{});
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::NonMonotonicTimestamp);
  }
  const OdometryInput no_depth{s.packets, s.data.imu, s.data.camera, nullptr, nullptr};
  CHECK_THROWS_AS(run_odometry(no_depth, OdometryConfig{}), Error);
}

TEST_CASE("runs are bitwise deterministic across thread counts") {
  const Sequence s = make_sequence(TrajectoryKind::Square, 1.0, 0.2);
  OdometryConfig cfg;
  const OdometryResult a = run(s, cfg);
  const OdometryResult b = run(s, cfg);
  cfg.threads = 3;
  const OdometryResult c = run(s, cfg);
  REQUIRE(a.frames.size() == b.frames.size());
  REQUIRE(a.frames.size() == c.frames.size());
  for (std::size_t i = 0; i < a.frames.size(); ++i) {
    CHECK(a.frames[i].pose == b.frames[i].pose);
    CHECK(a.frames[i].pose == c.frames[i].pose);
  }
  CHECK(a.scale == c.scale);
}

TEST_CASE("a short circle is tracked accurately") {
  const Sequence s = make_sequence(TrajectoryKind::Circle, 2.0);
  const OdometryResult r = run(s, OdometryConfig{});
  CHECK(r.lost.empty());
  CHECK(se3_rmse(r, s) < 0.02 * 2.0);
  CHECK(r.scale == doctest::Approx(1.0).epsilon(0.05));
  CHECK(r.timing.frames == s.packets.size());
}

TEST_CASE("a map scaled by k yields scale near 1/k") {
  const Sequence s = make_sequence(TrajectoryKind::Circle, 1.0);
  for (const double k : {0.5, 2.0}) {
    const OdometryResult r = run(s, OdometryConfig{}, k);
    CHECK(r.scale == doctest::Approx(1.0 / k).epsilon(0.05));
  }
}

TEST_CASE("every predictor and warp-depth mode runs") {
  const Sequence s = make_sequence(TrajectoryKind::Line, 0.5);
  for (const Predictor p : {Predictor::ConstantVelocity, Predictor::Imu}) {
    for (const WarpDepthMode w : {WarpDepthMode::Scene, WarpDepthMode::Landmarks}) {
      OdometryConfig cfg;
      cfg.predictor = p;
      cfg.warp_depth = w;
      const OdometryResult r = run(s, cfg);
      CHECK(r.frames.size() == s.packets.size());
      CHECK(se3_rmse(r, s) < 0.05);
    }
  }
  CHECK(parse_predictor(to_string(Predictor::ConstantVelocity)) == Predictor::ConstantVelocity);
  CHECK(parse_warp_depth("landmarks") == WarpDepthMode::Landmarks);
}
