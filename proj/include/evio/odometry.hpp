#pragma once

#include <functional>
#include <span>
#include <string_view>
#include <vector>

#include "evio/depth_prior.hpp"
#include "evio/estimator.hpp"
#include "evio/event_stream.hpp"
#include "evio/features.hpp"
#include "evio/frame_enhance.hpp"
#include "evio/motion_compensation.hpp"

namespace evio {

/// Depth used to warp events: the smoothed scene depth (or the per-pixel map when the map
/// source has one), or the median depth of the tracked landmarks.
enum class WarpDepthMode { Scene, Landmarks };
/// Motion prediction: constant velocity, or constant velocity with the gyro rotation.
enum class Predictor { ConstantVelocity, Imu };

std::string_view to_string(WarpDepthMode m);
WarpDepthMode parse_warp_depth(std::string_view name);
std::string_view to_string(Predictor p);
Predictor parse_predictor(std::string_view name);

struct OdometryConfig {
  TimeNs window = 20'000'000;
  TimeNs overlap = 10'000'000;
  FrameMode frame_mode = FrameMode::Count;
  RefTime ref_time = RefTime::Start;
  bool alignment = true;
  int threads = 1;
  WarpDepthMode warp_depth = WarpDepthMode::Scene;
  Predictor predictor = Predictor::Imu;
  /// Frames spanned by the constant-velocity estimate. A one-frame difference feeds the
  /// compensation error straight back into the next prediction and oscillates.
  int velocity_window = 4;
  EnhanceConfig enhance;
  TrackerConfig tracker;
  RansacConfig ransac;
  DepthPriorConfig depth;
  /// Landmarks are re-estimated by triangulation once the anchor and current rays differ
  /// by this angle (deg); the two inverse depths are mixed with `triangulation_weight`.
  double min_parallax_deg = 5.0;
  double triangulation_weight = 0.5;
  /// Triangulations with a larger reprojection error (px) are discarded.
  double max_triangulation_error = 1.0;
};

struct OdometryInput {
  std::span<const EventPacket> packets;
  std::span<const ImuSample> imu;
  Camera camera;
  /// Source of the ROI depth prior.
  const DepthSource* depth = nullptr;
  /// Source used to place new landmarks and for per-pixel warping; defaults to `depth`.
  const DepthSource* map_depth = nullptr;
};

struct StageTimes {
  double compensate = 0.0;  // s, summed over packets
  double accumulate = 0.0;
  double enhance = 0.0;
  double track = 0.0;
  double estimate = 0.0;
  double depth = 0.0;
  double total = 0.0;
  std::size_t events = 0;
  std::size_t frames = 0;
};

struct OdometryResult {
  std::vector<FrameState> frames;
  double scale = 1.0;
  std::vector<ScaleSample> scale_samples;
  /// Reference times of frames where tracking failed and the prediction was kept.
  std::vector<TimeNs> lost;
  StageTimes timing;

  std::vector<StampedPose> trajectory() const;
};

/// Optional per-frame observer: frame index, enhanced image, tracker state.
using FrameObserver = std::function<void(std::size_t, const GrayImage&, const FeatureTracker&)>;

/// Front-end over a packet sequence. Packets must have strictly increasing start times
/// (NonMonotonicTimestamp otherwise); the first frame is pinned to the identity.
OdometryResult run_odometry(const OdometryInput& input, const OdometryConfig& cfg,
                            const FrameObserver& observer = {});

}  // namespace evio
