#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "evio/depth_prior.hpp"
#include "evio/event_stream.hpp"
#include "evio/geometry.hpp"
#include "evio/image.hpp"

namespace evio {

struct WarpedEvent {
  double x = 0.0;  // subpixel position at the reference time
  double y = 0.0;
  TimeNs t = 0;
  std::int8_t p = 1;
  bool valid = true;  // false when the warped point fell behind the camera
};

enum class FrameMode { Count, Signed };
enum class RefTime { Start, Mid };

struct EventFrame {
  Image<double> grid;
  FrameMode mode = FrameMode::Count;
  TimeNs ref_time = 0;
  /// Events skipped because they were invalid or landed off the sensor.
  std::size_t out_of_bounds = 0;
};

struct AlignmentCorrection {
  Vec2 delta = Vec2::Zero();
};

/// Depth used for each event: the per-pixel map when one is attached and valid at the
/// event pixel, otherwise the scene depth.
class WarpDepth {
 public:
  explicit WarpDepth(double scene_depth) : scene_(scene_depth) {}
  WarpDepth(double scene_depth, const DepthMap* map) : scene_(scene_depth), map_(map) {}

  double at(int x, int y) const {
    if (map_ != nullptr) {
      const float d = (*map_)(x, y);
      if (valid_depth(d)) return d;
    }
    return scene_;
  }
  double scene() const { return scene_; }

 private:
  double scene_;
  const DepthMap* map_ = nullptr;
};

/// Back-project at `depth`, apply `ref_from_event`, project, subtract the correction.
/// Points behind the camera come back with valid = false.
WarpedEvent warp_event(const Event& e, const Pose& ref_from_event, double depth,
                       const Camera& cam, const AlignmentCorrection& corr);

struct CompensationOptions {
  RefTime ref_time = RefTime::Start;
  /// Project into the undistorted pinhole image instead of the distorted sensor image.
  bool rectify = false;
  int threads = 1;
};

struct CompensatedPacket {
  std::vector<WarpedEvent> events;
  TimeNs ref_time = 0;
  std::size_t behind_camera = 0;
};

/// Interpolate T_i on the geodesic T0 -> T1 at alpha_i = (t_i - t0) / (t1 - t0) and warp every
/// event into the reference camera. Throws DegeneratePacket when t1 <= t0.
CompensatedPacket compensate_packet(const EventPacket& packet, const Pose& T0, const Pose& T1,
                                    const WarpDepth& depth, const Camera& cam,
                                    const AlignmentCorrection& corr,
                                    const CompensationOptions& opts = {});
CompensatedPacket compensate_packet(const AugmentedPacket& packet, const Pose& T0,
                                    const Pose& T1, const WarpDepth& depth, const Camera& cam,
                                    const AlignmentCorrection& corr,
                                    const CompensationOptions& opts = {});

/// Subpixel positions are quantized to 1/256 px so that splat weights are dyadic and frame
/// sums are exact: mass is conserved and accumulation is order independent.
inline constexpr int kSplatSubpixel = 256;

/// Bilinear splat onto a width x height grid.
EventFrame accumulate_frame(std::span<const WarpedEvent> events, int width, int height,
                            FrameMode mode, TimeNs ref_time = 0);
EventFrame accumulate_frame(std::span<const WarpedEvent> events, const Camera& cam,
                            FrameMode mode, TimeNs ref_time = 0);
/// Pixelwise sum of two frames with matching shape and mode.
EventFrame merge_frames(const EventFrame& a, const EventFrame& b);

/// Translation of `cur` relative to `prev` maximizing normalized cross-correlation over a
/// +-5 px search with quadratic subpixel refinement; zero when the peak is below 0.1.
AlignmentCorrection update_alignment(const EventFrame& prev, const EventFrame& cur);
AlignmentCorrection update_alignment(const Image<double>& prev, const Image<double>& cur);

/// Max-normalized gray view of a frame (negative values clipped).
GrayImage frame_to_gray(const EventFrame& frame);

}  // namespace evio
