#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <unordered_map>
#include <vector>

#include "evio/geometry.hpp"
#include "evio/image.hpp"

namespace evio {

struct Keypoint {
  Vec2 position = Vec2::Zero();
  float response = 0.0f;
  double orientation = 0.0;  // radians
  int level = 0;
};

inline constexpr double kDefaultFastThreshold = 20.0 / 255.0;

/// FAST-9 segment test on the radius-3 Bresenham circle. Response is the largest sum of
/// |I(c) - I(p)| over a maximal contiguous brighter (or darker) arc of length >= 9.
/// 3x3 non-maximum suppression; orientation from the intensity centroid within radius 15.
std::vector<Keypoint> detect_fast(const GrayImage& img, double threshold = kDefaultFastThreshold,
                                  bool suppress = true);

/// Circle offsets in order, starting straight above the centre and running clockwise.
const std::array<std::array<int, 2>, 16>& fast_circle();

using Descriptor = std::array<std::uint64_t, 4>;
int hamming(const Descriptor& a, const Descriptor& b);

struct BriefPair {
  Vec2 a;
  Vec2 b;
};
inline constexpr std::uint32_t kBriefSeed = 0x5EED;
inline constexpr int kBriefMargin = 19;
/// 256 test pairs drawn once from an isotropic Gaussian (sigma 6 px) restricted to radius 15.
const std::vector<BriefPair>& brief_pattern();

/// Steered BRIEF on a sigma = 2 smoothed copy of img. Keypoints closer than kBriefMargin to
/// the border yield std::nullopt and are counted in `skipped`.
std::vector<std::optional<Descriptor>> orb_describe(const GrayImage& img,
                                                    std::span<const Keypoint> kps,
                                                    std::size_t* skipped = nullptr);

/// Strongest keypoint per cell of an R x C grid over a width x height image. Cell of (x, y)
/// is (min(R-1, floor(y R / H)), min(C-1, floor(x C / W))). Ties go to the smaller (y, x).
/// Output is ordered by cell, row-major.
std::vector<Keypoint> grid_select(std::span<const Keypoint> kps, int rows, int cols, int width,
                                  int height);

/// Level 0 is the input; each next level is a 5-tap binomial blur followed by 2x decimation.
struct Pyramid {
  std::vector<GrayImage> levels;
};
Pyramid build_pyramid(const GrayImage& img, int levels);

struct KltParams {
  int window = 21;
  int levels = 3;
  int max_iters = 30;
  double eps = 0.01;
  /// Lost when the smaller eigenvalue of the per-pixel normal matrix is below this.
  double min_eigen = 1e-4;
  /// Lost when the RMS photometric residual at level 0 exceeds this.
  double max_residual = 0.15;
  /// Lost when the zero-mean NCC of the level-0 patches is below this. The residual alone
  /// cannot reject sparse patches (isolated noise events), whose energy is small.
  double min_ncc = 0.85;
};

struct KltResult {
  Vec2 point = Vec2::Zero();
  bool live = false;
  double residual = 0.0;
  double ncc = 0.0;
};

/// Inverse-compositional translational Lucas-Kanade, coarse to fine. `guesses`, when
/// non-empty, gives the initial position of each point in `next`.
std::vector<KltResult> klt_track(const Pyramid& prev, const Pyramid& next,
                                 std::span<const Vec2> points, const KltParams& params,
                                 std::span<const Vec2> guesses = {});

enum class TrackStatus { Live, Lost };

struct Track {
  int id = 0;
  std::vector<int> frames;
  std::vector<Vec2> positions;
  TrackStatus status = TrackStatus::Live;
  double last_residual = 0.0;
  float response = 0.0f;
};

struct TrackerConfig {
  double fast_threshold = kDefaultFastThreshold;
  int grid_rows = 8;
  int grid_cols = 10;
  /// New tracks are only started this far from the border.
  int border = 10;
  KltParams klt;
};

/// KLT tracks with grid-based replenishment: after tracking, each grid cell without a live
/// track receives its strongest FAST corner.
class FeatureTracker {
 public:
  explicit FeatureTracker(TrackerConfig cfg = {});

  /// Advances to a new frame. `guesses` maps track id to a predicted position.
  void step(const GrayImage& img, const std::unordered_map<int, Vec2>& guesses = {});
  void mark_lost(int id);

  int frame() const { return frame_; }
  const std::vector<Track>& tracks() const { return tracks_; }
  const Track& track(int id) const { return tracks_[static_cast<std::size_t>(id)]; }
  std::vector<int> live_ids() const;
  /// Ids started during the last step.
  const std::vector<int>& new_ids() const { return new_ids_; }
  const Pyramid& pyramid() const { return pyramid_; }

 private:
  TrackerConfig cfg_;
  int frame_ = -1;
  Pyramid pyramid_;
  std::vector<Track> tracks_;
  std::vector<int> new_ids_;
};

}  // namespace evio
