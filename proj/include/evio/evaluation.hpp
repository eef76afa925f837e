#pragma once

#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "evio/geometry.hpp"

namespace evio {

/// Lines `t_sec px py pz qx qy qz qw`; blank lines and `#` comments skipped. Timestamps must
/// increase strictly (NonMonotonicTimestamp otherwise).
std::vector<StampedPose> read_trajectory(std::istream& in);
std::vector<StampedPose> load_trajectory(const std::filesystem::path& path);
void write_trajectory(std::ostream& out, std::span<const StampedPose> traj);
void save_trajectory(const std::filesystem::path& path, std::span<const StampedPose> traj);

struct PosePair {
  TimeNs t = 0;
  Pose est;
  Pose gt;
};

struct Association {
  std::vector<PosePair> pairs;
  std::size_t dropped = 0;
};

inline constexpr TimeNs kDefaultMaxDt = 10'000'000;

/// Pairs each estimate with ground truth interpolated at its timestamp (linear translation,
/// geodesic rotation), provided the nearest ground-truth sample is within max_dt.
/// Throws NoOverlap when nothing pairs.
Association associate(std::span<const StampedPose> est, std::span<const StampedPose> gt,
                      TimeNs max_dt = kDefaultMaxDt);

enum class AlignMode { Se3, Sim3, None };
std::string_view to_string(AlignMode m);
AlignMode parse_align_mode(std::string_view name);

/// gt ~ scale * rotation * est + translation
struct Alignment {
  Rotation rotation;
  Vec3 translation = Vec3::Zero();
  double scale = 1.0;
  AlignMode mode = AlignMode::Se3;  // mode actually used
  std::string warning;              // set when falling back
};

/// Closed-form least squares (Umeyama). Sim3 on collinear or fewer than three positions
/// falls back to se3; fewer than three positions give a translation-only fit.
Alignment align(std::span<const PosePair> pairs, AlignMode mode);
std::vector<PosePair> apply_alignment(std::span<const PosePair> pairs, const Alignment& a);

struct ApeStats {
  double rmse = 0.0;
  double mean = 0.0;
  double median = 0.0;
  double max = 0.0;
  double min = 0.0;
  std::vector<double> residuals;
};

ApeStats ape_stats(std::span<const double> residuals);
/// Residual_i = |p_est - p_gt|.
ApeStats ape_stats(std::span<const PosePair> aligned);

/// Columns: t, est_x, est_y, est_z, gt_x, gt_y, gt_z, ape.
void write_ape_csv(std::ostream& out, std::span<const PosePair> aligned, const ApeStats& stats);

/// Largest distance between any two positions of the trajectory.
double trajectory_diameter(std::span<const StampedPose> traj);

}  // namespace evio
