#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <vector>

#include "evio/depth_prior.hpp"
#include "evio/geometry.hpp"

namespace evio {

struct Landmark {
  int id = 0;
  Vec3 position = Vec3::Zero();  // world, meters
  double inverse_depth = 1.0;    // in the anchor frame
  int anchor_frame = 0;
  std::map<int, Vec2> observations;  // frame index -> pixel
  bool triangulated = false;
};

struct FrameState {
  Pose pose;  // world <- camera
  TimeNs timestamp = 0;
  bool is_keyframe = false;
};

/// A world point and where it was observed in the current image.
struct Correspondence {
  Vec3 point = Vec3::Zero();
  Vec2 pixel = Vec2::Zero();
};

struct Triangulation {
  Vec3 point = Vec3::Zero();
  /// Larger of the two reprojection errors, px.
  double reprojection_error = 0.0;
};

/// Midpoint of the common perpendicular of the two viewing rays. Throws DegenerateBaseline
/// when the centres are closer than 1e-4 m and ParallelRays below 0.1 degrees.
Triangulation triangulate(const Vec2& obs_a, const Vec2& obs_b, const Pose& pose_a,
                          const Pose& pose_b, const Camera& cam);

/// Reprojection residual pi(T^-1 X) - u and its 2x6 derivative with respect to a left
/// twist perturbation T <- exp(delta) T, delta = (rho, phi).
Vec2 reprojection_residual(const Pose& T, const Correspondence& c, const Camera& cam,
                           Eigen::Matrix<double, 2, 6>* jacobian = nullptr);

/// Mean inverse depth of the points in the camera at T, with its 1x6 derivative.
double mean_inverse_depth(const Pose& T, std::span<const Correspondence> corr,
                          Eigen::Matrix<double, 1, 6>* jacobian = nullptr);

struct RefineOptions {
  int max_iters = 50;
  double tolerance = 1e-10;
  double damping = 1e-4;
};

struct RefineResult {
  Pose pose;
  int iterations = 0;  // accepted updates larger than the tolerance
  double cost = 0.0;
};

/// Gauss-Newton on sum ||pi(T^-1 X) - u||^2 plus, when given, the scale-prior energy
/// (rho_bar(T) - s rho_roi)^2 / sigma. Singular normal equations are retried once with
/// Levenberg damping, then throw SingularNormalEquations. Steps that increase the cost are
/// damped until they do not, so the cost is monotone.
RefineResult refine_pose_detailed(const Pose& pose0, std::span<const Correspondence> corr,
                                  const Camera& cam,
                                  const std::optional<DepthResidualTerm>& depth_term = std::nullopt,
                                  const RefineOptions& opts = {});
Pose refine_pose(const Pose& pose0, std::span<const Correspondence> corr, const Camera& cam,
                 const std::optional<DepthResidualTerm>& depth_term = std::nullopt);

struct RansacConfig {
  int max_iters = 100;
  double threshold = 2.0;  // px
  int min_inliers = 8;
  std::uint32_t seed = 42;
};

struct RansacResult {
  Pose pose;
  std::vector<std::size_t> inliers;  // ascending
};

/// Minimal 3-point fits by Gauss-Newton from `prior`, scored by reprojection error; the best
/// model is refit on its inliers and rescored. With three or fewer correspondences a single
/// fit on all of them is made. Throws InsufficientInliers below cfg.min_inliers.
RansacResult ransac_pose(std::span<const Correspondence> corr, const Camera& cam,
                         const Pose& prior, const RansacConfig& cfg = {});

}  // namespace evio
