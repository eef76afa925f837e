#include "evio/estimator.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "evio/error.hpp"

namespace evio {

Triangulation triangulate(const Vec2& obs_a, const Vec2& obs_b, const Pose& pose_a,
                          const Pose& pose_b, const Camera& cam) {
  const Vec3 ca = pose_a.translation, cb = pose_b.translation;
  if ((cb - ca).norm() < 1e-4) throw Error(Errc::DegenerateBaseline, "camera centres coincide");
  const Vec3 da = (pose_a.rotation * cam.backproject(obs_a, 1.0)).normalized();
  const Vec3 db = (pose_b.rotation * cam.backproject(obs_b, 1.0)).normalized();
  constexpr double kMinAngle = 0.1 * 3.14159265358979323846 / 180.0;
  if (std::atan2(da.cross(db).norm(), da.dot(db)) < kMinAngle) {
    throw Error(Errc::ParallelRays, "viewing rays are nearly parallel");
  }
  const Vec3 w0 = ca - cb;
  const double a = da.dot(da), b = da.dot(db), c = db.dot(db);
  const double d = da.dot(w0), e = db.dot(w0);
  const double den = a * c - b * b;
  const double s = (b * e - c * d) / den;
  const double t = (a * e - b * d) / den;
  Triangulation out;
  out.point = 0.5 * ((ca + s * da) + (cb + t * db));
  auto err = [&](const Pose& T, const Vec2& u) {
    const Vec3 Xc = T.inverse() * out.point;
    if (Xc.z() <= 1e-6) return std::numeric_limits<double>::infinity();
    return (cam.project(Xc) - u).norm();
  };
  out.reprojection_error = std::max(err(pose_a, obs_a), err(pose_b, obs_b));
  return out;
}

Vec2 reprojection_residual(const Pose& T, const Correspondence& c, const Camera& cam,
                           Eigen::Matrix<double, 2, 6>* jacobian) {
  const Mat3 Rt = T.rotation.matrix().transpose();
  const Vec3 Xc = Rt * (c.point - T.translation);
  const Vec2 r = cam.project(Xc) - c.pixel;
  if (jacobian != nullptr) {
    Eigen::Matrix<double, 3, 6> dX;
    dX.leftCols<3>() = -Rt;
    dX.rightCols<3>() = Rt * skew(c.point);
    *jacobian = cam.project_jacobian(Xc) * dX;
  }
  return r;
}

double mean_inverse_depth(const Pose& T, std::span<const Correspondence> corr,
                          Eigen::Matrix<double, 1, 6>* jacobian) {
  if (corr.empty()) throw Error(Errc::InvalidArgument, "no points for mean inverse depth");
  const Mat3 Rt = T.rotation.matrix().transpose();
  double sum = 0.0;
  Eigen::Matrix<double, 1, 6> J = Eigen::Matrix<double, 1, 6>::Zero();
  for (const Correspondence& c : corr) {
    const Vec3 Xc = Rt * (c.point - T.translation);
    if (Xc.z() <= 1e-6) throw Error(Errc::BehindCamera, "landmark behind camera");
    sum += 1.0 / Xc.z();
    if (jacobian != nullptr) {
      Eigen::Matrix<double, 1, 6> dz;
      dz.leftCols<3>() = -Rt.row(2);
      dz.rightCols<3>() = Rt.row(2) * skew(c.point);
      J += (-1.0 / (Xc.z() * Xc.z())) * dz;
    }
  }
  const double n = static_cast<double>(corr.size());
  if (jacobian != nullptr) *jacobian = J / n;
  return sum / n;
}

namespace {

using Mat6 = Eigen::Matrix<double, 6, 6>;

struct System {
  Mat6 H = Mat6::Zero();
  Vec6 g = Vec6::Zero();
  double cost = 0.0;
};

double total_cost(const Pose& T, std::span<const Correspondence> corr, const Camera& cam,
                  const std::optional<DepthResidualTerm>& depth) {
  double cost = 0.0;
  for (const Correspondence& c : corr) {
    const Vec3 Xc = T.inverse() * c.point;
    if (Xc.z() <= 1e-6) return std::numeric_limits<double>::infinity();
    cost += (cam.project(Xc) - c.pixel).squaredNorm();
  }
  if (depth) {
    DepthResidualTerm term = *depth;
    term.rho_bar = mean_inverse_depth(T, corr);
    cost += depth_residual(term);
  }
  return cost;
}

System build_system(const Pose& T, std::span<const Correspondence> corr, const Camera& cam,
                    const std::optional<DepthResidualTerm>& depth) {
  System s;
  Eigen::Matrix<double, 2, 6> J;
  for (const Correspondence& c : corr) {
    const Vec2 r = reprojection_residual(T, c, cam, &J);
    s.H += J.transpose() * J;
    s.g += J.transpose() * r;
    s.cost += r.squaredNorm();
  }
  if (depth) {
    Eigen::Matrix<double, 1, 6> Jd;
    const double rho = mean_inverse_depth(T, corr, &Jd);
    const double w = 1.0 / depth->sigma;
    const double r = rho - depth->scale * depth->rho_roi;
    s.H += w * Jd.transpose() * Jd;
    s.g += w * Jd.transpose() * r;
    s.cost += w * r * r;
  }
  return s;
}

bool solve(const Mat6& H, const Vec6& g, Vec6& delta) {
  Eigen::LDLT<Mat6> ldlt(H);
  if (ldlt.info() != Eigen::Success || !ldlt.isPositive()) return false;
  const Eigen::VectorXd d = ldlt.vectorD();
  const double dmax = d.cwiseAbs().maxCoeff();
  if (!(dmax > 0.0) || d.minCoeff() <= 1e-12 * dmax) return false;
  delta = -ldlt.solve(g);
  return delta.allFinite();
}

}  // namespace

RefineResult refine_pose_detailed(const Pose& pose0, std::span<const Correspondence> corr,
                                  const Camera& cam,
                                  const std::optional<DepthResidualTerm>& depth_term,
                                  const RefineOptions& opts) {
  if (corr.size() < 3) throw Error(Errc::InsufficientInliers, "need at least 3 correspondences");
  if (depth_term && !(depth_term->sigma > 0.0)) {
    throw Error(Errc::InvalidArgument, "depth prior variance must be positive");
  }
  RefineResult res;
  res.pose = pose0;
  System sys = build_system(res.pose, corr, cam, depth_term);
  res.cost = sys.cost;
  for (int it = 0; it < opts.max_iters; ++it) {
    Vec6 delta;
    if (!solve(sys.H, sys.g, delta)) {
      const Mat6 damped = sys.H + opts.damping * Mat6::Identity();
      if (!solve(damped, sys.g, delta)) {
        throw Error(Errc::SingularNormalEquations, "normal equations are singular");
      }
    }
    if (delta.norm() < opts.tolerance) break;
    // Increase damping until the step does not raise the cost.
    double lambda = opts.damping;
    Pose next = se3_exp(Twist::from_vector(delta)) * res.pose;
    double cost = total_cost(next, corr, cam, depth_term);
    int tries = 0;
    while (!(cost <= res.cost) && tries < 12) {
      const Mat6 damped = sys.H + lambda * Mat6(sys.H.diagonal().asDiagonal()) +
                          lambda * Mat6::Identity();
      if (!solve(damped, sys.g, delta)) break;
      next = se3_exp(Twist::from_vector(delta)) * res.pose;
      cost = total_cost(next, corr, cam, depth_term);
      lambda *= 10.0;
      ++tries;
    }
    if (!(cost <= res.cost)) break;
    res.pose = next;
    ++res.iterations;
    sys = build_system(res.pose, corr, cam, depth_term);
    res.cost = sys.cost;
    if (delta.norm() < opts.tolerance) break;
  }
  return res;
}

Pose refine_pose(const Pose& pose0, std::span<const Correspondence> corr, const Camera& cam,
                 const std::optional<DepthResidualTerm>& depth_term) {
  return refine_pose_detailed(pose0, corr, cam, depth_term).pose;
}

namespace {

std::vector<std::size_t> score(const Pose& T, std::span<const Correspondence> corr,
                               const Camera& cam, double threshold, double& total) {
  std::vector<std::size_t> in;
  total = 0.0;
  const Pose inv = T.inverse();
  for (std::size_t i = 0; i < corr.size(); ++i) {
    const Vec3 Xc = inv * corr[i].point;
    if (Xc.z() <= 1e-6) continue;
    const double e = (cam.project(Xc) - corr[i].pixel).norm();
    if (e < threshold) {
      in.push_back(i);
      total += e;
    }
  }
  return in;
}

std::optional<Pose> try_fit(const Pose& prior, std::span<const Correspondence> subset,
                            const Camera& cam, int max_iters) {
  try {
    RefineOptions o;
    o.max_iters = max_iters;
    const Pose p = refine_pose_detailed(prior, subset, cam, std::nullopt, o).pose;
    if (!p.translation.allFinite()) return std::nullopt;
    return p;
  } catch (const Error&) {
    return std::nullopt;
  }
}

}  // namespace

RansacResult ransac_pose(std::span<const Correspondence> corr, const Camera& cam,
                         const Pose& prior, const RansacConfig& cfg) {
  if (corr.size() < 3) throw Error(Errc::InsufficientInliers, "need at least 3 correspondences");
  if (!(cfg.threshold > 0.0)) throw Error(Errc::InvalidArgument, "inlier threshold must be > 0");
  const std::size_t n = corr.size();
  RansacResult best{prior, {}};
  double best_err = std::numeric_limits<double>::infinity();

  auto consider = [&](const Pose& p) {
    double err = 0.0;
    auto in = score(p, corr, cam, cfg.threshold, err);
    if (in.size() > best.inliers.size() || (in.size() == best.inliers.size() && err < best_err)) {
      best = {p, std::move(in)};
      best_err = err;
    }
  };

  if (n <= 3) {
    if (auto p = try_fit(prior, corr, cam, 50)) consider(*p);
  } else {
    std::mt19937 gen(cfg.seed);
    std::vector<Correspondence> sample(3);
    for (int it = 0; it < cfg.max_iters; ++it) {
      std::size_t idx[3];
      for (int k = 0; k < 3; ++k) {
        bool fresh;
        do {
          idx[k] = gen() % n;
          fresh = true;
          for (int j = 0; j < k; ++j) fresh = fresh && idx[j] != idx[k];
        } while (!fresh);
        sample[k] = corr[idx[k]];
      }
      if (auto p = try_fit(prior, sample, cam, 10)) consider(*p);
      if (best.inliers.size() == n) break;
    }
    if (best.inliers.size() >= 3) {
      std::vector<Correspondence> in;
      for (std::size_t i : best.inliers) in.push_back(corr[i]);
      if (auto p = try_fit(best.pose, in, cam, 50)) {
        double err = 0.0;
        auto in2 = score(*p, corr, cam, cfg.threshold, err);
        if (in2.size() >= best.inliers.size()) {
          best = {*p, std::move(in2)};
          best_err = err;
        }
      }
    }
  }
  // A minimal set cannot reach min_inliers; it must fit exactly instead.
  const std::size_t needed = n <= 3 ? n : static_cast<std::size_t>(std::max(cfg.min_inliers, 3));
  if (best.inliers.size() < needed) {
    throw Error(Errc::InsufficientInliers,
                "best model has " + std::to_string(best.inliers.size()) + " inliers");
  }
  return best;
}

}  // namespace evio
