#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "evio/error.hpp"
#include "evio/estimator.hpp"
#include "oracles.hpp"

using namespace evio;

namespace {

const Camera kCam(240, 240, 173, 130, 346, 260);

Errc code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  return Errc::Io;
}

Pose translated(double x, double y, double z) {
  Pose p;
  p.translation = Vec3(x, y, z);
  return p;
}

// Points in front of `pose`, visible in the image, with exact projections.
std::vector<Correspondence> scene(std::mt19937_64& rng, const Pose& pose, int n) {
  std::uniform_real_distribution<double> ux(20, 326), uy(20, 240), ud(1.5, 6.0);
  std::vector<Correspondence> out;
  for (int i = 0; i < n; ++i) {
    const Vec2 px(ux(rng), uy(rng));
    out.push_back({pose * kCam.backproject(px, ud(rng)), px});
  }
  return out;
}

double reprojection_cost(const Pose& T, std::span<const Correspondence> c) {
  double s = 0;
  for (const auto& k : c) s += reprojection_residual(T, k, kCam).squaredNorm();
  return s;
}

double pose_error(const Pose& a, const Pose& b) {
  return rotation_distance(a.rotation, b.rotation) + (a.translation - b.translation).norm();
}

}  // namespace

TEST_CASE("triangulation of a noiseless point") {
  const Vec3 X(1, 2, 5);
  const Pose a = Pose::identity(), b = translated(0.5, 0, 0);
  const Triangulation t =
      triangulate(kCam.project(a.inverse() * X), kCam.project(b.inverse() * X), a, b, kCam);
  CHECK((t.point - X).norm() < 1e-6);
  CHECK(t.reprojection_error < 1e-6);
}

TEST_CASE("triangulation under random poses") {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-1, 1);
  double worst = 0, worst_px = 0;
  for (int i = 0; i < 200; ++i) {
    const Pose a = oracle::random_pose(rng, 0.3, 0.5);
    const Pose b = a * se3_exp({Vec3(0.3 + 0.2 * u(rng), 0.1 * u(rng), 0.1 * u(rng)), 0.05 * Vec3(u(rng), u(rng), u(rng))});
    const Vec3 X = a * Vec3(u(rng), u(rng), 4 + u(rng));
    const Triangulation t =
        triangulate(kCam.project(a.inverse() * X), kCam.project(b.inverse() * X), a, b, kCam);
    worst = std::max(worst, (t.point - X).norm());
    worst_px = std::max(worst_px, t.reprojection_error);
  }
  CHECK(worst < 1e-6);
  CHECK(worst_px < 1e-6);
}

TEST_CASE("triangulation symmetric setup") {
  const Pose a = translated(-0.25, 0, 0), b = translated(0.25, 0, 0);
  const Vec3 X(0, 0.7, 3.25);
  const Triangulation t =
      triangulate(kCam.project(a.inverse() * X), kCam.project(b.inverse() * X), a, b, kCam);
  CHECK(std::abs(t.point.z() - 3.25) < 1e-9);
  CHECK(std::abs(t.point.x()) < 1e-9);
}

TEST_CASE("triangulation degeneracies") {
  const Vec2 px(100, 100);
  CHECK(code_of([&] { triangulate(px, px, Pose::identity(), Pose::identity(), kCam); }) ==
        Errc::DegenerateBaseline);
  CHECK(code_of([&] { triangulate(px, px, Pose::identity(), translated(1, 0, 0), kCam); }) ==
        Errc::ParallelRays);
}

TEST_CASE("reprojection jacobian matches central differences") {
  std::mt19937_64 rng(2);
  double worst = 0;
  for (int i = 0; i < 100; ++i) {
    const Pose T = oracle::random_pose(rng, 1.0);
    const Correspondence c{T * kCam.backproject(Vec2(40 + i * 2.5, 30 + i * 1.7), 2.0 + 0.03 * i),
                           Vec2(170, 120)};
    Eigen::Matrix<double, 2, 6> J;
    reprojection_residual(T, c, kCam, &J);
    const double h = 1e-6;
    for (int k = 0; k < 6; ++k) {
      Vec6 d = Vec6::Zero();
      d[k] = h;
      const Vec2 fd = (reprojection_residual(se3_exp(Twist::from_vector(d)) * T, c, kCam) -
                       reprojection_residual(se3_exp(Twist::from_vector(-d)) * T, c, kCam)) /
                      (2 * h);
      const double scale = std::max(1.0, J.col(k).norm());
      worst = std::max(worst, (fd - J.col(k)).norm() / scale);
    }
  }
  CHECK(worst < 1e-5);
}

TEST_CASE("mean inverse depth jacobian matches central differences") {
  std::mt19937_64 rng(3);
  double worst = 0;
  for (int i = 0; i < 100; ++i) {
    const Pose T = oracle::random_pose(rng, 1.0);
    const auto c = scene(rng, T, 10);
    Eigen::Matrix<double, 1, 6> J;
    const double v = mean_inverse_depth(T, c, &J);
    double ref = 0;
    for (const auto& k : c) ref += 1.0 / (T.inverse() * k.point).z();
    CHECK(v == doctest::Approx(ref / c.size()).epsilon(1e-12));
    const double h = 1e-6;
    for (int k = 0; k < 6; ++k) {
      Vec6 d = Vec6::Zero();
      d[k] = h;
      const double fd = (mean_inverse_depth(se3_exp(Twist::from_vector(d)) * T, c) -
                         mean_inverse_depth(se3_exp(Twist::from_vector(-d)) * T, c)) /
                        (2 * h);
      worst = std::max(worst, std::abs(fd - J(0, k)) / std::max(1.0, std::abs(J(0, k))));
    }
  }
  CHECK(worst < 1e-5);
}

TEST_CASE("refinement at the true pose takes no step") {
  std::mt19937_64 rng(4);
  const Pose T = oracle::random_pose(rng, 0.5);
  const auto c = scene(rng, T, 30);
  const RefineResult r = refine_pose_detailed(T, c, kCam);
  CHECK(r.iterations == 0);
  CHECK(pose_error(r.pose, T) < 1e-10);
}

TEST_CASE("refinement converges from a perturbed start") {
  std::mt19937_64 rng(5);
  for (int i = 0; i < 20; ++i) {
    const Pose T = oracle::random_pose(rng, 1.0);
    const auto c = scene(rng, T, 30);
    const Pose start = se3_exp({Vec3(0.05, -0.03, 0.04), Vec3(0.02, 0.03, -0.01)}) * T;
    CHECK(pose_error(refine_pose(start, c, kCam), T) < 1e-8);
  }
}

TEST_CASE("an uninformative depth term changes nothing") {
  std::mt19937_64 rng(6);
  const Pose T = oracle::random_pose(rng, 0.5);
  auto c = scene(rng, T, 25);
  std::normal_distribution<double> n(0, 0.5);
  for (auto& k : c) k.pixel += Vec2(n(rng), n(rng));
  const Pose start = se3_exp({Vec3(0.02, 0.01, -0.02), Vec3(0.01, 0, 0.01)}) * T;
  DepthResidualTerm term;
  term.rho_roi = 0.4;
  term.scale = 1.3;
  term.sigma = 1e300;
  const Pose a = refine_pose(start, c, kCam);
  const Pose b = refine_pose(start, c, kCam, term);
  CHECK(oracle::pose_distance(a, b) < 1e-10);
}

TEST_CASE("the depth term pulls mean inverse depth toward the prior") {
  std::mt19937_64 rng(7);
  const Pose T = Pose::identity();
  auto c = scene(rng, T, 25);
  const double rho = mean_inverse_depth(T, c);
  DepthResidualTerm term;
  term.rho_roi = rho * 1.2;
  term.scale = 1.0;
  term.sigma = 1e-8;
  const Pose p = refine_pose(T, c, kCam, term);
  CHECK(std::abs(mean_inverse_depth(p, c) - term.rho_roi) < std::abs(rho - term.rho_roi));
}

TEST_CASE("refinement cost is monotone in the iteration budget") {
  std::mt19937_64 rng(8);
  const Pose T = oracle::random_pose(rng, 0.5);
  auto c = scene(rng, T, 40);
  std::normal_distribution<double> n(0, 1.0);
  for (auto& k : c) k.pixel += Vec2(n(rng), n(rng));
  const Pose start = se3_exp({Vec3(0.2, -0.1, 0.15), Vec3(0.1, 0.05, -0.08)}) * T;
  double prev = reprojection_cost(start, c);
  for (int it = 1; it <= 12; ++it) {
    RefineOptions opts;
    opts.max_iters = it;
    const RefineResult r = refine_pose_detailed(start, c, kCam, std::nullopt, opts);
    CHECK(r.cost <= prev * (1 + 1e-12));
    CHECK(r.cost == doctest::Approx(reprojection_cost(r.pose, c)).epsilon(1e-9));
    prev = r.cost;
  }
}

TEST_CASE("ransac on a noiseless set") {
  std::mt19937_64 rng(9);
  for (int i = 0; i < 10; ++i) {
    const Pose T = oracle::random_pose(rng, 1.0);
    const auto c = scene(rng, T, 40);
    const Pose prior = se3_exp({Vec3(0.05, 0.02, -0.03), Vec3(0.02, -0.01, 0.03)}) * T;
    const RansacResult r = ransac_pose(c, kCam, prior);
    CHECK(pose_error(r.pose, T) < 1e-6);
    CHECK(r.inliers.size() == c.size());
  }
}

TEST_CASE("ransac isolates gross outliers") {
  std::mt19937_64 rng(10);
  std::uniform_real_distribution<double> ux(0, 345), uy(0, 259);
  for (int trial = 0; trial < 10; ++trial) {
    const Pose T = oracle::random_pose(rng, 1.0);
    auto c = scene(rng, T, 50);
    std::vector<std::size_t> truth;
    for (std::size_t i = 0; i < c.size(); ++i) {
      if (i % 10 < 3) {
        Vec2 px;
        do px = Vec2(ux(rng), uy(rng));
        while ((px - c[i].pixel).norm() < 10);
        c[i].pixel = px;
      } else {
        truth.push_back(i);
      }
    }
    const Pose prior = se3_exp({Vec3(0.03, 0.02, -0.03), Vec3(0.02, -0.01, 0.02)}) * T;
    const RansacResult r = ransac_pose(c, kCam, prior);
    CHECK(r.inliers == truth);
    CHECK(pose_error(r.pose, T) < 1e-6);
  }
}

TEST_CASE("ransac with three correspondences fits them all") {
  std::mt19937_64 rng(11);
  const Pose T = oracle::random_pose(rng, 0.5);
  const auto c = scene(rng, T, 3);
  const Pose prior = se3_exp({Vec3(0.01, 0.01, 0), Vec3(0, 0.01, 0)}) * T;
  const RansacResult r = ransac_pose(c, kCam, prior);
  CHECK(r.inliers.size() == 3);
  CHECK(reprojection_cost(r.pose, c) < 1e-12);
}

TEST_CASE("ransac is deterministic and reports insufficient inliers") {
  std::mt19937_64 rng(12);
  const Pose T = oracle::random_pose(rng, 0.5);
  auto c = scene(rng, T, 30);
  std::normal_distribution<double> n(0, 0.7);
  for (auto& k : c) k.pixel += Vec2(n(rng), n(rng));
  const RansacResult a = ransac_pose(c, kCam, T);
  const RansacResult b = ransac_pose(c, kCam, T);
  CHECK(a.pose == b.pose);
  CHECK(a.inliers == b.inliers);

  std::uniform_real_distribution<double> ux(0, 345), uy(0, 259);
  auto junk = scene(rng, T, 12);
  for (auto& k : junk) k.pixel = Vec2(ux(rng), uy(rng));
  CHECK(code_of([&] { ransac_pose(junk, kCam, T); }) == Errc::InsufficientInliers);
  CHECK(code_of([&] { ransac_pose(std::span(junk).first(2), kCam, T); }) == Errc::InsufficientInliers);
}
