#include "evio/geometry.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <numbers>
#include <sstream>
#include <string>

#include "evio/error.hpp"

namespace evio {

Mat3 skew(const Vec3& v) {
  Mat3 s;
  // clang-format off
  s <<     0.0, -v.z(),  v.y(),
         v.z(),    0.0, -v.x(),
        -v.y(),  v.x(),    0.0;
  // clang-format on
  return s;
}

// ---------------------------------------------------------------------------
// Rotation

namespace {

Eigen::Quaterniond canonical(Eigen::Quaterniond q) {
  q.normalize();
  if (q.w() < 0.0) q.coeffs() = -q.coeffs();
  return q;
}

// (1 - cos t) / t^2, written to avoid cancellation.
double coeff_b(double theta) {
  if (theta < kSmallAngle) return 0.5 - theta * theta / 24.0;
  const double s = std::sin(0.5 * theta);
  return 2.0 * s * s / (theta * theta);
}

// (t - sin t) / t^3
double coeff_c(double theta) {
  if (theta < 1e-3) {
    const double t2 = theta * theta;
    return 1.0 / 6.0 - t2 / 120.0 + t2 * t2 / 5040.0;
  }
  return (theta - std::sin(theta)) / (theta * theta * theta);
}

// (1 - (t/2) cot(t/2)) / t^2, the [phi]x^2 coefficient of V^-1.
double coeff_vinv(double theta) {
  if (theta < 1e-3) {
    const double t2 = theta * theta;
    return 1.0 / 12.0 + t2 / 720.0 + t2 * t2 / 30240.0;
  }
  const double half = 0.5 * theta;
  return (1.0 - half * std::cos(half) / std::sin(half)) / (theta * theta);
}

}  // namespace

Rotation Rotation::from_quaternion(double w, double x, double y, double z) {
  return Rotation(canonical(Eigen::Quaterniond(w, x, y, z)));
}

Rotation Rotation::from_quaternion(const Eigen::Quaterniond& q) {
  return Rotation(canonical(q));
}

Rotation Rotation::from_matrix(const Mat3& m) {
  return Rotation(canonical(Eigen::Quaterniond(m)));
}

Rotation Rotation::exp(const Vec3& phi) {
  const double theta = phi.norm();
  Eigen::Quaterniond q;
  if (theta < kSmallAngle) {
    const double t2 = theta * theta;
    q.w() = 1.0 - t2 / 8.0;
    q.vec() = (0.5 - t2 / 48.0) * phi;
  } else {
    q.w() = std::cos(0.5 * theta);
    q.vec() = (std::sin(0.5 * theta) / theta) * phi;
  }
  return Rotation(canonical(q));
}

Vec3 Rotation::log() const {
  const Vec3 v = q_.vec();
  const double n = v.norm();
  const double w = q_.w();
  const double theta = 2.0 * std::atan2(n, w);
  if (theta < kSmallAngle) {
    return (2.0 / w) * (1.0 - n * n / (3.0 * w * w)) * v;
  }
  return (theta / n) * v;
}

double Rotation::angle() const {
  return 2.0 * std::atan2(q_.vec().norm(), q_.w());
}

Rotation Rotation::operator*(const Rotation& other) const {
  return Rotation(canonical(q_ * other.q_));
}

Rotation Rotation::inverse() const {
  // Conjugate keeps w, so it is already canonical.
  return Rotation(q_.conjugate());
}

double rotation_distance(const Rotation& a, const Rotation& b) {
  return (a.inverse() * b).angle();
}

// ---------------------------------------------------------------------------
// SE(3)

Mat4 Pose::matrix() const {
  Mat4 m = Mat4::Identity();
  m.topLeftCorner<3, 3>() = rotation.matrix();
  m.topRightCorner<3, 1>() = translation;
  return m;
}

Vec6 Twist::vector() const {
  Vec6 v;
  v << rho, phi;
  return v;
}

Twist Twist::from_vector(const Vec6& v) {
  return {v.head<3>(), v.tail<3>()};
}

Pose se3_exp(const Twist& xi) {
  const double theta = xi.phi.norm();
  const Vec3 phi_x_rho = xi.phi.cross(xi.rho);
  const Vec3 t = xi.rho + coeff_b(theta) * phi_x_rho + coeff_c(theta) * xi.phi.cross(phi_x_rho);
  return {Rotation::exp(xi.phi), t};
}

Twist se3_log(const Pose& T) {
  const double theta = T.rotation.angle();
  if (std::numbers::pi - theta < 1e-6) {
    throw Error(Errc::AngleNearPi, "rotation angle " + std::to_string(theta));
  }
  const Vec3 phi = T.rotation.log();
  const Vec3 phi_x_t = phi.cross(T.translation);
  const Vec3 rho = T.translation - 0.5 * phi_x_t + coeff_vinv(theta) * phi.cross(phi_x_t);
  return {rho, phi};
}

Pose interpolate_pose(const Pose& T0, const Pose& T1, double alpha) {
  if (alpha == 0.0) return T0;
  const Twist delta = se3_log(T0.inverse() * T1);
  return T0 * se3_exp(delta * alpha);
}

// ---------------------------------------------------------------------------
// Camera

Camera::Camera(double fx, double fy, double cx, double cy, int width, int height,
               Distortion distortion)
    : fx_(fx), fy_(fy), cx_(cx), cy_(cy), width_(width), height_(height), dist_(distortion) {
  if (!(fx > 0.0) || !(fy > 0.0)) {
    throw Error(Errc::InvalidArgument, "focal lengths must be positive");
  }
  if (width <= 0 || height <= 0) {
    throw Error(Errc::InvalidArgument, "sensor dimensions must be positive");
  }
  if (!(cx >= 0.0 && cx < width) || !(cy >= 0.0 && cy < height)) {
    throw Error(Errc::InvalidArgument, "principal point outside sensor");
  }
}

Camera Camera::pinhole() const {
  Camera c = *this;
  c.dist_ = {};
  return c;
}

Vec2 Camera::distort(const Vec2& n) const {
  const double x = n.x(), y = n.y();
  const double r2 = x * x + y * y;
  const double radial = 1.0 + r2 * (dist_.k1 + r2 * (dist_.k2 + r2 * dist_.k3));
  const double xd = x * radial + 2.0 * dist_.p1 * x * y + dist_.p2 * (r2 + 2.0 * x * x);
  const double yd = y * radial + dist_.p1 * (r2 + 2.0 * y * y) + 2.0 * dist_.p2 * x * y;
  return {xd, yd};
}

Vec2 Camera::undistort(const Vec2& d) const {
  Vec2 n = d;
  for (int iter = 0; iter < 20; ++iter) {
    const double x = n.x(), y = n.y();
    const double r2 = x * x + y * y;
    const double radial = 1.0 + r2 * (dist_.k1 + r2 * (dist_.k2 + r2 * dist_.k3));
    const double dx = 2.0 * dist_.p1 * x * y + dist_.p2 * (r2 + 2.0 * x * x);
    const double dy = dist_.p1 * (r2 + 2.0 * y * y) + 2.0 * dist_.p2 * x * y;
    const Vec2 next((d.x() - dx) / radial, (d.y() - dy) / radial);
    const double step = (next - n).norm();
    n = next;
    if (step < 1e-10) break;
  }
  return n;
}

Vec2 Camera::project(const Vec3& p) const {
  if (!(p.z() > 1e-6)) {
    throw Error(Errc::BehindCamera, "point depth " + std::to_string(p.z()));
  }
  Vec2 n(p.x() / p.z(), p.y() / p.z());
  if (has_distortion()) n = distort(n);
  return {fx_ * n.x() + cx_, fy_ * n.y() + cy_};
}

Eigen::Matrix<double, 2, 3> Camera::project_jacobian(const Vec3& p) const {
  const double iz = 1.0 / p.z();
  const double x = p.x() * iz, y = p.y() * iz;
  Eigen::Matrix<double, 2, 3> dn;
  dn << iz, 0.0, -x * iz, 0.0, iz, -y * iz;

  Eigen::Matrix2d dd = Eigen::Matrix2d::Identity();
  if (has_distortion()) {
    const double r2 = x * x + y * y;
    const double radial = 1.0 + r2 * (dist_.k1 + r2 * (dist_.k2 + r2 * dist_.k3));
    const double g = dist_.k1 + r2 * (2.0 * dist_.k2 + 3.0 * dist_.k3 * r2);
    const double cross = 2.0 * g * x * y + 2.0 * dist_.p1 * x + 2.0 * dist_.p2 * y;
    dd << radial + 2.0 * g * x * x + 2.0 * dist_.p1 * y + 6.0 * dist_.p2 * x, cross,
        cross, radial + 2.0 * g * y * y + 6.0 * dist_.p1 * y + 2.0 * dist_.p2 * x;
  }
  Eigen::Matrix<double, 2, 3> J = dd * dn;
  J.row(0) *= fx_;
  J.row(1) *= fy_;
  return J;
}

Vec3 Camera::backproject(const Vec2& pixel, double depth) const {
  if (!(depth > 0.0)) {
    throw Error(Errc::NonPositiveDepth, "depth " + std::to_string(depth));
  }
  Vec2 n((pixel.x() - cx_) / fx_, (pixel.y() - cy_) / fy_);
  if (has_distortion()) n = undistort(n);
  return {depth * n.x(), depth * n.y(), depth};
}

// ---------------------------------------------------------------------------
// calib.txt

Camera read_calibration(std::istream& in, int width, int height) {
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::istringstream ss(line);
    double v[9];
    for (double& x : v) {
      if (!(ss >> x)) throw Error(Errc::ParseError, "expected 9 calibration values", line_no);
    }
    std::string extra;
    if (ss >> extra) throw Error(Errc::ParseError, "trailing token '" + extra + "'", line_no);
    return Camera(v[0], v[1], v[2], v[3], width, height, {v[4], v[5], v[6], v[7], v[8]});
  }
  throw Error(Errc::ParseError, "empty calibration", line_no + 1);
}

Camera load_calibration(const std::filesystem::path& path, int width, int height) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::Io, "cannot open " + path.string());
  return read_calibration(in, width, height);
}

void write_calibration(std::ostream& out, const Camera& cam) {
  const auto& d = cam.distortion();
  out << std::setprecision(17) << cam.fx() << ' ' << cam.fy() << ' ' << cam.cx() << ' '
      << cam.cy() << ' ' << d.k1 << ' ' << d.k2 << ' ' << d.p1 << ' ' << d.p2 << ' ' << d.k3
      << '\n';
}

}  // namespace evio
