#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>

#include <Eigen/Core>
#include <Eigen/Geometry>

namespace evio {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Vec6 = Eigen::Matrix<double, 6, 1>;
using Mat3 = Eigen::Matrix3d;
using Mat4 = Eigen::Matrix4d;

// Timestamps are integer nanoseconds everywhere inside the library.
using TimeNs = std::int64_t;

inline constexpr double kNsPerSec = 1e9;
inline constexpr double kSmallAngle = 1e-8;

Mat3 skew(const Vec3& v);

/// Unit quaternion rotation. The double cover is canonicalized so that w >= 0.
class Rotation {
 public:
  Rotation() = default;

  static Rotation identity() { return {}; }
  /// Normalizes and canonicalizes (w, x, y, z).
  static Rotation from_quaternion(double w, double x, double y, double z);
  static Rotation from_quaternion(const Eigen::Quaterniond& q);
  /// Exponential map of so(3).
  static Rotation exp(const Vec3& phi);
  static Rotation from_matrix(const Mat3& m);

  /// Logarithm in so(3); angle in [0, pi].
  Vec3 log() const;
  double angle() const;

  Rotation operator*(const Rotation& other) const;
  Vec3 operator*(const Vec3& v) const { return q_ * v; }
  Rotation inverse() const;

  Mat3 matrix() const { return q_.toRotationMatrix(); }
  const Eigen::Quaterniond& quaternion() const { return q_; }

  bool operator==(const Rotation& o) const { return q_.coeffs() == o.q_.coeffs(); }

 private:
  explicit Rotation(const Eigen::Quaterniond& q) : q_(q) {}
  Eigen::Quaterniond q_{1.0, 0.0, 0.0, 0.0};
};

/// Rigid transform. Poses map camera-frame points into the world frame.
struct Pose {
  Rotation rotation;
  Vec3 translation = Vec3::Zero();

  static Pose identity() { return {}; }

  Pose operator*(const Pose& other) const {
    return {rotation * other.rotation, rotation * other.translation + translation};
  }
  Vec3 operator*(const Vec3& p) const { return rotation * p + translation; }
  Pose inverse() const {
    const Rotation inv = rotation.inverse();
    return {inv, -(inv * translation)};
  }
  Mat4 matrix() const;

  bool operator==(const Pose& o) const {
    return rotation == o.rotation && translation == o.translation;
  }
};

struct StampedPose {
  TimeNs t = 0;
  Pose pose;
};

/// se(3) tangent vector. rho is the translational part (m), phi the rotational part (rad).
struct Twist {
  Vec3 rho = Vec3::Zero();
  Vec3 phi = Vec3::Zero();

  Vec6 vector() const;
  static Twist from_vector(const Vec6& v);
  Twist operator*(double s) const { return {rho * s, phi * s}; }
};

Pose se3_exp(const Twist& xi);
/// Throws Errc::AngleNearPi when the rotation angle is within 1e-6 of pi.
Twist se3_log(const Pose& T);

/// Geodesic T0 -> T1; alpha = 0 returns T0 bit-for-bit.
Pose interpolate_pose(const Pose& T0, const Pose& T1, double alpha);

/// Pose rotation/translation distance helpers used by tests and the evaluator.
double rotation_distance(const Rotation& a, const Rotation& b);

/// Radial-tangential (plumb bob) distortion coefficients.
struct Distortion {
  double k1 = 0.0, k2 = 0.0, p1 = 0.0, p2 = 0.0, k3 = 0.0;
  bool is_zero() const { return k1 == 0 && k2 == 0 && p1 == 0 && p2 == 0 && k3 == 0; }
};

class Camera {
 public:
  Camera() = default;
  /// Validates fx, fy > 0 and the principal point lying on the sensor.
  Camera(double fx, double fy, double cx, double cy, int width, int height,
         Distortion distortion = {});

  double fx() const { return fx_; }
  double fy() const { return fy_; }
  double cx() const { return cx_; }
  double cy() const { return cy_; }
  int width() const { return width_; }
  int height() const { return height_; }
  const Distortion& distortion() const { return dist_; }
  bool has_distortion() const { return !dist_.is_zero(); }

  /// Same intrinsics without lens distortion.
  Camera pinhole() const;

  bool in_bounds(const Vec2& px) const {
    return px.x() >= 0.0 && px.y() >= 0.0 && px.x() <= width_ - 1 && px.y() <= height_ - 1;
  }

  Vec2 distort(const Vec2& normalized) const;
  /// Fixed-point inversion of distort(): at most 20 iterations, tolerance 1e-10.
  Vec2 undistort(const Vec2& distorted) const;

  /// Throws Errc::BehindCamera when p.z <= 1e-6.
  Vec2 project(const Vec3& p) const;
  /// 2x3 derivative of project() at p.
  Eigen::Matrix<double, 2, 3> project_jacobian(const Vec3& p) const;
  /// z-depth back-projection; throws Errc::NonPositiveDepth when depth <= 0.
  Vec3 backproject(const Vec2& pixel, double depth) const;

 private:
  double fx_ = 1.0, fy_ = 1.0, cx_ = 0.0, cy_ = 0.0;
  int width_ = 1, height_ = 1;
  Distortion dist_;
};

/// `calib.txt`: one line `fx fy cx cy k1 k2 p1 p2 k3`. Sensor size is not part of the file.
Camera read_calibration(std::istream& in, int width, int height);
Camera load_calibration(const std::filesystem::path& path, int width, int height);
void write_calibration(std::ostream& out, const Camera& cam);

}  // namespace evio
