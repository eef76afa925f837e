#include "evio/evaluation.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "evio/error.hpp"
#include "evio/event_stream.hpp"

namespace evio {

std::vector<StampedPose> read_trajectory(std::istream& in) {
  std::vector<StampedPose> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::istringstream ss(line);
    std::string tok;
    if (!(ss >> tok) || tok[0] == '#') continue;
    TimeNs t = 0;
    if (!parse_seconds(tok, t)) throw Error(Errc::ParseError, "bad timestamp '" + tok + "'", line_no);
    double v[7];
    for (double& x : v) {
      if (!(ss >> x) || !std::isfinite(x)) {
        throw Error(Errc::ParseError, "expected 8 numeric fields", line_no);
      }
    }
    if (ss >> tok) throw Error(Errc::ParseError, "trailing field '" + tok + "'", line_no);
    const double qn = std::sqrt(v[3] * v[3] + v[4] * v[4] + v[5] * v[5] + v[6] * v[6]);
    if (!(qn > 1e-9)) throw Error(Errc::ParseError, "zero quaternion", line_no);
    if (!out.empty() && t <= out.back().t) {
      throw Error(Errc::NonMonotonicTimestamp, "timestamps must increase", line_no);
    }
    StampedPose sp;
    sp.t = t;
    sp.pose.translation = Vec3(v[0], v[1], v[2]);
    sp.pose.rotation = Rotation::from_quaternion(v[6], v[3], v[4], v[5]);
    out.push_back(sp);
  }
  return out;
}

std::vector<StampedPose> load_trajectory(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::Io, "cannot open " + path.string());
  return read_trajectory(in);
}

void write_trajectory(std::ostream& out, std::span<const StampedPose> traj) {
  char buf[64];
  for (const StampedPose& sp : traj) {
    out << format_seconds(sp.t);
    const Eigen::Quaterniond q = sp.pose.rotation.quaternion();
    const double vals[7] = {sp.pose.translation.x(), sp.pose.translation.y(),
                            sp.pose.translation.z(), q.x(), q.y(), q.z(), q.w()};
    for (double v : vals) {
      auto [p, ec] = std::to_chars(buf, buf + sizeof(buf), v);
      out << ' ' << std::string_view(buf, static_cast<std::size_t>(p - buf));
    }
    out << '\n';
  }
}

void save_trajectory(const std::filesystem::path& path, std::span<const StampedPose> traj) {
  std::ofstream out(path);
  if (!out) throw Error(Errc::Io, "cannot write " + path.string());
  write_trajectory(out, traj);
  if (!out) throw Error(Errc::Io, "write failed: " + path.string());
}

namespace {

Pose interpolate_gt(const StampedPose& a, const StampedPose& b, TimeNs t) {
  if (b.t == a.t) return a.pose;
  const double s = static_cast<double>(t - a.t) / static_cast<double>(b.t - a.t);
  Pose p;
  p.translation = (1.0 - s) * a.pose.translation + s * b.pose.translation;
  const Rotation rel = a.pose.rotation.inverse() * b.pose.rotation;
  p.rotation = a.pose.rotation * Rotation::exp(s * rel.log());
  return p;
}

}  // namespace

Association associate(std::span<const StampedPose> est, std::span<const StampedPose> gt,
                      TimeNs max_dt) {
  if (est.empty() || gt.empty()) throw Error(Errc::NoOverlap, "empty trajectory");
  Association out;
  for (const StampedPose& e : est) {
    auto it = std::lower_bound(gt.begin(), gt.end(), e.t,
                               [](const StampedPose& g, TimeNs t) { return g.t < t; });
    TimeNs nearest = std::numeric_limits<TimeNs>::max();
    if (it != gt.end()) nearest = std::min(nearest, it->t - e.t);
    if (it != gt.begin()) nearest = std::min(nearest, e.t - std::prev(it)->t);
    if (nearest > max_dt) {
      ++out.dropped;
      continue;
    }
    Pose g;
    if (it != gt.end() && it->t == e.t) {
      g = it->pose;
    } else if (it == gt.end()) {
      g = std::prev(it)->pose;
    } else if (it == gt.begin()) {
      g = it->pose;
    } else {
      g = interpolate_gt(*std::prev(it), *it, e.t);
    }
    out.pairs.push_back({e.t, e.pose, g});
  }
  if (out.pairs.empty()) throw Error(Errc::NoOverlap, "no estimate lies within max_dt of ground truth");
  return out;
}

std::string_view to_string(AlignMode m) {
  switch (m) {
    case AlignMode::Se3: return "se3";
    case AlignMode::Sim3: return "sim3";
    case AlignMode::None: return "none";
  }
  return "se3";
}

AlignMode parse_align_mode(std::string_view name) {
  if (name == "se3") return AlignMode::Se3;
  if (name == "sim3") return AlignMode::Sim3;
  if (name == "none") return AlignMode::None;
  throw Error(Errc::InvalidArgument, "unknown alignment mode: " + std::string(name));
}

Alignment align(std::span<const PosePair> pairs, AlignMode mode) {
  Alignment a;
  a.mode = mode;
  if (mode == AlignMode::None || pairs.empty()) {
    a.mode = AlignMode::None;
    return a;
  }
  const double n = static_cast<double>(pairs.size());
  Vec3 mu_e = Vec3::Zero(), mu_g = Vec3::Zero();
  for (const PosePair& p : pairs) {
    mu_e += p.est.translation;
    mu_g += p.gt.translation;
  }
  mu_e /= n;
  mu_g /= n;
  if (pairs.size() < 3) {
    a.mode = AlignMode::Se3;
    if (mode == AlignMode::Sim3) a.warning = "fewer than 3 pairs: translation-only alignment";
    a.translation = mu_g - mu_e;
    return a;
  }
  Mat3 cov = Mat3::Zero();
  double var_e = 0.0;
  for (const PosePair& p : pairs) {
    const Vec3 de = p.est.translation - mu_e;
    cov += (p.gt.translation - mu_g) * de.transpose();
    var_e += de.squaredNorm();
  }
  cov /= n;
  var_e /= n;

  if (mode == AlignMode::Sim3) {
    Mat3 ce = Mat3::Zero();
    for (const PosePair& p : pairs) {
      const Vec3 de = p.est.translation - mu_e;
      ce += de * de.transpose();
    }
    const Vec3 sv = Eigen::JacobiSVD<Mat3>(ce).singularValues();
    if (!(sv[0] > 0.0) || sv[1] <= 1e-10 * sv[0]) {
      a.mode = AlignMode::Se3;
      a.warning = "collinear positions: sim3 alignment fell back to se3";
    }
  }

  Eigen::JacobiSVD<Mat3> svd(cov, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Mat3 S = Mat3::Identity();
  if (svd.matrixU().determinant() * svd.matrixV().determinant() < 0.0) S(2, 2) = -1.0;
  const Mat3 R = svd.matrixU() * S * svd.matrixV().transpose();
  double scale = 1.0;
  if (a.mode == AlignMode::Sim3) {
    scale = (svd.singularValues().asDiagonal() * S).trace() / var_e;
  }
  a.rotation = Rotation::from_matrix(R);
  a.scale = scale;
  a.translation = mu_g - scale * (R * mu_e);
  return a;
}

std::vector<PosePair> apply_alignment(std::span<const PosePair> pairs, const Alignment& a) {
  std::vector<PosePair> out(pairs.begin(), pairs.end());
  for (PosePair& p : out) {
    p.est.translation = a.scale * (a.rotation * p.est.translation) + a.translation;
    p.est.rotation = a.rotation * p.est.rotation;
  }
  return out;
}

ApeStats ape_stats(std::span<const double> residuals) {
  if (residuals.empty()) throw Error(Errc::InvalidArgument, "no residuals");
  ApeStats s;
  s.residuals.assign(residuals.begin(), residuals.end());
  double sum = 0.0, sq = 0.0;
  for (double r : residuals) {
    sum += r;
    sq += r * r;
  }
  const double n = static_cast<double>(residuals.size());
  s.mean = sum / n;
  s.rmse = std::sqrt(sq / n);
  std::vector<double> sorted = s.residuals;
  std::sort(sorted.begin(), sorted.end());
  s.min = sorted.front();
  s.max = sorted.back();
  const std::size_t m = sorted.size() / 2;
  s.median = sorted.size() % 2 == 1 ? sorted[m] : 0.5 * (sorted[m - 1] + sorted[m]);
  return s;
}

ApeStats ape_stats(std::span<const PosePair> aligned) {
  std::vector<double> r;
  r.reserve(aligned.size());
  for (const PosePair& p : aligned) r.push_back((p.est.translation - p.gt.translation).norm());
  return ape_stats(std::span<const double>(r));
}

void write_ape_csv(std::ostream& out, std::span<const PosePair> aligned, const ApeStats& stats) {
  out << "t,est_x,est_y,est_z,gt_x,gt_y,gt_z,ape\n";
  char buf[64];
  auto num = [&](double v) {
    auto [p, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, p);
  };
  for (std::size_t i = 0; i < aligned.size(); ++i) {
    const PosePair& p = aligned[i];
    out << format_seconds(p.t) << ',' << num(p.est.translation.x()) << ','
        << num(p.est.translation.y()) << ',' << num(p.est.translation.z()) << ','
        << num(p.gt.translation.x()) << ',' << num(p.gt.translation.y()) << ','
        << num(p.gt.translation.z()) << ',' << num(stats.residuals.at(i)) << '\n';
  }
}

double trajectory_diameter(std::span<const StampedPose> traj) {
  double best = 0.0;
  for (std::size_t i = 0; i < traj.size(); ++i) {
    for (std::size_t j = i + 1; j < traj.size(); ++j) {
      best = std::max(best, (traj[i].pose.translation - traj[j].pose.translation).norm());
    }
  }
  return best;
}

}  // namespace evio
