#include "evio/odometry.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <optional>
#include <unordered_map>

#include "evio/error.hpp"

namespace evio {

std::string_view to_string(WarpDepthMode m) {
  return m == WarpDepthMode::Scene ? "scene" : "landmarks";
}

WarpDepthMode parse_warp_depth(std::string_view name) {
  if (name == "scene") return WarpDepthMode::Scene;
  if (name == "landmarks") return WarpDepthMode::Landmarks;
  throw Error(Errc::InvalidArgument, "unknown warp depth mode: " + std::string(name));
}

std::string_view to_string(Predictor p) { return p == Predictor::Imu ? "imu" : "cv"; }

Predictor parse_predictor(std::string_view name) {
  if (name == "imu") return Predictor::Imu;
  if (name == "cv") return Predictor::ConstantVelocity;
  throw Error(Errc::InvalidArgument, "unknown predictor: " + std::string(name));
}

std::vector<StampedPose> OdometryResult::trajectory() const {
  std::vector<StampedPose> out;
  out.reserve(frames.size());
  for (const FrameState& f : frames) out.push_back({f.timestamp, f.pose});
  return out;
}

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

bool imu_covers(std::span<const ImuSample> imu, TimeNs t0, TimeNs t1) {
  return !imu.empty() && imu.front().t <= t0 && imu.back().t >= t1;
}

double median(std::vector<double> v) {
  const auto mid = v.begin() + static_cast<std::ptrdiff_t>(v.size() / 2);
  std::nth_element(v.begin(), mid, v.end());
  return *mid;
}

std::optional<double> depth_lookup(const DepthMap& map, const Vec2& px) {
  const int x = static_cast<int>(std::lround(px.x()));
  const int y = static_cast<int>(std::lround(px.y()));
  if (x < 0 || y < 0 || x >= map.width() || y >= map.height()) return std::nullopt;
  const float d = map(x, y);
  if (!valid_depth(d)) return std::nullopt;
  return d;
}

class Odometry {
 public:
  Odometry(const OdometryInput& in, const OdometryConfig& cfg, const FrameObserver& observer)
      : in_(in),
        cfg_(cfg),
        observer_(observer),
        cam_(in.camera.has_distortion() ? in.camera.pinhole() : in.camera),
        tracker_(cfg.tracker) {
    if (in_.depth == nullptr) throw Error(Errc::InvalidArgument, "odometry needs a depth source");
    map_source_ = in_.map_depth != nullptr ? in_.map_depth : in_.depth;
    depth_state_.alpha = cfg_.depth.alpha;
    depth_state_.d_min = cfg_.depth.d_min;
    depth_state_.d_max = cfg_.depth.d_max;
    validate(cfg_.enhance);
  }

  OdometryResult run() {
    const auto start = Clock::now();
    for (std::size_t k = 0; k < in_.packets.size(); ++k) {
      const EventPacket& packet = in_.packets[k];
      if (k > 0 && packet.t0 <= in_.packets[k - 1].t0) {
        throw Error(Errc::NonMonotonicTimestamp, "packet start times must increase");
      }
      step(packet);
    }
    result_.scale = scale_;
    result_.timing.total = seconds_since(start);
    return std::move(result_);
  }

 private:
  TimeNs reference_time(const EventPacket& p) const {
    return cfg_.ref_time == RefTime::Start ? p.t0 : p.t0 + (p.t1 - p.t0) / 2;
  }

  bool use_imu(TimeNs t0, TimeNs t1) const {
    return cfg_.predictor == Predictor::Imu && imu_covers(in_.imu, t0, t1);
  }

  // Relative body motion over [t0, t1] under the current velocity estimate.
  Pose predict_motion(TimeNs t0, TimeNs t1) const {
    Pose d = se3_exp(velocity_ * (static_cast<double>(t1 - t0) / kNsPerSec));
    if (use_imu(t0, t1)) d.rotation = integrate_gyro(in_.imu, t0, t1);
    return d;
  }

  double scene_depth(const Pose& T_pred) const {
    if (cfg_.warp_depth == WarpDepthMode::Landmarks || !cfg_.depth.enabled) {
      std::vector<double> z;
      z.reserve(landmarks_.size());
      const Pose inv = T_pred.inverse();
      for (const auto& [id, lm] : landmarks_) {
        const double zc = (inv * lm.position).z();
        if (zc > 0.0) z.push_back(zc);
      }
      if (z.size() >= 3) return median(std::move(z));
    }
    if (cfg_.depth.enabled && d_t_) return *d_t_ / scale_;
    return initial_depth_;
  }

  void step(const EventPacket& packet) {
    const std::size_t k = result_.frames.size();
    const TimeNs t_ref = reference_time(packet);
    const bool keyframe = k % static_cast<std::size_t>(std::max(cfg_.depth.keyframe_interval, 1)) == 0;
    StageTimes& timing = result_.timing;

    auto t = Clock::now();
    DepthMap map = map_source_->depth_at(t_ref);
    if (k == 0) initial_depth_ = roi_mean_depth(map, cfg_.depth.roi_fraction);
    std::optional<double> rho_roi;
    double sigma = cfg_.depth.sigma;
    if (keyframe && cfg_.depth.enabled) {
      const DepthMap prior = in_.depth == map_source_ ? map : in_.depth->depth_at(t_ref);
      const double d_bar = roi_mean_depth(prior, cfg_.depth.roi_fraction);
      d_t_ = smooth_depth(d_bar, depth_state_);
      rho_roi = 1.0 / *d_t_;
      sigma = prior_sigma(cfg_.depth, d_bar);
    }
    timing.depth += seconds_since(t);

    // Prediction at the reference time and over the packet.
    Pose T_pred = Pose::identity();
    if (k > 0) T_pred = last_pose_ * predict_motion(last_time_, t_ref);
    const Pose D = predict_motion(packet.t0, packet.t1);

    t = Clock::now();
    const WarpDepth warp(scene_depth(T_pred),
                         map_source_->per_pixel() && cfg_.warp_depth == WarpDepthMode::Scene
                             ? &map
                             : nullptr);
    CompensationOptions copts;
    copts.ref_time = cfg_.ref_time;
    copts.rectify = in_.camera.has_distortion();
    copts.threads = cfg_.threads;
    const AlignmentCorrection corr{delta_};
    const CompensatedPacket comp =
        compensate_packet(packet, Pose::identity(), D, warp, in_.camera, corr, copts);
    timing.compensate += seconds_since(t);
    timing.events += packet.size();

    t = Clock::now();
    EventFrame frame = accumulate_frame(comp.events, cam_, cfg_.frame_mode, t_ref);
    const Vec2 delta_used = delta_;
    if (cfg_.alignment) {
      // Keep consecutive frames registered: the next correction is the last inter-frame
      // image motion, measured on the corrected frames with the corrections added back.
      if (prev_frame_) {
        const Vec2 shift = update_alignment(*prev_frame_, frame.grid).delta;
        delta_ = shift + delta_used - prev_delta_;
      }
      prev_frame_ = frame.grid;
      prev_delta_ = delta_used;
    }
    const GrayImage gray = frame_to_gray(frame);
    timing.accumulate += seconds_since(t);

    t = Clock::now();
    const GrayImage enhanced = enhance_event_frame(gray, cfg_.enhance);
    timing.enhance += seconds_since(t);

    t = Clock::now();
    std::unordered_map<int, Vec2> guesses;
    const Pose inv_pred = T_pred.inverse();
    for (const auto& [id, lm] : landmarks_) {
      const Vec3 pc = inv_pred * lm.position;
      if (pc.z() <= 1e-6) continue;
      guesses.emplace(id, cam_.project(pc) - delta_used);
    }
    tracker_.step(enhanced, guesses);
    timing.track += seconds_since(t);
    ++timing.frames;
    if (observer_) observer_(k, enhanced, tracker_);

    t = Clock::now();
    const std::vector<int> live = tracker_.live_ids();
    std::vector<int> ids;
    std::vector<Correspondence> corrs;
    for (int id : live) {
      auto it = landmarks_.find(id);
      if (it == landmarks_.end()) continue;
      ids.push_back(id);
      corrs.push_back({it->second.position, tracker_.track(id).positions.back() + delta_used});
    }

    Pose T = T_pred;
    bool lost = false;
    std::vector<std::size_t> inliers;
    if (k > 0) {
      const std::size_t need = std::max<std::size_t>(4, static_cast<std::size_t>(cfg_.ransac.min_inliers));
      if (corrs.size() < need) {
        lost = true;
      } else {
        try {
          RansacResult rr = ransac_pose(corrs, cam_, T_pred, cfg_.ransac);
          T = rr.pose;
          inliers = std::move(rr.inliers);
        } catch (const Error& e) {
          if (e.code() != Errc::InsufficientInliers) throw;
          lost = true;
        }
      }
    }

    if (lost) {
      result_.lost.push_back(t_ref);
      landmarks_.clear();
    } else if (k > 0) {
      std::vector<Correspondence> in_corr;
      in_corr.reserve(inliers.size());
      for (std::size_t i : inliers) in_corr.push_back(corrs[i]);
      if (rho_roi && !result_.scale_samples.empty()) {
        DepthResidualTerm term;
        term.rho_roi = *rho_roi;
        term.scale = scale_;
        term.sigma = sigma;
        try {
          T = refine_pose_detailed(T, in_corr, cam_, term).pose;
        } catch (const Error& e) {
          if (e.code() != Errc::SingularNormalEquations) throw;
        }
      }
      std::vector<bool> is_inlier(corrs.size(), false);
      for (std::size_t i : inliers) is_inlier[i] = true;
      for (std::size_t i = 0; i < corrs.size(); ++i) {
        const int id = ids[i];
        if (!is_inlier[i]) {
          tracker_.mark_lost(id);
          landmarks_.erase(id);
          continue;
        }
        Landmark& lm = landmarks_.at(id);
        lm.observations[static_cast<int>(k)] = corrs[i].pixel;
        refine_landmark(lm, T, corrs[i].pixel);
      }
    }

    // Drop landmarks whose tracks died; start new ones from the depth map.
    for (auto it = landmarks_.begin(); it != landmarks_.end();) {
      if (tracker_.track(it->first).status != TrackStatus::Live) {
        it = landmarks_.erase(it);
      } else {
        ++it;
      }
    }
    std::vector<Correspondence> visible;
    for (int id : tracker_.live_ids()) {
      const Vec2 px = tracker_.track(id).positions.back() + delta_used;
      auto it = landmarks_.find(id);
      if (it != landmarks_.end()) {
        visible.push_back({it->second.position, px});
        continue;
      }
      const std::optional<double> d = depth_lookup(map, px);
      if (!d) continue;
      Landmark lm;
      lm.id = id;
      lm.position = T * cam_.backproject(px, *d);
      lm.inverse_depth = 1.0 / *d;
      lm.anchor_frame = static_cast<int>(k);
      lm.observations[static_cast<int>(k)] = px;
      visible.push_back({lm.position, px});
      landmarks_.emplace(id, std::move(lm));
    }
    poses_.push_back(T);
    timing.estimate += seconds_since(t);

    if (rho_roi && !visible.empty()) {
      result_.scale_samples.push_back({mean_inverse_depth(T, visible), *rho_roi, sigma});
      try {
        scale_ = estimate_scale(result_.scale_samples);
      } catch (const Error& e) {
        if (e.code() != Errc::DegenerateScale) throw;
      }
    }

    if (k > 0) {
      const std::size_t back = std::min<std::size_t>(k, static_cast<std::size_t>(std::max(cfg_.velocity_window, 1)));
      const FrameState& old = result_.frames[k - back];
      const double dt = static_cast<double>(t_ref - old.timestamp) / kNsPerSec;
      velocity_ = se3_log(old.pose.inverse() * T) * (1.0 / dt);
    }
    last_pose_ = T;
    last_time_ = t_ref;
    result_.frames.push_back({T, t_ref, keyframe});
  }

  // Fuses the map inverse depth with a two-view triangulation once parallax allows.
  void refine_landmark(Landmark& lm, const Pose& T, const Vec2& px) {
    if (lm.triangulated || cfg_.triangulation_weight <= 0.0) return;
    const Pose& Ta = poses_[static_cast<std::size_t>(lm.anchor_frame)];
    const Vec2& pa = lm.observations.at(lm.anchor_frame);
    const Vec3 ra = Ta.rotation * cam_.backproject(pa, 1.0).normalized();
    const Vec3 rb = T.rotation * cam_.backproject(px, 1.0).normalized();
    const double angle = std::acos(std::clamp(ra.dot(rb), -1.0, 1.0)) * 180.0 / M_PI;
    if (angle < cfg_.min_parallax_deg) return;
    Triangulation tri;
    try {
      tri = triangulate(pa, px, Ta, T, cam_);
    } catch (const Error& e) {
      if (e.code() != Errc::DegenerateBaseline && e.code() != Errc::ParallelRays) throw;
      return;
    }
    if (tri.reprojection_error > cfg_.max_triangulation_error) return;
    const double z = (Ta.inverse() * tri.point).z();
    if (!(z > 0.0)) return;
    const double w = std::clamp(cfg_.triangulation_weight, 0.0, 1.0);
    lm.inverse_depth = (1.0 - w) * lm.inverse_depth + w / z;
    lm.position = Ta * cam_.backproject(pa, 1.0 / lm.inverse_depth);
    lm.triangulated = true;
  }

  const OdometryInput& in_;
  const OdometryConfig& cfg_;
  const FrameObserver& observer_;
  Camera cam_;
  const DepthSource* map_source_ = nullptr;
  FeatureTracker tracker_;
  std::unordered_map<int, Landmark> landmarks_;
  std::vector<Pose> poses_;
  Pose last_pose_;
  TimeNs last_time_ = 0;
  Twist velocity_;
  Vec2 delta_ = Vec2::Zero();
  Vec2 prev_delta_ = Vec2::Zero();
  std::optional<Image<double>> prev_frame_;
  DepthState depth_state_;
  std::optional<double> d_t_;
  double initial_depth_ = 1.0;
  double scale_ = 1.0;
  OdometryResult result_;
};

}  // namespace

OdometryResult run_odometry(const OdometryInput& input, const OdometryConfig& cfg,
                            const FrameObserver& observer) {
  return Odometry(input, cfg, observer).run();
}

}  // namespace evio
