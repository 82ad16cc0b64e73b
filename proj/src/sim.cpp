#include "gvmlio/sim.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "gvmlio/rng.hpp"
#include "gvmlio/so3.hpp"

namespace gvmlio {

namespace {

// Integrals of the rotation exponential over a constant-rate segment:
//   gamma1(t) = int_0^t Exp(s w) ds
//   gamma2(t) = int_0^t gamma1(s) ds
// so that v(t) = v0 + R0 gamma1(t) a and p(t) = p0 + v0 t + R0 gamma2(t) a.
Mat3 gamma1(double t, const Vec3& w) {
  const double theta = w.norm();
  const Mat3 wx = skew(w);
  if (theta * t < 1e-6) {
    return t * Mat3::Identity() + 0.5 * t * t * wx + (t * t * t / 6.0) * wx * wx;
  }
  const double th = theta;
  const double a = (1.0 - std::cos(t * th)) / (th * th);
  const double b = (t - std::sin(t * th) / th) / (th * th);
  return t * Mat3::Identity() + a * wx + b * wx * wx;
}

Mat3 gamma2(double t, const Vec3& w) {
  const double theta = w.norm();
  const Mat3 wx = skew(w);
  if (theta * t < 1e-6) {
    return 0.5 * t * t * Mat3::Identity() + (t * t * t / 6.0) * wx +
           (t * t * t * t / 24.0) * wx * wx;
  }
  const double th = theta;
  const double a = (t * th - std::sin(t * th)) / (th * th * th);
  const double b = (0.5 * t * t - (1.0 - std::cos(t * th)) / (th * th)) / (th * th);
  return 0.5 * t * t * Mat3::Identity() + a * wx + b * wx * wx;
}

}  // namespace

TrajectoryModel::TrajectoryModel(const TrajectorySpec& spec) : segments_(spec.segments) {
  if (segments_.empty()) throw InvalidSpec("trajectory: no segments");
  SegmentStart s{0.0, Mat3::Identity(), Vec3::Zero(), spec.start_velocity};
  for (const auto& seg : segments_) {
    if (!(seg.duration > 0.0)) throw InvalidSpec("trajectory: segment duration must be positive");
    starts_.push_back(s);
    const double d = seg.duration;
    const Vec3& w = seg.angular_rate_body;
    const Vec3& a = seg.accel_body;
    s.t0 += d;
    s.pos = s.pos + s.vel * d + s.rot * (gamma2(d, w) * a);
    s.vel = s.vel + s.rot * (gamma1(d, w) * a);
    s.rot = s.rot * exp_so3(d * w);
    duration_ = s.t0;
  }
}

int TrajectoryModel::segment_index(double t) const {
  if (t < -1e-9 || t > duration_ + 1e-9) {
    throw InvalidSpec("trajectory: time " + std::to_string(t) + " outside [0, " +
                      std::to_string(duration_) + "]");
  }
  int lo = 0, hi = static_cast<int>(starts_.size()) - 1;
  while (lo < hi) {
    const int mid = (lo + hi + 1) / 2;
    if (starts_[mid].t0 <= t) {
      lo = mid;
    } else {
      hi = mid - 1;
    }
  }
  return lo;
}

TimedPose TrajectoryModel::pose_at(double t) const {
  const int i = segment_index(t);
  const SegmentStart& s = starts_[i];
  const TrajSegment& seg = segments_[i];
  const double tau = t - s.t0;
  TimedPose out;
  out.t = t;
  out.rot = s.rot * exp_so3(tau * seg.angular_rate_body);
  out.pos = s.pos + s.vel * tau + s.rot * (gamma2(tau, seg.angular_rate_body) * seg.accel_body);
  return out;
}

Vec3 TrajectoryModel::velocity_at(double t) const {
  const int i = segment_index(t);
  const SegmentStart& s = starts_[i];
  const TrajSegment& seg = segments_[i];
  const double tau = t - s.t0;
  return s.vel + s.rot * (gamma1(tau, seg.angular_rate_body) * seg.accel_body);
}

Vec3 TrajectoryModel::body_rate_at(double t) const {
  return segments_[segment_index(t)].angular_rate_body;
}

Vec3 TrajectoryModel::body_accel_at(double t) const {
  return segments_[segment_index(t)].accel_body;
}

SimData synthesize(const WorldSpec& world, const TrajectorySpec& traj) {
  if (world.patches.empty()) throw InvalidSpec("world: no patches");
  for (const auto& p : world.patches) {
    if (p.edge_u.cross(p.edge_v).norm() <= 0.0) {
      throw InvalidSpec("world: patch has zero area");
    }
    if (!(p.density > 0.0)) throw InvalidSpec("world: patch density must be positive");
  }
  if (!(traj.imu_rate_hz > 0.0) || !(traj.scan_rate_hz > 0.0)) {
    throw InvalidSpec("trajectory: rates must be positive");
  }
  if (traj.points_per_scan < 1) throw InvalidSpec("trajectory: points_per_scan must be >= 1");

  const TrajectoryModel model(traj);
  const double total = model.duration();

  SimData out;

  // IMU stream. The gyro reports the spatial angular rate R w_body (the rate
  // the discrete model Exp(dt w) R integrates exactly); the accelerometer the
  // body-frame specific force a_body - R^T g.
  const double dt_imu = 1.0 / traj.imu_rate_hz;
  const int n_imu = static_cast<int>(std::floor(total / dt_imu + 1e-9)) + 1;
  Rng rng_noise(traj.seed * 0x9e3779b97f4a7c15ull + 1);
  Rng rng_spike(traj.seed * 0x9e3779b97f4a7c15ull + 2);
  const double sq_rate = std::sqrt(traj.imu_rate_hz);
  Vec3 bias_g = traj.init_gyro_bias;
  Vec3 bias_a = traj.init_acc_bias;
  out.imu.reserve(n_imu);
  out.ground_truth.imu_poses.reserve(n_imu);
  for (int i = 0; i < n_imu; ++i) {
    // i / rate rather than i * dt: exact at representable boundaries, so
    // zero-order-hold intervals never straddle a segment switch.
    const double t = std::min(static_cast<double>(i) / traj.imu_rate_hz, total);
    const TimedPose pose = model.pose_at(t);
    ImuSample s;
    s.t = t;
    s.gyro = pose.rot * model.body_rate_at(t);
    s.acc = model.body_accel_at(t) - pose.rot.transpose() * traj.gravity;

    double mult = 1.0;
    if (traj.spike_probability > 0.0 && rng_spike.uniform() < traj.spike_probability) {
      mult = traj.spike_multiplier;
    }
    if (traj.gyro_noise_density > 0.0) {
      const double sg = mult * traj.gyro_noise_density * sq_rate;
      s.gyro += sg * Vec3(rng_noise.normal(), rng_noise.normal(), rng_noise.normal());
    }
    if (traj.acc_noise_density > 0.0) {
      const double sa = mult * traj.acc_noise_density * sq_rate;
      s.acc += sa * Vec3(rng_noise.normal(), rng_noise.normal(), rng_noise.normal());
    }
    s.gyro += bias_g;
    s.acc += bias_a;
    for (const auto& d : traj.disturbances) {
      if (t >= d.t_start && t < d.t_end) {
        s.gyro += d.gyro_offset;
        s.acc += d.acc_offset;
      }
    }
    if (traj.gyro_bias_density > 0.0) {
      bias_g += traj.gyro_bias_density * std::sqrt(dt_imu) *
                Vec3(rng_noise.normal(), rng_noise.normal(), rng_noise.normal());
    }
    if (traj.acc_bias_density > 0.0) {
      bias_a += traj.acc_bias_density * std::sqrt(dt_imu) *
                Vec3(rng_noise.normal(), rng_noise.normal(), rng_noise.normal());
    }
    out.imu.push_back(s);
    out.ground_truth.imu_poses.push_back(pose);
  }

  // Patch selection weights: area * density.
  std::vector<double> cumulative;
  cumulative.reserve(world.patches.size());
  double acc = 0.0;
  for (const auto& p : world.patches) {
    acc += p.edge_u.cross(p.edge_v).norm() * p.density;
    cumulative.push_back(acc);
  }

  // Scans: per-point timestamps spread evenly over the scan period, the last
  // point exactly at the scan end.
  const double dt_scan = 1.0 / traj.scan_rate_hz;
  const int n_scans = static_cast<int>(std::floor(total / dt_scan + 1e-9));
  Rng rng_scan(world.seed * 0x9e3779b97f4a7c15ull + traj.seed);
  out.scans.reserve(n_scans);
  out.ground_truth.scan_poses.reserve(n_scans);
  for (int k = 1; k <= n_scans; ++k) {
    SimScan scan;
    const double t_prev = static_cast<double>(k - 1) / traj.scan_rate_hz;
    scan.t_end = static_cast<double>(k) / traj.scan_rate_hz;
    scan.points.reserve(traj.points_per_scan);
    scan.world_points.reserve(traj.points_per_scan);
    for (int j = 0; j < traj.points_per_scan; ++j) {
      const double frac = static_cast<double>(j + 1) / traj.points_per_scan;
      const double gamma =
          (j + 1 == traj.points_per_scan) ? scan.t_end : t_prev + (scan.t_end - t_prev) * frac;

      const double pick = rng_scan.uniform() * acc;
      const size_t pi =
          std::lower_bound(cumulative.begin(), cumulative.end(), pick) - cumulative.begin();
      const PlanarPatch& patch = world.patches[std::min(pi, world.patches.size() - 1)];
      const Vec3 q_world =
          patch.corner + rng_scan.uniform() * patch.edge_u + rng_scan.uniform() * patch.edge_v;

      const TimedPose pose = model.pose_at(gamma);
      const Mat3 rot_gl = pose.rot * traj.extrinsic.rot;
      const Vec3 pos_gl = pose.rot * traj.extrinsic.trans + pose.pos;
      RawPoint p;
      p.t = gamma;
      p.xyz = rot_gl.transpose() * (q_world - pos_gl);
      scan.points.push_back(p);
      scan.world_points.push_back(q_world);
    }
    out.ground_truth.scan_poses.push_back(model.pose_at(scan.t_end));
    out.scans.push_back(std::move(scan));
  }
  return out;
}

EvalResult evaluate_ate_are(const std::vector<TimedPose>& est, const std::vector<TimedPose>& gt,
                            const std::vector<double>& offsets_m) {
  // Associate by timestamp.
  std::vector<std::pair<int, int>> aligned;
  size_t ei = 0;
  for (size_t gi = 0; gi < gt.size(); ++gi) {
    while (ei < est.size() && est[ei].t < gt[gi].t - 1e-6) ++ei;
    if (ei < est.size() && std::abs(est[ei].t - gt[gi].t) <= 1e-6) {
      aligned.emplace_back(static_cast<int>(ei), static_cast<int>(gi));
    }
  }
  if (aligned.size() < 2) {
    throw InsufficientOverlap("evaluate: fewer than two time-aligned poses");
  }

  std::vector<double> path(aligned.size(), 0.0);
  for (size_t i = 1; i < aligned.size(); ++i) {
    path[i] = path[i - 1] +
              (gt[aligned[i].second].pos - gt[aligned[i - 1].second].pos).norm();
  }

  std::vector<double> offsets = offsets_m;
  std::sort(offsets.begin(), offsets.end());  // the pair search walks forward

  double sum_t = 0.0, sum_r = 0.0;
  int pairs = 0;
  for (size_t i = 0; i < aligned.size(); ++i) {
    size_t j = i;
    for (double offset : offsets) {
      while (j < aligned.size() && path[j] - path[i] < offset) ++j;
      if (j >= aligned.size()) break;
      const double seg_len = path[j] - path[i];
      if (seg_len <= 0.0) continue;

      const TimedPose& ei_p = est[aligned[i].first];
      const TimedPose& ej_p = est[aligned[j].first];
      const TimedPose& gi_p = gt[aligned[i].second];
      const TimedPose& gj_p = gt[aligned[j].second];

      // E = (est_i^-1 est_j)^-1 (gt_i^-1 gt_j)
      const Mat3 ra = ei_p.rot.transpose() * ej_p.rot;
      const Vec3 ta = ei_p.rot.transpose() * (ej_p.pos - ei_p.pos);
      const Mat3 rb = gi_p.rot.transpose() * gj_p.rot;
      const Vec3 tb = gi_p.rot.transpose() * (gj_p.pos - gi_p.pos);
      const Mat3 e_rot = ra.transpose() * rb;
      const Vec3 e_trans = ra.transpose() * (tb - ta);

      sum_t += e_trans.norm() / seg_len;
      sum_r += log_so3(e_rot).norm() / seg_len;
      ++pairs;
    }
  }
  if (pairs == 0) {
    throw InsufficientOverlap("evaluate: no frame pairs at the requested offsets");
  }
  EvalResult r;
  r.pair_count = pairs;
  r.ate_percent = 100.0 * sum_t / pairs;
  r.are_deg_per_10m = (180.0 / M_PI) * 10.0 * sum_r / pairs;
  return r;
}

WorldSpec make_room_world() {
  // 10 x 10 x 3 m room centered on the origin (floor at z = -1.5).
  WorldSpec w;
  w.seed = 11;
  const double z0 = -1.5, z1 = 1.5;
  auto add = [&](const Vec3& c, const Vec3& u, const Vec3& v) {
    w.patches.push_back({c, u, v, 1.0});
  };
  add({-5, -5, z0}, {10, 0, 0}, {0, 10, 0});  // floor
  add({-5, -5, z1}, {10, 0, 0}, {0, 10, 0});  // ceiling
  add({-5, -5, z0}, {0, 10, 0}, {0, 0, 3});   // x = -5
  add({5, -5, z0}, {0, 10, 0}, {0, 0, 3});    // x = +5
  add({-5, -5, z0}, {10, 0, 0}, {0, 0, 3});   // y = -5
  add({-5, 5, z0}, {10, 0, 0}, {0, 0, 3});    // y = +5
  return w;
}

WorldSpec make_aliased_room_world() {
  // The room with geometric aliasing injected: behind the +y and +x walls
  // (which sit exactly on a voxel boundary) runs a second, near-parallel
  // wall one voxel row further out, tilted by ~7 degrees. Projection noise
  // constantly hops boundary points into the twin's row, where the twin is
  // a plausible near candidate whose variance disparity puts its similarity
  // just below the default gate.
  WorldSpec w = make_room_world();
  const double tilt = 0.12;
  const double st = std::sin(tilt), ct = std::cos(tilt);
  w.patches.push_back(
      {{-5.0, 6.5 - 1.5 * st, -1.5 * ct}, {10, 0, 0}, {0, 3.0 * st, 3.0 * ct}, 1.0});
  w.patches.push_back(
      {{6.5 - 1.5 * st, -5.0, -1.5 * ct}, {0, 10, 0}, {3.0 * st, 0, 3.0 * ct}, 1.0});
  return w;
}

WorldSpec make_corridor_world() {
  // Corridor along x with aliasing traps: each bounding plane has a near
  // parallel twin one voxel behind it, tilted by ~7 degrees. The twin's
  // covariance disparity against the true plane sits just below the default
  // similarity threshold, so a drifted projection that lands on a twin is
  // rejected by the gate but accepted (and confirmed) without it.
  WorldSpec w;
  w.seed = 13;
  const double x0 = -2.0, x1 = 32.0, len = x1 - x0;
  const double z0 = -1.5, z1 = 1.5;
  const double tilt = 0.12;  // rad, ~6.9 deg
  auto add = [&](const Vec3& c, const Vec3& u, const Vec3& v, double d) {
    w.patches.push_back({c, u, v, d});
  };
  add({x0, -1.95, z0}, {len, 0, 0}, {0, 3.9, 0}, 1.0);  // floor
  add({x0, -1.95, z1}, {len, 0, 0}, {0, 3.9, 0}, 1.0);  // ceiling
  add({x0, 1.95, z0}, {len, 0, 0}, {0, 0, 3}, 1.0);     // wall y = +1.95
  add({x0, -1.95, z0}, {len, 0, 0}, {0, 0, 3}, 1.0);    // wall y = -1.95
  // tilted twins one voxel behind the side walls (rotated about x)
  add({x0, 2.5 - 1.5 * std::sin(tilt), z0}, {len, 0, 0},
      {0, 3.0 * std::sin(tilt), 3.0 * std::cos(tilt)}, 1.0);
  add({x0, -2.5 + 1.5 * std::sin(tilt), z0}, {len, 0, 0},
      {0, -3.0 * std::sin(tilt), 3.0 * std::cos(tilt)}, 1.0);
  add({x0, -1.95, z0}, {0, 3.9, 0}, {0, 0, 3}, 1.0);  // end cap x = -2
  add({x1, -1.95, z0}, {0, 3.9, 0}, {0, 0, 3}, 1.0);  // end cap x = +32
  // tilted twins one voxel behind the end caps (rotated about z)
  add({x1 + 1.5 - 1.95 * std::sin(tilt), -1.95, z0},
      {3.9 * std::sin(tilt), 3.9, 0}, {0, 0, 3}, 1.0);
  add({x0 - 1.5 + 1.95 * std::sin(tilt), -1.95, z0},
      {-3.9 * std::sin(tilt), 3.9, 0}, {0, 0, 3}, 1.0);
  return w;
}

TrajectorySpec make_room_loop_traj() {
  TrajectorySpec t;
  t.seed = 7;
  t.imu_rate_hz = 200.0;
  t.scan_rate_hz = 10.0;
  t.points_per_scan = 2000;
  t.segments = {
      {1.0, Vec3::Zero(), Vec3::Zero()},             // stationary start
      {1.0, Vec3::Zero(), Vec3(0.5, 0.0, 0.0)},      // spin up to 0.5 m/s
      {26.0, Vec3(0, 0, 0.25), Vec3(0, 0.125, 0)},   // circular arc, r = 2 m
      {2.0, Vec3::Zero(), Vec3(-0.25, 0.0, 0.0)},    // brake
  };
  return t;
}

TrajectorySpec make_deskew_sweep_traj() {
  // Piecewise-constant-rate motion: constant world velocity throughout and
  // per-segment constant angular rates, so the zero-order-hold propagation
  // and the deskew interpolant are both exact.
  TrajectorySpec t;
  t.seed = 5;
  t.imu_rate_hz = 200.0;
  t.scan_rate_hz = 10.0;
  t.points_per_scan = 1500;
  t.start_velocity = Vec3(0.35, 0, 0);
  t.segments = {
      {1.0, Vec3::Zero(), Vec3::Zero()},
      {3.0, Vec3(0, 0, 0.9), Vec3::Zero()},
      {2.0, Vec3(0.3, 0.2, 0.5), Vec3::Zero()},
      {2.0, Vec3::Zero(), Vec3::Zero()},
      {2.0, Vec3(0, 0.6, -0.4), Vec3::Zero()},
  };
  return t;
}

TrajectorySpec make_corridor_run_traj() {
  TrajectorySpec t;
  t.seed = 19;
  t.imu_rate_hz = 200.0;
  t.scan_rate_hz = 10.0;
  t.points_per_scan = 2000;
  t.segments = {
      {1.0, Vec3::Zero(), Vec3::Zero()},
      {1.0, Vec3::Zero(), Vec3(1.0, 0.0, 0.0)},   // to 1 m/s
      {12.0, Vec3(0, 0, 0.05), Vec3(0, 0.05, 0)},  // gentle drift-arc
      {12.0, Vec3(0, 0, -0.05), Vec3(0, -0.05, 0)},
      {2.0, Vec3::Zero(), Vec3(-0.5, 0.0, 0.0)},  // brake
      {2.0, Vec3::Zero(), Vec3::Zero()},
  };
  return t;
}

}  // namespace gvmlio
