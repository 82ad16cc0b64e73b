#pragma once

#include <cstdint>
#include <vector>

#include "gvmlio/common.hpp"
#include "gvmlio/imu.hpp"
#include "gvmlio/lidar.hpp"

namespace gvmlio {

// Rectangular planar patch: corner + a*edge_u + b*edge_v, (a,b) in [0,1]^2.
struct PlanarPatch {
  Vec3 corner = Vec3::Zero();
  Vec3 edge_u = Vec3::Zero();
  Vec3 edge_v = Vec3::Zero();
  double density = 1.0;  // relative sampling weight per m^2
};

struct WorldSpec {
  std::vector<PlanarPatch> patches;
  std::uint64_t seed = 1;
};

// Piecewise-constant body angular rate and body-frame kinematic
// acceleration (world acceleration is R * accel_body; gravity enters only
// the accelerometer model).
struct TrajSegment {
  double duration = 0.0;
  Vec3 angular_rate_body = Vec3::Zero();  // rad/s
  Vec3 accel_body = Vec3::Zero();         // m/s^2
};

// Deterministic sensor-fault window: constant reading offsets over [t0, t1),
// emulating the transient spikes of low-cost IMUs.
struct ImuDisturbance {
  double t_start = 0.0;
  double t_end = 0.0;
  Vec3 gyro_offset = Vec3::Zero();  // rad/s
  Vec3 acc_offset = Vec3::Zero();   // m/s^2
};

struct TrajectorySpec {
  std::vector<TrajSegment> segments;
  Vec3 start_velocity = Vec3::Zero();  // world frame at t = 0
  std::vector<ImuDisturbance> disturbances;
  double imu_rate_hz = 200.0;
  double scan_rate_hz = 10.0;
  int points_per_scan = 2000;
  // Continuous-time noise densities (unit/sqrt(Hz)); zero disables.
  double gyro_noise_density = 0.0;
  double acc_noise_density = 0.0;
  double gyro_bias_density = 0.0;
  double acc_bias_density = 0.0;
  Vec3 init_gyro_bias = Vec3::Zero();
  Vec3 init_acc_bias = Vec3::Zero();
  // Occasional amplified-noise samples, emulating low-cost IMU spikes.
  double spike_probability = 0.0;
  double spike_multiplier = 20.0;
  Vec3 gravity = Vec3(0.0, 0.0, -kGravityNorm);
  Extrinsic extrinsic;
  std::uint64_t seed = 1;
};

struct TimedPose {
  double t = 0.0;
  Mat3 rot = Mat3::Identity();
  Vec3 pos = Vec3::Zero();
};

// Exact analytic evaluation of a piecewise-constant-rate trajectory
// (closed-form rotation/velocity/position integrals per segment).
class TrajectoryModel {
 public:
  explicit TrajectoryModel(const TrajectorySpec& spec);

  double duration() const { return duration_; }
  TimedPose pose_at(double t) const;
  Vec3 velocity_at(double t) const;
  // Body rate / body kinematic acceleration of the active segment.
  Vec3 body_rate_at(double t) const;
  Vec3 body_accel_at(double t) const;

 private:
  struct SegmentStart {
    double t0;
    Mat3 rot;
    Vec3 pos;
    Vec3 vel;
  };
  int segment_index(double t) const;

  std::vector<TrajSegment> segments_;
  std::vector<SegmentStart> starts_;
  double duration_ = 0.0;
};

struct SimScan {
  double t_end = 0.0;
  std::vector<RawPoint> points;       // sensor frame at each point's own time
  std::vector<Vec3> world_points;     // the same points in the global frame (reference)
};

struct GroundTruth {
  std::vector<TimedPose> scan_poses;  // IMU pose at each scan end
  std::vector<TimedPose> imu_poses;   // IMU pose at each sample time
};

struct SimData {
  std::vector<ImuSample> imu;
  std::vector<SimScan> scans;
  GroundTruth ground_truth;
};

// Deterministic synthesis: exact IMU readings consistent with the filter's
// discrete motion model (gyro reports the spatial angular rate, the
// accelerometer the body-frame specific force), optional bias random walk,
// white noise and spikes; scans ray-sample the patches from the pose at
// each point's own timestamp, so real motion distortion is present.
SimData synthesize(const WorldSpec& world, const TrajectorySpec& traj);

struct EvalResult {
  double ate_percent = 0.0;
  double are_deg_per_10m = 0.0;
  int pair_count = 0;
};

// KITTI-style relative-pose errors over frame pairs at fixed path-length
// offsets (default {10, 20, 50} m, clipped to the trajectory), every start
// frame considered. Translation normalized to percent of segment length,
// rotation to degrees per 10 m.
EvalResult evaluate_ate_are(const std::vector<TimedPose>& est, const std::vector<TimedPose>& gt,
                            const std::vector<double>& offsets_m = {10.0, 20.0, 50.0});

// Built-in scenes and trajectories used by the CLI and the test suites.
WorldSpec make_room_world();
WorldSpec make_aliased_room_world();
WorldSpec make_corridor_world();
TrajectorySpec make_room_loop_traj();
TrajectorySpec make_deskew_sweep_traj();
TrajectorySpec make_corridor_run_traj();

}  // namespace gvmlio
