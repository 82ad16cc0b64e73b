#pragma once

#include <utility>
#include <vector>

#include "gvmlio/common.hpp"
#include "gvmlio/state.hpp"

namespace gvmlio {

struct ImuSample {
  double t = 0.0;            // s
  Vec3 gyro = Vec3::Zero();  // rad/s
  Vec3 acc = Vec3::Zero();   // m/s^2
};

// Per-sample standard deviations of the discrete noise vector
// w = [n_gyro n_acc n_bias_gyro n_bias_acc]. W = diag(std^2).
struct NoiseParams {
  Vec3 std_gyro = Vec3::Constant(1e-2);
  Vec3 std_acc = Vec3::Constant(1e-1);
  Vec3 std_bias_gyro = Vec3::Constant(1e-4);
  Vec3 std_bias_acc = Vec3::Constant(1e-3);

  // Continuous-time densities (unit/sqrt(Hz)) to per-sample stds at the
  // given sampling rate: std = density * sqrt(rate).
  static NoiseParams from_densities(double gyro_density, double acc_density,
                                    double bias_gyro_density, double bias_acc_density,
                                    double rate_hz);

  Mat12 to_matrix() const;  // 12x12 diagonal W

  void validate() const;  // throws InputError unless all strictly positive
};

// State, covariance and per-sample pose cache at the end of a propagation
// window. Cache entries carry the bias-corrected rate / world acceleration
// in effect on [t_i, t_{i+1}) so deskewing can interpolate with the same
// zero-order-hold model.
struct PoseCacheEntry {
  double t = 0.0;
  Mat3 rot = Mat3::Identity();
  Vec3 pos = Vec3::Zero();
  Vec3 vel = Vec3::Zero();
  Vec3 rate = Vec3::Zero();       // gyro - bias_gyro
  Vec3 world_acc = Vec3::Zero();  // R (acc - bias_acc) + g
};

struct PropagationResult {
  FilterState state;
  Mat18 cov = Mat18::Zero();
  std::vector<PoseCacheEntry> pose_cache;
};

// Discrete kinematics increment in error-state block order:
// dt * [w_m - bg - n_g; v; R (a_m - ba - n_a) + g; n_bg; n_ba; 0].
Vec18 kinematics_f(const FilterState& x, const ImuSample& u, const Vec12& w, double dt);

// x boxplus f(x, u, 0, dt)
FilterState predict_nominal(const FilterState& x, const ImuSample& u, double dt);

// Analytic Jacobians of the error transition d' = F_dx d + F_w w, i.e. of
// d -> ((x [+] d) [+] f(x [+] d, u, w, dt)) [-] (x [+] f(x, u, 0, dt))
// at d = 0, w = 0, under the global-side perturbation convention.
std::pair<Mat18, Mat18x12> error_transition(const FilterState& x, const ImuSample& u,
                                            double dt);

// F P F^T + Fw W Fw^T, symmetrized.
Mat18 predict_covariance(const Mat18& cov, const Mat18& f_dx, const Mat18x12& f_w,
                         const Mat12& noise_cov);

// Chains nominal/covariance prediction over every sample interval that
// intersects [t_prev, t_end], caching poses at each boundary. The buffer
// must start at or before t_prev and be strictly increasing in time.
PropagationResult propagate(const FilterState& prev, const Mat18& prev_cov, double t_prev,
                            const std::vector<ImuSample>& imu, double t_end,
                            const NoiseParams& noise);

}  // namespace gvmlio
