#include "gvmlio/imu.hpp"

#include <cmath>
#include <string>

#include "gvmlio/so3.hpp"

namespace gvmlio {

NoiseParams NoiseParams::from_densities(double gyro_density, double acc_density,
                                        double bias_gyro_density, double bias_acc_density,
                                        double rate_hz) {
  NoiseParams p;
  const double s = std::sqrt(rate_hz);
  p.std_gyro = Vec3::Constant(gyro_density * s);
  p.std_acc = Vec3::Constant(acc_density * s);
  p.std_bias_gyro = Vec3::Constant(bias_gyro_density * s);
  p.std_bias_acc = Vec3::Constant(bias_acc_density * s);
  return p;
}

Mat12 NoiseParams::to_matrix() const {
  Vec12 d;
  d << std_gyro, std_acc, std_bias_gyro, std_bias_acc;
  return d.array().square().matrix().asDiagonal();
}

void NoiseParams::validate() const {
  Vec12 d;
  d << std_gyro, std_acc, std_bias_gyro, std_bias_acc;
  for (int i = 0; i < 12; ++i) {
    if (!(d(i) > 0.0)) {
      throw InputError("NoiseParams: all standard deviations must be strictly positive");
    }
  }
}

Vec18 kinematics_f(const FilterState& x, const ImuSample& u, const Vec12& w, double dt) {
  Vec18 f = Vec18::Zero();
  f.segment<3>(kIdxRot) = u.gyro - x.bias_gyro - w.segment<3>(0);
  f.segment<3>(kIdxPos) = x.vel;
  f.segment<3>(kIdxVel) = x.rot * (u.acc - x.bias_acc - w.segment<3>(3)) + x.gravity;
  f.segment<3>(kIdxBiasGyro) = w.segment<3>(6);
  f.segment<3>(kIdxBiasAcc) = w.segment<3>(9);
  return dt * f;
}

FilterState predict_nominal(const FilterState& x, const ImuSample& u, double dt) {
  return boxplus(x, kinematics_f(x, u, Vec12::Zero(), dt));
}

std::pair<Mat18, Mat18x12> error_transition(const FilterState& x, const ImuSample& u,
                                            double dt) {
  const Vec3 theta = dt * (u.gyro - x.bias_gyro);
  const Mat3 rot_step = exp_so3(theta);
  const Mat3 jac = left_jacobian(theta);

  Mat18 f_dx = Mat18::Identity();
  f_dx.block<3, 3>(kIdxRot, kIdxRot) = rot_step;
  f_dx.block<3, 3>(kIdxRot, kIdxBiasGyro) = -dt * jac;
  f_dx.block<3, 3>(kIdxPos, kIdxVel) = dt * Mat3::Identity();
  f_dx.block<3, 3>(kIdxVel, kIdxRot) = -dt * skew(x.rot * (u.acc - x.bias_acc));
  f_dx.block<3, 3>(kIdxVel, kIdxBiasAcc) = -dt * x.rot;
  f_dx.block<3, 3>(kIdxVel, kIdxGravity) = dt * Mat3::Identity();

  Mat18x12 f_w = Mat18x12::Zero();
  f_w.block<3, 3>(kIdxRot, 0) = -dt * jac;
  f_w.block<3, 3>(kIdxVel, 3) = -dt * x.rot;
  f_w.block<3, 3>(kIdxBiasGyro, 6) = dt * Mat3::Identity();
  f_w.block<3, 3>(kIdxBiasAcc, 9) = dt * Mat3::Identity();
  return {f_dx, f_w};
}

Mat18 predict_covariance(const Mat18& cov, const Mat18& f_dx, const Mat18x12& f_w,
                         const Mat12& noise_cov) {
  Mat18 out = f_dx * cov * f_dx.transpose() + f_w * noise_cov * f_w.transpose();
  return 0.5 * (out + out.transpose());
}

PropagationResult propagate(const FilterState& prev, const Mat18& prev_cov, double t_prev,
                            const std::vector<ImuSample>& imu, double t_end,
                            const NoiseParams& noise) {
  if (imu.empty()) {
    throw EmptyImuBuffer("propagate: empty IMU buffer");
  }
  for (size_t i = 1; i < imu.size(); ++i) {
    if (!(imu[i].t > imu[i - 1].t)) {
      throw NonMonotonicTimestamps("propagate: IMU timestamps not strictly increasing at index " +
                                   std::to_string(i));
    }
  }
  if (imu.front().t > t_prev + 1e-9) {
    throw InputError("propagate: IMU buffer starts after t_prev");
  }

  const Mat12 noise_cov = noise.to_matrix();

  PropagationResult out;
  out.state = prev;
  out.cov = prev_cov;

  // Start at the last sample at or before t_prev and hold each sample until
  // the next one (or t_end).
  size_t start = 0;
  while (start + 1 < imu.size() && imu[start + 1].t <= t_prev) ++start;

  double t = t_prev;
  auto cache_entry = [&](double stamp, const ImuSample& u) {
    PoseCacheEntry e;
    e.t = stamp;
    e.rot = out.state.rot;
    e.pos = out.state.pos;
    e.vel = out.state.vel;
    e.rate = u.gyro - out.state.bias_gyro;
    e.world_acc = out.state.rot * (u.acc - out.state.bias_acc) + out.state.gravity;
    return e;
  };
  out.pose_cache.push_back(cache_entry(t, imu[start]));

  for (size_t i = start; i < imu.size() && t < t_end; ++i) {
    const double seg_end = (i + 1 < imu.size()) ? std::min(imu[i + 1].t, t_end) : t_end;
    const double dt = seg_end - t;
    if (dt <= 0.0) continue;
    const auto [f_dx, f_w] = error_transition(out.state, imu[i], dt);
    out.cov = predict_covariance(out.cov, f_dx, f_w, noise_cov);
    out.state = predict_nominal(out.state, imu[i], dt);
    t = seg_end;
    const ImuSample& hold = (i + 1 < imu.size() && t >= imu[i + 1].t) ? imu[i + 1] : imu[i];
    out.pose_cache.push_back(cache_entry(t, hold));
  }
  return out;
}

}  // namespace gvmlio
