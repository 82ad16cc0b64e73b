#pragma once

#include "gvmlio/common.hpp"

namespace gvmlio {

// Full state on SO(3) x R^15: IMU pose/velocity in the global frame, the two
// IMU biases and the gravity vector.
struct FilterState {
  Mat3 rot = Mat3::Identity();  // R of IMU w.r.t. global
  Vec3 pos = Vec3::Zero();      // m
  Vec3 vel = Vec3::Zero();      // m/s
  Vec3 bias_gyro = Vec3::Zero();
  Vec3 bias_acc = Vec3::Zero();
  Vec3 gravity = Vec3::Zero();  // m/s^2, points down when initialized
};

// Error state is the ordered 18-vector [dr dp dv dbg dba dg].
using ErrorState = Vec18;

// Retraction: rot' = Exp(dr) * rot (global-side perturbation), vector blocks
// added componentwise. Re-orthonormalizes when drift exceeds 1e-9.
FilterState boxplus(const FilterState& x, const ErrorState& d);

// Inverse retraction: dr = Log(x.rot * y.rot^T), other blocks x - y.
ErrorState boxminus(const FilterState& x, const FilterState& y);

}  // namespace gvmlio
