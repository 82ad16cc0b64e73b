#include "gvmlio/state.hpp"

#include "gvmlio/so3.hpp"

namespace gvmlio {

FilterState boxplus(const FilterState& x, const ErrorState& d) {
  FilterState out;
  out.rot = exp_so3(d.segment<3>(kIdxRot)) * x.rot;
  if (orthogonality_defect(out.rot) > 1e-9) {
    out.rot = orthonormalized(out.rot);
  }
  out.pos = x.pos + d.segment<3>(kIdxPos);
  out.vel = x.vel + d.segment<3>(kIdxVel);
  out.bias_gyro = x.bias_gyro + d.segment<3>(kIdxBiasGyro);
  out.bias_acc = x.bias_acc + d.segment<3>(kIdxBiasAcc);
  out.gravity = x.gravity + d.segment<3>(kIdxGravity);
  return out;
}

ErrorState boxminus(const FilterState& x, const FilterState& y) {
  ErrorState d;
  d.segment<3>(kIdxRot) = log_so3(x.rot * y.rot.transpose());
  d.segment<3>(kIdxPos) = x.pos - y.pos;
  d.segment<3>(kIdxVel) = x.vel - y.vel;
  d.segment<3>(kIdxBiasGyro) = x.bias_gyro - y.bias_gyro;
  d.segment<3>(kIdxBiasAcc) = x.bias_acc - y.bias_acc;
  d.segment<3>(kIdxGravity) = x.gravity - y.gravity;
  return d;
}

}  // namespace gvmlio
