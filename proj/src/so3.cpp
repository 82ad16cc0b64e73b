#include "gvmlio/so3.hpp"

#include <Eigen/SVD>

#include <algorithm>
#include <cmath>

namespace gvmlio {

Mat3 skew(const Vec3& v) {
  Mat3 m;
  m << 0.0, -v.z(), v.y(),  //
      v.z(), 0.0, -v.x(),   //
      -v.y(), v.x(), 0.0;
  return m;
}

Mat3 exp_so3(const Vec3& u) {
  const double theta = u.norm();
  const Mat3 ux = skew(u);
  if (theta < 1e-8) {
    return Mat3::Identity() + ux + 0.5 * ux * ux;
  }
  const double s = std::sin(theta) / theta;
  const double c = (1.0 - std::cos(theta)) / (theta * theta);
  return Mat3::Identity() + s * ux + c * ux * ux;
}

Vec3 log_so3(const Mat3& rot) {
  // sin(theta) * axis from the skew part, cos(theta) from the trace.
  const Vec3 sin_axis(0.5 * (rot(2, 1) - rot(1, 2)), 0.5 * (rot(0, 2) - rot(2, 0)),
                      0.5 * (rot(1, 0) - rot(0, 1)));
  const double trace = std::clamp(rot.trace(), -1.0, 3.0);
  const double cos_theta = std::clamp(0.5 * (trace - 1.0), -1.0, 1.0);
  const double sin_theta = std::min(sin_axis.norm(), 1.0);
  const double theta = std::atan2(sin_theta, cos_theta);

  if (theta < 1e-8) {
    // theta/sin(theta) -> 1 + theta^2/6
    return (1.0 + theta * theta / 6.0) * sin_axis;
  }
  if (theta < 3.0) {
    return (theta / sin_theta) * sin_axis;
  }

  // Near pi the skew part loses the axis; recover it from the symmetric part:
  // (R + I)/2 = ((1+c)/2) I + ((1-c)/2) a a^T + (s/2) [a]x.
  const double denom = 0.5 * (1.0 - cos_theta);
  const Mat3 b = 0.5 * (rot + Mat3::Identity());
  const Mat3 sym = 0.5 * (b + b.transpose());
  int dominant = 0;
  for (int i = 1; i < 3; ++i) {
    if (sym(i, i) > sym(dominant, dominant)) dominant = i;
  }
  Vec3 axis;
  const double diag = (sym(dominant, dominant) - 0.5 * (1.0 + cos_theta)) / denom;
  axis(dominant) = std::sqrt(std::max(diag, 0.0));
  if (axis(dominant) < 1e-12) return Vec3(theta, 0.0, 0.0);  // degenerate input
  for (int i = 0; i < 3; ++i) {
    if (i != dominant) axis(i) = sym(dominant, i) / (denom * axis(dominant));
  }
  axis.normalize();
  // Sign continuity from the skew part; at exactly pi force the dominant
  // component non-negative.
  if (sin_axis.norm() > 1e-12) {
    if (sin_axis(dominant) < 0.0) axis = -axis;
  } else if (axis(dominant) < 0.0) {
    axis = -axis;
  }
  return theta * axis;
}

Mat3 left_jacobian(const Vec3& u) {
  const double theta = u.norm();
  const Mat3 ux = skew(u);
  if (theta < 1e-6) {
    return Mat3::Identity() + 0.5 * ux + (1.0 / 6.0) * ux * ux;
  }
  const double t2 = theta * theta;
  const double a = (1.0 - std::cos(theta)) / t2;
  const double b = (1.0 - std::sin(theta) / theta) / t2;
  return Mat3::Identity() + a * ux + b * ux * ux;
}

Mat3 orthonormalized(const Mat3& rot) {
  Eigen::JacobiSVD<Mat3> svd(rot, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Mat3 r = svd.matrixU() * svd.matrixV().transpose();
  if (r.determinant() < 0.0) {
    Mat3 d = Mat3::Identity();
    d(2, 2) = -1.0;
    r = svd.matrixU() * d * svd.matrixV().transpose();
  }
  return r;
}

double orthogonality_defect(const Mat3& rot) {
  return (rot.transpose() * rot - Mat3::Identity()).norm();
}

}  // namespace gvmlio
