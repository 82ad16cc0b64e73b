#pragma once

#include "gvmlio/common.hpp"

namespace gvmlio {

// Cross-product matrix: skew(v) * u == v.cross(u).
Mat3 skew(const Vec3& v);

// Rodrigues exponential; second-order series below 1e-8.
Mat3 exp_so3(const Vec3& u);

// Inverse of exp_so3 with ||result|| <= pi. The angle-pi branch extracts the
// axis from the dominant diagonal of (R + I)/2, sign taken from the skew part
// (largest off-diagonal), ties broken by axis index.
Vec3 log_so3(const Mat3& rot);

// Left Jacobian A(u) of SO(3): relates additive tangent perturbations to
// group composition, Exp(u + d) ~ Exp(A(u) d) Exp(u). Series below 1e-6.
Mat3 left_jacobian(const Vec3& u);

// Nearest rotation by polar projection (SVD with determinant fix).
Mat3 orthonormalized(const Mat3& rot);

// ||R^T R - I||_F
double orthogonality_defect(const Mat3& rot);

}  // namespace gvmlio
