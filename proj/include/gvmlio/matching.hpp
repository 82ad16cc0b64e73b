#pragma once

#include <utility>
#include <vector>

#include "gvmlio/common.hpp"
#include "gvmlio/lidar.hpp"
#include "gvmlio/state.hpp"
#include "gvmlio/voxel_map.hpp"

namespace gvmlio {

// Isotropic measurement noise V = variance * I3 per residual row.
struct MeasurementNoise {
  double variance = 1.0;
};

// A matched (source distribution, map voxel) pair. `whitening` is D = Q U
// from the eigendecomposition of proj_cov + cell.cov, so that
// D^T V^-1 D = (proj_cov + cell.cov)^-1.
struct Correspondence {
  int src_index = -1;
  VoxelCell cell;
  double similarity = 0.0;
  Mat3 whitening = Mat3::Identity();
  Vec3 proj_mean = Vec3::Zero();
  Mat3 proj_cov = Mat3::Zero();
};

// Distribution from the scan-end sensor frame into the global frame:
// mean through T_GI * T_IL, covariance conjugated by the rotation part.
std::pair<Vec3, Mat3> project_distribution(const FilterState& x, const Extrinsic& ext,
                                           const PointDistribution& d);

// Similarity in (0, 1] from the squared Hellinger distance between two
// zero-mean Gaussians: sqrt(sqrt(det Cj det Ci) / det(Cj/2 + Ci/2)).
// Equals the Bhattacharyya coefficient for equal means.
double similarity(const Mat3& cov_j, const Mat3& cov_i);

// D = sqrt(v) Lambda^-1/2 U with rows of U the unit eigenvectors of
// cov_sum = cov_j_hat + cov_i (U cov_sum U^T = Lambda).
Mat3 whitening(const Mat3& cov_j_hat, const Mat3& cov_i, const MeasurementNoise& noise);

struct MatchParams {
  double similarity_threshold = 0.6;
  NeighborMode mode = NeighborMode::kFace7;
  bool keep_all = false;  // when set, every surviving candidate becomes a row
  MeasurementNoise noise;
};

// For each projected distribution, evaluate the similarity against the
// occupied voxel and its neighbor set, discard candidates below the
// threshold and keep the best survivor (ties: nearest centroid, then
// candidate order). Points without a survivor yield no correspondence.
std::vector<Correspondence> match(const std::vector<std::pair<Vec3, Mat3>>& projected,
                                  const GaussianVoxelMap& map, const MatchParams& params);

// z = s * D * (proj_mean - cell centroid)
Vec3 residual(const Correspondence& c);

// Measurement Jacobian row for one correspondence w.r.t. the 18-dim error
// state, with s*D held fixed:
//   H = [ -s D [R_GI q]x , s D , 0_{3x12} ],  q = ext.rot p_L + ext.trans.
// The rotated-point skew follows from the global-side perturbation
// convention; pinned by the finite-difference gate.
Mat3x18 jacobian_row(const Correspondence& c, const FilterState& x, const Extrinsic& ext,
                     const Vec3& p_lidar);

}  // namespace gvmlio
