#pragma once

#include <vector>

#include "gvmlio/common.hpp"
#include "gvmlio/imu.hpp"
#include "gvmlio/matching.hpp"
#include "gvmlio/state.hpp"
#include "gvmlio/voxel_map.hpp"

namespace gvmlio {

struct IeskfConfig {
  int max_iterations = 5;
  double epsilon = 1e-3;  // stop when ||dx|| drops below this
  double meas_variance = 1.0;
  bool apply_reset_jacobian = true;
  int min_correspondences = 10;
  double similarity_threshold = 0.6;
  NeighborMode neighbor_mode = NeighborMode::kFace7;
  bool keep_all_matches = false;

  void validate() const;
};

struct UpdateResult {
  FilterState state;
  Mat18 cov = Mat18::Zero();
  int iterations_used = 0;
  double final_residual_norm = 0.0;
  int correspondence_count = 0;
  bool degenerate = false;         // too few correspondences at the final iteration
  bool monotonicity_stop = false;  // objective increased; step reverted
};

// Tangent-space projection between the iterate's chart and the predicted
// state's chart: block-diagonal with rotation block A(dr), dr the rotation
// component of x_n [-] x_hat, identity elsewhere. Inverse of the defining
// derivative d((x_n [+] d) [-] x_hat)/dd at d = 0 under the global-side
// perturbation convention (finite-difference gated in the tests).
Mat18 projection_J(const FilterState& x_n, const FilterState& x_hat);

// One information-form Kalman step on a fixed linearization:
//   P^n = J P_hat J^T
//   K   = (H^T V^-1 H + (P^n)^-1)^-1 H^T V^-1
//   dx  = K (0 - h) + (K H - I) J b0
// with V = variance * I and b0 = x_n [-] x_hat. h_stack/h_vec may be empty
// (no measurements). Optionally returns K and P^n for the covariance reset.
ErrorState kalman_step(const Mat18& p_hat, const Mat18& j_n, const MatX& h_stack,
                       const VecX& h_vec, const ErrorState& b0, double variance,
                       MatX* gain_out = nullptr, Mat18* p_n_out = nullptr);

// Iterated Kalman update against the voxel map. Each outer iteration
// re-projects the distributions, re-matches, recomputes s*D (frozen within
// the iteration), assembles the stacked whitened residual and Jacobian, and
// applies the information-form gain
//   P^n = J P J^T
//   K   = (H^T V^-1 H + (P^n)^-1)^-1 H^T V^-1
//   dx  = K (0 - h) + (K H - I) J (x_n [-] x_hat)
// until ||dx|| < epsilon or the iteration budget is exhausted; the posterior
// covariance is (I - K H) P^n at the last linearization, conjugated by the
// reset Jacobian.
UpdateResult iterated_update(const PropagationResult& pred,
                             const std::vector<PointDistribution>& dists,
                             const GaussianVoxelMap& map, const Extrinsic& ext,
                             const IeskfConfig& cfg);

// P_kappa = (I - K H) P_n, then conjugated into the tangent space of the
// injected estimate: G = blockdiag(A(dr_final), I15) when enabled (A is the
// change-of-chart derivative at the injected mean; equals I + [dr]x/2 to
// first order).
Mat18 reset_covariance(const Mat18& p_n, const MatX& gain, const MatX& h_stack,
                       const ErrorState& dx_final, bool apply_reset_jacobian);

}  // namespace gvmlio
