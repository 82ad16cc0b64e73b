#include "gvmlio/ieskf.hpp"

#include <Eigen/Cholesky>

#include <cmath>
#include <string>

#include "gvmlio/so3.hpp"

namespace gvmlio {

void IeskfConfig::validate() const {
  if (max_iterations < 1) throw InputError("IeskfConfig: max_iterations must be >= 1");
  if (!(epsilon > 0.0)) throw InputError("IeskfConfig: epsilon must be positive");
  if (!(meas_variance > 0.0)) throw InputError("IeskfConfig: meas_variance must be positive");
  if (min_correspondences < 0) throw InputError("IeskfConfig: min_correspondences must be >= 0");
  if (similarity_threshold < 0.0 || similarity_threshold > 1.0) {
    throw InputError("IeskfConfig: similarity_threshold must lie in [0, 1]");
  }
}

Mat18 projection_J(const FilterState& x_n, const FilterState& x_hat) {
  Mat18 j = Mat18::Identity();
  j.block<3, 3>(kIdxRot, kIdxRot) = left_jacobian(log_so3(x_n.rot * x_hat.rot.transpose()));
  return j;
}

namespace {

Mat18 inverse_spd(const Mat18& m, const char* what) {
  Eigen::LDLT<Mat18> ldlt(m);
  if (ldlt.info() == Eigen::Success && ldlt.isPositive()) {
    return ldlt.solve(Mat18::Identity());
  }
  // Jitter fallback before giving up.
  Eigen::LDLT<Mat18> jittered(m + 1e-12 * Mat18::Identity());
  if (jittered.info() != Eigen::Success) {
    throw NumericalFailure(std::string("factorization breakdown in ") + what);
  }
  return jittered.solve(Mat18::Identity());
}

}  // namespace

ErrorState kalman_step(const Mat18& p_hat, const Mat18& j_n, const MatX& h_stack,
                       const VecX& h_vec, const ErrorState& b0, double variance,
                       MatX* gain_out, Mat18* p_n_out) {
  const double inv_v = 1.0 / variance;
  const Mat18 p_n = j_n * p_hat * j_n.transpose();
  const Mat18 p_n_inv = inverse_spd(p_n, "projected prior");
  const int rows = static_cast<int>(h_vec.size());

  Mat18 s_info = p_n_inv;
  if (rows > 0) s_info += inv_v * h_stack.transpose() * h_stack;
  Eigen::LDLT<Mat18> ldlt(s_info);
  if (ldlt.info() != Eigen::Success) {
    ldlt.compute(s_info + 1e-12 * Mat18::Identity());
    if (ldlt.info() != Eigen::Success) {
      throw NumericalFailure("kalman_step: information matrix factorization failed");
    }
  }

  MatX gain;
  Mat18 gain_h = Mat18::Zero();
  if (rows > 0) {
    gain = ldlt.solve(h_stack.transpose()) * inv_v;
    gain_h = gain * h_stack;
  }

  ErrorState dx = (gain_h - Mat18::Identity()) * (j_n * b0);
  if (rows > 0) dx -= gain * h_vec;
  if (!dx.allFinite()) throw NumericalFailure("kalman_step: non-finite step");
  if (gain_out) *gain_out = std::move(gain);
  if (p_n_out) *p_n_out = p_n;
  return dx;
}

Mat18 reset_covariance(const Mat18& p_n, const MatX& gain, const MatX& h_stack,
                       const ErrorState& dx_final, bool apply_reset_jacobian) {
  Mat18 p_post;
  if (gain.size() == 0 || h_stack.size() == 0) {
    p_post = p_n;
  } else {
    p_post = (Mat18::Identity() - gain * h_stack) * p_n;
  }
  if (apply_reset_jacobian) {
    Mat18 g = Mat18::Identity();
    g.block<3, 3>(kIdxRot, kIdxRot) = left_jacobian(dx_final.segment<3>(kIdxRot));
    p_post = g * p_post * g.transpose();
  }
  return 0.5 * (p_post + p_post.transpose());
}

UpdateResult iterated_update(const PropagationResult& pred,
                             const std::vector<PointDistribution>& dists,
                             const GaussianVoxelMap& map, const Extrinsic& ext,
                             const IeskfConfig& cfg) {
  cfg.validate();
  const FilterState& x_hat = pred.state;
  const Mat18 p_hat_inv = inverse_spd(pred.cov, "prior covariance");

  MatchParams match_params;
  match_params.similarity_threshold = cfg.similarity_threshold;
  match_params.mode = cfg.neighbor_mode;
  match_params.keep_all = cfg.keep_all_matches;
  match_params.noise.variance = cfg.meas_variance;
  const double inv_v = 1.0 / cfg.meas_variance;

  UpdateResult result;
  FilterState x_n = x_hat;
  ErrorState dx_final = ErrorState::Zero();

  // Matrices of the last executed linearization, for the covariance reset.
  Mat18 p_n_last = pred.cov;
  MatX gain_last;
  MatX h_stack_last;

  auto project_means = [&](const FilterState& x, const std::vector<Correspondence>& cs) {
    std::vector<Vec3> means(cs.size());
    const Mat3 rot_gl = x.rot * ext.rot;
    const Vec3 pos_gl = x.rot * ext.trans + x.pos;
    for (size_t i = 0; i < cs.size(); ++i) {
      means[i] = rot_gl * dists[cs[i].src_index].mean + pos_gl;
    }
    return means;
  };

  for (int n = 0; n < cfg.max_iterations; ++n) {
    std::vector<std::pair<Vec3, Mat3>> projected(dists.size());
    for (size_t j = 0; j < dists.size(); ++j) {
      projected[j] = project_distribution(x_n, ext, dists[j]);
    }
    std::vector<Correspondence> matches = match(projected, map, match_params);
    const int m = static_cast<int>(matches.size());
    result.correspondence_count = m;
    result.degenerate = m < cfg.min_correspondences;

    const int rows = result.degenerate ? 0 : 3 * m;
    MatX h_stack(rows, kStateDim);
    VecX h_vec(rows);
    for (int i = 0; i < (result.degenerate ? 0 : m); ++i) {
      h_vec.segment<3>(3 * i) = residual(matches[i]);
      h_stack.middleRows<3>(3 * i) =
          jacobian_row(matches[i], x_n, ext, dists[matches[i].src_index].mean);
    }

    const Mat18 j_n = projection_J(x_n, x_hat);
    MatX gain;
    Mat18 p_n;
    const ErrorState dx = kalman_step(pred.cov, j_n, h_stack, h_vec, boxminus(x_n, x_hat),
                                      cfg.meas_variance, &gain, &p_n);

    const FilterState x_next = boxplus(x_n, dx);
    result.iterations_used = n + 1;
    result.final_residual_norm = rows > 0 ? h_vec.norm() : 0.0;
    p_n_last = p_n;
    gain_last = gain;
    h_stack_last = h_stack;

    // Gauss-Newton descent check on the fixed linearization problem: the
    // quadratic objective with this iteration's matches and frozen s*D must
    // not increase, otherwise revert and stop.
    if (rows > 0) {
      const ErrorState b0 = boxminus(x_n, x_hat);
      const double obj_before = b0.dot(p_hat_inv * b0) + inv_v * h_vec.squaredNorm();
      const std::vector<Vec3> means_next = project_means(x_next, matches);
      double meas_after = 0.0;
      for (int i = 0; i < m; ++i) {
        const Vec3 z = matches[i].similarity * matches[i].whitening *
                       (means_next[i] - matches[i].cell.centroid);
        meas_after += z.squaredNorm();
      }
      const ErrorState b1 = boxminus(x_next, x_hat);
      const double obj_after = b1.dot(p_hat_inv * b1) + inv_v * meas_after;
      if (obj_after > obj_before * (1.0 + 1e-12) + 1e-12) {
        result.monotonicity_stop = true;
        dx_final = ErrorState::Zero();  // the final state is the linearization point
        break;                          // keep x_n
      }
    }

    x_n = x_next;
    dx_final = dx;
    if (dx.norm() < cfg.epsilon || result.degenerate) break;
  }

  result.state = x_n;
  result.cov = reset_covariance(p_n_last, gain_last, h_stack_last, dx_final,
                                cfg.apply_reset_jacobian);
  return result;
}

}  // namespace gvmlio
