#include "gvmlio/matching.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>

#include "gvmlio/so3.hpp"

namespace gvmlio {

std::pair<Vec3, Mat3> project_distribution(const FilterState& x, const Extrinsic& ext,
                                           const PointDistribution& d) {
  const Mat3 rot_gl = x.rot * ext.rot;
  const Vec3 pos_gl = x.rot * ext.trans + x.pos;
  return {rot_gl * d.mean + pos_gl, rot_gl * d.cov * rot_gl.transpose()};
}

double similarity(const Mat3& cov_j, const Mat3& cov_i) {
  const double det_j = cov_j.determinant();
  const double det_i = cov_i.determinant();
  if (!(det_j > 0.0) || !(det_i > 0.0)) {
    throw NonPositiveDeterminant("similarity: covariance determinant not positive");
  }
  const double det_mix = (0.5 * cov_j + 0.5 * cov_i).determinant();
  const double s = std::sqrt(std::sqrt(det_j * det_i) / det_mix);
  return std::min(s, 1.0);
}

Mat3 whitening(const Mat3& cov_j_hat, const Mat3& cov_i, const MeasurementNoise& noise) {
  const Mat3 sum = cov_j_hat + cov_i;
  Eigen::SelfAdjointEigenSolver<Mat3> eig(0.5 * (sum + sum.transpose()));
  const Vec3 lambda = eig.eigenvalues();
  if (!(lambda(0) > 0.0)) {
    throw SingularSum("whitening: covariance sum is singular");
  }
  const Mat3 u = eig.eigenvectors().transpose();  // rows are eigenvectors
  const Vec3 q = (noise.variance * lambda.cwiseInverse()).cwiseSqrt();
  return q.asDiagonal() * u;
}

std::vector<Correspondence> match(const std::vector<std::pair<Vec3, Mat3>>& projected,
                                  const GaussianVoxelMap& map, const MatchParams& params) {
  std::vector<Correspondence> out;
  out.reserve(projected.size());
  for (size_t j = 0; j < projected.size(); ++j) {
    const auto& [mean, cov] = projected[j];
    const std::vector<VoxelKey> candidates =
        neighbor_keys(voxel_key(mean, map.voxel_size()), params.mode);

    const VoxelCell* best = nullptr;
    double best_s = 0.0;
    double best_dist = 0.0;
    for (const VoxelKey& key : candidates) {
      const VoxelCell* cell = map.query(key);
      if (!cell) continue;
      const double s = similarity(cov, cell->cov);
      if (s < params.similarity_threshold) continue;
      if (params.keep_all) {
        Correspondence c;
        c.src_index = static_cast<int>(j);
        c.cell = *cell;
        c.similarity = s;
        c.proj_mean = mean;
        c.proj_cov = cov;
        c.whitening = whitening(cov, cell->cov, params.noise);
        out.push_back(std::move(c));
        continue;
      }
      const double dist = (mean - cell->centroid).squaredNorm();
      if (!best || s > best_s || (s == best_s && dist < best_dist)) {
        best = cell;
        best_s = s;
        best_dist = dist;
      }
    }
    if (!params.keep_all && best) {
      Correspondence c;
      c.src_index = static_cast<int>(j);
      c.cell = *best;
      c.similarity = best_s;
      c.proj_mean = mean;
      c.proj_cov = cov;
      c.whitening = whitening(cov, best->cov, params.noise);
      out.push_back(std::move(c));
    }
  }
  return out;
}

Vec3 residual(const Correspondence& c) {
  return c.similarity * c.whitening * (c.proj_mean - c.cell.centroid);
}

Mat3x18 jacobian_row(const Correspondence& c, const FilterState& x, const Extrinsic& ext,
                     const Vec3& p_lidar) {
  const Mat3 sd = c.similarity * c.whitening;
  const Vec3 q = ext.rot * p_lidar + ext.trans;
  Mat3x18 h = Mat3x18::Zero();
  h.block<3, 3>(0, kIdxRot) = -sd * skew(x.rot * q);
  h.block<3, 3>(0, kIdxPos) = sd;
  return h;
}

}  // namespace gvmlio
