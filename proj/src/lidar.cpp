#include "gvmlio/lidar.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <string>
#include <unordered_map>

#include "gvmlio/kdtree.hpp"
#include "gvmlio/so3.hpp"

namespace gvmlio {

std::vector<RawPoint> filter_range(const std::vector<RawPoint>& points, double min_range,
                                   double max_range) {
  std::vector<RawPoint> out;
  out.reserve(points.size());
  for (const auto& p : points) {
    const double r = p.xyz.norm();
    if (r >= min_range && r <= max_range && p.xyz.allFinite()) out.push_back(p);
  }
  return out;
}

std::vector<RawPoint> downsample_voxel(const std::vector<RawPoint>& points, double leaf) {
  if (leaf <= 0.0) return points;
  struct KeyHash {
    size_t operator()(const std::array<std::int64_t, 3>& k) const {
      std::uint64_t h = static_cast<std::uint64_t>(k[0]) * 73856093ull ^
                        static_cast<std::uint64_t>(k[1]) * 19349663ull ^
                        static_cast<std::uint64_t>(k[2]) * 83492791ull;
      return static_cast<size_t>(h);
    }
  };
  std::unordered_map<std::array<std::int64_t, 3>, int, KeyHash> seen;
  seen.reserve(points.size());
  std::vector<RawPoint> out;
  out.reserve(points.size());
  for (const auto& p : points) {
    const std::array<std::int64_t, 3> key = {
        static_cast<std::int64_t>(std::floor(p.xyz.x() / leaf)),
        static_cast<std::int64_t>(std::floor(p.xyz.y() / leaf)),
        static_cast<std::int64_t>(std::floor(p.xyz.z() / leaf))};
    if (seen.emplace(key, 1).second) out.push_back(p);
  }
  return out;
}

namespace {

// Pose of the IMU at time t from the bracketing cache entry, zero-order hold.
void pose_at(const std::vector<PoseCacheEntry>& cache, double t, Mat3* rot, Vec3* pos) {
  const double eps = 1e-9;
  if (t < cache.front().t - eps || t > cache.back().t + eps) {
    throw TimestampOutOfCache("deskew: point timestamp " + std::to_string(t) +
                              " outside pose cache [" + std::to_string(cache.front().t) + ", " +
                              std::to_string(cache.back().t) + "]");
  }
  // Last entry with e.t <= t.
  auto it = std::upper_bound(cache.begin(), cache.end(), t,
                             [](double v, const PoseCacheEntry& e) { return v < e.t; });
  const PoseCacheEntry& e = (it == cache.begin()) ? *it : *(it - 1);
  const double dt = std::max(0.0, t - e.t);
  if (dt <= 0.0) {
    *rot = e.rot;
    *pos = e.pos;
    return;
  }
  *rot = exp_so3(dt * e.rate) * e.rot;
  *pos = e.pos + dt * e.vel + 0.5 * dt * dt * e.world_acc;
}

}  // namespace

std::vector<Vec3> deskew(const std::vector<RawPoint>& points,
                         const std::vector<PoseCacheEntry>& cache, const Extrinsic& ext) {
  if (cache.empty()) throw TimestampOutOfCache("deskew: empty pose cache");
  const Mat3 rot_end = cache.back().rot;
  const Vec3 pos_end = cache.back().pos;

  std::vector<Vec3> out;
  out.reserve(points.size());
  Mat3 rot_j;
  Vec3 pos_j;
  for (const auto& p : points) {
    pose_at(cache, p.t, &rot_j, &pos_j);
    // Relative IMU motion end <- j, then conjugate by the extrinsic.
    const Mat3 rel_rot = rot_end.transpose() * rot_j;
    const Vec3 rel_trans = rot_end.transpose() * (pos_j - pos_end);
    const Vec3 q = ext.rot * p.xyz + ext.trans;
    const Vec3 q_end = rel_rot * q + rel_trans;
    out.push_back(ext.rot.transpose() * (q_end - ext.trans));
  }
  return out;
}

Mat3 regularize_covariance(const Mat3& cov, double ratio, double floor_abs) {
  Eigen::SelfAdjointEigenSolver<Mat3> eig(0.5 * (cov + cov.transpose()));
  const Vec3 lambda = eig.eigenvalues();
  const double lmax = lambda(2);
  if (!(lmax > 0.0)) {
    return floor_abs * Mat3::Identity();
  }
  const double floor = ratio * lmax;
  Vec3 fixed;
  for (int i = 0; i < 3; ++i) fixed(i) = std::max(lambda(i), floor);
  Mat3 out =
      eig.eigenvectors() * fixed.asDiagonal() * eig.eigenvectors().transpose();
  return 0.5 * (out + out.transpose());
}

std::vector<PointDistribution> fit_distributions(const std::vector<Vec3>& points, int y,
                                                 double cov_floor_ratio, double cov_floor_abs) {
  if (y < 2) throw InputError("fit_distributions: neighbor count must be >= 2");
  if (static_cast<int>(points.size()) < y + 1) {
    throw TooFewPoints("fit_distributions: need at least " + std::to_string(y + 1) +
                       " points, got " + std::to_string(points.size()));
  }
  const KdTree3 tree(points);
  std::vector<PointDistribution> out(points.size());
  for (size_t j = 0; j < points.size(); ++j) {
    const std::vector<int> nn = tree.knn(points[j], y);
    Vec3 mean = Vec3::Zero();
    for (int idx : nn) mean += points[idx];
    mean /= static_cast<double>(nn.size());
    Mat3 scatter = Mat3::Zero();
    for (int idx : nn) {
      const Vec3 d = points[idx] - mean;
      scatter += d * d.transpose();
    }
    out[j].mean = mean;
    out[j].cov = regularize_covariance(scatter / static_cast<double>(y - 1), cov_floor_ratio,
                                       cov_floor_abs);
  }
  return out;
}

}  // namespace gvmlio
