#pragma once

#include <vector>

#include "gvmlio/common.hpp"
#include "gvmlio/imu.hpp"

namespace gvmlio {

struct RawPoint {
  Vec3 xyz = Vec3::Zero();  // sensor frame at sample time
  double t = 0.0;           // s, within (t_{k-1}, t_k]
};

// Gaussian fitted to a point's neighborhood in the scan-end frame.
struct PointDistribution {
  Vec3 mean = Vec3::Zero();
  Mat3 cov = Mat3::Zero();
};

// Static sensor-from-IMU mounting: p_imu = rot * p_lidar + trans.
struct Extrinsic {
  Mat3 rot = Mat3::Identity();
  Vec3 trans = Vec3::Zero();
};

// Keep points whose range lies in [min_range, max_range].
std::vector<RawPoint> filter_range(const std::vector<RawPoint>& points, double min_range,
                                   double max_range);

// Keep the first point of each occupied leaf voxel (order-preserving, so the
// per-point timestamps stay valid). leaf <= 0 disables.
std::vector<RawPoint> downsample_voxel(const std::vector<RawPoint>& points, double leaf);

// Project every point to the scan-end sensor frame through the relative IMU
// motion between its sample time and the cache end, conjugated by the
// extrinsic. Within an IMU interval the pose is advanced from the bracketing
// cache entry with the same zero-order-hold model the propagation uses.
std::vector<Vec3> deskew(const std::vector<RawPoint>& points,
                         const std::vector<PoseCacheEntry>& cache, const Extrinsic& ext);

// Floor eigenvalues at ratio*lambda_max (kappa-regularization); a zero matrix
// becomes floor_abs * I. Keeps determinants positive downstream.
Mat3 regularize_covariance(const Mat3& cov, double ratio = 1e-3, double floor_abs = 1e-6);

// Fit a Gaussian to each point from its y nearest neighbors (the point
// itself included), sample covariance with divisor y-1, then regularize.
std::vector<PointDistribution> fit_distributions(const std::vector<Vec3>& points, int y,
                                                 double cov_floor_ratio = 1e-3,
                                                 double cov_floor_abs = 1e-6);

}  // namespace gvmlio
