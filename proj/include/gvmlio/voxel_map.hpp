#pragma once

#include <cstdint>
#include <vector>

#include "gvmlio/common.hpp"
#include "gvmlio/lidar.hpp"

namespace gvmlio {

struct VoxelKey {
  std::int32_t x = 0;
  std::int32_t y = 0;
  std::int32_t z = 0;

  bool operator==(const VoxelKey& o) const { return x == o.x && y == o.y && z == o.z; }
  bool operator<(const VoxelKey& o) const {
    if (x != o.x) return x < o.x;
    if (y != o.y) return y < o.y;
    return z < o.z;
  }
};

struct VoxelCell {
  Vec3 centroid = Vec3::Zero();
  Mat3 cov = Mat3::Zero();
  std::int64_t count = 0;
};

enum class NeighborMode { kFace7, kFull27 };

// floor(p / r) per axis; the upper boundary belongs to the upper cell.
VoxelKey voxel_key(const Vec3& p, double r);

// Candidate set around a query voxel, deterministic order: center, then the
// six face neighbors (+x, -x, +y, -y, +z, -z), then for kFull27 the
// remaining offsets in lexicographic order.
std::vector<VoxelKey> neighbor_keys(const VoxelKey& key, NeighborMode mode);

// Hash table from voxel coordinates to one (centroid, covariance, count)
// summary per voxel. Open addressing with linear probing; voxels are never
// deleted, so the table only grows.
class GaussianVoxelMap {
 public:
  explicit GaussianVoxelMap(double voxel_size);

  double voxel_size() const { return voxel_size_; }
  std::size_t size() const { return size_; }

  // nullptr when absent (a normal outcome, not an error).
  const VoxelCell* query(const VoxelKey& key) const;

  // Inserts or overwrites.
  void insert(const VoxelKey& key, const VoxelCell& cell);

  // Occupied cells in sorted key order (canonical, for export and tests).
  std::vector<std::pair<VoxelKey, VoxelCell>> sorted_cells() const;

  template <typename Fn>
  void for_each(Fn&& fn) const {
    for (std::size_t i = 0; i < keys_.size(); ++i) {
      if (occupied_[i]) fn(keys_[i], cells_[i]);
    }
  }

 private:
  std::size_t slot_for(const VoxelKey& key) const;
  void grow();

  double voxel_size_;
  std::size_t size_ = 0;
  std::size_t mask_ = 0;
  std::vector<VoxelKey> keys_;
  std::vector<VoxelCell> cells_;
  std::vector<std::uint8_t> occupied_;
};

// One temporary cell per occupied voxel: centroid/covariance are the plain
// averages of the member distributions, count is the member count.
GaussianVoxelMap voxelize_scan(const std::vector<PointDistribution>& dists, double r);

// Merge a temporary per-scan map into the global map: absent keys inserted
// verbatim; present keys averaged by recorded counts
//   mu <- (M mu + N mu_bar) / (M + N),  C likewise,  M <- max(M, N).
void update_map(GaussianVoxelMap& map, const GaussianVoxelMap& temp);

// The first scan's temporary map becomes the global map.
GaussianVoxelMap init_map(const std::vector<PointDistribution>& dists, double r);

}  // namespace gvmlio
