#include "gvmlio/voxel_map.hpp"

#include <algorithm>
#include <cmath>

namespace gvmlio {

namespace {

inline std::uint64_t hash_key(const VoxelKey& k) {
  // Spatial hash: per-axis multiplies by large odd primes, xor-combined,
  // then mixed so the low bits survive power-of-two masking.
  std::uint64_t h = static_cast<std::uint64_t>(static_cast<std::int64_t>(k.x)) * 73856093ull ^
                    static_cast<std::uint64_t>(static_cast<std::int64_t>(k.y)) * 19349663ull ^
                    static_cast<std::uint64_t>(static_cast<std::int64_t>(k.z)) * 83492791ull;
  h ^= h >> 33;
  h *= 0xff51afd7ed558ccdull;
  h ^= h >> 33;
  return h;
}

}  // namespace

VoxelKey voxel_key(const Vec3& p, double r) {
  if (!(r > 0.0)) throw InputError("voxel_key: voxel size must be positive");
  return VoxelKey{static_cast<std::int32_t>(std::floor(p.x() / r)),
                  static_cast<std::int32_t>(std::floor(p.y() / r)),
                  static_cast<std::int32_t>(std::floor(p.z() / r))};
}

std::vector<VoxelKey> neighbor_keys(const VoxelKey& key, NeighborMode mode) {
  std::vector<VoxelKey> out;
  out.reserve(mode == NeighborMode::kFace7 ? 7 : 27);
  out.push_back(key);
  out.push_back({key.x + 1, key.y, key.z});
  out.push_back({key.x - 1, key.y, key.z});
  out.push_back({key.x, key.y + 1, key.z});
  out.push_back({key.x, key.y - 1, key.z});
  out.push_back({key.x, key.y, key.z + 1});
  out.push_back({key.x, key.y, key.z - 1});
  if (mode == NeighborMode::kFull27) {
    for (int dx = -1; dx <= 1; ++dx) {
      for (int dy = -1; dy <= 1; ++dy) {
        for (int dz = -1; dz <= 1; ++dz) {
          if (std::abs(dx) + std::abs(dy) + std::abs(dz) <= 1) continue;  // already emitted
          out.push_back({key.x + dx, key.y + dy, key.z + dz});
        }
      }
    }
  }
  return out;
}

GaussianVoxelMap::GaussianVoxelMap(double voxel_size) : voxel_size_(voxel_size) {
  if (!(voxel_size > 0.0)) throw InputError("GaussianVoxelMap: voxel size must be positive");
  const std::size_t cap = 64;
  mask_ = cap - 1;
  keys_.resize(cap);
  cells_.resize(cap);
  occupied_.assign(cap, 0);
}

std::size_t GaussianVoxelMap::slot_for(const VoxelKey& key) const {
  std::size_t i = hash_key(key) & mask_;
  while (occupied_[i] && !(keys_[i] == key)) i = (i + 1) & mask_;
  return i;
}

const VoxelCell* GaussianVoxelMap::query(const VoxelKey& key) const {
  const std::size_t i = slot_for(key);
  return occupied_[i] ? &cells_[i] : nullptr;
}

void GaussianVoxelMap::insert(const VoxelKey& key, const VoxelCell& cell) {
  if ((size_ + 1) * 10 >= keys_.size() * 7) grow();
  const std::size_t i = slot_for(key);
  if (!occupied_[i]) {
    occupied_[i] = 1;
    keys_[i] = key;
    ++size_;
  }
  cells_[i] = cell;
}

void GaussianVoxelMap::grow() {
  std::vector<VoxelKey> old_keys = std::move(keys_);
  std::vector<VoxelCell> old_cells = std::move(cells_);
  std::vector<std::uint8_t> old_occ = std::move(occupied_);

  const std::size_t cap = old_keys.size() * 2;
  mask_ = cap - 1;
  keys_.assign(cap, VoxelKey{});
  cells_.assign(cap, VoxelCell{});
  occupied_.assign(cap, 0);
  for (std::size_t i = 0; i < old_keys.size(); ++i) {
    if (!old_occ[i]) continue;
    const std::size_t j = slot_for(old_keys[i]);
    occupied_[j] = 1;
    keys_[j] = old_keys[i];
    cells_[j] = old_cells[i];
  }
}

std::vector<std::pair<VoxelKey, VoxelCell>> GaussianVoxelMap::sorted_cells() const {
  std::vector<std::pair<VoxelKey, VoxelCell>> out;
  out.reserve(size_);
  for_each([&](const VoxelKey& k, const VoxelCell& c) { out.emplace_back(k, c); });
  std::sort(out.begin(), out.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });
  return out;
}

GaussianVoxelMap voxelize_scan(const std::vector<PointDistribution>& dists, double r) {
  if (dists.empty()) throw InputError("voxelize_scan: empty distribution list");
  GaussianVoxelMap map(r);
  // Accumulate sums in input order so results are bit-reproducible.
  for (const auto& d : dists) {
    const VoxelKey key = voxel_key(d.mean, r);
    const VoxelCell* existing = map.query(key);
    VoxelCell cell;
    if (existing) cell = *existing;
    cell.centroid += d.mean;
    cell.cov += d.cov;
    cell.count += 1;
    map.insert(key, cell);
  }
  // Finalize sums into averages.
  std::vector<std::pair<VoxelKey, VoxelCell>> cells = map.sorted_cells();
  for (auto& [key, cell] : cells) {
    const double n = static_cast<double>(cell.count);
    cell.centroid /= n;
    cell.cov /= n;
    map.insert(key, cell);
  }
  return map;
}

void update_map(GaussianVoxelMap& map, const GaussianVoxelMap& temp) {
  if (map.voxel_size() != temp.voxel_size()) {
    throw VoxelSizeMismatch("update_map: voxel sizes differ");
  }
  for (const auto& [key, incoming] : temp.sorted_cells()) {
    const VoxelCell* existing = map.query(key);
    if (!existing) {
      map.insert(key, incoming);
      continue;
    }
    const double m = static_cast<double>(existing->count);
    const double n = static_cast<double>(incoming.count);
    VoxelCell merged;
    merged.centroid = (m * existing->centroid + n * incoming.centroid) / (m + n);
    merged.cov = (m * existing->cov + n * incoming.cov) / (m + n);
    merged.count = std::max(existing->count, incoming.count);
    map.insert(key, merged);
  }
}

GaussianVoxelMap init_map(const std::vector<PointDistribution>& dists, double r) {
  return voxelize_scan(dists, r);
}

}  // namespace gvmlio
