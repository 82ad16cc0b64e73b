#pragma once

#include <string>
#include <vector>

#include "gvmlio/common.hpp"
#include "gvmlio/imu.hpp"
#include "gvmlio/lidar.hpp"
#include "gvmlio/sim.hpp"
#include "gvmlio/voxel_map.hpp"

namespace gvmlio {

// IMU text format: one sample per line, "t gx gy gz ax ay az", '#' comments.
std::vector<ImuSample> read_imu(const std::string& path);
void write_imu(const std::string& path, const std::vector<ImuSample>& samples);

// Scan binary format (little-endian):
//   magic "LISC", version byte 1, float64 scan-end time, uint32 point count,
//   then per point: float64 t, float32 x, y, z (20 bytes).
struct ScanFile {
  double t_end = 0.0;
  std::vector<RawPoint> points;
};
ScanFile read_scan(const std::string& path);
void write_scan(const std::string& path, const ScanFile& scan);

// Canonical scan filename, scan-end time encoded as microseconds.
std::string scan_filename(double t_end);

// Sorted list of scan files under dir (expects the scan_*.bin layout).
std::vector<std::string> list_scan_files(const std::string& dir);

// Trajectory text format: "t px py pz qw qx qy qz" per line, quaternion
// unit-norm with canonical sign (w >= 0).
void write_trajectory(const std::string& path, const std::vector<TimedPose>& poses);
std::vector<TimedPose> read_trajectory(const std::string& path);

// Voxel-map binary export (little-endian):
//   magic "GVMP", version byte 1, float64 voxel size, uint64 cell count,
//   then one 52-byte record per voxel: int32 ix, iy, iz, count, then
//   float32 centroid xyz and covariance upper triangle
//   (c00 c01 c02 c11 c12 c22). Records sorted by key.
void export_map(const GaussianVoxelMap& map, const std::string& path);
GaussianVoxelMap read_map(const std::string& path);

// Per-voxel CSV dump of an exported map (inspection tool).
void map_to_csv(const std::string& map_path, const std::string& csv_path);

// Writes imu.txt, scans/scan_*.bin and gt_traj.txt in the layout the
// pipeline reads back.
void write_sim_dataset(const SimData& data, const std::string& dir);

// World spec text: `seed N` and `patch cx cy cz ux uy uz vx vy vz density`
// lines. Trajectory spec text: `segment dur wx wy wz ax ay az` lines plus
// rate/noise/seed keys (see the shipped examples).
WorldSpec read_world_spec(const std::string& path);
TrajectorySpec read_traj_spec(const std::string& path);

}  // namespace gvmlio
