#pragma once

#include <optional>
#include <string>
#include <vector>

#include "gvmlio/common.hpp"
#include "gvmlio/ieskf.hpp"
#include "gvmlio/lidar.hpp"
#include "gvmlio/sim.hpp"
#include "gvmlio/voxel_map.hpp"

namespace gvmlio {

// Every tunable of the odometry pipeline. Parsed from flat `key = value`
// text; any key can be overridden by an environment variable named
// GVMLIO_<KEY uppercased>. Unknown keys and out-of-range values are
// rejected with the offending key named.
struct PipelineConfig {
  // map
  double voxel_size_m = 1.0;
  std::string neighbor_mode = "face7";  // face7 | full27
  // matching
  double similarity_threshold = 0.6;
  bool keep_all_matches = false;
  // fitting
  int knn_neighbors = 10;
  double cov_floor_ratio = 1e-3;
  double cov_floor_abs = 1e-6;
  // filter
  double meas_variance = 1.0;
  int max_iterations = 5;
  double epsilon = 1e-3;
  int min_correspondences = 10;
  bool apply_reset_jacobian = true;
  // IMU noise densities (unit / sqrt(Hz))
  double gyro_noise_density = 0.01;
  double acc_noise_density = 0.1;
  double gyro_bias_density = 1e-4;
  double acc_bias_density = 1e-3;
  // initial covariance (standard deviations)
  double init_rot_std = 1e-3;
  double init_pos_std = 1e-4;
  double init_vel_std = 1e-2;
  double init_bias_gyro_std = 1e-2;
  double init_bias_acc_std = 5e-2;
  double init_gravity_std = 2e-1;
  double gravity_init_window_s = 0.5;
  // scan pre-filtering
  double min_range_m = 0.5;
  double max_range_m = 150.0;
  double downsample_leaf_m = 0.5;  // 0 disables
  // extrinsic (IMU from sensor)
  double extrinsic_quat_w = 1.0, extrinsic_quat_x = 0.0, extrinsic_quat_y = 0.0,
         extrinsic_quat_z = 0.0;
  double extrinsic_trans_x = 0.0, extrinsic_trans_y = 0.0, extrinsic_trans_z = 0.0;
  // io
  bool export_map_file = true;
  std::string data_dir;
  std::string out_dir;

  static PipelineConfig from_file(const std::string& path, bool apply_env = true);
  static PipelineConfig from_text(const std::string& text, bool apply_env = true);
  static std::string defaults_text();

  void validate() const;  // throws InputError naming the offending key
  Extrinsic extrinsic() const;
  IeskfConfig ieskf() const;
};

struct ScanMetrics {
  int scan_index = 0;
  double t = 0.0;
  int iterations = 0;
  int correspondences = 0;
  double fit_ms = 0.0;
  double match_ms = 0.0;   // correspondence matching + update solve
  double map_ms = 0.0;     // incremental map update
  double total_ms = 0.0;
  double residual_norm = 0.0;
  bool degenerate = false;
  bool monotonicity_stop = false;
};

struct PipelineResult {
  std::vector<TimedPose> trajectory;  // IMU pose at each processed scan end
  std::vector<ScanMetrics> metrics;
  std::size_t map_cells = 0;
  int scans_processed = 0;
  int scans_skipped_init = 0;
};

// Full odometry run over a dataset directory (imu.txt + scans/):
// initialize gravity from the stationary window, then per scan propagate,
// deskew, fit, iterated update and map merge. Writes traj.txt, metrics.csv
// and map.gvm under out_dir, plus plot tables (plots/) when ground truth is
// available.
PipelineResult run_pipeline(const PipelineConfig& cfg);

// Plot-data emission (also invoked by run_pipeline): per-scan timing table,
// trajectory overlay and, when gt is present, error-vs-time and an ATE/ARE
// summary.
void emit_plot_data(const std::string& out_dir, const std::vector<ScanMetrics>& metrics,
                    const std::vector<TimedPose>& trajectory,
                    const std::optional<std::vector<TimedPose>>& gt);

}  // namespace gvmlio
