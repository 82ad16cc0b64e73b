#include "gvmlio/pipeline.hpp"

#include <Eigen/Geometry>

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "gvmlio/io.hpp"
#include "gvmlio/matching.hpp"
#include "gvmlio/so3.hpp"

namespace gvmlio {

namespace fs = std::filesystem;

namespace {

struct KeyBinding {
  std::function<void(PipelineConfig&, const std::string&)> set;
  std::function<std::string(const PipelineConfig&)> get;
};

double parse_double(const std::string& key, const std::string& value) {
  try {
    size_t pos = 0;
    const double v = std::stod(value, &pos);
    if (pos != value.size()) throw std::invalid_argument(value);
    return v;
  } catch (const std::exception&) {
    throw ParseError("config key '" + key + "': not a number: '" + value + "'");
  }
}

int parse_int(const std::string& key, const std::string& value) {
  try {
    size_t pos = 0;
    const int v = std::stoi(value, &pos);
    if (pos != value.size()) throw std::invalid_argument(value);
    return v;
  } catch (const std::exception&) {
    throw ParseError("config key '" + key + "': not an integer: '" + value + "'");
  }
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1") return true;
  if (value == "false" || value == "0") return false;
  throw ParseError("config key '" + key + "': not a boolean: '" + value + "'");
}

std::string fmt_double(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

const std::map<std::string, KeyBinding>& bindings() {
  static const std::map<std::string, KeyBinding> table = [] {
    std::map<std::string, KeyBinding> m;
    auto dbl = [&m](const std::string& key, double PipelineConfig::* field) {
      m[key] = {[key, field](PipelineConfig& c, const std::string& v) {
                  c.*field = parse_double(key, v);
                },
                [field](const PipelineConfig& c) { return fmt_double(c.*field); }};
    };
    auto integer = [&m](const std::string& key, int PipelineConfig::* field) {
      m[key] = {[key, field](PipelineConfig& c, const std::string& v) {
                  c.*field = parse_int(key, v);
                },
                [field](const PipelineConfig& c) { return std::to_string(c.*field); }};
    };
    auto boolean = [&m](const std::string& key, bool PipelineConfig::* field) {
      m[key] = {[key, field](PipelineConfig& c, const std::string& v) {
                  c.*field = parse_bool(key, v);
                },
                [field](const PipelineConfig& c) { return c.*field ? "true" : "false"; }};
    };
    auto str = [&m](const std::string& key, std::string PipelineConfig::* field) {
      m[key] = {[field](PipelineConfig& c, const std::string& v) { c.*field = v; },
                [field](const PipelineConfig& c) { return c.*field; }};
    };

    dbl("voxel_size_m", &PipelineConfig::voxel_size_m);
    str("neighbor_mode", &PipelineConfig::neighbor_mode);
    dbl("similarity_threshold", &PipelineConfig::similarity_threshold);
    boolean("keep_all_matches", &PipelineConfig::keep_all_matches);
    integer("knn_neighbors", &PipelineConfig::knn_neighbors);
    dbl("cov_floor_ratio", &PipelineConfig::cov_floor_ratio);
    dbl("cov_floor_abs", &PipelineConfig::cov_floor_abs);
    dbl("meas_variance", &PipelineConfig::meas_variance);
    integer("max_iterations", &PipelineConfig::max_iterations);
    dbl("epsilon", &PipelineConfig::epsilon);
    integer("min_correspondences", &PipelineConfig::min_correspondences);
    boolean("apply_reset_jacobian", &PipelineConfig::apply_reset_jacobian);
    dbl("gyro_noise_density", &PipelineConfig::gyro_noise_density);
    dbl("acc_noise_density", &PipelineConfig::acc_noise_density);
    dbl("gyro_bias_density", &PipelineConfig::gyro_bias_density);
    dbl("acc_bias_density", &PipelineConfig::acc_bias_density);
    dbl("init_rot_std", &PipelineConfig::init_rot_std);
    dbl("init_pos_std", &PipelineConfig::init_pos_std);
    dbl("init_vel_std", &PipelineConfig::init_vel_std);
    dbl("init_bias_gyro_std", &PipelineConfig::init_bias_gyro_std);
    dbl("init_bias_acc_std", &PipelineConfig::init_bias_acc_std);
    dbl("init_gravity_std", &PipelineConfig::init_gravity_std);
    dbl("gravity_init_window_s", &PipelineConfig::gravity_init_window_s);
    dbl("min_range_m", &PipelineConfig::min_range_m);
    dbl("max_range_m", &PipelineConfig::max_range_m);
    dbl("downsample_leaf_m", &PipelineConfig::downsample_leaf_m);
    dbl("extrinsic_quat_w", &PipelineConfig::extrinsic_quat_w);
    dbl("extrinsic_quat_x", &PipelineConfig::extrinsic_quat_x);
    dbl("extrinsic_quat_y", &PipelineConfig::extrinsic_quat_y);
    dbl("extrinsic_quat_z", &PipelineConfig::extrinsic_quat_z);
    dbl("extrinsic_trans_x", &PipelineConfig::extrinsic_trans_x);
    dbl("extrinsic_trans_y", &PipelineConfig::extrinsic_trans_y);
    dbl("extrinsic_trans_z", &PipelineConfig::extrinsic_trans_z);
    boolean("export_map_file", &PipelineConfig::export_map_file);
    str("data_dir", &PipelineConfig::data_dir);
    str("out_dir", &PipelineConfig::out_dir);
    return m;
  }();
  return table;
}

std::string trim(const std::string& s) {
  const size_t a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  const size_t b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

void apply_env_overrides(PipelineConfig& cfg) {
  for (const auto& [key, binding] : bindings()) {
    std::string env_name = "GVMLIO_";
    for (char c : key) env_name += static_cast<char>(std::toupper(c));
    if (const char* value = std::getenv(env_name.c_str())) {
      binding.set(cfg, value);
    }
  }
}

void require(bool ok, const std::string& key, const std::string& range) {
  if (!ok) throw InputError("config key '" + key + "' out of range, expected " + range);
}

}  // namespace

PipelineConfig PipelineConfig::from_text(const std::string& text, bool apply_env) {
  PipelineConfig cfg;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string stripped = trim(line);
    if (stripped.empty() || stripped[0] == '#') continue;
    const size_t eq = stripped.find('=');
    if (eq == std::string::npos) {
      throw ParseError("config line " + std::to_string(lineno) + ": expected 'key = value'");
    }
    const std::string key = trim(stripped.substr(0, eq));
    const std::string value = trim(stripped.substr(eq + 1));
    const auto it = bindings().find(key);
    if (it == bindings().end()) {
      throw ParseError("config line " + std::to_string(lineno) + ": unknown key '" + key + "'");
    }
    it->second.set(cfg, value);
  }
  if (apply_env) apply_env_overrides(cfg);
  cfg.validate();
  return cfg;
}

PipelineConfig PipelineConfig::from_file(const std::string& path, bool apply_env) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return from_text(ss.str(), apply_env);
}

std::string PipelineConfig::defaults_text() {
  const PipelineConfig def;
  std::string out = "# odometry pipeline configuration (defaults)\n";
  for (const auto& [key, binding] : bindings()) {
    out += key + " = " + binding.get(def) + "\n";
  }
  return out;
}

void PipelineConfig::validate() const {
  require(voxel_size_m > 0.0 && voxel_size_m <= 100.0, "voxel_size_m", "(0, 100]");
  require(neighbor_mode == "face7" || neighbor_mode == "full27", "neighbor_mode",
          "face7|full27");
  require(similarity_threshold >= 0.0 && similarity_threshold <= 1.0, "similarity_threshold",
          "[0, 1]");
  require(knn_neighbors >= 4 && knn_neighbors <= 200, "knn_neighbors", "[4, 200]");
  require(cov_floor_ratio > 0.0 && cov_floor_ratio <= 1.0, "cov_floor_ratio", "(0, 1]");
  require(cov_floor_abs > 0.0, "cov_floor_abs", "(0, inf)");
  require(meas_variance > 0.0, "meas_variance", "(0, inf)");
  require(max_iterations >= 1 && max_iterations <= 100, "max_iterations", "[1, 100]");
  require(epsilon > 0.0, "epsilon", "(0, inf)");
  require(min_correspondences >= 1 && min_correspondences <= 1000000, "min_correspondences",
          "[1, 1e6]");
  require(gyro_noise_density > 0.0, "gyro_noise_density", "(0, inf)");
  require(acc_noise_density > 0.0, "acc_noise_density", "(0, inf)");
  require(gyro_bias_density > 0.0, "gyro_bias_density", "(0, inf)");
  require(acc_bias_density > 0.0, "acc_bias_density", "(0, inf)");
  require(init_rot_std > 0.0, "init_rot_std", "(0, inf)");
  require(init_pos_std > 0.0, "init_pos_std", "(0, inf)");
  require(init_vel_std > 0.0, "init_vel_std", "(0, inf)");
  require(init_bias_gyro_std > 0.0, "init_bias_gyro_std", "(0, inf)");
  require(init_bias_acc_std > 0.0, "init_bias_acc_std", "(0, inf)");
  require(init_gravity_std > 0.0, "init_gravity_std", "(0, inf)");
  require(gravity_init_window_s > 0.0 && gravity_init_window_s <= 10.0, "gravity_init_window_s",
          "(0, 10]");
  require(min_range_m >= 0.0, "min_range_m", "[0, inf)");
  require(max_range_m > min_range_m, "max_range_m", "(min_range_m, inf)");
  require(downsample_leaf_m >= 0.0 && downsample_leaf_m <= 10.0, "downsample_leaf_m", "[0, 10]");
  const double qn = std::sqrt(extrinsic_quat_w * extrinsic_quat_w +
                              extrinsic_quat_x * extrinsic_quat_x +
                              extrinsic_quat_y * extrinsic_quat_y +
                              extrinsic_quat_z * extrinsic_quat_z);
  require(std::abs(qn - 1.0) < 1e-3, "extrinsic_quat_w", "unit quaternion (wxyz)");
}

Extrinsic PipelineConfig::extrinsic() const {
  Eigen::Quaterniond q(extrinsic_quat_w, extrinsic_quat_x, extrinsic_quat_y, extrinsic_quat_z);
  Extrinsic e;
  e.rot = q.normalized().toRotationMatrix();
  e.trans = Vec3(extrinsic_trans_x, extrinsic_trans_y, extrinsic_trans_z);
  return e;
}

IeskfConfig PipelineConfig::ieskf() const {
  IeskfConfig c;
  c.max_iterations = max_iterations;
  c.epsilon = epsilon;
  c.meas_variance = meas_variance;
  c.apply_reset_jacobian = apply_reset_jacobian;
  c.min_correspondences = min_correspondences;
  c.similarity_threshold = similarity_threshold;
  c.neighbor_mode = neighbor_mode == "full27" ? NeighborMode::kFull27 : NeighborMode::kFace7;
  c.keep_all_matches = keep_all_matches;
  return c;
}

namespace {

double ms_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0)
      .count();
}

std::vector<PointDistribution> project_all(const FilterState& x, const Extrinsic& ext,
                                           const std::vector<PointDistribution>& dists) {
  std::vector<PointDistribution> out(dists.size());
  for (size_t i = 0; i < dists.size(); ++i) {
    const auto [mean, cov] = project_distribution(x, ext, dists[i]);
    out[i] = {mean, cov};
  }
  return out;
}

void write_metrics(const std::string& path, const std::vector<ScanMetrics>& metrics) {
  std::FILE* f = std::fopen(path.c_str(), "w");
  if (!f) throw IoError("cannot open " + path + " for writing");
  std::fprintf(f,
               "scan,t,iterations,correspondences,fit_ms,match_ms,map_ms,total_ms,"
               "residual_norm,degenerate,monotonicity_stop\n");
  for (const auto& m : metrics) {
    std::fprintf(f, "%d,%.6f,%d,%d,%.3f,%.3f,%.3f,%.3f,%.6g,%d,%d\n", m.scan_index, m.t,
                 m.iterations, m.correspondences, m.fit_ms, m.match_ms, m.map_ms, m.total_ms,
                 m.residual_norm, m.degenerate ? 1 : 0, m.monotonicity_stop ? 1 : 0);
  }
  std::fclose(f);
}

}  // namespace

void emit_plot_data(const std::string& out_dir, const std::vector<ScanMetrics>& metrics,
                    const std::vector<TimedPose>& trajectory,
                    const std::optional<std::vector<TimedPose>>& gt) {
  const fs::path plots = fs::path(out_dir) / "plots";
  fs::create_directories(plots);

  {
    std::FILE* f = std::fopen((plots / "timing.csv").string().c_str(), "w");
    if (!f) throw IoError("cannot write timing.csv");
    std::fprintf(f, "scan,t,fit_ms,match_ms,map_ms,total_ms\n");
    for (const auto& m : metrics) {
      std::fprintf(f, "%d,%.6f,%.3f,%.3f,%.3f,%.3f\n", m.scan_index, m.t, m.fit_ms, m.match_ms,
                   m.map_ms, m.total_ms);
    }
    std::fclose(f);
  }

  // Time-aligned ground-truth lookup (exact scan-end stamps).
  auto gt_at = [&](double t) -> const TimedPose* {
    if (!gt) return nullptr;
    const auto it = std::lower_bound(gt->begin(), gt->end(), t - 1e-6,
                                     [](const TimedPose& p, double v) { return p.t < v; });
    if (it != gt->end() && std::abs(it->t - t) <= 1e-6) return &*it;
    return nullptr;
  };

  {
    std::FILE* f = std::fopen((plots / "trajectory_overlay.csv").string().c_str(), "w");
    if (!f) throw IoError("cannot write trajectory_overlay.csv");
    if (gt) {
      std::fprintf(f, "t,est_x,est_y,est_z,gt_x,gt_y,gt_z\n");
    } else {
      std::fprintf(f, "# no ground truth provided; gt columns omitted\nt,est_x,est_y,est_z\n");
    }
    for (const auto& p : trajectory) {
      if (const TimedPose* g = gt_at(p.t)) {
        std::fprintf(f, "%.6f,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g\n", p.t, p.pos.x(), p.pos.y(),
                     p.pos.z(), g->pos.x(), g->pos.y(), g->pos.z());
      } else {
        std::fprintf(f, "%.6f,%.9g,%.9g,%.9g\n", p.t, p.pos.x(), p.pos.y(), p.pos.z());
      }
    }
    std::fclose(f);
  }

  {
    std::FILE* f = std::fopen((plots / "error_vs_time.csv").string().c_str(), "w");
    if (!f) throw IoError("cannot write error_vs_time.csv");
    if (gt) {
      std::fprintf(f, "t,pos_err_m,rot_err_deg\n");
      for (const auto& p : trajectory) {
        if (const TimedPose* g = gt_at(p.t)) {
          const double pos_err = (p.pos - g->pos).norm();
          const double rot_err =
              log_so3(p.rot * g->rot.transpose()).norm() * 180.0 / M_PI;
          std::fprintf(f, "%.6f,%.9g,%.9g\n", p.t, pos_err, rot_err);
        }
      }
    } else {
      std::fprintf(f, "# no ground truth provided; error columns omitted\nt\n");
      for (const auto& p : trajectory) std::fprintf(f, "%.6f\n", p.t);
    }
    std::fclose(f);
  }

  {
    std::FILE* f = std::fopen((plots / "summary.txt").string().c_str(), "w");
    if (!f) throw IoError("cannot write summary.txt");
    std::fprintf(f, "scans %zu\n", trajectory.size());
    if (gt) {
      try {
        const EvalResult ev = evaluate_ate_are(trajectory, *gt);
        std::fprintf(f, "ate_percent %s\nare_deg_per_10m %s\npairs %d\n",
                     fmt_double(ev.ate_percent).c_str(), fmt_double(ev.are_deg_per_10m).c_str(),
                     ev.pair_count);
      } catch (const InsufficientOverlap&) {
        std::fprintf(f, "ate_percent nan\nare_deg_per_10m nan\npairs 0\n");
      }
    } else {
      std::fprintf(f, "# no ground truth provided; ATE/ARE omitted\n");
    }
    std::fclose(f);
  }
}

PipelineResult run_pipeline(const PipelineConfig& cfg) {
  cfg.validate();
  if (cfg.data_dir.empty()) throw InputError("config key 'data_dir' must be set");
  if (cfg.out_dir.empty()) throw InputError("config key 'out_dir' must be set");
  fs::create_directories(cfg.out_dir);

  const std::vector<ImuSample> imu = read_imu((fs::path(cfg.data_dir) / "imu.txt").string());
  if (imu.size() < 2) throw EmptyImuBuffer("dataset has fewer than two IMU samples");
  const std::vector<std::string> scan_paths =
      list_scan_files((fs::path(cfg.data_dir) / "scans").string());
  if (scan_paths.empty()) throw InputError("dataset has no scans");

  std::vector<double> imu_dts;
  imu_dts.reserve(imu.size() - 1);
  for (size_t i = 1; i < imu.size(); ++i) imu_dts.push_back(imu[i].t - imu[i - 1].t);
  std::nth_element(imu_dts.begin(), imu_dts.begin() + imu_dts.size() / 2, imu_dts.end());
  const double imu_dt = imu_dts[imu_dts.size() / 2];
  const double imu_rate = 1.0 / imu_dt;

  const NoiseParams noise =
      NoiseParams::from_densities(cfg.gyro_noise_density, cfg.acc_noise_density,
                                  cfg.gyro_bias_density, cfg.acc_bias_density, imu_rate);
  const Extrinsic ext = cfg.extrinsic();
  const IeskfConfig ieskf_cfg = cfg.ieskf();

  // Gravity initialization: average the stationary accelerometer window.
  const double t_init = imu.front().t + cfg.gravity_init_window_s;
  Vec3 acc_mean = Vec3::Zero();
  int acc_count = 0;
  for (const auto& s : imu) {
    if (s.t > t_init) break;
    acc_mean += s.acc;
    ++acc_count;
  }
  if (acc_count == 0) throw InputError("no IMU samples inside the gravity init window");
  acc_mean /= acc_count;
  if (acc_mean.norm() < 1e-6) throw InputError("gravity init failed: zero mean acceleration");

  FilterState state;
  state.gravity = -kGravityNorm * acc_mean.normalized();

  Mat18 cov = Mat18::Zero();
  auto set_block = [&](int idx, double std_dev) {
    cov.block<3, 3>(idx, idx) = std_dev * std_dev * Mat3::Identity();
  };
  set_block(kIdxRot, cfg.init_rot_std);
  set_block(kIdxPos, cfg.init_pos_std);
  set_block(kIdxVel, cfg.init_vel_std);
  set_block(kIdxBiasGyro, cfg.init_bias_gyro_std);
  set_block(kIdxBiasAcc, cfg.init_bias_acc_std);
  set_block(kIdxGravity, cfg.init_gravity_std);

  PipelineResult result;
  GaussianVoxelMap map(cfg.voxel_size_m);
  bool map_ready = false;
  double t_prev = 0.0;
  size_t imu_cursor = 0;

  for (size_t si = 0; si < scan_paths.size(); ++si) {
    const auto t_scan_start = std::chrono::steady_clock::now();
    ScanFile scan;
    try {
      scan = read_scan(scan_paths[si]);
    } catch (const Error& e) {
      throw InputError("scan " + std::to_string(si) + " (" + scan_paths[si] +
                       "): " + e.what());
    }
    const double t_k = scan.t_end;

    if (!map_ready && t_k < t_init) {
      ++result.scans_skipped_init;
      continue;  // inside the stationary init window
    }

    ScanMetrics metrics;
    metrics.scan_index = static_cast<int>(si);
    metrics.t = t_k;

    try {
      std::vector<RawPoint> pts = filter_range(scan.points, cfg.min_range_m, cfg.max_range_m);
      pts = downsample_voxel(pts, cfg.downsample_leaf_m);

      if (!map_ready) {
        // First processed scan: assumed stationary; it seeds the map.
        const auto t_fit = std::chrono::steady_clock::now();
        std::vector<Vec3> raw(pts.size());
        for (size_t i = 0; i < pts.size(); ++i) raw[i] = pts[i].xyz;
        const std::vector<PointDistribution> dists =
            fit_distributions(raw, cfg.knn_neighbors, cfg.cov_floor_ratio, cfg.cov_floor_abs);
        metrics.fit_ms = ms_since(t_fit);
        const auto t_map = std::chrono::steady_clock::now();
        map = init_map(project_all(state, ext, dists), cfg.voxel_size_m);
        metrics.map_ms = ms_since(t_map);
        map_ready = true;
        t_prev = t_k;
      } else {
        // IMU window: one sample at/before t_prev through the last <= t_k.
        while (imu_cursor + 1 < imu.size() && imu[imu_cursor + 1].t <= t_prev) ++imu_cursor;
        std::vector<ImuSample> window;
        size_t j = imu_cursor;
        while (j < imu.size() && imu[j].t <= t_k + 1e-9) window.push_back(imu[j++]);
        if (window.empty() || window.front().t > t_prev + 1e-9) {
          throw InputError("missing IMU coverage before scan");
        }
        if (t_k - window.back().t > 2.5 * imu_dt) {
          throw InputError("missing IMU coverage: gap of " +
                           std::to_string(t_k - window.back().t) + " s before scan end");
        }

        PropagationResult pred = propagate(state, cov, t_prev, window, t_k, noise);

        const auto t_fit = std::chrono::steady_clock::now();
        const std::vector<Vec3> deskewed = deskew(pts, pred.pose_cache, ext);
        const std::vector<PointDistribution> dists = fit_distributions(
            deskewed, cfg.knn_neighbors, cfg.cov_floor_ratio, cfg.cov_floor_abs);
        metrics.fit_ms = ms_since(t_fit);

        const auto t_match = std::chrono::steady_clock::now();
        const UpdateResult update = iterated_update(pred, dists, map, ext, ieskf_cfg);
        metrics.match_ms = ms_since(t_match);

        state = update.state;
        cov = update.cov;
        t_prev = t_k;
        metrics.iterations = update.iterations_used;
        metrics.correspondences = update.correspondence_count;
        metrics.residual_norm = update.final_residual_norm;
        metrics.degenerate = update.degenerate;
        metrics.monotonicity_stop = update.monotonicity_stop;

        const auto t_map = std::chrono::steady_clock::now();
        update_map(map, voxelize_scan(project_all(state, ext, dists), cfg.voxel_size_m));
        metrics.map_ms = ms_since(t_map);
      }
    } catch (const NumericalFailure& e) {
      throw NumericalFailure("scan " + std::to_string(si) + " (t=" + std::to_string(t_k) +
                             "): " + e.what());
    } catch (const Error& e) {
      throw InputError("scan " + std::to_string(si) + " (t=" + std::to_string(t_k) +
                       "): " + e.what());
    }

    metrics.total_ms = ms_since(t_scan_start);
    result.metrics.push_back(metrics);
    result.trajectory.push_back({t_k, state.rot, state.pos});
    ++result.scans_processed;
  }

  if (!map_ready) throw InputError("no scan at or after the gravity init window");
  result.map_cells = map.size();

  write_trajectory((fs::path(cfg.out_dir) / "traj.txt").string(), result.trajectory);
  write_metrics((fs::path(cfg.out_dir) / "metrics.csv").string(), result.metrics);
  if (cfg.export_map_file) {
    export_map(map, (fs::path(cfg.out_dir) / "map.gvm").string());
  }

  std::optional<std::vector<TimedPose>> gt;
  const fs::path gt_path = fs::path(cfg.data_dir) / "gt_traj.txt";
  if (fs::exists(gt_path)) gt = read_trajectory(gt_path.string());
  emit_plot_data(cfg.out_dir, result.metrics, result.trajectory, gt);

  return result;
}

}  // namespace gvmlio
