#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "gvmlio/io.hpp"
#include "gvmlio/pipeline.hpp"
#include "gvmlio/sim.hpp"

namespace fs = std::filesystem;
using namespace gvmlio;

namespace {

WorldSpec resolve_world(const std::string& arg) {
  if (arg == "builtin:room") return make_room_world();
  if (arg == "builtin:aliased-room") return make_aliased_room_world();
  if (arg == "builtin:corridor") return make_corridor_world();
  return read_world_spec(arg);
}

TrajectorySpec resolve_traj(const std::string& arg) {
  if (arg == "builtin:room-loop") return make_room_loop_traj();
  if (arg == "builtin:deskew-sweep") return make_deskew_sweep_traj();
  if (arg == "builtin:corridor-run") return make_corridor_run_traj();
  return read_traj_spec(arg);
}

std::vector<double> parse_offsets(const std::string& arg) {
  std::vector<double> out;
  std::stringstream ss(arg);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(std::stod(item));
  }
  if (out.empty()) throw InputError("--offsets: no values given");
  return out;
}

int run_app(int argc, char** argv) {
  CLI::App app{"LiDAR-inertial odometry with a Gaussian voxel map"};
  app.require_subcommand(1);

  // simulate
  auto* sim_cmd = app.add_subcommand("simulate", "generate a synthetic dataset");
  std::string world_arg = "builtin:room";
  std::string traj_arg = "builtin:room-loop";
  std::string sim_out;
  std::int64_t seed_override = -1;
  double noise_scale = -1.0;
  sim_cmd->add_option("--world", world_arg,
                      "world spec file or builtin:{room,aliased-room,corridor}");
  sim_cmd->add_option("--traj", traj_arg,
                      "trajectory spec file or builtin:{room-loop,deskew-sweep,corridor-run}");
  sim_cmd->add_option("--out", sim_out, "output dataset directory")->required();
  sim_cmd->add_option("--seed", seed_override, "override the trajectory seed");
  sim_cmd->add_option("--noise-scale", noise_scale,
                      "scale all IMU noise densities (0 = noiseless)");

  // run
  auto* run_cmd = app.add_subcommand("run", "run the odometry pipeline on a dataset");
  std::string cfg_path, data_dir, out_dir;
  run_cmd->add_option("--config", cfg_path, "pipeline config file (defaults when omitted)");
  run_cmd->add_option("--data", data_dir, "dataset directory (imu.txt + scans/)");
  run_cmd->add_option("--out", out_dir, "output directory");

  // evaluate
  auto* eval_cmd = app.add_subcommand("evaluate", "relative-pose ATE/ARE of a trajectory");
  std::string est_path, gt_path, offsets_arg = "10,20,50";
  eval_cmd->add_option("--est", est_path, "estimated trajectory file")->required();
  eval_cmd->add_option("--gt", gt_path, "ground-truth trajectory file")->required();
  eval_cmd->add_option("--offsets", offsets_arg, "path-length offsets in meters");

  // export-map
  auto* map_cmd = app.add_subcommand("export-map", "dump a voxel map file to CSV");
  std::string map_path, csv_path;
  map_cmd->add_option("--map", map_path, "binary map file")->required();
  map_cmd->add_option("--csv", csv_path, "CSV output path")->required();

  // config
  auto* cfg_cmd = app.add_subcommand("config", "configuration helpers");
  bool show_defaults = false;
  cfg_cmd->add_flag("--defaults", show_defaults, "print the default config");

  CLI11_PARSE(app, argc, argv);

  if (sim_cmd->parsed()) {
    const WorldSpec world = resolve_world(world_arg);
    TrajectorySpec traj = resolve_traj(traj_arg);
    if (seed_override >= 0) traj.seed = static_cast<std::uint64_t>(seed_override);
    if (noise_scale >= 0.0) {
      traj.gyro_noise_density *= noise_scale;
      traj.acc_noise_density *= noise_scale;
      traj.gyro_bias_density *= noise_scale;
      traj.acc_bias_density *= noise_scale;
    }
    const SimData data = synthesize(world, traj);
    write_sim_dataset(data, sim_out);
    double path_len = 0.0;
    for (size_t i = 1; i < data.ground_truth.scan_poses.size(); ++i) {
      path_len += (data.ground_truth.scan_poses[i].pos - data.ground_truth.scan_poses[i - 1].pos)
                      .norm();
    }
    std::ofstream info(fs::path(sim_out) / "sim_info.txt");
    info << "imu_samples " << data.imu.size() << "\nscans " << data.scans.size()
         << "\npath_length_m " << path_len << "\n";
    std::printf("wrote %zu IMU samples, %zu scans (path %.2f m) to %s\n", data.imu.size(),
                data.scans.size(), path_len, sim_out.c_str());
    return 0;
  }

  if (run_cmd->parsed()) {
    PipelineConfig cfg =
        cfg_path.empty() ? PipelineConfig::from_text("") : PipelineConfig::from_file(cfg_path);
    if (!data_dir.empty()) cfg.data_dir = data_dir;
    if (!out_dir.empty()) cfg.out_dir = out_dir;
    const PipelineResult res = run_pipeline(cfg);
    std::printf("processed %d scans (%d skipped during init), map has %zu voxels\n",
                res.scans_processed, res.scans_skipped_init, res.map_cells);
    const fs::path summary = fs::path(cfg.out_dir) / "plots" / "summary.txt";
    if (fs::exists(summary)) {
      std::ifstream in(summary);
      std::cout << in.rdbuf();
    }
    return 0;
  }

  if (eval_cmd->parsed()) {
    const auto est = read_trajectory(est_path);
    const auto gt = read_trajectory(gt_path);
    const EvalResult ev = evaluate_ate_are(est, gt, parse_offsets(offsets_arg));
    std::printf("ATE[%%] %.6f\nARE[deg/10m] %.6f\npairs %d\n", ev.ate_percent,
                ev.are_deg_per_10m, ev.pair_count);
    return 0;
  }

  if (map_cmd->parsed()) {
    map_to_csv(map_path, csv_path);
    std::printf("wrote %s\n", csv_path.c_str());
    return 0;
  }

  if (cfg_cmd->parsed()) {
    if (show_defaults) {
      std::cout << PipelineConfig::defaults_text();
    } else {
      std::cout << cfg_cmd->help();
    }
    return 0;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run_app(argc, argv);
  } catch (const NumericalFailure& e) {
    std::fprintf(stderr, "numerical failure: %s\n", e.what());
    return 2;
  } catch (const InputError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "unexpected error: %s\n", e.what());
    return 2;
  }
}
