// Acceptance suite: one criterion per invocation (argv[1] in 1..11), or all
// when no argument is given. Prints one [PASS]/[FAIL] line per criterion;
// the exit status is the number of failures.

#include <unistd.h>

#include <Eigen/Eigenvalues>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "gvmlio/ieskf.hpp"
#include "gvmlio/imu.hpp"
#include "gvmlio/io.hpp"
#include "gvmlio/lidar.hpp"
#include "gvmlio/matching.hpp"
#include "gvmlio/pipeline.hpp"
#include "gvmlio/rng.hpp"
#include "gvmlio/sim.hpp"
#include "gvmlio/so3.hpp"
#include "gvmlio/state.hpp"
#include "gvmlio/voxel_map.hpp"
#include "oracles.hpp"

using namespace gvmlio;
namespace fs = std::filesystem;

namespace {

double now_s() {
  return std::chrono::duration<double>(std::chrono::steady_clock::now().time_since_epoch())
      .count();
}

struct Outcome {
  bool ok = false;
  std::string detail;
};

fs::path scratch_dir(const std::string& tag) {
  const fs::path p =
      fs::temp_directory_path() / ("gvmlio_accept_" + tag + "_" + std::to_string(::getpid()));
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string read_bytes(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// ---------------------------------------------------------------- 1
Outcome criterion_manifold() {
  Rng rng(11001);
  double worst_chart = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const FilterState x = oracles::random_state(rng);
    const FilterState y = oracles::random_state(rng);
    ErrorState d;
    for (int k = 0; k < 18; ++k) d(k) = rng.uniform(-1.0, 1.0);
    Vec3 dr = d.segment<3>(kIdxRot);
    if (dr.norm() > 1e-12) dr = dr.normalized() * rng.uniform(0.0, 3.0);
    d.segment<3>(kIdxRot) = dr;

    worst_chart = std::max(worst_chart, (boxminus(boxplus(x, d), x) - d).norm());
    const FilterState reached = boxplus(y, boxminus(x, y));
    worst_chart = std::max(worst_chart, boxminus(reached, x).norm());
  }

  double worst_explog = 0.0;
  for (int i = 0; i < 1000; ++i) {
    Vec3 axis = oracles::random_vec(rng);
    while (axis.norm() < 1e-3) axis = oracles::random_vec(rng);
    axis.normalize();
    const double angle =
        (i % 4 == 0) ? rng.uniform(M_PI - 1e-5, M_PI) : rng.uniform(0.0, M_PI - 1e-9);
    const Mat3 r = exp_so3(angle * axis);
    worst_explog = std::max(worst_explog, (exp_so3(log_so3(r)) - r).norm());
  }

  Outcome out;
  out.ok = worst_chart < 1e-10 && worst_explog < 1e-9;
  char buf[160];
  std::snprintf(buf, sizeof(buf), "worst chart %.2e (<1e-10), worst exp/log %.2e (<1e-9)",
                worst_chart, worst_explog);
  out.detail = buf;
  return out;
}

// ---------------------------------------------------------------- 2
Outcome criterion_jacobian_gates() {
  Rng rng(11002);
  double worst_f = 0.0, worst_w = 0.0, worst_h = 0.0, worst_j = 0.0;

  for (int i = 0; i < 1000; ++i) {
    const FilterState x = oracles::random_state(rng);
    ImuSample u;
    u.gyro = oracles::random_vec(rng, 2.0);
    u.acc = oracles::random_vec(rng, 10.0);
    const double dt = 0.005;
    const auto [f_dx, f_w] = error_transition(x, u, dt);
    const FilterState base = predict_nominal(x, u, dt);
    const MatX fd_x = oracles::fd_jacobian(
        [&](const VecX& d) -> VecX {
          const FilterState xd = boxplus(x, d);
          return boxminus(boxplus(xd, kinematics_f(xd, u, Vec12::Zero(), dt)), base);
        },
        VecX::Zero(18), 1e-6);
    worst_f = std::max(worst_f, (fd_x - f_dx).norm() / f_dx.norm());
    const MatX fd_w = oracles::fd_jacobian(
        [&](const VecX& w) -> VecX {
          return boxminus(boxplus(x, kinematics_f(x, u, w, dt)), base);
        },
        VecX::Zero(12), 1e-6);
    worst_w = std::max(worst_w, (fd_w - f_w).norm() / f_w.norm());
  }

  for (int i = 0; i < 1000; ++i) {
    const FilterState x = oracles::random_state(rng);
    Extrinsic ext;
    ext.rot = oracles::random_rotation(rng);
    ext.trans = oracles::random_vec(rng, 0.3);
    const Vec3 p_lidar = oracles::random_vec(rng, 5.0);
    Correspondence c;
    c.similarity = rng.uniform(0.3, 1.0);
    c.whitening = whitening(oracles::random_spd(rng, 1e-3, 1e-1),
                            oracles::random_spd(rng, 1e-3, 1e-1), MeasurementNoise{1.0});
    c.cell.centroid = oracles::random_vec(rng, 5.0);
    const Mat3x18 h = jacobian_row(c, x, ext, p_lidar);
    const Mat3 sd = c.similarity * c.whitening;
    const MatX fd = oracles::fd_jacobian(
        [&](const VecX& d) -> VecX {
          const FilterState xd = boxplus(x, d);
          return sd * (xd.rot * (ext.rot * p_lidar + ext.trans) + xd.pos - c.cell.centroid);
        },
        VecX::Zero(18), 1e-6);
    worst_h = std::max(worst_h, (fd - h).norm() / h.norm());
  }

  for (int i = 0; i < 1000; ++i) {
    const FilterState x_hat = oracles::random_state(rng);
    ErrorState d = ErrorState::Zero();
    d.segment<3>(kIdxRot) = oracles::random_vec(rng).normalized() * rng.uniform(0.0, 2.0);
    d.segment<3>(kIdxPos) = oracles::random_vec(rng, 1.0);
    const FilterState x_n = boxplus(x_hat, d);
    const Mat18 j = projection_J(x_n, x_hat);
    const MatX fd = oracles::fd_jacobian(
        [&](const VecX& dd) -> VecX { return boxminus(boxplus(x_n, dd), x_hat); },
        VecX::Zero(18), 1e-6);
    worst_j = std::max(worst_j, (j.inverse() - fd).norm() / fd.norm());
  }

  Outcome out;
  out.ok = worst_f < 1e-5 && worst_w < 1e-5 && worst_h < 1e-5 && worst_j < 1e-5;
  char buf[200];
  std::snprintf(buf, sizeof(buf), "rel err F %.2e, Fw %.2e, H %.2e, J %.2e (all <1e-5)", worst_f,
                worst_w, worst_h, worst_j);
  out.detail = buf;
  return out;
}

// ---------------------------------------------------------------- 3
Outcome criterion_whitened_residual_identity() {
  Rng rng(11003);
  double worst_sum = 0.0, worst_identity = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const int m = 1 + static_cast<int>(rng.uniform_index(20));
    const double variance = rng.uniform(0.25, 4.0);
    double whitened = 0.0, mahalanobis = 0.0;
    for (int j = 0; j < m; ++j) {
      const Mat3 cj = oracles::random_spd(rng, 1e-3, 1e-1);
      const Mat3 ci = oracles::random_spd(rng, 1e-3, 1e-1);
      const double s = similarity(cj, ci);
      const Vec3 dmu = oracles::random_vec(rng, 0.5);
      const Mat3 d = whitening(cj, ci, MeasurementNoise{variance});

      const Vec3 z = s * d * dmu;
      whitened += z.squaredNorm() / variance;
      mahalanobis += s * s * dmu.dot((cj + ci).inverse() * dmu);

      const Mat3 lhs = d.transpose() * d / variance;
      const Mat3 rhs = (cj + ci).inverse();
      worst_identity = std::max(worst_identity, (lhs - rhs).norm() / rhs.norm());
    }
    worst_sum = std::max(worst_sum, std::abs(whitened - mahalanobis) / mahalanobis);
  }
  Outcome out;
  out.ok = worst_sum < 1e-9 && worst_identity < 1e-9;
  char buf[160];
  std::snprintf(buf, sizeof(buf),
                "weighted-sum rel err %.2e, whitening identity rel err %.2e (both <1e-9)",
                worst_sum, worst_identity);
  out.detail = buf;
  return out;
}

// ---------------------------------------------------------------- 4
Outcome criterion_map_equivalence() {
  Rng rng(11004);
  double worst = 0.0;
  for (int i = 0; i < 100; ++i) {
    const int m = 1 + static_cast<int>(rng.uniform_index(20));
    const FilterState x = oracles::random_state(rng);
    MatX h_stack(3 * m, 18);
    VecX h_vec(3 * m);
    for (int j = 0; j < m; ++j) {
      Correspondence c;
      c.similarity = rng.uniform(0.3, 1.0);
      c.whitening = whitening(oracles::random_spd(rng, 1e-3, 1e-1),
                              oracles::random_spd(rng, 1e-3, 1e-1), MeasurementNoise{1.0});
      c.proj_mean = oracles::random_vec(rng, 5.0);
      c.cell.centroid = c.proj_mean + oracles::random_vec(rng, 0.2);
      h_stack.middleRows<3>(3 * j) = jacobian_row(c, x, Extrinsic{}, oracles::random_vec(rng, 5.0));
      h_vec.segment<3>(3 * j) = residual(c);
    }
    Mat18 a;
    for (int r = 0; r < 18; ++r) {
      for (int col = 0; col < 18; ++col) a(r, col) = rng.uniform(-1.0, 1.0);
    }
    const Mat18 p_hat = 1e-2 * (a * a.transpose()) + 1e-4 * Mat18::Identity();

    ErrorState off = ErrorState::Zero();
    off.segment<3>(kIdxRot) = oracles::random_vec(rng, 0.2);
    off.segment<3>(kIdxPos) = oracles::random_vec(rng, 0.3);
    const FilterState x_n = boxplus(x, off);
    const Mat18 j_n = projection_J(x_n, x);
    const ErrorState b0 = boxminus(x_n, x);
    const double variance = rng.uniform(0.5, 2.0);

    const ErrorState dx = kalman_step(p_hat, j_n, h_stack, h_vec, b0, variance);
    const ErrorState ref =
        oracles::dense_map_minimizer(p_hat, j_n, h_stack, h_vec, b0, variance);
    worst = std::max(worst, (dx - ref).norm() / (ref.norm() + 1e-12));
  }
  Outcome out;
  out.ok = worst < 1e-8;
  char buf[120];
  std::snprintf(buf, sizeof(buf), "Kalman step vs dense minimizer rel err %.2e (<1e-8)", worst);
  out.detail = buf;
  return out;
}

// ---------------------------------------------------------------- 5
Outcome criterion_similarity_laws() {
  Rng rng(11005);
  bool laws = true;
  double worst_sym = 0.0, worst_rot = 0.0;
  for (int i = 0; i < 500; ++i) {
    const Mat3 a = oracles::random_spd(rng, 1e-4, 1e-1);
    const Mat3 b = oracles::random_spd(rng, 1e-4, 1e-1);
    const double s = similarity(a, b);
    laws = laws && s > 0.0 && s <= 1.0;
    laws = laws && similarity(a, a) > 1.0 - 1e-12;
    worst_sym = std::max(worst_sym, std::abs(s - similarity(b, a)));
    const Mat3 rot = oracles::random_rotation(rng);
    worst_rot = std::max(
        worst_rot, std::abs(s - similarity(rot * a * rot.transpose(), rot * b * rot.transpose())));
  }
  const double s_iso = similarity(Mat3::Identity(), 4.0 * Mat3::Identity());
  const double bc = oracles::bhattacharyya_diag(Vec3::Ones(), 4.0 * Vec3::Ones());
  const bool iso_ok = std::abs(s_iso - 0.71554) < 1e-5 && std::abs(s_iso - bc) < 1e-5;

  Outcome out;
  out.ok = laws && worst_sym < 1e-12 && worst_rot < 1e-12 && iso_ok;
  char buf[200];
  std::snprintf(buf, sizeof(buf),
                "s(I,4I)=%.6f (ref 0.71554, quadrature %.6f), sym %.1e, rot-inv %.1e", s_iso, bc,
                worst_sym, worst_rot);
  out.detail = buf;
  return out;
}

// ---------------------------------------------------------------- 6
Outcome criterion_voxel_exactness() {
  Rng rng(11006);
  std::vector<PointDistribution> dists;
  std::vector<std::pair<Vec3, Mat3>> raw;
  for (int i = 0; i < 100000; ++i) {
    const Vec3 mean = oracles::random_vec(rng, 25.0);
    const Mat3 cov = oracles::random_spd(rng, 1e-4, 1e-2);
    dists.push_back({mean, cov});
    raw.push_back({mean, cov});
  }
  const double r = 1.0;
  const GaussianVoxelMap map = voxelize_scan(dists, r);
  const auto oracle = oracles::brute_force_voxelize(raw, r);

  bool exact = map.size() == oracle.size();
  for (const auto& [key, cell] : oracle) {
    const VoxelCell* got = map.query({key[0], key[1], key[2]});
    if (!got || got->count != cell.count || (got->centroid - cell.centroid).norm() != 0.0 ||
        (got->cov - cell.cov).norm() != 0.0) {
      exact = false;
      break;
    }
  }

  // merge conservation + monotone cardinality over chained updates
  double worst_conservation = 0.0;
  bool monotone = true;
  GaussianVoxelMap global(r);
  std::size_t last_size = 0;
  for (int k = 0; k < 10; ++k) {
    std::vector<PointDistribution> scan;
    for (int i = 0; i < 2000; ++i) {
      scan.push_back({oracles::random_vec(rng, 25.0), oracles::random_spd(rng, 1e-4, 1e-2)});
    }
    const GaussianVoxelMap temp = voxelize_scan(scan, r);
    std::vector<std::pair<VoxelKey, VoxelCell>> before;
    for (const auto& [key, cell] : temp.sorted_cells()) {
      if (const VoxelCell* old = global.query(key)) before.push_back({key, *old});
    }
    update_map(global, temp);
    for (const auto& [key, old] : before) {
      const VoxelCell* merged = global.query(key);
      const VoxelCell* inc = temp.query(key);
      const double m = static_cast<double>(old.count);
      const double n = static_cast<double>(inc->count);
      worst_conservation = std::max(
          worst_conservation,
          ((m + n) * merged->centroid - (m * old.centroid + n * inc->centroid)).norm());
      worst_conservation =
          std::max(worst_conservation,
                   ((m + n) * merged->cov - (m * old.cov + n * inc->cov)).norm());
    }
    monotone = monotone && global.size() >= last_size;
    last_size = global.size();
  }

  Outcome out;
  out.ok = exact && worst_conservation < 1e-12 && monotone;
  char buf[200];
  std::snprintf(buf, sizeof(buf),
                "grouping oracle %s, conservation %.1e (<1e-12), cardinality monotone %s",
                exact ? "bit-exact" : "MISMATCH", worst_conservation, monotone ? "yes" : "NO");
  out.detail = buf;
  return out;
}

// ---------------------------------------------------------------- 7
Outcome criterion_o1_query() {
  // Identical local query workload against a small map and against the same
  // region embedded in a 100x larger map: hash-table latency must not grow
  // with total map size (a balanced tree would pay its log factor).
  Rng rng(11007);
  const double r = 1.0;
  const int region = 22;  // ~1.06e4 cells

  auto fill_region = [&](GaussianVoxelMap& map, int x0, int count_target) {
    int added = 0;
    for (int x = 0; added < count_target; ++x) {
      for (int y = 0; y < region && added < count_target; ++y) {
        for (int z = 0; z < region && added < count_target; ++z) {
          map.insert({x0 + x, y, z}, {Vec3(x0 + x + 0.5, y + 0.5, z + 0.5),
                                      1e-3 * Mat3::Identity(), 1});
          ++added;
        }
      }
    }
  };

  GaussianVoxelMap small_map(r);
  fill_region(small_map, 0, 10000);
  GaussianVoxelMap big_map(r);
  fill_region(big_map, 0, 10000);
  fill_region(big_map, 1000000, 990000);  // distant cells, same shared region

  // query workload: FACE7 probes along a localized walk in the shared region
  std::vector<VoxelKey> walk;
  VoxelKey cur{5, 5, 5};
  for (int i = 0; i < 30000; ++i) {
    walk.push_back(cur);
    const int axis = static_cast<int>(rng.uniform_index(3));
    const int dir = rng.uniform() < 0.5 ? -1 : 1;
    auto bump = [&](std::int32_t v) {
      return static_cast<std::int32_t>(std::clamp<int>(v + dir, 0, region - 1));
    };
    if (axis == 0) cur.x = bump(cur.x);
    if (axis == 1) cur.y = bump(cur.y);
    if (axis == 2) cur.z = bump(cur.z);
  }

  auto measure = [&](const GaussianVoxelMap& map) {
    std::size_t found = 0;
    for (int warm = 0; warm < 2; ++warm) {
      for (const auto& k : walk) {
        for (const auto& nk : neighbor_keys(k, NeighborMode::kFace7)) {
          found += map.query(nk) != nullptr;
        }
      }
    }
    const double t0 = now_s();
    for (int rep = 0; rep < 4; ++rep) {
      for (const auto& k : walk) {
        for (const auto& nk : neighbor_keys(k, NeighborMode::kFace7)) {
          found += map.query(nk) != nullptr;
        }
      }
    }
    const double dt = now_s() - t0;
    const double queries = 4.0 * static_cast<double>(walk.size()) * 7.0;
    return std::pair<double, std::size_t>(1e9 * dt / queries, found);
  };

  const auto [small_ns, f1] = measure(small_map);
  const auto [big_ns, f2] = measure(big_map);
  const double ratio = big_ns / small_ns;

  Outcome out;
  out.ok = ratio < 2.0 && f1 == f2;
  char buf[200];
  std::snprintf(buf, sizeof(buf),
                "mean query %.1f ns at 1e4 cells, %.1f ns at 1e6 cells, ratio %.2f (<2)",
                small_ns, big_ns, ratio);
  out.detail = buf;
  return out;
}

// ---------------------------------------------------------------- 8
Outcome criterion_deskew_exactness() {
  const WorldSpec world = make_room_world();
  TrajectorySpec traj = make_deskew_sweep_traj();
  traj.points_per_scan = 800;
  traj.extrinsic.rot = exp_so3(Vec3(0.05, -0.02, 0.4));
  traj.extrinsic.trans = Vec3(0.08, -0.03, 0.12);
  const SimData data = synthesize(world, traj);
  const TrajectoryModel model(traj);

  // chain the propagation across the whole stream (noiseless, so it is exact
  // on these piecewise-constant-rate segments)
  FilterState state;
  state.gravity = traj.gravity;
  state.vel = traj.start_velocity;
  const Mat18 p0 = 1e-9 * Mat18::Identity();
  NoiseParams noise;
  double t_prev = 0.0;
  double worst = 0.0;
  size_t cursor = 0;
  for (const auto& scan : data.scans) {
    std::vector<ImuSample> window;
    while (cursor + 1 < data.imu.size() && data.imu[cursor + 1].t <= t_prev) ++cursor;
    for (size_t j = cursor; j < data.imu.size() && data.imu[j].t <= scan.t_end + 1e-12; ++j) {
      window.push_back(data.imu[j]);
    }
    const PropagationResult pred = propagate(state, p0, t_prev, window, scan.t_end, noise);
    const auto deskewed = deskew(scan.points, pred.pose_cache, traj.extrinsic);

    const TimedPose pose_end = model.pose_at(scan.t_end);
    const Mat3 rot_gl = pose_end.rot * traj.extrinsic.rot;
    const Vec3 pos_gl = pose_end.rot * traj.extrinsic.trans + pose_end.pos;
    for (size_t j = 0; j < deskewed.size(); ++j) {
      const Vec3 expected = rot_gl.transpose() * (scan.world_points[j] - pos_gl);
      worst = std::max(worst, (deskewed[j] - expected).norm());
    }
    state = pred.state;
    t_prev = scan.t_end;
  }
  Outcome out;
  out.ok = worst < 1e-6;
  char buf[120];
  std::snprintf(buf, sizeof(buf), "worst deskew residual %.2e m (<1e-6) over %zu scans", worst,
                data.scans.size());
  out.detail = buf;
  return out;
}

// ---------------------------------------------------------------- 9
Outcome criterion_end_to_end() {
  const fs::path base = scratch_dir("e2e");
  const WorldSpec world = make_room_world();

  auto run_variant = [&](const std::string& tag, double noise_scale, EvalResult* ev,
                         std::string* traj_bytes) {
    TrajectorySpec traj = make_room_loop_traj();
    traj.gyro_noise_density = 0.01 * noise_scale;
    traj.acc_noise_density = 0.1 * noise_scale;
    traj.gyro_bias_density = 1e-4 * noise_scale;
    traj.acc_bias_density = 1e-3 * noise_scale;
    const SimData data = synthesize(world, traj);
    const fs::path data_dir = base / ("data_" + tag);
    write_sim_dataset(data, data_dir.string());

    PipelineConfig cfg;
    cfg.data_dir = data_dir.string();
    cfg.out_dir = (base / ("out_" + tag)).string();
    const PipelineResult res = run_pipeline(cfg);
    *ev = evaluate_ate_are(res.trajectory, data.ground_truth.scan_poses);
    if (traj_bytes) *traj_bytes = read_bytes(base / ("out_" + tag) / "traj.txt");
    return res;
  };

  EvalResult noisy{}, noisy2{}, clean{};
  std::string bytes_a, bytes_b;
  run_variant("noisy", 1.0, &noisy, &bytes_a);
  run_variant("noisy_rerun", 1.0, &noisy2, &bytes_b);
  run_variant("clean", 0.0, &clean, nullptr);

  const bool deterministic = !bytes_a.empty() && bytes_a == bytes_b;
  Outcome out;
  out.ok = noisy.ate_percent < 1.0 && noisy.are_deg_per_10m < 0.5 && clean.ate_percent < 0.05 &&
           deterministic;
  char buf[240];
  std::snprintf(buf, sizeof(buf),
                "noisy ATE %.3f%% (<1.0), ARE %.3f deg/10m (<0.5); noiseless ATE %.4f%% "
                "(<0.05); %d pairs; rerun %s",
                noisy.ate_percent, noisy.are_deg_per_10m, clean.ate_percent, noisy.pair_count,
                deterministic ? "byte-identical" : "MISMATCH");
  out.detail = buf;
  fs::remove_all(base);
  return out;
}

// ---------------------------------------------------------------- 10
Outcome criterion_outlier_ablation() {
  // Aliased room: a near-parallel tilted twin one voxel row behind two of
  // the walls. Both runs use the literal matching scheme (every surviving
  // neighbor becomes a residual row) and differ only in the similarity
  // threshold; without the gate the twin rows are accepted and drag the
  // estimate toward the false surface every scan.
  const fs::path base = scratch_dir("ablation");
  const WorldSpec world = make_aliased_room_world();
  TrajectorySpec traj = make_room_loop_traj();
  traj.gyro_noise_density = 0.01;
  traj.acc_noise_density = 0.1;
  traj.gyro_bias_density = 1e-4;
  traj.acc_bias_density = 1e-3;
  const SimData data = synthesize(world, traj);
  const fs::path data_dir = base / "data";
  write_sim_dataset(data, data_dir.string());

  auto run_with_threshold = [&](double s_t, const std::string& tag) {
    PipelineConfig cfg;
    cfg.keep_all_matches = true;  // literal matching: keep every survivor
    cfg.similarity_threshold = s_t;
    cfg.data_dir = data_dir.string();
    cfg.out_dir = (base / ("out_" + tag)).string();
    const PipelineResult res = run_pipeline(cfg);
    return evaluate_ate_are(res.trajectory, data.ground_truth.scan_poses);
  };

  const EvalResult gated = run_with_threshold(0.6, "gated");
  const EvalResult ungated = run_with_threshold(0.0, "ungated");

  Outcome out;
  out.ok = gated.ate_percent < ungated.ate_percent;
  char buf[200];
  std::snprintf(buf, sizeof(buf),
                "gated ATE %.3f%% / ARE %.3f vs ungated ATE %.3f%% / ARE %.3f (gated strictly "
                "lower ATE: %s)",
                gated.ate_percent, gated.are_deg_per_10m, ungated.ate_percent,
                ungated.are_deg_per_10m, out.ok ? "yes" : "NO");
  out.detail = buf;
  fs::remove_all(base);
  return out;
}

// ---------------------------------------------------------------- 11
Outcome criterion_map_export_layout() {
  const fs::path base = scratch_dir("export");
  Rng rng(11011);

  GaussianVoxelMap map(0.8);
  map.insert({3, -4, 5}, {Vec3(2.5, -3.1, 4.2), 0.01 * Mat3::Identity(), 9});
  const fs::path one = base / "one.gvm";
  export_map(map, one.string());
  const bool one_ok = fs::file_size(one) == 21 + 52;

  for (int i = 0; i < 2000; ++i) {
    map.insert(voxel_key(oracles::random_vec(rng, 30.0), 0.8),
               {oracles::random_vec(rng, 30.0), oracles::random_spd(rng, 1e-4, 1e-1),
                static_cast<std::int64_t>(1 + rng.uniform_index(500))});
  }
  const fs::path many = base / "many.gvm";
  export_map(map, many.string());
  const bool size_ok = fs::file_size(many) == 21 + 52 * map.size();

  const GaussianVoxelMap back = read_map(many.string());
  bool round_ok = back.size() == map.size() && back.voxel_size() == 0.8;
  for (const auto& [key, cell] : map.sorted_cells()) {
    const VoxelCell* got = back.query(key);
    if (!got || got->count != cell.count) {
      round_ok = false;
      break;
    }
    if ((got->centroid - cell.centroid).norm() > 1e-5 * (1.0 + cell.centroid.norm()) ||
        (got->cov - cell.cov).norm() > 1e-5 * (1.0 + cell.cov.norm())) {
      round_ok = false;
      break;
    }
    for (int k = 0; k < 3; ++k) {
      const float f = static_cast<float>(cell.centroid(k));
      if (got->centroid(k) != static_cast<double>(f)) round_ok = false;  // exact float32
    }
  }

  Outcome out;
  out.ok = one_ok && size_ok && round_ok;
  char buf[160];
  std::snprintf(buf, sizeof(buf),
                "record = 52 bytes (%s), file size %s, float32 round trip %s",
                one_ok ? "yes" : "NO", size_ok ? "exact" : "WRONG", round_ok ? "exact" : "LOSSY");
  out.detail = buf;
  fs::remove_all(base);
  return out;
}

struct Criterion {
  int id;
  const char* name;
  std::function<Outcome()> run;
};

const std::vector<Criterion>& criteria() {
  static const std::vector<Criterion> list = {
      {1, "manifold round trips", criterion_manifold},
      {2, "jacobian finite-difference gates", criterion_jacobian_gates},
      {3, "whitened residual identity", criterion_whitened_residual_identity},
      {4, "kalman/MAP equivalence", criterion_map_equivalence},
      {5, "similarity laws", criterion_similarity_laws},
      {6, "voxel map exactness", criterion_voxel_exactness},
      {7, "O(1) query scaling", criterion_o1_query},
      {8, "deskew exactness", criterion_deskew_exactness},
      {9, "end-to-end synthetic odometry", criterion_end_to_end},
      {10, "outlier-rejection ablation", criterion_outlier_ablation},
      {11, "map export layout", criterion_map_export_layout},
  };
  return list;
}

}  // namespace

int main(int argc, char** argv) {
  const int which = argc > 1 ? std::atoi(argv[1]) : 0;
  int failures = 0;
  for (const auto& c : criteria()) {
    if (which != 0 && c.id != which) continue;
    const double t0 = now_s();
    Outcome out;
    try {
      out = c.run();
    } catch (const std::exception& e) {
      out.ok = false;
      out.detail = std::string("exception: ") + e.what();
    }
    std::printf("[%s] criterion %2d (%s): %s [%.1f s]\n", out.ok ? "PASS" : "FAIL", c.id, c.name,
                out.detail.c_str(), now_s() - t0);
    std::fflush(stdout);
    failures += out.ok ? 0 : 1;
  }
  return failures;
}
