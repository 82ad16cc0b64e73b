#include "gvmlio/io.hpp"

#include <Eigen/Geometry>

#include <algorithm>
#include <charconv>
#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>

namespace gvmlio {

namespace fs = std::filesystem;

namespace {

constexpr char kScanMagic[4] = {'L', 'I', 'S', 'C'};
constexpr char kMapMagic[4] = {'G', 'V', 'M', 'P'};
constexpr std::uint8_t kFormatVersion = 1;

void put_bytes(std::string& buf, const void* p, size_t n) {
  buf.append(static_cast<const char*>(p), n);
}

template <typename T>
void put(std::string& buf, T v) {
  put_bytes(buf, &v, sizeof(T));
}

template <typename T>
T take(const std::string& buf, size_t& off, const std::string& path) {
  if (off + sizeof(T) > buf.size()) {
    throw TruncatedRecord(path + ": truncated at byte offset " + std::to_string(off));
  }
  T v;
  std::memcpy(&v, buf.data() + off, sizeof(T));
  off += sizeof(T);
  return v;
}

// Shortest decimal form that parses back to the identical double.
std::string fmt(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

std::string read_file_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file_bytes(const std::string& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path + " for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed for " + path);
}

}  // namespace

std::vector<ImuSample> read_imu(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  std::vector<ImuSample> out;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const size_t first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    ImuSample s;
    std::istringstream ss(line);
    if (!(ss >> s.t >> s.gyro.x() >> s.gyro.y() >> s.gyro.z() >> s.acc.x() >> s.acc.y() >>
          s.acc.z())) {
      throw ParseError(path + ":" + std::to_string(lineno) + ": expected 7 numeric fields");
    }
    if (!out.empty() && !(s.t > out.back().t)) {
      throw NonMonotonicTimestamps(path + ":" + std::to_string(lineno) +
                                   ": timestamps must be strictly increasing");
    }
    out.push_back(s);
  }
  return out;
}

void write_imu(const std::string& path, const std::vector<ImuSample>& samples) {
  std::FILE* f = std::fopen(path.c_str(), "w");
  if (!f) throw IoError("cannot open " + path + " for writing");
  for (const auto& s : samples) {
    std::fprintf(f, "%s %s %s %s %s %s %s\n", fmt(s.t).c_str(), fmt(s.gyro.x()).c_str(),
                 fmt(s.gyro.y()).c_str(), fmt(s.gyro.z()).c_str(), fmt(s.acc.x()).c_str(),
                 fmt(s.acc.y()).c_str(), fmt(s.acc.z()).c_str());
  }
  std::fclose(f);
}

ScanFile read_scan(const std::string& path) {
  const std::string buf = read_file_bytes(path);
  size_t off = 0;
  if (buf.size() < 5 || std::memcmp(buf.data(), kScanMagic, 4) != 0) {
    throw BadMagic(path + ": not a scan file");
  }
  off = 4;
  const auto version = take<std::uint8_t>(buf, off, path);
  if (version != kFormatVersion) {
    throw BadMagic(path + ": unsupported scan version " + std::to_string(version));
  }
  ScanFile scan;
  scan.t_end = take<double>(buf, off, path);
  const auto count = take<std::uint32_t>(buf, off, path);
  scan.points.reserve(count);
  for (std::uint32_t i = 0; i < count; ++i) {
    RawPoint p;
    p.t = take<double>(buf, off, path);
    p.xyz.x() = take<float>(buf, off, path);
    p.xyz.y() = take<float>(buf, off, path);
    p.xyz.z() = take<float>(buf, off, path);
    scan.points.push_back(p);
  }
  return scan;
}

void write_scan(const std::string& path, const ScanFile& scan) {
  std::string buf;
  buf.reserve(17 + 20 * scan.points.size());
  put_bytes(buf, kScanMagic, 4);
  put(buf, kFormatVersion);
  put(buf, scan.t_end);
  put(buf, static_cast<std::uint32_t>(scan.points.size()));
  for (const auto& p : scan.points) {
    put(buf, p.t);
    put(buf, static_cast<float>(p.xyz.x()));
    put(buf, static_cast<float>(p.xyz.y()));
    put(buf, static_cast<float>(p.xyz.z()));
  }
  write_file_bytes(path, buf);
}

std::string scan_filename(double t_end) {
  char name[64];
  std::snprintf(name, sizeof(name), "scan_%013" PRId64 ".bin",
                static_cast<std::int64_t>(std::llround(t_end * 1e6)));
  return name;
}

std::vector<std::string> list_scan_files(const std::string& dir) {
  if (!fs::is_directory(dir)) throw IoError("not a directory: " + dir);
  std::vector<std::string> out;
  for (const auto& entry : fs::directory_iterator(dir)) {
    const std::string name = entry.path().filename().string();
    if (name.rfind("scan_", 0) == 0 && name.size() > 9 &&
        name.compare(name.size() - 4, 4, ".bin") == 0) {
      out.push_back(entry.path().string());
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

void write_trajectory(const std::string& path, const std::vector<TimedPose>& poses) {
  std::FILE* f = std::fopen(path.c_str(), "w");
  if (!f) throw IoError("cannot open " + path + " for writing");
  for (const auto& p : poses) {
    Eigen::Quaterniond q(p.rot);
    q.normalize();
    if (q.w() < 0.0) q.coeffs() = -q.coeffs();
    std::fprintf(f, "%s %s %s %s %s %s %s %s\n", fmt(p.t).c_str(), fmt(p.pos.x()).c_str(),
                 fmt(p.pos.y()).c_str(), fmt(p.pos.z()).c_str(), fmt(q.w()).c_str(),
                 fmt(q.x()).c_str(), fmt(q.y()).c_str(), fmt(q.z()).c_str());
  }
  std::fclose(f);
}

std::vector<TimedPose> read_trajectory(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  std::vector<TimedPose> out;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const size_t first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    double t, px, py, pz, qw, qx, qy, qz;
    std::istringstream ss(line);
    if (!(ss >> t >> px >> py >> pz >> qw >> qx >> qy >> qz)) {
      throw ParseError(path + ":" + std::to_string(lineno) + ": expected 8 numeric fields");
    }
    Eigen::Quaterniond q(qw, qx, qy, qz);
    if (std::abs(q.norm() - 1.0) > 1e-6) {
      throw ParseError(path + ":" + std::to_string(lineno) + ": quaternion not unit-norm");
    }
    TimedPose p;
    p.t = t;
    p.pos = Vec3(px, py, pz);
    p.rot = q.normalized().toRotationMatrix();
    out.push_back(p);
  }
  return out;
}

void export_map(const GaussianVoxelMap& map, const std::string& path) {
  const auto cells = map.sorted_cells();
  std::string buf;
  buf.reserve(21 + 52 * cells.size());
  put_bytes(buf, kMapMagic, 4);
  put(buf, kFormatVersion);
  put(buf, map.voxel_size());
  put(buf, static_cast<std::uint64_t>(cells.size()));
  for (const auto& [key, cell] : cells) {
    put(buf, key.x);
    put(buf, key.y);
    put(buf, key.z);
    const std::int64_t clamped =
        std::min<std::int64_t>(cell.count, std::numeric_limits<std::int32_t>::max());
    put(buf, static_cast<std::int32_t>(clamped));
    for (int i = 0; i < 3; ++i) put(buf, static_cast<float>(cell.centroid(i)));
    put(buf, static_cast<float>(cell.cov(0, 0)));
    put(buf, static_cast<float>(cell.cov(0, 1)));
    put(buf, static_cast<float>(cell.cov(0, 2)));
    put(buf, static_cast<float>(cell.cov(1, 1)));
    put(buf, static_cast<float>(cell.cov(1, 2)));
    put(buf, static_cast<float>(cell.cov(2, 2)));
  }
  write_file_bytes(path, buf);
}

GaussianVoxelMap read_map(const std::string& path) {
  const std::string buf = read_file_bytes(path);
  if (buf.size() < 5 || std::memcmp(buf.data(), kMapMagic, 4) != 0) {
    throw BadMagic(path + ": not a voxel map file");
  }
  size_t off = 4;
  const auto version = take<std::uint8_t>(buf, off, path);
  if (version != kFormatVersion) {
    throw BadMagic(path + ": unsupported map version " + std::to_string(version));
  }
  const double voxel_size = take<double>(buf, off, path);
  const auto count = take<std::uint64_t>(buf, off, path);
  GaussianVoxelMap map(voxel_size);
  for (std::uint64_t i = 0; i < count; ++i) {
    VoxelKey key;
    key.x = take<std::int32_t>(buf, off, path);
    key.y = take<std::int32_t>(buf, off, path);
    key.z = take<std::int32_t>(buf, off, path);
    VoxelCell cell;
    cell.count = take<std::int32_t>(buf, off, path);
    for (int k = 0; k < 3; ++k) cell.centroid(k) = take<float>(buf, off, path);
    const float c00 = take<float>(buf, off, path);
    const float c01 = take<float>(buf, off, path);
    const float c02 = take<float>(buf, off, path);
    const float c11 = take<float>(buf, off, path);
    const float c12 = take<float>(buf, off, path);
    const float c22 = take<float>(buf, off, path);
    cell.cov << c00, c01, c02, c01, c11, c12, c02, c12, c22;
    map.insert(key, cell);
  }
  return map;
}

void map_to_csv(const std::string& map_path, const std::string& csv_path) {
  const GaussianVoxelMap map = read_map(map_path);
  std::FILE* f = std::fopen(csv_path.c_str(), "w");
  if (!f) throw IoError("cannot open " + csv_path + " for writing");
  std::fprintf(f, "ix,iy,iz,count,mu_x,mu_y,mu_z,c00,c01,c02,c11,c12,c22\n");
  for (const auto& [key, cell] : map.sorted_cells()) {
    std::fprintf(f, "%d,%d,%d,%lld,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g\n", key.x, key.y,
                 key.z, static_cast<long long>(cell.count), cell.centroid.x(), cell.centroid.y(),
                 cell.centroid.z(), cell.cov(0, 0), cell.cov(0, 1), cell.cov(0, 2), cell.cov(1, 1),
                 cell.cov(1, 2), cell.cov(2, 2));
  }
  std::fclose(f);
}

WorldSpec read_world_spec(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  WorldSpec w;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const size_t first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    std::istringstream ss(line);
    std::string tag;
    ss >> tag;
    const std::string where = path + ":" + std::to_string(lineno);
    if (tag == "seed") {
      if (!(ss >> w.seed)) throw ParseError(where + ": seed expects an integer");
    } else if (tag == "patch") {
      PlanarPatch p;
      if (!(ss >> p.corner.x() >> p.corner.y() >> p.corner.z() >> p.edge_u.x() >> p.edge_u.y() >>
            p.edge_u.z() >> p.edge_v.x() >> p.edge_v.y() >> p.edge_v.z() >> p.density)) {
        throw ParseError(where + ": patch expects 10 numeric fields");
      }
      w.patches.push_back(p);
    } else {
      throw ParseError(where + ": unknown directive '" + tag + "'");
    }
  }
  if (w.patches.empty()) throw InvalidSpec(path + ": world has no patches");
  return w;
}

TrajectorySpec read_traj_spec(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  TrajectorySpec t;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const size_t first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    std::istringstream ss(line);
    std::string tag;
    ss >> tag;
    const std::string where = path + ":" + std::to_string(lineno);
    auto num = [&](double& v) {
      if (!(ss >> v)) throw ParseError(where + ": '" + tag + "' expects numeric fields");
    };
    if (tag == "segment") {
      TrajSegment seg;
      num(seg.duration);
      num(seg.angular_rate_body.x());
      num(seg.angular_rate_body.y());
      num(seg.angular_rate_body.z());
      num(seg.accel_body.x());
      num(seg.accel_body.y());
      num(seg.accel_body.z());
      t.segments.push_back(seg);
    } else if (tag == "imu_rate_hz") {
      num(t.imu_rate_hz);
    } else if (tag == "scan_rate_hz") {
      num(t.scan_rate_hz);
    } else if (tag == "points_per_scan") {
      double v;
      num(v);
      t.points_per_scan = static_cast<int>(v);
    } else if (tag == "seed") {
      if (!(ss >> t.seed)) throw ParseError(where + ": seed expects an integer");
    } else if (tag == "gyro_noise_density") {
      num(t.gyro_noise_density);
    } else if (tag == "acc_noise_density") {
      num(t.acc_noise_density);
    } else if (tag == "gyro_bias_density") {
      num(t.gyro_bias_density);
    } else if (tag == "acc_bias_density") {
      num(t.acc_bias_density);
    } else if (tag == "spike_probability") {
      num(t.spike_probability);
    } else if (tag == "spike_multiplier") {
      num(t.spike_multiplier);
    } else if (tag == "disturbance") {
      ImuDisturbance d;
      num(d.t_start);
      num(d.t_end);
      num(d.gyro_offset.x());
      num(d.gyro_offset.y());
      num(d.gyro_offset.z());
      num(d.acc_offset.x());
      num(d.acc_offset.y());
      num(d.acc_offset.z());
      t.disturbances.push_back(d);
    } else if (tag == "start_velocity") {
      num(t.start_velocity.x());
      num(t.start_velocity.y());
      num(t.start_velocity.z());
    } else if (tag == "init_gyro_bias") {
      num(t.init_gyro_bias.x());
      num(t.init_gyro_bias.y());
      num(t.init_gyro_bias.z());
    } else if (tag == "init_acc_bias") {
      num(t.init_acc_bias.x());
      num(t.init_acc_bias.y());
      num(t.init_acc_bias.z());
    } else if (tag == "gravity") {
      num(t.gravity.x());
      num(t.gravity.y());
      num(t.gravity.z());
    } else if (tag == "extrinsic_quat_wxyz") {
      double w, x, y, z;
      num(w);
      num(x);
      num(y);
      num(z);
      Eigen::Quaterniond q(w, x, y, z);
      if (std::abs(q.norm() - 1.0) > 1e-3) throw ParseError(where + ": quaternion not unit");
      t.extrinsic.rot = q.normalized().toRotationMatrix();
    } else if (tag == "extrinsic_trans") {
      num(t.extrinsic.trans.x());
      num(t.extrinsic.trans.y());
      num(t.extrinsic.trans.z());
    } else {
      throw ParseError(where + ": unknown directive '" + tag + "'");
    }
  }
  if (t.segments.empty()) throw InvalidSpec(path + ": trajectory has no segments");
  return t;
}

void write_sim_dataset(const SimData& data, const std::string& dir) {
  fs::create_directories(fs::path(dir) / "scans");
  write_imu((fs::path(dir) / "imu.txt").string(), data.imu);
  for (const auto& scan : data.scans) {
    ScanFile file;
    file.t_end = scan.t_end;
    file.points = scan.points;
    write_scan((fs::path(dir) / "scans" / scan_filename(scan.t_end)).string(), file);
  }
  write_trajectory((fs::path(dir) / "gt_traj.txt").string(), data.ground_truth.scan_poses);
}

}  // namespace gvmlio
