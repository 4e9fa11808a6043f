#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <random>
#include <string>
#include <vector>

#include "pasdf/geom.hpp"
#include "pasdf/mesh.hpp"

namespace pasdf::test {

inline std::vector<Vec3> random_points(std::size_t n, std::uint64_t seed, double lo = 0.0, double hi = 1.0) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(lo, hi);
  std::vector<Vec3> out(n);
  for (auto& p : out) p = Vec3(u(rng), u(rng), u(rng));
  return out;
}

inline PointCloud random_cloud(std::size_t n, std::uint64_t seed, double lo = 0.0, double hi = 1.0) {
  return PointCloud(random_points(n, seed, lo, hi));
}

/// Uniform points on a sphere with exact outward normals.
inline PointCloud sphere_cloud(std::size_t n, std::uint64_t seed, double radius = 1.0, const Vec3& c = Vec3::Zero()) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, 1.0);
  PointCloud out;
  for (std::size_t i = 0; i < n; ++i) {
    Vec3 d(g(rng), g(rng), g(rng));
    d.normalize();
    out.points.push_back(c + radius * d);
    out.normals.push_back(d);
  }
  return out;
}

inline RigidTransform random_transform(std::uint64_t seed, double max_shift = 1.0) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, 1.0);
  std::uniform_real_distribution<double> u(-max_shift, max_shift);
  Eigen::Quaterniond q(g(rng), g(rng), g(rng), g(rng));
  q.normalize();
  return RigidTransform(q.toRotationMatrix(), Vec3(u(rng), u(rng), u(rng)));
}

inline double brute_nearest_sq(const Vec3& p, const std::vector<Vec3>& pts) {
  double best = std::numeric_limits<double>::infinity();
  for (const auto& q : pts) best = std::min(best, (p - q).squaredNorm());
  return best;
}

inline double brute_chamfer_sum(const PointCloud& a, const PointCloud& b) {
  double s = 0.0;
  for (const auto& p : a.points) s += brute_nearest_sq(p, b.points);
  for (const auto& q : b.points) s += brute_nearest_sq(q, a.points);
  return s;
}

inline double brute_chamfer_mean(const PointCloud& a, const PointCloud& b) {
  double sa = 0.0, sb = 0.0;
  for (const auto& p : a.points) sa += brute_nearest_sq(p, b.points);
  for (const auto& q : b.points) sb += brute_nearest_sq(q, a.points);
  return sa / static_cast<double>(a.size()) + sb / static_cast<double>(b.size());
}

inline bool rel_close(double a, double b, double rel) {
  return std::abs(a - b) <= rel * std::max({std::abs(a), std::abs(b), 1e-300});
}

/// Closed axis-aligned unit cube [0,1]^3, outward CCW winding.
inline TriMesh unit_cube_mesh() {
  TriMesh m;
  for (int i = 0; i < 8; ++i) m.vertices.emplace_back(i & 1, (i >> 1) & 1, (i >> 2) & 1);
  m.faces = {{0, 2, 1}, {1, 2, 3}, {4, 5, 6}, {5, 7, 6}, {0, 1, 4}, {1, 5, 4},
             {2, 6, 3}, {3, 6, 7}, {0, 4, 2}, {2, 4, 6}, {1, 3, 5}, {3, 7, 5}};
  return m;
}

/// Fresh empty directory below the system temp dir.
inline std::filesystem::path temp_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("pasdf_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace pasdf::test
