#include "pasdf/repair.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>
#include <unordered_map>

#include "pasdf/parallel.hpp"
#include "pasdf/sampling.hpp"

namespace pasdf {

namespace {
#include "mc_tables.inc"

// Bourke numbering: corner offsets and the corner pair of each edge.
constexpr int kCorner[8][3] = {{0, 0, 0}, {1, 0, 0}, {1, 1, 0}, {0, 1, 0},
                               {0, 0, 1}, {1, 0, 1}, {1, 1, 1}, {0, 1, 1}};
constexpr int kEdge[12][2] = {{0, 1}, {1, 2}, {2, 3}, {3, 0}, {4, 5}, {5, 6},
                              {6, 7}, {7, 4}, {0, 4}, {1, 5}, {2, 6}, {3, 7}};
}  // namespace

void GridSpec::validate() const {
  if (resolution < 8) throw InvalidParameter("grid: resolution must be >= 8");
  const Vec3 e = bounds.extent();
  if (!(e.minCoeff() > 0.0) || !e.allFinite()) throw InvalidParameter("grid: bounds are degenerate");
}

Vec3 GridSpec::vertex(std::size_t i, std::size_t j, std::size_t k) const {
  const Vec3 h = spacing();
  return bounds.min + Vec3(h.x() * static_cast<double>(i), h.y() * static_cast<double>(j),
                           h.z() * static_cast<double>(k));
}

GridSpec grid_around(std::span<const Vec3> points, std::size_t resolution, double expand, bool clip_unit_cube) {
  if (points.empty()) throw InvalidInput("grid_around: no points");
  if (!(expand > 0.0)) throw InvalidParameter("grid_around: expand must be positive");
  const Aabb box = bounding_box(points);
  const Vec3 half = 0.5 * expand * box.extent();
  GridSpec g;
  g.resolution = resolution;
  g.bounds = {box.center() - half, box.center() + half};
  if (clip_unit_cube) {
    g.bounds.min = g.bounds.min.cwiseMax(Vec3::Zero());
    g.bounds.max = g.bounds.max.cwiseMin(Vec3::Ones());
  }
  g.validate();
  return g;
}

ScalarGrid sample_field(const GridSpec& grid, const std::function<double(const Vec3&)>& field) {
  grid.validate();
  const std::size_t n = grid.resolution;
  ScalarGrid out{grid, std::vector<double>(n * n * n)};
  parallel_for(n, [&](std::size_t k) {
    for (std::size_t j = 0; j < n; ++j) {
      for (std::size_t i = 0; i < n; ++i) out.values[i + n * (j + n * k)] = field(grid.vertex(i, j, k));
    }
  }, 1);
  return out;
}

ScalarGrid sample_field(const GridSpec& grid, const SdfModel& model, const EncodingConfig& enc) {
  grid.validate();
  const std::size_t n = grid.resolution;
  ScalarGrid out{grid, std::vector<double>(n * n * n)};
  // One z-slab per evaluation batch keeps the encoded matrix small.
  std::vector<Vec3> slab(n * n);
  for (std::size_t k = 0; k < n; ++k) {
    for (std::size_t j = 0; j < n; ++j) {
      for (std::size_t i = 0; i < n; ++i) slab[i + n * j] = grid.vertex(i, j, k);
    }
    const auto values = evaluate_sdf(model, enc, slab);
    std::copy(values.begin(), values.end(), out.values.begin() + static_cast<std::ptrdiff_t>(n * n * k));
  }
  return out;
}

TriMesh marching_cubes(const ScalarGrid& field, double iso) {
  const GridSpec& g = field.spec;
  g.validate();
  const std::size_t n = g.resolution;
  if (field.values.size() != n * n * n) throw InvalidInput("marching_cubes: field size does not match grid");
  for (std::size_t idx = 0; idx < field.values.size(); ++idx) {
    if (!std::isfinite(field.values[idx])) {
      std::ostringstream msg;
      msg << "marching_cubes: non-finite field value at grid vertex (" << idx % n << ", " << (idx / n) % n << ", "
          << idx / (n * n) << ")";
      throw NumericFailure(msg.str());
    }
  }

  struct SlabOutput {
    std::vector<std::array<std::uint64_t, 3>> faces;  // edge keys
    std::unordered_map<std::uint64_t, Vec3> positions;
  };
  std::vector<SlabOutput> slabs(n - 1);
  auto lin = [n](std::size_t i, std::size_t j, std::size_t k) { return static_cast<std::uint64_t>(i + n * (j + n * k)); };

  parallel_for(n - 1, [&](std::size_t k) {
    SlabOutput& out = slabs[k];
    std::array<double, 8> v{};
    std::array<std::uint64_t, 12> keys{};
    for (std::size_t j = 0; j + 1 < n; ++j) {
      for (std::size_t i = 0; i + 1 < n; ++i) {
        int cube = 0;
        for (int c = 0; c < 8; ++c) {
          v[c] = field.at(i + kCorner[c][0], j + kCorner[c][1], k + kCorner[c][2]);
          if (v[c] < iso) cube |= 1 << c;
        }
        if (cube == 0 || cube == 255) continue;
        const int* tri = kTriTable[cube];
        for (int t = 0; tri[t] != -1; ++t) {
          const int e = tri[t];
          // Orient each edge from its lower lattice vertex so shared edges interpolate identically.
          int a = kEdge[e][0], b = kEdge[e][1];
          if (kCorner[a][0] + kCorner[a][1] + kCorner[a][2] > kCorner[b][0] + kCorner[b][1] + kCorner[b][2]) {
            std::swap(a, b);
          }
          const std::size_t ai = i + kCorner[a][0], aj = j + kCorner[a][1], ak = k + kCorner[a][2];
          const int axis = kCorner[b][0] != kCorner[a][0] ? 0 : (kCorner[b][1] != kCorner[a][1] ? 1 : 2);
          const std::uint64_t key = 3 * lin(ai, aj, ak) + static_cast<std::uint64_t>(axis);
          keys[e] = key;
          if (!out.positions.contains(key)) {
            const double va = v[a], vb = v[b];
            const double s = va == vb ? 0.5 : (iso - va) / (vb - va);
            const Vec3 pa = g.vertex(ai, aj, ak);
            const Vec3 pb = g.vertex(i + kCorner[b][0], j + kCorner[b][1], k + kCorner[b][2]);
            out.positions.emplace(key, pa + s * (pb - pa));
          }
        }
        for (int t = 0; tri[t] != -1; t += 3) {
          // The table winds triangles toward decreasing field; reverse for outward normals.
          out.faces.push_back({keys[tri[t]], keys[tri[t + 2]], keys[tri[t + 1]]});
        }
      }
    }
  }, 1);

  TriMesh mesh;
  std::unordered_map<std::uint64_t, std::uint32_t> index;
  for (const auto& slab : slabs) {
    for (const auto& f : slab.faces) {
      if (f[0] == f[1] || f[1] == f[2] || f[0] == f[2]) continue;
      std::array<std::uint32_t, 3> face{};
      for (int c = 0; c < 3; ++c) {
        auto [it, inserted] = index.try_emplace(f[c], static_cast<std::uint32_t>(mesh.vertices.size()));
        if (inserted) mesh.vertices.push_back(slab.positions.at(f[c]));
        face[c] = it->second;
      }
      mesh.faces.push_back(face);
    }
  }
  return mesh;
}

RepairResult repair(const PointCloud& anomalous, const SdfModel& model, const EncodingConfig& enc,
                    const PointCloud& canonical, const RepairOptions& options, const PamParams& pam,
                    std::uint64_t seed) {
  require_non_empty(anomalous, "repair");
  const AlignmentResult alignment = pose_align(anomalous, canonical, pam, derive_seed(seed, "align"));
  RepairResult r;
  r.aligned_input = alignment.aligned;
  r.to_input = alignment.cumulative.inverse();
  r.converged = alignment.converged;

  const GridSpec grid = grid_around(alignment.aligned.points, options.resolution, options.expand,
                                    options.clip_unit_cube);
  r.mesh = marching_cubes(sample_field(grid, model, enc), 0.0);
  if (r.mesh.empty()) throw RepairFailed("repair: the zero level set is empty inside the grid");
  const std::size_t n = options.n_points > 0 ? options.n_points : anomalous.size();
  r.repaired = sample_surface(r.mesh, n, derive_seed(seed, "resample"));
  return r;
}

std::vector<std::size_t> hungarian(const Eigen::MatrixXd& cost) {
  if (cost.rows() != cost.cols()) throw InvalidInput("hungarian: cost matrix must be square");
  const auto n = static_cast<std::size_t>(cost.rows());
  if (n == 0) return {};
  if (!cost.allFinite()) throw InvalidInput("hungarian: non-finite cost");
  constexpr double kInf = std::numeric_limits<double>::infinity();
  // Shortest augmenting paths with row/column potentials, 1-based with a virtual column 0.
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0), minv(n + 1);
  std::vector<std::size_t> match(n + 1, 0), way(n + 1, 0);
  std::vector<char> used(n + 1);
  for (std::size_t row = 1; row <= n; ++row) {
    match[0] = row;
    std::size_t col0 = 0;
    std::fill(minv.begin(), minv.end(), kInf);
    std::fill(used.begin(), used.end(), 0);
    do {
      used[col0] = 1;
      const std::size_t r0 = match[col0];
      double delta = kInf;
      std::size_t col1 = 0;
      for (std::size_t c = 1; c <= n; ++c) {
        if (used[c]) continue;
        const double reduced = cost(static_cast<Eigen::Index>(r0 - 1), static_cast<Eigen::Index>(c - 1)) - u[r0] - v[c];
        if (reduced < minv[c]) {
          minv[c] = reduced;
          way[c] = col0;
        }
        if (minv[c] < delta) {
          delta = minv[c];
          col1 = c;
        }
      }
      for (std::size_t c = 0; c <= n; ++c) {
        if (used[c]) {
          u[match[c]] += delta;
          v[c] -= delta;
        } else {
          minv[c] -= delta;
        }
      }
      col0 = col1;
    } while (match[col0] != 0);
    do {
      const std::size_t col1 = way[col0];
      match[col0] = match[col1];
      col0 = col1;
    } while (col0 != 0);
  }
  std::vector<std::size_t> result(n);
  for (std::size_t c = 1; c <= n; ++c) result[match[c] - 1] = c - 1;
  return result;
}

double emd(const PointCloud& a, const PointCloud& b) {
  if (a.size() != b.size()) throw InvalidInput("emd: clouds must have equal size");
  require_non_empty(a, "emd");
  const auto n = static_cast<Eigen::Index>(a.size());
  Eigen::MatrixXd cost(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) cost(i, j) = (a.points[i] - b.points[j]).norm();
  }
  const auto assignment = hungarian(cost);
  double total = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) total += cost(i, static_cast<Eigen::Index>(assignment[i]));
  return total / static_cast<double>(n);
}

namespace {

PointCloud random_subset(const PointCloud& cloud, std::size_t m, std::uint64_t seed) {
  std::vector<std::size_t> idx(cloud.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::mt19937_64 rng(seed);
  std::shuffle(idx.begin(), idx.end(), rng);
  PointCloud out;
  for (std::size_t i = 0; i < m; ++i) out.points.push_back(cloud.points[idx[i]]);
  return out;
}

}  // namespace

RepairQuality repair_quality(const PointCloud& repaired, const PointCloud& reference, std::size_t emd_subsample,
                             std::uint64_t seed) {
  require_non_empty(repaired, "repair_quality repaired");
  require_non_empty(reference, "repair_quality reference");
  if (emd_subsample < 1) throw InvalidParameter("repair_quality: emd_subsample must be >= 1");
  RepairQuality q;
  q.cd = chamfer_metric(repaired, reference);
  q.cd_per_point = chamfer_loss(repaired, reference);
  q.subsample = std::min({emd_subsample, repaired.size(), reference.size()});
  q.seed = seed;
  q.emd_per_point = emd(random_subset(repaired, q.subsample, derive_seed(seed, "emd_a")),
                        random_subset(reference, q.subsample, derive_seed(seed, "emd_b")));
  return q;
}

}  // namespace pasdf
