#include "pasdf/sampling.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <random>
#include <string>
#include <utility>

#include "pasdf/parallel.hpp"

namespace pasdf {

PointCloud NormalizationRecord::normalize(const PointCloud& cloud) const {
  PointCloud out;
  out.points.reserve(cloud.size());
  for (const auto& p : cloud.points) out.points.push_back(normalize(p));
  out.normals = cloud.normals;
  return out;
}

PointCloud NormalizationRecord::denormalize(const PointCloud& cloud) const {
  PointCloud out;
  out.points.reserve(cloud.size());
  for (const auto& p : cloud.points) out.points.push_back(denormalize(p));
  out.normals = cloud.normals;
  return out;
}

TriMesh NormalizationRecord::denormalize(const TriMesh& mesh) const {
  TriMesh out = mesh;
  for (auto& v : out.vertices) v = denormalize(v);
  return out;
}

NormalizationRecord normalization_for(std::span<const Vec3> points, double margin) {
  if (points.empty()) throw InvalidInput("normalization: no points");
  if (!(margin >= 0.0 && margin < 0.5)) throw InvalidParameter("normalization: margin must be in [0, 0.5)");
  const Aabb box = bounding_box(points);
  const double longest = box.extent().maxCoeff();
  if (!(longest > 0.0) || !std::isfinite(longest)) throw InvalidInput("normalization: zero-extent geometry");
  NormalizationRecord rec;
  rec.scale = longest / (1.0 - 2.0 * margin);
  rec.offset = box.min - Vec3::Constant(margin * rec.scale);
  return rec;
}

NormalizedMesh normalize_unit_cube(const TriMesh& mesh, double margin) {
  if (mesh.vertices.size() < 4) throw InvalidInput("normalize_unit_cube: mesh needs at least 4 vertices");
  NormalizedMesh out;
  out.record = normalization_for(mesh.vertices, margin);
  out.mesh = mesh;
  for (auto& v : out.mesh.vertices) v = out.record.normalize(v);
  return out;
}

WatertightReport check_watertight(const TriMesh& mesh) {
  std::map<std::pair<std::uint32_t, std::uint32_t>, std::size_t> incidence;
  for (const auto& f : mesh.faces) {
    for (int e = 0; e < 3; ++e) {
      const std::uint32_t a = f[e], b = f[(e + 1) % 3];
      ++incidence[{std::min(a, b), std::max(a, b)}];
    }
  }
  WatertightReport r;
  for (const auto& [edge, count] : incidence) {
    if (count != 2) ++r.non_manifold_edges;
  }
  r.watertight = !mesh.faces.empty() && r.non_manifold_edges == 0;
  return r;
}

PointCloud sample_surface(const TriMesh& mesh, std::size_t n, std::uint64_t seed) {
  if (n < 1) throw InvalidParameter("sample_surface: n must be >= 1");
  if (mesh.faces.empty()) throw InvalidInput("sample_surface: mesh has no faces");
  std::vector<double> cdf(mesh.faces.size());
  double total = 0.0;
  for (std::size_t f = 0; f < mesh.faces.size(); ++f) {
    total += mesh.face_area(f);
    cdf[f] = total;
  }
  if (!(total > 0.0)) throw InvalidInput("sample_surface: mesh has zero area");
  const auto normals = mesh.face_normals();

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  PointCloud out;
  out.points.reserve(n);
  out.normals.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double r = unit(rng) * total;
    const std::size_t f = std::min<std::size_t>(
        static_cast<std::size_t>(std::upper_bound(cdf.begin(), cdf.end(), r) - cdf.begin()), cdf.size() - 1);
    double u = unit(rng), v = unit(rng);
    if (u + v > 1.0) {
      u = 1.0 - u;
      v = 1.0 - v;
    }
    const auto& t = mesh.faces[f];
    const Vec3& a = mesh.vertices[t[0]];
    out.points.push_back(a + u * (mesh.vertices[t[1]] - a) + v * (mesh.vertices[t[2]] - a));
    out.normals.push_back(normals[f]);
  }
  return out;
}

namespace {

void append_uniform_box(std::vector<QuerySample>& out, const Vec3& lo, const Vec3& hi, std::size_t n,
                        SampleTier tier, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (std::size_t i = 0; i < n; ++i) {
    Vec3 p;
    for (int a = 0; a < 3; ++a) p[a] = lo[a] + unit(rng) * (hi[a] - lo[a]);
    out.push_back({p, 0.0, tier});
  }
}

void append_bbox_tier(std::vector<QuerySample>& out, std::span<const Vec3> geometry, const QueryCounts& counts,
                      std::uint64_t seed) {
  const Aabb box = bounding_box(geometry);
  const Vec3 half = 0.5 * counts.bbox_expand * box.extent();
  const Vec3 lo = (box.center() - half).cwiseMax(Vec3::Zero());
  const Vec3 hi = (box.center() + half).cwiseMin(Vec3::Ones());
  append_uniform_box(out, lo, hi, counts.n_bbox, SampleTier::bbox, derive_seed(seed, "bbox"));
}

void validate_counts(const QueryCounts& counts) {
  if (!(counts.bbox_expand > 0.0)) throw InvalidParameter("sample_queries: bbox_expand must be positive");
}

}  // namespace

std::vector<QuerySample> sample_queries(const TriMesh& mesh, const QueryCounts& counts, std::uint64_t seed) {
  validate_counts(counts);
  std::vector<QuerySample> out;
  out.reserve(counts.n_volume + counts.n_bbox + counts.n_surface);
  append_uniform_box(out, Vec3::Zero(), Vec3::Ones(), counts.n_volume, SampleTier::volume,
                     derive_seed(seed, "volume"));
  append_bbox_tier(out, mesh.vertices, counts, seed);
  if (counts.n_surface > 0) {
    const PointCloud surf = sample_surface(mesh, counts.n_surface, derive_seed(seed, "surface"));
    for (const auto& p : surf.points) out.push_back({p, 0.0, SampleTier::surface});
  }
  return out;
}

std::vector<QuerySample> sample_queries(const PointCloud& surface, const QueryCounts& counts, std::uint64_t seed) {
  validate_counts(counts);
  require_non_empty(surface, "sample_queries");
  std::vector<QuerySample> out;
  out.reserve(counts.n_volume + counts.n_bbox + counts.n_surface);
  append_uniform_box(out, Vec3::Zero(), Vec3::Ones(), counts.n_volume, SampleTier::volume,
                     derive_seed(seed, "volume"));
  append_bbox_tier(out, surface.points, counts, seed);
  std::mt19937_64 rng(derive_seed(seed, "surface"));
  std::uniform_int_distribution<std::size_t> pick(0, surface.size() - 1);
  for (std::size_t i = 0; i < counts.n_surface; ++i) out.push_back({surface.points[pick(rng)], 0.0, SampleTier::surface});
  return out;
}

std::vector<QuerySample> label_sdf(std::span<const Vec3> positions, const PointCloud& surface,
                                   const SpatialIndex& surface_index) {
  if (!surface.has_normals()) throw InvalidInput("label_sdf: surface cloud has no normals");
  std::vector<QuerySample> out(positions.size());
  parallel_for(positions.size(), [&](std::size_t i) {
    const Vec3& x = positions[i];
    const auto nb = surface_index.nearest(x);
    const Vec3 d = x - surface.points[nb.index];
    const double sign = surface.normals[nb.index].dot(d) < 0.0 ? -1.0 : 1.0;
    out[i] = {x, sign * d.norm(), SampleTier::volume};
  });
  return out;
}

std::vector<QuerySample> label_sdf(std::span<const Vec3> positions, const PointCloud& surface) {
  require_non_empty(surface, "label_sdf");
  const SpatialIndex index(surface.points);
  return label_sdf(positions, surface, index);
}

void label_queries(std::vector<QuerySample>& samples, const PointCloud& surface) {
  require_non_empty(surface, "label_queries");
  const SpatialIndex index(surface.points);
  std::vector<Vec3> positions;
  std::vector<std::size_t> slots;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (samples[i].tier == SampleTier::surface) {
      samples[i].sdf = 0.0;
      continue;
    }
    positions.push_back(samples[i].position);
    slots.push_back(i);
  }
  const auto labeled = label_sdf(positions, surface, index);
  for (std::size_t j = 0; j < slots.size(); ++j) samples[slots[j]].sdf = labeled[j].sdf;
}

}  // namespace pasdf
