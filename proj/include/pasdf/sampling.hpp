#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "pasdf/geom.hpp"
#include "pasdf/mesh.hpp"

namespace pasdf {

/// Uniform similarity into the unit cube: normalized = (p - offset) / scale.
struct NormalizationRecord {
  double scale = 1.0;
  Vec3 offset = Vec3::Zero();

  Vec3 normalize(const Vec3& p) const { return (p - offset) / scale; }
  Vec3 denormalize(const Vec3& q) const { return q * scale + offset; }
  PointCloud normalize(const PointCloud& cloud) const;
  PointCloud denormalize(const PointCloud& cloud) const;
  TriMesh denormalize(const TriMesh& mesh) const;
};

struct NormalizedMesh {
  TriMesh mesh;
  NormalizationRecord record;
};

/// Aspect-preserving map of the mesh into [margin, 1 - margin]^3; the longest axis spans
/// that interval exactly and the box is anchored at `margin` on every axis.
NormalizedMesh normalize_unit_cube(const TriMesh& mesh, double margin = 0.0);

/// Same rule for a bare point cloud (no vertex-count requirement beyond non-empty).
NormalizationRecord normalization_for(std::span<const Vec3> points, double margin = 0.0);

struct WatertightReport {
  bool watertight = false;
  std::size_t non_manifold_edges = 0;  // undirected edges not shared by exactly two faces
};

WatertightReport check_watertight(const TriMesh& mesh);

/// Area-weighted uniform surface samples carrying their face normals.
PointCloud sample_surface(const TriMesh& mesh, std::size_t n, std::uint64_t seed);

enum class SampleTier : std::uint8_t { volume = 0, bbox = 1, surface = 2 };

struct QuerySample {
  Vec3 position = Vec3::Zero();
  double sdf = 0.0;
  SampleTier tier = SampleTier::volume;
};

struct QueryCounts {
  std::size_t n_volume = 3000;
  std::size_t n_bbox = 10000;
  std::size_t n_surface = 10000;
  double bbox_expand = 1.3;
};

/// Three-tier query positions (sdf left at 0; surface tier is exactly on the surface).
/// Order: volume tier, then bbox tier, then surface tier.
std::vector<QuerySample> sample_queries(const TriMesh& mesh, const QueryCounts& counts, std::uint64_t seed);

/// Same tiers for a cloud input: the surface tier draws cloud points (with replacement).
std::vector<QuerySample> sample_queries(const PointCloud& surface, const QueryCounts& counts, std::uint64_t seed);

/// Signed distance by nearest surface sample: |x - p| * sgn(n . (x - p)), sgn(0) = +1.
std::vector<QuerySample> label_sdf(std::span<const Vec3> positions, const PointCloud& surface,
                                   const SpatialIndex& surface_index);
std::vector<QuerySample> label_sdf(std::span<const Vec3> positions, const PointCloud& surface);

/// Fills `sdf` for non-surface tiers in place; surface-tier samples keep sdf = 0.
void label_queries(std::vector<QuerySample>& samples, const PointCloud& surface);

}  // namespace pasdf
