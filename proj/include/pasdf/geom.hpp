#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include <Eigen/Geometry>

#include "pasdf/common.hpp"

namespace pasdf {

/// Ordered 3D points with optional unit normals (empty normals = absent).
struct PointCloud {
  std::vector<Vec3> points;
  std::vector<Vec3> normals;

  PointCloud() = default;
  explicit PointCloud(std::vector<Vec3> pts, std::vector<Vec3> nrm = {});

  std::size_t size() const { return points.size(); }
  bool empty() const { return points.empty(); }
  bool has_normals() const { return !normals.empty(); }

  /// Throws InvalidInput when normals are present but mismatched or not unit length.
  void validate() const;
};

/// Throws InvalidInput if the cloud is empty. `what` names the argument in the message.
void require_non_empty(const PointCloud& cloud, const char* what);

struct Aabb {
  Vec3 min;
  Vec3 max;
  Vec3 center() const { return 0.5 * (min + max); }
  Vec3 extent() const { return max - min; }
  double diagonal() const { return extent().norm(); }
};

Aabb bounding_box(std::span<const Vec3> points);
Vec3 centroid(std::span<const Vec3> points);

/// Element of SE(3). Rotation is kept orthonormal with det +1.
class RigidTransform {
 public:
  RigidTransform() : rotation_(Mat3::Identity()), translation_(Vec3::Zero()) {}
  RigidTransform(const Mat3& rotation, const Vec3& translation);

  static RigidTransform identity() { return {}; }
  static RigidTransform from_axis_angle(const Vec3& axis, double angle, const Vec3& translation = Vec3::Zero());

  const Mat3& rotation() const { return rotation_; }
  const Vec3& translation() const { return translation_; }

  Vec3 apply(const Vec3& p) const { return rotation_ * p + translation_; }
  Vec3 apply_normal(const Vec3& n) const { return rotation_ * n; }

  RigidTransform inverse() const;
  Eigen::Matrix4d matrix() const;

  /// Rotation angle in radians of the rotational part.
  double rotation_angle() const;

 private:
  Mat3 rotation_;
  Vec3 translation_;
};

/// Nearest orthonormal det(+1) matrix (polar factor of the SVD).
Mat3 orthonormalize(const Mat3& m);

/// Applies b first, then a. Re-orthonormalizes when drift exceeds 1e-6.
RigidTransform compose(const RigidTransform& a, const RigidTransform& b);

PointCloud apply_transform(const RigidTransform& t, const PointCloud& cloud);

/// Least-squares rigid fit (Kabsch/Umeyama, unit scale) mapping src[i] onto dst[i].
/// Needs at least three non-collinear pairs for a unique rotation; otherwise the result
/// is still a valid rigid transform, just not unique.
RigidTransform fit_rigid(std::span<const Vec3> src, std::span<const Vec3> dst);

/// Immutable exact k-d tree over a snapshot of points. Ties in distance are broken
/// by smaller source index so results match a linear scan exactly.
class SpatialIndex {
 public:
  struct Neighbor {
    std::size_t index;
    double sq_distance;
  };

  SpatialIndex() = default;
  explicit SpatialIndex(std::vector<Vec3> points);

  std::size_t size() const { return points_.size(); }
  const std::vector<Vec3>& points() const { return points_; }

  /// Exact nearest neighbor. Requires a non-empty index.
  Neighbor nearest(const Vec3& q) const;
  /// k nearest, sorted by (distance, index). Returns min(k, size) entries.
  std::vector<Neighbor> knn(const Vec3& q, std::size_t k) const;
  /// All points with distance <= radius, sorted by (distance, index).
  std::vector<Neighbor> radius_search(const Vec3& q, double radius) const;

 private:
  struct Node {
    // Leaf when dim < 0: [begin, end) into order_.
    int dim = -1;
    double split = 0.0;
    std::uint32_t begin = 0, end = 0;
    std::uint32_t left = 0, right = 0;
  };

  std::uint32_t build(std::uint32_t begin, std::uint32_t end);
  void nearest_rec(std::uint32_t node, const Vec3& q, Neighbor& best) const;
  void knn_rec(std::uint32_t node, const Vec3& q, std::size_t k, std::vector<Neighbor>& heap) const;
  void radius_rec(std::uint32_t node, const Vec3& q, double r2, std::vector<Neighbor>& out) const;

  std::vector<Vec3> points_;
  std::vector<std::uint32_t> order_;
  std::vector<Node> nodes_;
};

// --- cloud operations -------------------------------------------------------

/// Voxel-grid centroid downsampling, cell id = floor(coordinate / voxel) per axis.
/// Output order follows first occurrence of each cell in the input.
PointCloud voxel_downsample(const PointCloud& cloud, double voxel);

struct NormalEstimate {
  PointCloud cloud;
  std::size_t degenerate_count = 0;
};

/// PCA normals over k nearest neighbors (the point itself included), oriented so that
/// dot(n, viewpoint - p) >= 0. Neighborhoods with zero spread get +z and are counted.
NormalEstimate estimate_normals(const PointCloud& cloud, std::size_t k, const Vec3& viewpoint);

/// Mean-of-squared nearest distances on both sides (averaged form).
double chamfer_loss(const PointCloud& a, const PointCloud& b);
/// Sum-of-squared nearest distances on both sides (unnormalized form).
double chamfer_metric(const PointCloud& a, const PointCloud& b);

/// Squared nearest-neighbor distance from every query point into `target`.
std::vector<double> nearest_sq_distances(std::span<const Vec3> queries, const SpatialIndex& target);

}  // namespace pasdf
