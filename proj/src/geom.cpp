#include "pasdf/geom.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>
#include <unordered_map>

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include "pasdf/parallel.hpp"

namespace pasdf {

PointCloud::PointCloud(std::vector<Vec3> pts, std::vector<Vec3> nrm)
    : points(std::move(pts)), normals(std::move(nrm)) {}

void PointCloud::validate() const {
  if (normals.empty()) return;
  if (normals.size() != points.size()) {
    throw InvalidInput("normals count " + std::to_string(normals.size()) + " != points count " +
                       std::to_string(points.size()));
  }
  for (std::size_t i = 0; i < normals.size(); ++i) {
    if (std::abs(normals[i].norm() - 1.0) > 1e-6) {
      throw InvalidInput("normal " + std::to_string(i) + " is not unit length");
    }
  }
}

void require_non_empty(const PointCloud& cloud, const char* what) {
  if (cloud.empty()) throw InvalidInput(std::string(what) + ": point cloud is empty");
}

Aabb bounding_box(std::span<const Vec3> points) {
  Aabb box{Vec3::Constant(std::numeric_limits<double>::infinity()),
           Vec3::Constant(-std::numeric_limits<double>::infinity())};
  for (const auto& p : points) {
    box.min = box.min.cwiseMin(p);
    box.max = box.max.cwiseMax(p);
  }
  return box;
}

Vec3 centroid(std::span<const Vec3> points) {
  Vec3 sum = Vec3::Zero();
  for (const auto& p : points) sum += p;
  return points.empty() ? sum : Vec3(sum / static_cast<double>(points.size()));
}

// --- RigidTransform ----------------------------------------------------------

namespace {
bool needs_orthonormalization(const Mat3& r) {
  const double drift = (r.transpose() * r - Mat3::Identity()).cwiseAbs().maxCoeff();
  return drift > 1e-6 || std::abs(r.determinant() - 1.0) > 1e-6;
}
}  // namespace

Mat3 orthonormalize(const Mat3& m) {
  Eigen::JacobiSVD<Mat3> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Mat3 d = Mat3::Identity();
  d(2, 2) = (svd.matrixU() * svd.matrixV().transpose()).determinant() < 0 ? -1.0 : 1.0;
  return svd.matrixU() * d * svd.matrixV().transpose();
}

RigidTransform::RigidTransform(const Mat3& rotation, const Vec3& translation)
    : rotation_(rotation), translation_(translation) {
  if (!rotation.allFinite() || !translation.allFinite()) {
    throw InvalidParameter("rigid transform has non-finite entries");
  }
  if (rotation.determinant() <= 0.0) throw InvalidParameter("rotation has non-positive determinant");
  if (needs_orthonormalization(rotation_)) rotation_ = orthonormalize(rotation_);
}

RigidTransform RigidTransform::from_axis_angle(const Vec3& axis, double angle, const Vec3& translation) {
  return {Eigen::AngleAxisd(angle, axis.normalized()).toRotationMatrix(), translation};
}

RigidTransform RigidTransform::inverse() const {
  RigidTransform inv;
  inv.rotation_ = rotation_.transpose();
  inv.translation_ = -(inv.rotation_ * translation_);
  return inv;
}

Eigen::Matrix4d RigidTransform::matrix() const {
  Eigen::Matrix4d m = Eigen::Matrix4d::Identity();
  m.topLeftCorner<3, 3>() = rotation_;
  m.topRightCorner<3, 1>() = translation_;
  return m;
}

double RigidTransform::rotation_angle() const {
  const double c = std::clamp((rotation_.trace() - 1.0) * 0.5, -1.0, 1.0);
  return std::acos(c);
}

RigidTransform compose(const RigidTransform& a, const RigidTransform& b) {
  Mat3 r = a.rotation() * b.rotation();
  Vec3 t = a.rotation() * b.translation() + a.translation();
  if (needs_orthonormalization(r)) r = orthonormalize(r);
  return {r, t};
}

PointCloud apply_transform(const RigidTransform& t, const PointCloud& cloud) {
  PointCloud out;
  out.points.reserve(cloud.size());
  for (const auto& p : cloud.points) out.points.push_back(t.apply(p));
  out.normals.reserve(cloud.normals.size());
  for (const auto& n : cloud.normals) out.normals.push_back(t.apply_normal(n));
  return out;
}

RigidTransform fit_rigid(std::span<const Vec3> src, std::span<const Vec3> dst) {
  if (src.size() != dst.size() || src.empty()) throw InvalidInput("fit_rigid: mismatched or empty sets");
  const Vec3 cs = centroid(src);
  const Vec3 cd = centroid(dst);
  Mat3 h = Mat3::Zero();
  for (std::size_t i = 0; i < src.size(); ++i) h += (src[i] - cs) * (dst[i] - cd).transpose();
  Eigen::JacobiSVD<Mat3> svd(h, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Mat3 d = Mat3::Identity();
  if ((svd.matrixV() * svd.matrixU().transpose()).determinant() < 0) d(2, 2) = -1.0;
  const Mat3 r = svd.matrixV() * d * svd.matrixU().transpose();
  return {r, cd - r * cs};
}

// --- SpatialIndex --------------------------------------------------------------

namespace {
constexpr std::uint32_t kLeafSize = 8;

inline bool closer(double d, std::size_t i, double bd, std::size_t bi) {
  return d < bd || (d == bd && i < bi);
}

struct HeapLess {
  bool operator()(const SpatialIndex::Neighbor& a, const SpatialIndex::Neighbor& b) const {
    return closer(a.sq_distance, a.index, b.sq_distance, b.index);
  }
};
}  // namespace

SpatialIndex::SpatialIndex(std::vector<Vec3> points) : points_(std::move(points)) {
  if (points_.size() >= std::numeric_limits<std::uint32_t>::max()) {
    throw InvalidInput("SpatialIndex: too many points");
  }
  order_.resize(points_.size());
  std::iota(order_.begin(), order_.end(), 0u);
  if (!points_.empty()) {
    nodes_.reserve(2 * points_.size() / kLeafSize + 2);
    build(0, static_cast<std::uint32_t>(points_.size()));
  }
}

std::uint32_t SpatialIndex::build(std::uint32_t begin, std::uint32_t end) {
  const auto id = static_cast<std::uint32_t>(nodes_.size());
  nodes_.push_back(Node{});
  if (end - begin <= kLeafSize) {
    nodes_[id].begin = begin;
    nodes_[id].end = end;
    return id;
  }
  Vec3 lo = points_[order_[begin]], hi = lo;
  for (std::uint32_t i = begin; i < end; ++i) {
    lo = lo.cwiseMin(points_[order_[i]]);
    hi = hi.cwiseMax(points_[order_[i]]);
  }
  int dim = 0;
  (hi - lo).maxCoeff(&dim);
  const std::uint32_t mid = begin + (end - begin) / 2;
  std::nth_element(order_.begin() + begin, order_.begin() + mid, order_.begin() + end,
                   [&](std::uint32_t a, std::uint32_t b) { return points_[a][dim] < points_[b][dim]; });
  const double split = points_[order_[mid]][dim];
  const std::uint32_t left = build(begin, mid);
  const std::uint32_t right = build(mid, end);
  nodes_[id].dim = dim;
  nodes_[id].split = split;
  nodes_[id].left = left;
  nodes_[id].right = right;
  return id;
}

void SpatialIndex::nearest_rec(std::uint32_t node_id, const Vec3& q, Neighbor& best) const {
  const Node& node = nodes_[node_id];
  if (node.dim < 0) {
    for (std::uint32_t i = node.begin; i < node.end; ++i) {
      const std::uint32_t idx = order_[i];
      const double d = (points_[idx] - q).squaredNorm();
      if (closer(d, idx, best.sq_distance, best.index)) best = {idx, d};
    }
    return;
  }
  const double diff = q[node.dim] - node.split;
  const std::uint32_t first = diff < 0 ? node.left : node.right;
  const std::uint32_t second = diff < 0 ? node.right : node.left;
  nearest_rec(first, q, best);
  if (diff * diff <= best.sq_distance) nearest_rec(second, q, best);
}

SpatialIndex::Neighbor SpatialIndex::nearest(const Vec3& q) const {
  if (points_.empty()) throw InvalidInput("SpatialIndex::nearest on empty index");
  Neighbor best{std::numeric_limits<std::size_t>::max(), std::numeric_limits<double>::infinity()};
  nearest_rec(0, q, best);
  return best;
}

void SpatialIndex::knn_rec(std::uint32_t node_id, const Vec3& q, std::size_t k,
                           std::vector<Neighbor>& heap) const {
  const Node& node = nodes_[node_id];
  if (node.dim < 0) {
    for (std::uint32_t i = node.begin; i < node.end; ++i) {
      const std::uint32_t idx = order_[i];
      const double d = (points_[idx] - q).squaredNorm();
      if (heap.size() < k) {
        heap.push_back({idx, d});
        std::push_heap(heap.begin(), heap.end(), HeapLess{});
      } else if (closer(d, idx, heap.front().sq_distance, heap.front().index)) {
        std::pop_heap(heap.begin(), heap.end(), HeapLess{});
        heap.back() = {idx, d};
        std::push_heap(heap.begin(), heap.end(), HeapLess{});
      }
    }
    return;
  }
  const double diff = q[node.dim] - node.split;
  const std::uint32_t first = diff < 0 ? node.left : node.right;
  const std::uint32_t second = diff < 0 ? node.right : node.left;
  knn_rec(first, q, k, heap);
  if (heap.size() < k || diff * diff <= heap.front().sq_distance) knn_rec(second, q, k, heap);
}

std::vector<SpatialIndex::Neighbor> SpatialIndex::knn(const Vec3& q, std::size_t k) const {
  std::vector<Neighbor> heap;
  if (points_.empty() || k == 0) return heap;
  heap.reserve(k);
  knn_rec(0, q, k, heap);
  std::sort_heap(heap.begin(), heap.end(), HeapLess{});
  return heap;
}

void SpatialIndex::radius_rec(std::uint32_t node_id, const Vec3& q, double r2,
                              std::vector<Neighbor>& out) const {
  const Node& node = nodes_[node_id];
  if (node.dim < 0) {
    for (std::uint32_t i = node.begin; i < node.end; ++i) {
      const std::uint32_t idx = order_[i];
      const double d = (points_[idx] - q).squaredNorm();
      if (d <= r2) out.push_back({idx, d});
    }
    return;
  }
  const double diff = q[node.dim] - node.split;
  const std::uint32_t first = diff < 0 ? node.left : node.right;
  const std::uint32_t second = diff < 0 ? node.right : node.left;
  radius_rec(first, q, r2, out);
  if (diff * diff <= r2) radius_rec(second, q, r2, out);
}

std::vector<SpatialIndex::Neighbor> SpatialIndex::radius_search(const Vec3& q, double radius) const {
  std::vector<Neighbor> out;
  if (points_.empty() || radius < 0) return out;
  radius_rec(0, q, radius * radius, out);
  std::sort(out.begin(), out.end(), HeapLess{});
  return out;
}

// --- cloud operations ----------------------------------------------------------

namespace {
struct CellKey {
  std::int64_t x, y, z;
  bool operator==(const CellKey&) const = default;
};
struct CellHash {
  std::size_t operator()(const CellKey& k) const {
    return static_cast<std::size_t>(
        mix64(static_cast<std::uint64_t>(k.x) ^ mix64(static_cast<std::uint64_t>(k.y) ^ mix64(static_cast<std::uint64_t>(k.z)))));
  }
};
}  // namespace

PointCloud voxel_downsample(const PointCloud& cloud, double voxel) {
  if (!(voxel > 0.0) || !std::isfinite(voxel)) {
    throw InvalidParameter("voxel_downsample: voxel size must be positive, got " + std::to_string(voxel));
  }
  require_non_empty(cloud, "voxel_downsample");
  const bool with_normals = cloud.has_normals();

  std::unordered_map<CellKey, std::size_t, CellHash> cell_of;
  std::vector<Vec3> sums;
  std::vector<Vec3> normal_sums;
  std::vector<std::size_t> counts;
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const Vec3& p = cloud.points[i];
    const CellKey key{static_cast<std::int64_t>(std::floor(p.x() / voxel)),
                      static_cast<std::int64_t>(std::floor(p.y() / voxel)),
                      static_cast<std::int64_t>(std::floor(p.z() / voxel))};
    auto [it, inserted] = cell_of.try_emplace(key, sums.size());
    if (inserted) {
      sums.push_back(Vec3::Zero());
      counts.push_back(0);
      if (with_normals) normal_sums.push_back(Vec3::Zero());
    }
    sums[it->second] += p;
    ++counts[it->second];
    if (with_normals) normal_sums[it->second] += cloud.normals[i];
  }

  PointCloud out;
  out.points.reserve(sums.size());
  for (std::size_t c = 0; c < sums.size(); ++c) out.points.push_back(sums[c] / static_cast<double>(counts[c]));
  if (with_normals) {
    bool all_valid = true;
    out.normals.reserve(sums.size());
    for (std::size_t c = 0; c < sums.size(); ++c) {
      const Vec3 avg = normal_sums[c] / static_cast<double>(counts[c]);
      if (avg.norm() < 1e-9) {
        all_valid = false;
        out.normals.push_back(Vec3::UnitZ());
      } else {
        out.normals.push_back(avg.normalized());
      }
    }
    // A cloud carries normals for every point or none, so one collapsed cell drops them all.
    if (!all_valid) out.normals.clear();
  }
  return out;
}

NormalEstimate estimate_normals(const PointCloud& cloud, std::size_t k, const Vec3& viewpoint) {
  if (k < 3) throw InvalidParameter("estimate_normals: k must be >= 3");
  if (cloud.size() < k) {
    throw InvalidInput("estimate_normals: cloud has " + std::to_string(cloud.size()) + " points, k = " +
                       std::to_string(k));
  }
  const SpatialIndex index(cloud.points);
  NormalEstimate result;
  result.cloud.points = cloud.points;
  result.cloud.normals.resize(cloud.size());
  std::vector<char> degenerate(cloud.size(), 0);

  parallel_for(cloud.size(), [&](std::size_t i) {
    const auto nbrs = index.knn(cloud.points[i], k);
    Vec3 mean = Vec3::Zero();
    for (const auto& n : nbrs) mean += cloud.points[n.index];
    mean /= static_cast<double>(nbrs.size());
    Mat3 cov = Mat3::Zero();
    for (const auto& n : nbrs) {
      const Vec3 d = cloud.points[n.index] - mean;
      cov += d * d.transpose();
    }
    if (cov.trace() <= 0.0) {
      result.cloud.normals[i] = Vec3::UnitZ();
      degenerate[i] = 1;
      return;
    }
    Eigen::SelfAdjointEigenSolver<Mat3> eig(cov);
    Vec3 normal = eig.eigenvectors().col(0).normalized();
    if (normal.dot(viewpoint - cloud.points[i]) < 0.0) normal = -normal;
    result.cloud.normals[i] = normal;
  });
  result.degenerate_count = static_cast<std::size_t>(std::count(degenerate.begin(), degenerate.end(), 1));
  return result;
}

std::vector<double> nearest_sq_distances(std::span<const Vec3> queries, const SpatialIndex& target) {
  std::vector<double> out(queries.size());
  parallel_for(queries.size(), [&](std::size_t i) { out[i] = target.nearest(queries[i]).sq_distance; });
  return out;
}

namespace {
struct ChamferSums {
  double ab = 0.0;
  double ba = 0.0;
};

ChamferSums chamfer_sums(const PointCloud& a, const PointCloud& b) {
  require_non_empty(a, "chamfer");
  require_non_empty(b, "chamfer");
  const SpatialIndex ia(a.points);
  const SpatialIndex ib(b.points);
  ChamferSums s;
  for (double d : nearest_sq_distances(a.points, ib)) s.ab += d;
  for (double d : nearest_sq_distances(b.points, ia)) s.ba += d;
  return s;
}
}  // namespace

double chamfer_loss(const PointCloud& a, const PointCloud& b) {
  const auto s = chamfer_sums(a, b);
  return s.ab / static_cast<double>(a.size()) + s.ba / static_cast<double>(b.size());
}

double chamfer_metric(const PointCloud& a, const PointCloud& b) {
  const auto s = chamfer_sums(a, b);
  return s.ab + s.ba;
}

}  // namespace pasdf
