#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <vector>

#include "pasdf/geom.hpp"

namespace pasdf {

constexpr std::size_t kFpfhBins = 11;
constexpr std::size_t kFpfhSize = 3 * kFpfhBins;

/// 33 bins: theta | alpha | phi sub-histograms, each normalized to sum 100 (or all zero).
using FpfhDescriptor = std::array<double, kFpfhSize>;

/// Darboux-frame pair features as used for FPFH binning.
struct PairFeatures {
  double theta = 0.0;  // in [-pi, pi]
  double alpha = 0.0;  // in [-1, 1]
  double phi = 0.0;    // in [-1, 1]
  bool valid = false;
};

PairFeatures pair_features(const Vec3& p1, const Vec3& n1, const Vec3& p2, const Vec3& n2);

/// Two-pass FPFH over radius neighborhoods. Requires normals and radius > 0.
std::vector<FpfhDescriptor> compute_fpfh(const PointCloud& cloud, double radius);

struct RansacParams {
  std::size_t max_iterations = 20000;
  std::size_t sample_size = 3;
  double distance_threshold = 0.05;
  double edge_length_ratio = 0.9;
  double confidence = 0.999;

  void validate() const;
};

struct RansacResult {
  RigidTransform transform;
  std::size_t inliers = 0;       // source points with a target neighbor within threshold
  double inlier_fraction = 0.0;  // inliers / |src|
  std::size_t correspondences = 0;
  std::size_t hypotheses = 0;
};

/// Mutual nearest neighbors in descriptor space, as (src index, tgt index) pairs.
std::vector<std::pair<std::size_t, std::size_t>> mutual_matches(const std::vector<FpfhDescriptor>& f_src,
                                                                const std::vector<FpfhDescriptor>& f_tgt);

/// Feature-based RANSAC; throws CoarseAlignmentFailed with too few mutual matches.
RansacResult ransac_align(const PointCloud& src, const PointCloud& tgt, const std::vector<FpfhDescriptor>& f_src,
                          const std::vector<FpfhDescriptor>& f_tgt, const RansacParams& params,
                          std::uint64_t seed);

/// Fraction of src points (after t) with a tgt point within `threshold`.
double inlier_fraction(const PointCloud& src, const SpatialIndex& tgt, const RigidTransform& t, double threshold);

struct IcpResult {
  RigidTransform transform;          // includes the initial transform
  std::vector<double> residuals;     // mean squared NN distance; [0] is at init, then after each update
  std::size_t iterations = 0;
};

/// Point-to-point ICP starting from `init`.
IcpResult icp_refine(const PointCloud& src, const PointCloud& tgt, const RigidTransform& init,
                     std::size_t max_iter, double tol);

struct PamParams {
  double voxel_size = 0.0;  // <= 0: target bbox diagonal / auto_voxel_divisor
  double auto_voxel_divisor = 40.0;
  double tau = 0.016;
  double delta_tau = 0.001;
  std::size_t k_max = 10;
  double fpfh_radius_factor = 5.0;       // FPFH radius = factor * voxel
  double ransac_distance_factor = 1.5;   // RANSAC threshold = factor * voxel
  std::size_t normal_k = 16;
  std::size_t ransac_max_iterations = 20000;
  double edge_length_ratio = 0.9;
  double confidence = 0.999;
  std::size_t icp_max_iter = 60;
  double icp_tol = 1e-10;
  bool chamfer_on_downsampled = true;

  void validate() const;
  double resolve_voxel(const PointCloud& tgt) const;
};

struct PamIteration {
  RigidTransform ransac;       // coarse increment
  RigidTransform icp;          // refinement increment (applied after ransac)
  RigidTransform cumulative;   // icp * ransac * previous cumulative
  double chamfer = 0.0;
  double tau = 0.0;            // threshold the loss was compared against
  bool ransac_failed = false;
};

struct AlignmentResult {
  PointCloud aligned;
  RigidTransform cumulative;
  double final_chamfer = 0.0;
  std::size_t iterations_used = 0;
  bool converged = false;
  double initial_chamfer = 0.0;
  std::size_t best_iteration = 0;  // 0 = untransformed input was best
  std::vector<PamIteration> history;
};

/// Adaptive coarse-to-fine registration of src onto tgt.
AlignmentResult pose_align(const PointCloud& src, const PointCloud& tgt, const PamParams& params,
                           std::uint64_t seed);

}  // namespace pasdf
