#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "pasdf/geom.hpp"
#include "pasdf/mesh.hpp"
#include "pasdf/pam.hpp"
#include "pasdf/sdf_model.hpp"

namespace pasdf {

/// Regular lattice of resolution^3 vertices spanning `bounds` (corners included).
struct GridSpec {
  std::size_t resolution = 128;
  Aabb bounds{Vec3::Zero(), Vec3::Ones()};

  void validate() const;
  Vec3 spacing() const { return bounds.extent() / static_cast<double>(resolution - 1); }
  Vec3 vertex(std::size_t i, std::size_t j, std::size_t k) const;
};

/// bbox of `points` scaled by `expand` about its centre, optionally intersected with [0,1]^3.
GridSpec grid_around(std::span<const Vec3> points, std::size_t resolution, double expand = 1.3,
                     bool clip_unit_cube = true);

/// Field samples, x fastest: values[i + n * (j + n * k)].
struct ScalarGrid {
  GridSpec spec;
  std::vector<double> values;

  double at(std::size_t i, std::size_t j, std::size_t k) const {
    const std::size_t n = spec.resolution;
    return values[i + n * (j + n * k)];
  }
};

ScalarGrid sample_field(const GridSpec& grid, const std::function<double(const Vec3&)>& field);
ScalarGrid sample_field(const GridSpec& grid, const SdfModel& model, const EncodingConfig& enc);

/// Iso-surface with linearly interpolated edge crossings, vertices shared through edge keys,
/// faces wound so normals point toward increasing field. Throws NumericFailure naming the
/// first non-finite grid vertex.
TriMesh marching_cubes(const ScalarGrid& field, double iso = 0.0);

struct RepairOptions {
  std::size_t resolution = 128;
  double expand = 1.3;
  bool clip_unit_cube = true;
  std::size_t n_points = 0;  // 0: as many points as the input cloud
};

struct RepairResult {
  PointCloud repaired;        // canonical frame
  TriMesh mesh;               // canonical frame
  PointCloud aligned_input;   // input after alignment
  RigidTransform to_input;    // canonical -> input frame
  bool converged = false;
};

/// Aligns the cloud, extracts the zero level set over a grid around it and resamples it.
/// Throws RepairFailed when the level set is empty.
RepairResult repair(const PointCloud& anomalous, const SdfModel& model, const EncodingConfig& enc,
                    const PointCloud& canonical, const RepairOptions& options, const PamParams& pam,
                    std::uint64_t seed);

/// Minimum-cost assignment on a square cost matrix; result[row] = column.
std::vector<std::size_t> hungarian(const Eigen::MatrixXd& cost);

/// Optimal bijection cost sum ||a_i - b_phi(i)|| divided by |a|. Sizes must match.
double emd(const PointCloud& a, const PointCloud& b);

struct RepairQuality {
  double cd = 0.0;            // summed chamfer
  double cd_per_point = 0.0;  // averaged chamfer
  double emd_per_point = 0.0;
  std::size_t subsample = 0;
  std::uint64_t seed = 0;
};

/// Chamfer on the full clouds; EMD on seeded equal-size random subsamples.
RepairQuality repair_quality(const PointCloud& repaired, const PointCloud& reference, std::size_t emd_subsample,
                             std::uint64_t seed);

}  // namespace pasdf
