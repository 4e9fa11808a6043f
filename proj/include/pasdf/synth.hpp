#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "pasdf/geom.hpp"
#include "pasdf/mesh.hpp"

namespace pasdf {

enum class ShapeKind { sphere, box, torus, capsule };

std::string to_string(ShapeKind kind);
ShapeKind shape_kind_from_string(const std::string& name);

/// Parametric closed shape centred at the origin. Unused fields are ignored per kind.
struct ShapeSpec {
  ShapeKind kind = ShapeKind::sphere;
  double radius = 0.4;                 // sphere radius, torus tube radius, capsule radius
  double major_radius = 0.3;           // torus ring radius
  double length = 0.4;                 // capsule cylinder length (along z)
  Vec3 extents{0.6, 0.4, 0.2};         // box side lengths
  std::size_t density = 3;             // tessellation level

  void validate() const;
};

/// Watertight, outward-wound triangulation of the shape.
TriMesh generate_shape(const ShapeSpec& spec);

enum class AnomalyKind { dent, bulge, crop, noise_patch };

std::string to_string(AnomalyKind kind);
AnomalyKind anomaly_kind_from_string(const std::string& name);

struct AnomalySpec {
  AnomalyKind kind = AnomalyKind::dent;
  Vec3 center = Vec3::Zero();
  double radius = 0.1;
  double magnitude = 0.05;

  void validate() const;
};

struct InjectedAnomaly {
  PointCloud cloud;
  std::vector<int> labels;  // one per output point
};

/// Dent/bulge move points inside the ball along -/+ normal by magnitude * cos(pi/2 * d / radius);
/// noise_patch adds N(0, magnitude^2) jitter per axis inside the ball; crop deletes the ball and
/// labels survivors within one mean nearest-neighbour spacing of the hole. Labels are 1 exactly
/// where a point moved (or borders a crop). Throws InvalidParameter if the ball holds no points.
InjectedAnomaly inject_anomaly(const PointCloud& cloud, const AnomalySpec& spec, std::uint64_t seed);

/// Uniformly random rotation (angle in [0, max_angle]) plus translation with |t_i| <= max_shift.
RigidTransform random_pose(std::uint64_t seed, double max_angle, double max_shift);

}  // namespace pasdf
