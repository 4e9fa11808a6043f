#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "pasdf/common.hpp"

namespace pasdf {

/// Indexed triangle mesh; faces wound counter-clockwise seen from outside.
struct TriMesh {
  std::vector<Vec3> vertices;
  std::vector<std::array<std::uint32_t, 3>> faces;

  bool empty() const { return faces.empty(); }

  double face_area(std::size_t f) const;
  /// Unit normal from CCW winding; zero vector for degenerate faces.
  Vec3 face_normal(std::size_t f) const;
  std::vector<Vec3> face_normals() const;
  double surface_area() const;

  /// Throws InvalidInput on out-of-range indices or faces with area <= min_area.
  void validate(double min_area = 1e-12) const;
};

/// Welds vertices closer than `tolerance` (grid-hashed) and drops faces that collapse.
TriMesh weld_vertices(const TriMesh& mesh, double tolerance);

}  // namespace pasdf
