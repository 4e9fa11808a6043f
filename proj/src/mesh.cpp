#include "pasdf/mesh.hpp"

#include <cmath>
#include <map>
#include <string>
#include <tuple>

namespace pasdf {

double TriMesh::face_area(std::size_t f) const {
  const auto& t = faces[f];
  return 0.5 * (vertices[t[1]] - vertices[t[0]]).cross(vertices[t[2]] - vertices[t[0]]).norm();
}

Vec3 TriMesh::face_normal(std::size_t f) const {
  const auto& t = faces[f];
  const Vec3 c = (vertices[t[1]] - vertices[t[0]]).cross(vertices[t[2]] - vertices[t[0]]);
  const double n = c.norm();
  return n > 0.0 ? Vec3(c / n) : Vec3::Zero();
}

std::vector<Vec3> TriMesh::face_normals() const {
  std::vector<Vec3> out(faces.size());
  for (std::size_t f = 0; f < faces.size(); ++f) out[f] = face_normal(f);
  return out;
}

double TriMesh::surface_area() const {
  double a = 0.0;
  for (std::size_t f = 0; f < faces.size(); ++f) a += face_area(f);
  return a;
}

void TriMesh::validate(double min_area) const {
  for (std::size_t f = 0; f < faces.size(); ++f) {
    for (auto v : faces[f]) {
      if (v >= vertices.size()) {
        throw InvalidInput("face " + std::to_string(f) + " references vertex " + std::to_string(v) + " of " +
                           std::to_string(vertices.size()));
      }
    }
    if (face_area(f) <= min_area) throw InvalidInput("face " + std::to_string(f) + " is degenerate");
  }
}

TriMesh weld_vertices(const TriMesh& mesh, double tolerance) {
  TriMesh out;
  std::map<std::tuple<long long, long long, long long>, std::uint32_t> seen;
  std::vector<std::uint32_t> remap(mesh.vertices.size());
  for (std::size_t i = 0; i < mesh.vertices.size(); ++i) {
    const Vec3& p = mesh.vertices[i];
    const auto key = std::make_tuple(std::llround(p.x() / tolerance), std::llround(p.y() / tolerance),
                                     std::llround(p.z() / tolerance));
    auto [it, inserted] = seen.try_emplace(key, static_cast<std::uint32_t>(out.vertices.size()));
    if (inserted) out.vertices.push_back(p);
    remap[i] = it->second;
  }
  for (const auto& f : mesh.faces) {
    const std::array<std::uint32_t, 3> g{remap[f[0]], remap[f[1]], remap[f[2]]};
    if (g[0] == g[1] || g[1] == g[2] || g[0] == g[2]) continue;
    out.faces.push_back(g);
  }
  return out;
}

}  // namespace pasdf
