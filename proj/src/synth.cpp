#include "pasdf/synth.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <random>
#include <utility>

namespace pasdf {

namespace {

using Face = std::array<std::uint32_t, 3>;

constexpr double kPi = std::numbers::pi;

std::uint32_t add_vertex(TriMesh& m, const Vec3& v) {
  m.vertices.push_back(v);
  return static_cast<std::uint32_t>(m.vertices.size() - 1);
}

void add_quad(TriMesh& m, std::uint32_t a, std::uint32_t b, std::uint32_t c, std::uint32_t d) {
  m.faces.push_back({a, b, c});
  m.faces.push_back({a, c, d});
}

// Flip any face whose winding disagrees with the analytic outward direction.
template <class OutwardFn>
void orient_outward(TriMesh& m, OutwardFn outward) {
  for (std::size_t f = 0; f < m.faces.size(); ++f) {
    const auto& t = m.faces[f];
    const Vec3 c = (m.vertices[t[0]] + m.vertices[t[1]] + m.vertices[t[2]]) / 3.0;
    const Vec3 n = (m.vertices[t[1]] - m.vertices[t[0]]).cross(m.vertices[t[2]] - m.vertices[t[0]]);
    if (n.dot(outward(c)) < 0.0) std::swap(m.faces[f][1], m.faces[f][2]);
  }
}

TriMesh icosphere(double radius, std::size_t levels) {
  const double t = (1.0 + std::sqrt(5.0)) / 2.0;
  TriMesh m;
  for (const Vec3& v : {Vec3(-1, t, 0), Vec3(1, t, 0), Vec3(-1, -t, 0), Vec3(1, -t, 0), Vec3(0, -1, t),
                        Vec3(0, 1, t), Vec3(0, -1, -t), Vec3(0, 1, -t), Vec3(t, 0, -1), Vec3(t, 0, 1),
                        Vec3(-t, 0, -1), Vec3(-t, 0, 1)}) {
    add_vertex(m, v.normalized());
  }
  m.faces = {{0, 11, 5}, {0, 5, 1},  {0, 1, 7},   {0, 7, 10}, {0, 10, 11}, {1, 5, 9}, {5, 11, 4},
             {11, 10, 2}, {10, 7, 6}, {7, 1, 8},   {3, 9, 4},  {3, 4, 2},   {3, 2, 6}, {3, 6, 8},
             {3, 8, 9},  {4, 9, 5},  {2, 4, 11},  {6, 2, 10}, {8, 6, 7},   {9, 8, 1}};
  for (std::size_t level = 0; level < levels; ++level) {
    std::map<std::pair<std::uint32_t, std::uint32_t>, std::uint32_t> midpoint;
    auto mid = [&](std::uint32_t a, std::uint32_t b) {
      const auto key = std::minmax(a, b);
      auto it = midpoint.find(key);
      if (it != midpoint.end()) return it->second;
      const std::uint32_t id = add_vertex(m, (m.vertices[a] + m.vertices[b]).normalized());
      midpoint.emplace(key, id);
      return id;
    };
    std::vector<Face> next;
    next.reserve(m.faces.size() * 4);
    for (const auto& f : m.faces) {
      const std::uint32_t ab = mid(f[0], f[1]), bc = mid(f[1], f[2]), ca = mid(f[2], f[0]);
      next.push_back({f[0], ab, ca});
      next.push_back({f[1], bc, ab});
      next.push_back({f[2], ca, bc});
      next.push_back({ab, bc, ca});
    }
    m.faces = std::move(next);
  }
  for (auto& v : m.vertices) v *= radius;
  orient_outward(m, [](const Vec3& c) { return c; });
  return m;
}

TriMesh box(const Vec3& extents, std::size_t density) {
  const std::size_t n = 2 * density + 2;
  const Vec3 half = 0.5 * extents;
  TriMesh m;
  for (int axis = 0; axis < 3; ++axis) {
    const int u = (axis + 1) % 3, v = (axis + 2) % 3;
    for (double side : {-1.0, 1.0}) {
      const auto base = static_cast<std::uint32_t>(m.vertices.size());
      for (std::size_t i = 0; i <= n; ++i) {
        for (std::size_t j = 0; j <= n; ++j) {
          Vec3 p;
          p[axis] = side * half[axis];
          p[u] = -half[u] + extents[u] * static_cast<double>(i) / static_cast<double>(n);
          p[v] = -half[v] + extents[v] * static_cast<double>(j) / static_cast<double>(n);
          m.vertices.push_back(p);
        }
      }
      auto id = [&](std::size_t i, std::size_t j) { return base + static_cast<std::uint32_t>(i * (n + 1) + j); };
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) add_quad(m, id(i, j), id(i + 1, j), id(i + 1, j + 1), id(i, j + 1));
      }
    }
  }
  m = weld_vertices(m, 1e-9 * extents.minCoeff());
  orient_outward(m, [&](const Vec3& c) {
    const Vec3 r = c.cwiseQuotient(half).cwiseAbs();
    Eigen::Index axis;
    r.maxCoeff(&axis);
    Vec3 n = Vec3::Zero();
    n[axis] = c[axis] > 0 ? 1.0 : -1.0;
    return n;
  });
  return m;
}

TriMesh torus(double ring, double tube, std::size_t density) {
  const std::size_t nu = 12 * density, nv = 6 * density;
  TriMesh m;
  for (std::size_t i = 0; i < nu; ++i) {
    const double u = 2.0 * kPi * static_cast<double>(i) / static_cast<double>(nu);
    for (std::size_t j = 0; j < nv; ++j) {
      const double v = 2.0 * kPi * static_cast<double>(j) / static_cast<double>(nv);
      const double rho = ring + tube * std::cos(v);
      m.vertices.emplace_back(rho * std::cos(u), rho * std::sin(u), tube * std::sin(v));
    }
  }
  auto id = [&](std::size_t i, std::size_t j) { return static_cast<std::uint32_t>((i % nu) * nv + (j % nv)); };
  for (std::size_t i = 0; i < nu; ++i) {
    for (std::size_t j = 0; j < nv; ++j) add_quad(m, id(i, j), id(i + 1, j), id(i + 1, j + 1), id(i, j + 1));
  }
  orient_outward(m, [&](const Vec3& c) {
    const Vec3 axis_point = ring * Vec3(c.x(), c.y(), 0.0).normalized();
    return Vec3(c - axis_point);
  });
  return m;
}

TriMesh capsule(double radius, double length, std::size_t density) {
  const std::size_t around = 12 * density, cap_rings = 3 * density, body_rings = 2 * density;
  const double h = 0.5 * length;
  // Latitude rings from the top pole to the bottom pole, excluding the poles.
  std::vector<std::pair<double, double>> rings;  // (z, ring radius)
  for (std::size_t k = 1; k <= cap_rings; ++k) {
    const double phi = 0.5 * kPi * static_cast<double>(k) / static_cast<double>(cap_rings);
    rings.emplace_back(h + radius * std::cos(phi), radius * std::sin(phi));
  }
  for (std::size_t k = 1; k < body_rings; ++k) {
    rings.emplace_back(h - length * static_cast<double>(k) / static_cast<double>(body_rings), radius);
  }
  for (std::size_t k = cap_rings; k >= 1; --k) {
    const double phi = 0.5 * kPi * static_cast<double>(k) / static_cast<double>(cap_rings);
    rings.emplace_back(-h - radius * std::cos(phi), radius * std::sin(phi));
  }
  TriMesh m;
  const std::uint32_t top = add_vertex(m, Vec3(0, 0, h + radius));
  for (const auto& [z, r] : rings) {
    for (std::size_t i = 0; i < around; ++i) {
      const double a = 2.0 * kPi * static_cast<double>(i) / static_cast<double>(around);
      m.vertices.emplace_back(r * std::cos(a), r * std::sin(a), z);
    }
  }
  const std::uint32_t bottom = add_vertex(m, Vec3(0, 0, -h - radius));
  auto id = [&](std::size_t ring, std::size_t i) {
    return static_cast<std::uint32_t>(1 + ring * around + (i % around));
  };
  for (std::size_t i = 0; i < around; ++i) {
    m.faces.push_back({top, id(0, i), id(0, i + 1)});
    m.faces.push_back({bottom, id(rings.size() - 1, i + 1), id(rings.size() - 1, i)});
  }
  for (std::size_t r = 0; r + 1 < rings.size(); ++r) {
    for (std::size_t i = 0; i < around; ++i) add_quad(m, id(r, i), id(r + 1, i), id(r + 1, i + 1), id(r, i + 1));
  }
  orient_outward(m, [&](const Vec3& c) { return Vec3(c - Vec3(0, 0, std::clamp(c.z(), -h, h))); });
  return m;
}

}  // namespace

std::string to_string(ShapeKind kind) {
  switch (kind) {
    case ShapeKind::sphere: return "sphere";
    case ShapeKind::box: return "box";
    case ShapeKind::torus: return "torus";
    case ShapeKind::capsule: return "capsule";
  }
  return "unknown";
}

ShapeKind shape_kind_from_string(const std::string& name) {
  for (auto k : {ShapeKind::sphere, ShapeKind::box, ShapeKind::torus, ShapeKind::capsule}) {
    if (to_string(k) == name) return k;
  }
  throw InvalidParameter("unknown shape kind '" + name + "'");
}

std::string to_string(AnomalyKind kind) {
  switch (kind) {
    case AnomalyKind::dent: return "dent";
    case AnomalyKind::bulge: return "bulge";
    case AnomalyKind::crop: return "crop";
    case AnomalyKind::noise_patch: return "noise_patch";
  }
  return "unknown";
}

AnomalyKind anomaly_kind_from_string(const std::string& name) {
  for (auto k : {AnomalyKind::dent, AnomalyKind::bulge, AnomalyKind::crop, AnomalyKind::noise_patch}) {
    if (to_string(k) == name) return k;
  }
  throw InvalidParameter("unknown anomaly kind '" + name + "'");
}

void ShapeSpec::validate() const {
  if (density < 1) throw InvalidParameter("shape: density must be >= 1");
  switch (kind) {
    case ShapeKind::sphere:
      if (!(radius > 0.0)) throw InvalidParameter("sphere: radius must be positive");
      break;
    case ShapeKind::box:
      if (!(extents.minCoeff() > 0.0)) throw InvalidParameter("box: extents must be positive");
      break;
    case ShapeKind::torus:
      if (!(radius > 0.0) || !(major_radius > radius)) {
        throw InvalidParameter("torus: need 0 < tube radius < ring radius");
      }
      break;
    case ShapeKind::capsule:
      if (!(radius > 0.0) || !(length > 0.0)) throw InvalidParameter("capsule: radius and length must be positive");
      break;
  }
}

TriMesh generate_shape(const ShapeSpec& spec) {
  spec.validate();
  switch (spec.kind) {
    case ShapeKind::sphere: return icosphere(spec.radius, spec.density);
    case ShapeKind::box: return box(spec.extents, spec.density);
    case ShapeKind::torus: return torus(spec.major_radius, spec.radius, spec.density);
    case ShapeKind::capsule: return capsule(spec.radius, spec.length, spec.density);
  }
  throw InvalidParameter("unknown shape kind");
}

void AnomalySpec::validate() const {
  if (!(radius > 0.0)) throw InvalidParameter("anomaly: radius must be positive");
  if (!(magnitude >= 0.0)) throw InvalidParameter("anomaly: magnitude must be non-negative");
}

InjectedAnomaly inject_anomaly(const PointCloud& cloud, const AnomalySpec& spec, std::uint64_t seed) {
  spec.validate();
  require_non_empty(cloud, "inject_anomaly");
  const bool displaces = spec.kind == AnomalyKind::dent || spec.kind == AnomalyKind::bulge;
  if (displaces && !cloud.has_normals()) throw InvalidInput("inject_anomaly: dent/bulge needs normals");

  std::vector<double> dist(cloud.size());
  std::size_t affected = 0;
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    dist[i] = (cloud.points[i] - spec.center).norm();
    if (dist[i] < spec.radius) ++affected;
  }
  if (affected == 0) throw InvalidParameter("inject_anomaly: no points inside the anomaly ball");

  InjectedAnomaly out;
  if (spec.kind == AnomalyKind::crop) {
    const SpatialIndex index(cloud.points);
    double spacing = 0.0;
    for (const auto& p : cloud.points) spacing += std::sqrt(index.knn(p, 2).back().sq_distance);
    spacing /= static_cast<double>(cloud.size());
    for (std::size_t i = 0; i < cloud.size(); ++i) {
      if (dist[i] < spec.radius) continue;
      out.cloud.points.push_back(cloud.points[i]);
      if (cloud.has_normals()) out.cloud.normals.push_back(cloud.normals[i]);
      out.labels.push_back(dist[i] < spec.radius + spacing ? 1 : 0);
    }
    return out;
  }

  out.cloud = cloud;
  out.labels.assign(cloud.size(), 0);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, spec.magnitude > 0.0 ? spec.magnitude : 1.0);
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    if (dist[i] >= spec.radius) continue;
    Vec3 delta = Vec3::Zero();
    if (displaces) {
      const double falloff = std::cos(0.5 * kPi * dist[i] / spec.radius);
      const double sign = spec.kind == AnomalyKind::dent ? -1.0 : 1.0;
      delta = sign * spec.magnitude * falloff * cloud.normals[i];
    } else if (spec.magnitude > 0.0) {
      delta = Vec3(gauss(rng), gauss(rng), gauss(rng));
    }
    const Vec3 moved = cloud.points[i] + delta;
    if (moved != cloud.points[i]) out.labels[i] = 1;
    out.cloud.points[i] = moved;
  }
  return out;
}

RigidTransform random_pose(std::uint64_t seed, double max_angle, double max_shift) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> shift(-max_shift, max_shift);
  if (!(max_angle >= 0.0) || !(max_shift >= 0.0)) throw InvalidParameter("random_pose: bounds must be non-negative");
  Mat3 r = Mat3::Identity();
  if (max_angle >= kPi) {
    r = Eigen::Quaterniond(gauss(rng), gauss(rng), gauss(rng), gauss(rng)).normalized().toRotationMatrix();
  } else if (max_angle > 0.0) {
    // Haar angle density 1 - cos(theta), restricted to [0, max_angle], about a uniform axis.
    Vec3 axis(gauss(rng), gauss(rng), gauss(rng));
    axis.normalize();
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const double bound = 1.0 - std::cos(max_angle);
    double angle = 0.0;
    do {
      angle = max_angle * u(rng);
    } while (u(rng) * bound > 1.0 - std::cos(angle));
    r = Eigen::AngleAxisd(angle, axis).toRotationMatrix();
  }
  const Vec3 t(shift(rng), shift(rng), shift(rng));
  return {r, t};
}

}  // namespace pasdf
