#include <doctest.h>


#include "pasdf/bench.hpp"
#include "pasdf/sampling.hpp"
#include "pasdf/synth.hpp"
#include "support.hpp"

using namespace pasdf;

namespace {

TriMesh cube_spanning(const Vec3& lo, const Vec3& hi) {
  TriMesh m = pasdf::test::unit_cube_mesh();
  for (auto& v : m.vertices) v = lo + v.cwiseProduct(hi - lo);
  return m;
}

/// Number of undirected edges not used by exactly two faces, by scanning all vertex pairs.
std::size_t brute_open_edges(const TriMesh& m) {
  std::size_t open = 0;
  for (std::uint32_t a = 0; a < m.vertices.size(); ++a) {
    for (std::uint32_t b = a + 1; b < m.vertices.size(); ++b) {
      std::size_t faces = 0;
      for (const auto& f : m.faces) {
        bool ha = false, hb = false;
        for (auto v : f) {
          ha |= v == a;
          hb |= v == b;
        }
        faces += (ha && hb) ? 1 : 0;
      }
      if (faces != 0 && faces != 2) ++open;
    }
  }
  return open;
}

TriMesh unit_sphere_mesh() {
  ShapeSpec s;
  s.radius = 1.0;
  s.density = 4;
  return generate_shape(s);
}

bool inside_convex(const TriMesh& m, const Vec3& x) {
  for (std::size_t f = 0; f < m.faces.size(); ++f) {
    if (m.face_normal(f).dot(x - m.vertices[m.faces[f][0]]) >= 0.0) return false;
  }
  return true;
}

}  // namespace

TEST_CASE("normalization into the unit cube") {
  SUBCASE("symmetric cube") {
    const NormalizedMesh n = normalize_unit_cube(cube_spanning(Vec3(-1, -1, -1), Vec3(1, 1, 1)));
    CHECK(n.record.scale == doctest::Approx(2.0));
    CHECK((n.record.offset - Vec3(-1, -1, -1)).norm() < 1e-15);
    const Aabb box = bounding_box(n.mesh.vertices);
    CHECK((box.min - Vec3::Zero()).norm() < 1e-15);
    CHECK((box.max - Vec3::Ones()).norm() < 1e-15);
  }
  SUBCASE("aspect is preserved") {
    const NormalizedMesh n = normalize_unit_cube(cube_spanning(Vec3(0, 0, 0), Vec3(2, 1, 1)));
    const Aabb box = bounding_box(n.mesh.vertices);
    CHECK((box.max - Vec3(1.0, 0.5, 0.5)).norm() < 1e-15);
    CHECK(box.min.norm() < 1e-15);
  }
  SUBCASE("round trip") {
    TriMesh m = cube_spanning(Vec3(-3, 2, 5), Vec3(4, 2.5, 9));
    const NormalizedMesh n = normalize_unit_cube(m, 0.1);
    const TriMesh back = n.record.denormalize(n.mesh);
    for (std::size_t i = 0; i < m.vertices.size(); ++i) CHECK((back.vertices[i] - m.vertices[i]).norm() < 1e-9);
    for (const auto& v : n.mesh.vertices) {
      CHECK((v.array() >= 0.1 - 1e-12).all());
      CHECK((v.array() <= 0.9 + 1e-12).all());
    }
  }
  SUBCASE("degenerate inputs") {
    TriMesh flat = cube_spanning(Vec3(1, 1, 1), Vec3(1, 1, 1));
    CHECK_THROWS_AS(normalize_unit_cube(flat), InvalidInput);
    TriMesh tiny;
    tiny.vertices = {Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(0, 1, 0)};
    tiny.faces = {{0, 1, 2}};
    CHECK_THROWS_AS(normalize_unit_cube(tiny), InvalidInput);
  }
}

TEST_CASE("watertight check") {
  SUBCASE("closed cube") {
    const WatertightReport r = check_watertight(pasdf::test::unit_cube_mesh());
    CHECK(r.watertight);
    CHECK(r.non_manifold_edges == 0);
  }
  SUBCASE("single triangle") {
    TriMesh t;
    t.vertices = {Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(0, 1, 0)};
    t.faces = {{0, 1, 2}};
    const WatertightReport r = check_watertight(t);
    CHECK_FALSE(r.watertight);
    CHECK(r.non_manifold_edges == 3);
  }
  SUBCASE("cube with one face removed") {
    TriMesh m = pasdf::test::unit_cube_mesh();
    m.faces.erase(m.faces.begin(), m.faces.begin() + 2);
    const WatertightReport r = check_watertight(m);
    CHECK_FALSE(r.watertight);
    CHECK(r.non_manifold_edges == brute_open_edges(m));
    CHECK(r.non_manifold_edges == 4);
  }
  SUBCASE("generated shapes are closed") {
    for (ShapeKind k : {ShapeKind::sphere, ShapeKind::box, ShapeKind::torus, ShapeKind::capsule}) {
      CHECK(check_watertight(generate_shape(bench_shape(k))).watertight);
    }
  }
}

TEST_CASE("surface sampling") {
  SUBCASE("points stay inside a single triangle") {
    TriMesh t;
    t.vertices = {Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(0, 1, 0)};
    t.faces = {{0, 1, 2}};
    const PointCloud c = sample_surface(t, 1000, 1);
    for (std::size_t i = 0; i < c.size(); ++i) {
      const Vec3& p = c.points[i];
      CHECK(p.x() >= 0.0);
      CHECK(p.y() >= 0.0);
      CHECK(p.x() + p.y() <= 1.0 + 1e-15);
      CHECK(p.z() == 0.0);
      CHECK((c.normals[i] - Vec3(0, 0, 1)).norm() < 1e-15);
    }
  }
  SUBCASE("area-proportional face choice") {
    TriMesh t;
    t.vertices = {Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(0, 2, 0), Vec3(10, 0, 0), Vec3(13, 0, 0), Vec3(10, 2, 0)};
    t.faces = {{0, 1, 2}, {3, 4, 5}};
    const PointCloud c = sample_surface(t, 40000, 2);
    std::size_t second = 0;
    for (const auto& p : c.points) second += p.x() >= 5.0 ? 1 : 0;
    CHECK(std::abs(static_cast<double>(second) - 30000.0) <= 600.0);
  }
  SUBCASE("unit sphere mesh") {
    const PointCloud c = sample_surface(unit_sphere_mesh(), 10000, 3);
    double mean = 0.0;
    for (const auto& p : c.points) mean += p.norm();
    mean /= static_cast<double>(c.size());
    CHECK(std::abs(mean - 1.0) < 0.01);
  }
  SUBCASE("deterministic per seed") {
    const TriMesh m = unit_sphere_mesh();
    CHECK(sample_surface(m, 100, 5).points == sample_surface(m, 100, 5).points);
    CHECK(sample_surface(m, 100, 5).points != sample_surface(m, 100, 6).points);
  }
}

TEST_CASE("query sampling") {
  const TriMesh mesh = normalize_unit_cube(unit_sphere_mesh(), 0.05).mesh;
  SUBCASE("default tier counts") {
    const auto q = sample_queries(mesh, QueryCounts{}, 1);
    CHECK(q.size() == 23000);
    std::size_t counts[3] = {0, 0, 0};
    for (const auto& s : q) ++counts[static_cast<int>(s.tier)];
    CHECK(counts[static_cast<int>(SampleTier::surface)] == 10000);
    CHECK(counts[static_cast<int>(SampleTier::bbox)] == 10000);
    CHECK(counts[static_cast<int>(SampleTier::volume)] == 3000);
    for (const auto& s : q) {
      if (s.tier == SampleTier::volume) CHECK(((s.position.array() >= 0.0) && (s.position.array() <= 1.0)).all());
    }
  }
  SUBCASE("bbox tier stays inside the unexpanded box") {
    const TriMesh small = cube_spanning(Vec3(0.4, 0.4, 0.4), Vec3(0.6, 0.6, 0.6));
    QueryCounts c;
    c.bbox_expand = 1.0;
    for (const auto& s : sample_queries(small, c, 2)) {
      if (s.tier != SampleTier::bbox) continue;
      CHECK(((s.position.array() >= 0.4 - 1e-15) && (s.position.array() <= 0.6 + 1e-15)).all());
    }
  }
  SUBCASE("deterministic per seed") {
    const auto a = sample_queries(mesh, QueryCounts{}, 7), b = sample_queries(mesh, QueryCounts{}, 7);
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) REQUIRE(a[i].position == b[i].position);
  }
}

TEST_CASE("signed distance labels") {
  const PointCloud sphere = pasdf::test::sphere_cloud(10000, 4);
  SUBCASE("analytic sphere values") {
    const std::vector<Vec3> xs = {Vec3::Zero(), Vec3(2, 0, 0), sphere.points[17]};
    const auto l = label_sdf(xs, sphere);
    CHECK(std::abs(l[0].sdf + 1.0) <= 0.01);
    CHECK(std::abs(l[1].sdf - 1.0) <= 0.01);
    CHECK(l[2].sdf == 0.0);
  }
  SUBCASE("exact zero dot product counts as outside") {
    const PointCloud plane({Vec3(0, 0, 0)}, {Vec3(0, 0, 1)});
    CHECK(label_sdf(std::vector<Vec3>{Vec3(1, 0, 0)}, plane)[0].sdf == doctest::Approx(1.0));
    CHECK(label_sdf(std::vector<Vec3>{Vec3(0, 0, -1)}, plane)[0].sdf == doctest::Approx(-1.0));
  }
  SUBCASE("sign agrees with a half-space oracle on a convex mesh") {
    TriMesh ellipsoid = unit_sphere_mesh();
    for (auto& v : ellipsoid.vertices) v = v.cwiseProduct(Vec3(1.0, 0.7, 0.5));
    const TriMesh convex = normalize_unit_cube(ellipsoid, 0.1).mesh;
    const PointCloud surf = sample_surface(convex, 10000, 5);
    const auto xs = pasdf::test::random_points(5000, 6);
    const auto l = label_sdf(xs, surf);
    std::size_t agree = 0;
    for (std::size_t i = 0; i < xs.size(); ++i) agree += ((l[i].sdf < 0.0) == inside_convex(convex, xs[i])) ? 1 : 0;
    CHECK(static_cast<double>(agree) >= 0.999 * static_cast<double>(xs.size()));
    for (const auto& s : l) CHECK(std::abs(s.sdf) <= std::sqrt(3.0));
  }
  SUBCASE("denser surfaces do not increase the error") {
    const auto xs = pasdf::test::random_points(2000, 8, -1.5, 1.5);
    double previous = std::numeric_limits<double>::infinity();
    for (std::size_t n : {2500, 5000, 10000, 20000}) {
      const auto l = label_sdf(xs, pasdf::test::sphere_cloud(n, 9 + n));
      double err = 0.0;
      for (std::size_t i = 0; i < xs.size(); ++i) err += std::abs(l[i].sdf - (xs[i].norm() - 1.0));
      err /= static_cast<double>(xs.size());
      CHECK(err <= previous);
      previous = err;
    }
  }
  SUBCASE("surface tier keeps zero labels") {
    const TriMesh mesh = normalize_unit_cube(unit_sphere_mesh(), 0.05).mesh;
    auto q = sample_queries(mesh, QueryCounts{500, 500, 500, 1.3}, 3);
    label_queries(q, sample_surface(mesh, 5000, 4));
    for (const auto& s : q) {
      if (s.tier == SampleTier::surface) CHECK(std::abs(s.sdf) < 1e-9);
    }
  }
  SUBCASE("missing normals are rejected") {
    CHECK_THROWS_AS(label_sdf(std::vector<Vec3>{Vec3::Zero()}, pasdf::test::random_cloud(10, 1)), InvalidInput);
  }
}
