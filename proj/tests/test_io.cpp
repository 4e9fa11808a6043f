#include <doctest.h>

#include <cstring>
#include <fstream>

#include "pasdf/io.hpp"
#include "support.hpp"

using namespace pasdf;
namespace fs = std::filesystem;

namespace {

void write_file(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  out << text;
}

std::string read_bytes(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace

TEST_CASE("ascii ply") {
  const fs::path dir = pasdf::test::temp_dir("io_ascii");
  write_file(dir / "quad.ply",
             "ply\nformat ascii 1.0\ncomment test\nelement vertex 4\n"
             "property float x\nproperty float y\nproperty float z\n"
             "property float nx\nproperty float ny\nproperty float nz\nproperty uchar label\n"
             "element face 1\nproperty list uchar int vertex_indices\nend_header\n"
             "0 0 0 0 0 1 0\n1 0 0 0 0 1 1\n1 1 0 0 0 1 0\n0 1 0 0 0 1 1\n4 0 1 2 3\n");
  const io::Geometry g = io::read_ply(dir / "quad.ply");
  REQUIRE(g.cloud.size() == 4);
  CHECK(g.cloud.has_normals());
  CHECK((g.cloud.points[2] - Vec3(1, 1, 0)).norm() == 0.0);
  REQUIRE(g.mesh.has_value());
  REQUIRE(g.mesh->faces.size() == 2);
  CHECK(g.mesh->faces[0] == std::array<std::uint32_t, 3>{0, 1, 2});
  CHECK(g.mesh->faces[1] == std::array<std::uint32_t, 3>{0, 2, 3});
  REQUIRE(g.vertex_scalars.count("label") == 1);
  CHECK(g.vertex_scalars.at("label") == std::vector<double>{0, 1, 0, 1});
}

TEST_CASE("binary ply round trips") {
  const fs::path dir = pasdf::test::temp_dir("io_binary");
  SUBCASE("cloud with normals and scalars") {
    const PointCloud c = pasdf::test::sphere_cloud(100, 1);
    std::vector<double> s(100);
    for (std::size_t i = 0; i < s.size(); ++i) s[i] = 0.25 * static_cast<double>(i);
    io::write_ply(dir / "c.ply", c, {{"anomaly_score", s}});
    const io::Geometry g = io::read_ply(dir / "c.ply");
    REQUIRE(g.cloud.size() == 100);
    CHECK_FALSE(g.mesh.has_value());
    for (std::size_t i = 0; i < c.size(); ++i) {
      CHECK((g.cloud.points[i] - c.points[i]).norm() < 1e-6);
      CHECK((g.cloud.normals[i] - c.normals[i]).norm() < 1e-6);
      CHECK(g.vertex_scalars.at("anomaly_score")[i] == doctest::Approx(s[i]));
    }
  }
  SUBCASE("mesh") {
    const TriMesh m = pasdf::test::unit_cube_mesh();
    io::write_ply(dir / "m.ply", m);
    const io::Geometry g = io::read_geometry(dir / "m.ply");
    REQUIRE(g.mesh.has_value());
    CHECK(g.mesh->faces == m.faces);
    CHECK(g.mesh->vertices == m.vertices);
  }
  SUBCASE("truncated body") {
    io::write_ply(dir / "t.ply", pasdf::test::sphere_cloud(50, 2));
    std::string bytes = read_bytes(dir / "t.ply");
    write_file(dir / "t.ply", bytes.substr(0, bytes.size() - 10));
    CHECK_THROWS_AS(io::read_ply(dir / "t.ply"), IoError);
  }
  SUBCASE("unsupported encoding") {
    write_file(dir / "be.ply", "ply\nformat binary_big_endian 1.0\nelement vertex 0\nend_header\n");
    CHECK_THROWS_AS(io::read_ply(dir / "be.ply"), IoError);
  }
}

TEST_CASE("obj reader") {
  const fs::path dir = pasdf::test::temp_dir("io_obj");
  write_file(dir / "a.obj",
             "# comment\nv 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nvt 0 0\nvn 0 0 1\n"
             "f 1/1/1 2/1/1 3/1/1\nf -4//1 -2//1 -1//1\n");
  const io::Geometry g = io::read_obj(dir / "a.obj");
  REQUIRE(g.mesh.has_value());
  REQUIRE(g.mesh->faces.size() == 2);
  CHECK(g.mesh->faces[0] == std::array<std::uint32_t, 3>{0, 1, 2});
  CHECK(g.mesh->faces[1] == std::array<std::uint32_t, 3>{0, 2, 3});

  SUBCASE("write then read") {
    const TriMesh m = pasdf::test::unit_cube_mesh();
    io::write_obj(dir / "cube.obj", m);
    const io::Geometry back = io::read_geometry(dir / "cube.obj");
    CHECK(back.mesh->faces == m.faces);
    for (std::size_t i = 0; i < m.vertices.size(); ++i) CHECK((back.mesh->vertices[i] - m.vertices[i]).norm() < 1e-12);
  }
  SUBCASE("index out of range") {
    write_file(dir / "bad.obj", "v 0 0 0\nv 1 0 0\nf 1 2 3\n");
    CHECK_THROWS_AS(io::read_obj(dir / "bad.obj"), IoError);
  }
}

TEST_CASE("query sample stream") {
  const fs::path dir = pasdf::test::temp_dir("io_queries");
  std::vector<QuerySample> q = {{Vec3(0.1, 0.2, 0.3), -0.05, SampleTier::bbox},
                                {Vec3(1.0 / 3.0, 0.0, 1.0), 0.0, SampleTier::surface},
                                {Vec3(0.9, 0.8, 0.7), 0.4, SampleTier::volume}};
  io::write_query_samples(dir / "s.bin", q);
  const std::string bytes = read_bytes(dir / "s.bin");
  REQUIRE(bytes.size() == 33 * q.size());
  double x = 0.0, sdf = 0.0;
  std::memcpy(&x, bytes.data() + 33, 8);
  std::memcpy(&sdf, bytes.data() + 24, 8);
  CHECK(x == 1.0 / 3.0);
  CHECK(sdf == -0.05);
  CHECK(static_cast<unsigned char>(bytes[32]) == static_cast<unsigned char>(SampleTier::bbox));

  const auto back = io::read_query_samples(dir / "s.bin");
  REQUIRE(back.size() == q.size());
  for (std::size_t i = 0; i < q.size(); ++i) {
    CHECK(back[i].position == q[i].position);
    CHECK(back[i].sdf == q[i].sdf);
    CHECK(back[i].tier == q[i].tier);
  }
  write_file(dir / "short.bin", bytes.substr(0, 40));
  CHECK_THROWS_AS(io::read_query_samples(dir / "short.bin"), IoError);
}

TEST_CASE("labels and missing files") {
  const fs::path dir = pasdf::test::temp_dir("io_labels");
  io::write_labels(dir / "l.txt", {0, 1, 1, 0});
  CHECK(io::read_labels(dir / "l.txt") == std::vector<int>{0, 1, 1, 0});
  write_file(dir / "bad.txt", "0\n2\n");
  CHECK_THROWS_AS(io::read_labels(dir / "bad.txt"), IoError);
  CHECK_THROWS_AS(io::read_ply(dir / "missing.ply"), IoError);
  CHECK_THROWS_AS(io::read_geometry(dir / "thing.xyz"), IoError);
  try {
    io::read_obj(dir / "missing.obj");
  } catch (const IoError& e) {
    CHECK(std::string(e.what()).find("missing.obj") != std::string::npos);
  }
}
