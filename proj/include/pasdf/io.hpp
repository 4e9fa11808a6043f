#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "pasdf/geom.hpp"
#include "pasdf/mesh.hpp"
#include "pasdf/sampling.hpp"

namespace pasdf::io {

/// Geometry loaded from disk. `mesh` is set when the file has faces.
struct Geometry {
  PointCloud cloud;  // vertices (+ normals when the file provides nx/ny/nz)
  std::optional<TriMesh> mesh;
  std::map<std::string, std::vector<double>> vertex_scalars;  // other per-vertex properties
};

/// PLY (ascii / binary_little_endian) reader. Polygons are fan-triangulated.
Geometry read_ply(const std::filesystem::path& path);
/// OBJ reader: `v` and `f` records (any of v, v/t, v//n, v/t/n index forms; negative indices allowed).
Geometry read_obj(const std::filesystem::path& path);
/// Dispatch on extension (.ply / .obj, case-insensitive).
Geometry read_geometry(const std::filesystem::path& path);

/// Binary little-endian PLY of a point cloud; `scalars` become extra float vertex properties.
void write_ply(const std::filesystem::path& path, const PointCloud& cloud,
               const std::map<std::string, std::vector<double>>& scalars = {});
/// Binary little-endian PLY of a triangle mesh.
void write_ply(const std::filesystem::path& path, const TriMesh& mesh);
void write_obj(const std::filesystem::path& path, const TriMesh& mesh);

/// Flat record stream, 33 bytes per record: 3 x f64 position, f64 sdf, u8 tier (little-endian).
void write_query_samples(const std::filesystem::path& path, const std::vector<QuerySample>& samples);
std::vector<QuerySample> read_query_samples(const std::filesystem::path& path);

/// One 0/1 label per line.
std::vector<int> read_labels(const std::filesystem::path& path);
void write_labels(const std::filesystem::path& path, const std::vector<int>& labels);

std::string read_text(const std::filesystem::path& path);
void write_text(const std::filesystem::path& path, const std::string& text);

}  // namespace pasdf::io
