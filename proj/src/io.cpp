#include "pasdf/io.hpp"

#include <algorithm>
#include <bit>
#include <cctype>
#include <cstring>
#include <fstream>
#include <sstream>

namespace pasdf::io {

namespace fs = std::filesystem;

namespace {

static_assert(std::endian::native == std::endian::little, "binary formats assume a little-endian host");

std::ifstream open_in(const fs::path& path, std::ios::openmode mode = std::ios::in) {
  std::ifstream in(path, mode);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  return in;
}

std::ofstream open_out(const fs::path& path, std::ios::openmode mode = std::ios::out) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, mode);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  return out;
}

template <class T>
void put(std::ostream& out, T value) {
  out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <class T>
T get(std::istream& in) {
  T value{};
  in.read(reinterpret_cast<char*>(&value), sizeof(T));
  return value;
}

// --- PLY --------------------------------------------------------------------------

enum class PlyType { i8, u8, i16, u16, i32, u32, f32, f64 };

PlyType parse_ply_type(const std::string& t, const fs::path& path) {
  if (t == "char" || t == "int8") return PlyType::i8;
  if (t == "uchar" || t == "uint8") return PlyType::u8;
  if (t == "short" || t == "int16") return PlyType::i16;
  if (t == "ushort" || t == "uint16") return PlyType::u16;
  if (t == "int" || t == "int32") return PlyType::i32;
  if (t == "uint" || t == "uint32") return PlyType::u32;
  if (t == "float" || t == "float32") return PlyType::f32;
  if (t == "double" || t == "float64") return PlyType::f64;
  throw IoError("'" + path.string() + "': unknown PLY type '" + t + "'");
}

double read_binary(std::istream& in, PlyType t) {
  switch (t) {
    case PlyType::i8: return get<std::int8_t>(in);
    case PlyType::u8: return get<std::uint8_t>(in);
    case PlyType::i16: return get<std::int16_t>(in);
    case PlyType::u16: return get<std::uint16_t>(in);
    case PlyType::i32: return get<std::int32_t>(in);
    case PlyType::u32: return get<std::uint32_t>(in);
    case PlyType::f32: return get<float>(in);
    case PlyType::f64: return get<double>(in);
  }
  return 0.0;
}

struct PlyProperty {
  std::string name;
  PlyType type = PlyType::f32;
  bool is_list = false;
  PlyType count_type = PlyType::u8;
};

struct PlyElement {
  std::string name;
  std::size_t count = 0;
  std::vector<PlyProperty> properties;
};

}  // namespace

Geometry read_ply(const fs::path& path) {
  auto in = open_in(path, std::ios::in | std::ios::binary);
  std::string line;
  std::getline(in, line);
  if (line.rfind("ply", 0) != 0) throw IoError("'" + path.string() + "': missing PLY magic");

  bool ascii = false;
  std::vector<PlyElement> elements;
  bool header_done = false;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::istringstream ls(line);
    std::string kw;
    ls >> kw;
    if (kw == "format") {
      std::string fmt;
      ls >> fmt;
      if (fmt == "ascii") {
        ascii = true;
      } else if (fmt != "binary_little_endian") {
        throw IoError("'" + path.string() + "': unsupported PLY format '" + fmt + "'");
      }
    } else if (kw == "element") {
      PlyElement e;
      ls >> e.name >> e.count;
      elements.push_back(e);
    } else if (kw == "property") {
      if (elements.empty()) throw IoError("'" + path.string() + "': property before element");
      PlyProperty p;
      std::string t;
      ls >> t;
      if (t == "list") {
        std::string ct, it;
        ls >> ct >> it >> p.name;
        p.is_list = true;
        p.count_type = parse_ply_type(ct, path);
        p.type = parse_ply_type(it, path);
      } else {
        p.type = parse_ply_type(t, path);
        ls >> p.name;
      }
      elements.back().properties.push_back(p);
    } else if (kw == "end_header") {
      header_done = true;
      break;
    }
  }
  if (!header_done) throw IoError("'" + path.string() + "': truncated PLY header");

  Geometry g;
  std::vector<std::array<std::uint32_t, 3>> faces;
  bool saw_faces = false;
  for (const auto& e : elements) {
    const bool is_vertex = e.name == "vertex";
    const bool is_face = e.name == "face";
    std::vector<double> values(e.properties.size());
    std::vector<std::uint32_t> polygon;
    int ix = -1, iy = -1, iz = -1, inx = -1, iny = -1, inz = -1;
    for (std::size_t k = 0; k < e.properties.size(); ++k) {
      const auto& n = e.properties[k].name;
      if (n == "x") ix = static_cast<int>(k);
      if (n == "y") iy = static_cast<int>(k);
      if (n == "z") iz = static_cast<int>(k);
      if (n == "nx") inx = static_cast<int>(k);
      if (n == "ny") iny = static_cast<int>(k);
      if (n == "nz") inz = static_cast<int>(k);
    }
    if (is_vertex && (ix < 0 || iy < 0 || iz < 0)) throw IoError("'" + path.string() + "': vertex lacks x/y/z");
    const bool normals = is_vertex && inx >= 0 && iny >= 0 && inz >= 0;
    if (is_face) saw_faces = true;

    std::istringstream row;
    for (std::size_t r = 0; r < e.count; ++r) {
      if (ascii) {
        if (!std::getline(in, line)) throw IoError("'" + path.string() + "': truncated PLY body");
        row.clear();
        row.str(line);
      }
      for (std::size_t k = 0; k < e.properties.size(); ++k) {
        const auto& p = e.properties[k];
        if (p.is_list) {
          double cnt = 0;
          if (ascii) row >> cnt; else cnt = read_binary(in, p.count_type);
          polygon.clear();
          for (std::size_t c = 0; c < static_cast<std::size_t>(cnt); ++c) {
            double v = 0;
            if (ascii) row >> v; else v = read_binary(in, p.type);
            polygon.push_back(static_cast<std::uint32_t>(v));
          }
          if (is_face && (p.name == "vertex_indices" || p.name == "vertex_index")) {
            for (std::size_t c = 1; c + 1 < polygon.size(); ++c) faces.push_back({polygon[0], polygon[c], polygon[c + 1]});
          }
        } else {
          double v = 0;
          if (ascii) row >> v; else v = read_binary(in, p.type);
          values[k] = v;
        }
      }
      if ((ascii && row.fail()) || (!ascii && !in)) throw IoError("'" + path.string() + "': malformed PLY body");
      if (is_vertex) {
        g.cloud.points.emplace_back(values[ix], values[iy], values[iz]);
        if (normals) g.cloud.normals.emplace_back(values[inx], values[iny], values[inz]);
        for (std::size_t k = 0; k < e.properties.size(); ++k) {
          const int ki = static_cast<int>(k);
          if (ki == ix || ki == iy || ki == iz || ki == inx || ki == iny || ki == inz || e.properties[k].is_list) continue;
          g.vertex_scalars[e.properties[k].name].push_back(values[k]);
        }
      }
    }
  }
  // Normals that are not unit length (zeros in some exporters) are dropped rather than trusted.
  for (auto& n : g.cloud.normals) {
    const double len = n.norm();
    if (!(len > 1e-12)) {
      g.cloud.normals.clear();
      break;
    }
    n /= len;
  }
  if (saw_faces) {
    TriMesh m;
    m.vertices = g.cloud.points;
    m.faces = std::move(faces);
    for (const auto& f : m.faces) {
      for (auto v : f) {
        if (v >= m.vertices.size()) throw IoError("'" + path.string() + "': face index out of range");
      }
    }
    g.mesh = std::move(m);
  }
  return g;
}

Geometry read_obj(const fs::path& path) {
  auto in = open_in(path);
  Geometry g;
  TriMesh m;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::istringstream ls(line);
    std::string kw;
    ls >> kw;
    if (kw == "v") {
      Vec3 p;
      ls >> p.x() >> p.y() >> p.z();
      if (ls.fail()) throw IoError("'" + path.string() + "':" + std::to_string(line_no) + ": bad vertex");
      m.vertices.push_back(p);
    } else if (kw == "f") {
      std::vector<std::uint32_t> poly;
      std::string tok;
      while (ls >> tok) {
        const long idx = std::stol(tok.substr(0, tok.find('/')));
        const long resolved = idx < 0 ? static_cast<long>(m.vertices.size()) + idx : idx - 1;
        if (resolved < 0) throw IoError("'" + path.string() + "':" + std::to_string(line_no) + ": bad face index");
        poly.push_back(static_cast<std::uint32_t>(resolved));
      }
      for (std::size_t c = 1; c + 1 < poly.size(); ++c) m.faces.push_back({poly[0], poly[c], poly[c + 1]});
    }
  }
  for (const auto& f : m.faces) {
    for (auto v : f) {
      if (v >= m.vertices.size()) throw IoError("'" + path.string() + "': face index out of range");
    }
  }
  g.cloud.points = m.vertices;
  if (!m.faces.empty()) g.mesh = std::move(m);
  return g;
}

Geometry read_geometry(const fs::path& path) {
  if (!fs::exists(path)) throw IoError("no such file '" + path.string() + "'");
  std::string ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  if (ext == ".ply") return read_ply(path);
  if (ext == ".obj") return read_obj(path);
  throw IoError("'" + path.string() + "': unsupported extension '" + ext + "'");
}

void write_ply(const fs::path& path, const PointCloud& cloud, const std::map<std::string, std::vector<double>>& scalars) {
  for (const auto& [name, values] : scalars) {
    if (values.size() != cloud.size()) throw InvalidInput("write_ply: scalar '" + name + "' length mismatch");
  }
  auto out = open_out(path, std::ios::out | std::ios::binary);
  out << "ply\nformat binary_little_endian 1.0\nelement vertex " << cloud.size() << "\n"
      << "property float x\nproperty float y\nproperty float z\n";
  if (cloud.has_normals()) out << "property float nx\nproperty float ny\nproperty float nz\n";
  for (const auto& [name, values] : scalars) out << "property float " << name << "\n";
  out << "end_header\n";
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    for (int a = 0; a < 3; ++a) put(out, static_cast<float>(cloud.points[i][a]));
    if (cloud.has_normals()) {
      for (int a = 0; a < 3; ++a) put(out, static_cast<float>(cloud.normals[i][a]));
    }
    for (const auto& [name, values] : scalars) put(out, static_cast<float>(values[i]));
  }
  if (!out) throw IoError("write failed for '" + path.string() + "'");
}

void write_ply(const fs::path& path, const TriMesh& mesh) {
  auto out = open_out(path, std::ios::out | std::ios::binary);
  out << "ply\nformat binary_little_endian 1.0\nelement vertex " << mesh.vertices.size() << "\n"
      << "property float x\nproperty float y\nproperty float z\n"
      << "element face " << mesh.faces.size() << "\nproperty list uchar int vertex_indices\nend_header\n";
  for (const auto& v : mesh.vertices) {
    for (int a = 0; a < 3; ++a) put(out, static_cast<float>(v[a]));
  }
  for (const auto& f : mesh.faces) {
    put<std::uint8_t>(out, 3);
    for (auto v : f) put(out, static_cast<std::int32_t>(v));
  }
  if (!out) throw IoError("write failed for '" + path.string() + "'");
}

void write_obj(const fs::path& path, const TriMesh& mesh) {
  auto out = open_out(path);
  out.precision(9);
  for (const auto& v : mesh.vertices) out << "v " << v.x() << ' ' << v.y() << ' ' << v.z() << '\n';
  for (const auto& f : mesh.faces) out << "f " << f[0] + 1 << ' ' << f[1] + 1 << ' ' << f[2] + 1 << '\n';
  if (!out) throw IoError("write failed for '" + path.string() + "'");
}

void write_query_samples(const fs::path& path, const std::vector<QuerySample>& samples) {
  auto out = open_out(path, std::ios::out | std::ios::binary);
  for (const auto& s : samples) {
    put(out, s.position.x());
    put(out, s.position.y());
    put(out, s.position.z());
    put(out, s.sdf);
    put(out, static_cast<std::uint8_t>(s.tier));
  }
  if (!out) throw IoError("write failed for '" + path.string() + "'");
}

std::vector<QuerySample> read_query_samples(const fs::path& path) {
  constexpr std::size_t kRecord = 4 * sizeof(double) + 1;
  if (!fs::exists(path)) throw IoError("no such file '" + path.string() + "'");
  const auto bytes = fs::file_size(path);
  if (bytes % kRecord != 0) throw IoError("'" + path.string() + "': size is not a multiple of 33 bytes");
  auto in = open_in(path, std::ios::in | std::ios::binary);
  std::vector<QuerySample> samples(bytes / kRecord);
  for (auto& s : samples) {
    s.position.x() = get<double>(in);
    s.position.y() = get<double>(in);
    s.position.z() = get<double>(in);
    s.sdf = get<double>(in);
    const auto tier = get<std::uint8_t>(in);
    if (tier > 2) throw IoError("'" + path.string() + "': invalid tier byte");
    s.tier = static_cast<SampleTier>(tier);
  }
  if (!in) throw IoError("'" + path.string() + "': truncated sample stream");
  return samples;
}

std::vector<int> read_labels(const fs::path& path) {
  auto in = open_in(path);
  std::vector<int> labels;
  std::string tok;
  while (in >> tok) {
    if (tok != "0" && tok != "1") throw IoError("'" + path.string() + "': labels must be 0 or 1");
    labels.push_back(tok == "1" ? 1 : 0);
  }
  return labels;
}

void write_labels(const fs::path& path, const std::vector<int>& labels) {
  auto out = open_out(path);
  for (int l : labels) out << l << '\n';
}

std::string read_text(const fs::path& path) {
  auto in = open_in(path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const fs::path& path, const std::string& text) {
  auto out = open_out(path);
  out << text;
  if (!out) throw IoError("write failed for '" + path.string() + "'");
}

}  // namespace pasdf::io
