#include "foodmet/core/mesh_io.hpp"

#include <algorithm>
#include <charconv>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "foodmet/core/error.hpp"

namespace foodmet {

namespace {

std::string lower_extension(const std::filesystem::path& path) {
  std::string ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return ext;
}

std::vector<std::string_view> split_ws(std::string_view line) {
  std::vector<std::string_view> tokens;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
    const std::size_t start = i;
    while (i < line.size() && !std::isspace(static_cast<unsigned char>(line[i]))) ++i;
    if (i > start) tokens.push_back(line.substr(start, i - start));
  }
  return tokens;
}

template <typename T>
bool parse_number(std::string_view token, T& value) {
  const char* end = token.data() + token.size();
  auto [ptr, ec] = std::from_chars(token.data(), end, value);
  return ec == std::errc{} && ptr == end;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void check_faces(const TriangleMesh& mesh) {
  for (std::size_t f = 0; f < mesh.faces.size(); ++f) {
    for (auto idx : mesh.faces[f]) {
      if (idx >= mesh.vertices.size()) {
        throw StructuralError("face " + std::to_string(f) +
                              " references vertex " + std::to_string(idx) +
                              " of " + std::to_string(mesh.vertices.size()));
      }
    }
  }
}

// ---------------------------------------------------------------- OBJ

}  // namespace

TriangleMesh load_obj(const std::filesystem::path& path) {
  const std::string text = read_file(path);
  TriangleMesh mesh;
  std::vector<Vec3> vertex_colors;
  bool any_color = false;

  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    std::size_t eol = text.find('\n', pos);
    if (eol == std::string::npos) eol = text.size();
    std::string_view line(text.data() + pos, eol - pos);
    pos = eol + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (const auto hash = line.find('#'); hash != std::string_view::npos) {
      line = line.substr(0, hash);
    }
    const auto tokens = split_ws(line);
    if (tokens.empty()) continue;

    if (tokens[0] == "v") {
      if (tokens.size() != 4 && tokens.size() != 7) {
        throw ParseError("vertex needs 3 coordinates (optionally 3 colors)",
                         line_no, ParseError::Unit::kLine);
      }
      Vec3 v;
      for (int k = 0; k < 3; ++k) {
        if (!parse_number(tokens[1 + k], v[k])) {
          throw ParseError("bad vertex coordinate '" + std::string(tokens[1 + k]) + "'",
                           line_no, ParseError::Unit::kLine);
        }
      }
      Vec3 color = Vec3::Zero();
      if (tokens.size() == 7) {
        any_color = true;
        for (int k = 0; k < 3; ++k) {
          if (!parse_number(tokens[4 + k], color[k])) {
            throw ParseError("bad vertex color", line_no, ParseError::Unit::kLine);
          }
        }
      }
      mesh.vertices.push_back(v);
      vertex_colors.push_back(color);
    } else if (tokens[0] == "f") {
      if (tokens.size() < 4) {
        throw ParseError("face needs at least 3 vertices", line_no,
                         ParseError::Unit::kLine);
      }
      std::vector<std::uint32_t> polygon;
      for (std::size_t k = 1; k < tokens.size(); ++k) {
        // "i", "i/t", "i//n" or "i/t/n": only the position index matters.
        std::string_view ref = tokens[k].substr(0, tokens[k].find('/'));
        long long idx = 0;
        if (!parse_number(ref, idx) || idx == 0) {
          throw ParseError("bad face index '" + std::string(tokens[k]) + "'",
                           line_no, ParseError::Unit::kLine);
        }
        const long long resolved =
            idx > 0 ? idx - 1 : static_cast<long long>(mesh.vertices.size()) + idx;
        if (resolved < 0 || resolved >= static_cast<long long>(mesh.vertices.size())) {
          throw StructuralError("face index " + std::to_string(idx) + " on line " +
                                std::to_string(line_no) + " is out of range");
        }
        polygon.push_back(static_cast<std::uint32_t>(resolved));
      }
      for (std::size_t k = 1; k + 1 < polygon.size(); ++k) {
        mesh.faces.push_back({polygon[0], polygon[k], polygon[k + 1]});
      }
    }
    // Other statements (vn, vt, o, g, usemtl, s, ...) are ignored.
  }

  if (any_color) {
    mesh.colors.reserve(vertex_colors.size());
    for (const Vec3& c : vertex_colors) {
      // Accept both 0..1 and 0..255 conventions.
      const double s = c.maxCoeff() > 1.0 ? 1.0 : 255.0;
      Rgb8 rgb;
      for (int k = 0; k < 3; ++k) {
        rgb[k] = static_cast<std::uint8_t>(std::clamp(std::lround(c[k] * s), 0L, 255L));
      }
      mesh.colors.push_back(rgb);
    }
  }
  mesh.validate();
  return mesh;
}

void save_obj(const TriangleMesh& mesh, const std::filesystem::path& path) {
  mesh.validate();
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  char buf[160];
  for (std::size_t i = 0; i < mesh.vertices.size(); ++i) {
    const Vec3& v = mesh.vertices[i];
    int n = std::snprintf(buf, sizeof(buf), "v %.17g %.17g %.17g", v.x(), v.y(), v.z());
    out.write(buf, n);
    if (mesh.has_colors()) {
      const Rgb8& c = mesh.colors[i];
      n = std::snprintf(buf, sizeof(buf), " %.6f %.6f %.6f", c[0] / 255.0,
                        c[1] / 255.0, c[2] / 255.0);
      out.write(buf, n);
    }
    out.put('\n');
  }
  for (const Face& f : mesh.faces) {
    out << "f " << f[0] + 1 << ' ' << f[1] + 1 << ' ' << f[2] + 1 << '\n';
  }
  if (!out) throw IoError("failed writing " + path.string());
}

// ---------------------------------------------------------------- PLY

namespace {

enum class PlyType { kI8, kU8, kI16, kU16, kI32, kU32, kF32, kF64 };

std::optional<PlyType> ply_type(std::string_view name) {
  if (name == "char" || name == "int8") return PlyType::kI8;
  if (name == "uchar" || name == "uint8") return PlyType::kU8;
  if (name == "short" || name == "int16") return PlyType::kI16;
  if (name == "ushort" || name == "uint16") return PlyType::kU16;
  if (name == "int" || name == "int32") return PlyType::kI32;
  if (name == "uint" || name == "uint32") return PlyType::kU32;
  if (name == "float" || name == "float32") return PlyType::kF32;
  if (name == "double" || name == "float64") return PlyType::kF64;
  return std::nullopt;
}

std::size_t ply_size(PlyType t) {
  switch (t) {
    case PlyType::kI8:
    case PlyType::kU8: return 1;
    case PlyType::kI16:
    case PlyType::kU16: return 2;
    case PlyType::kI32:
    case PlyType::kU32:
    case PlyType::kF32: return 4;
    case PlyType::kF64: return 8;
  }
  return 0;
}

struct PlyProperty {
  std::string name;
  PlyType type = PlyType::kF32;
  bool is_list = false;
  PlyType count_type = PlyType::kU8;
};

struct PlyElement {
  std::string name;
  std::size_t count = 0;
  std::vector<PlyProperty> properties;
};

// Sequential reader over the body; tracks the byte offset for errors.
class PlyBody {
 public:
  PlyBody(std::string_view data, std::size_t offset, bool ascii)
      : data_(data), pos_(offset), ascii_(ascii) {}

  double read(PlyType t) { return ascii_ ? read_ascii() : read_binary(t); }
  std::size_t offset() const { return pos_; }

 private:
  double read_binary(PlyType t) {
    const std::size_t n = ply_size(t);
    if (pos_ + n > data_.size()) {
      throw ParseError("unexpected end of PLY data", pos_, ParseError::Unit::kByte);
    }
    const char* p = data_.data() + pos_;
    pos_ += n;
    // The body is little-endian; this matches the host on every supported
    // target so a memcpy suffices.
    switch (t) {
      case PlyType::kI8: { std::int8_t v; std::memcpy(&v, p, 1); return v; }
      case PlyType::kU8: { std::uint8_t v; std::memcpy(&v, p, 1); return v; }
      case PlyType::kI16: { std::int16_t v; std::memcpy(&v, p, 2); return v; }
      case PlyType::kU16: { std::uint16_t v; std::memcpy(&v, p, 2); return v; }
      case PlyType::kI32: { std::int32_t v; std::memcpy(&v, p, 4); return v; }
      case PlyType::kU32: { std::uint32_t v; std::memcpy(&v, p, 4); return v; }
      case PlyType::kF32: { float v; std::memcpy(&v, p, 4); return v; }
      case PlyType::kF64: { double v; std::memcpy(&v, p, 8); return v; }
    }
    return 0.0;
  }

  double read_ascii() {
    while (pos_ < data_.size() && std::isspace(static_cast<unsigned char>(data_[pos_]))) ++pos_;
    const std::size_t start = pos_;
    while (pos_ < data_.size() && !std::isspace(static_cast<unsigned char>(data_[pos_]))) ++pos_;
    double v = 0.0;
    if (start == pos_ || !parse_number(data_.substr(start, pos_ - start), v)) {
      throw ParseError("bad ASCII PLY value", start, ParseError::Unit::kByte);
    }
    return v;
  }

  std::string_view data_;
  std::size_t pos_;
  bool ascii_;
};

}  // namespace

TriangleMesh load_ply(const std::filesystem::path& path) {
  const std::string data = read_file(path);

  std::vector<PlyElement> elements;
  bool ascii = false;
  bool saw_format = false;
  std::size_t pos = 0;
  std::size_t line_no = 0;
  bool header_done = false;
  while (!header_done) {
    const std::size_t eol = data.find('\n', pos);
    if (eol == std::string::npos) {
      throw ParseError("PLY header not terminated", pos, ParseError::Unit::kByte);
    }
    std::string_view line(data.data() + pos, eol - pos);
    const std::size_t line_start = pos;
    pos = eol + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    const auto tokens = split_ws(line);

    if (line_no == 1) {
      if (tokens.size() != 1 || tokens[0] != "ply") {
        throw ParseError("missing 'ply' magic", 0, ParseError::Unit::kByte);
      }
      continue;
    }
    if (tokens.empty() || tokens[0] == "comment" || tokens[0] == "obj_info") continue;
    if (tokens[0] == "format") {
      if (tokens.size() < 2) throw ParseError("bad format line", line_start, ParseError::Unit::kByte);
      if (tokens[1] == "ascii") {
        ascii = true;
      } else if (tokens[1] != "binary_little_endian") {
        throw ParseError("unsupported PLY format '" + std::string(tokens[1]) + "'",
                         line_start, ParseError::Unit::kByte);
      }
      saw_format = true;
    } else if (tokens[0] == "element") {
      PlyElement e;
      if (tokens.size() != 3 || !parse_number(tokens[2], e.count)) {
        throw ParseError("bad element line", line_start, ParseError::Unit::kByte);
      }
      e.name = std::string(tokens[1]);
      elements.push_back(std::move(e));
    } else if (tokens[0] == "property") {
      if (elements.empty()) {
        throw ParseError("property before element", line_start, ParseError::Unit::kByte);
      }
      PlyProperty prop;
      if (tokens.size() == 5 && tokens[1] == "list") {
        auto ct = ply_type(tokens[2]);
        auto it = ply_type(tokens[3]);
        if (!ct || !it) throw ParseError("bad list property types", line_start, ParseError::Unit::kByte);
        prop.is_list = true;
        prop.count_type = *ct;
        prop.type = *it;
        prop.name = std::string(tokens[4]);
      } else if (tokens.size() == 3) {
        auto t = ply_type(tokens[1]);
        if (!t) throw ParseError("bad property type", line_start, ParseError::Unit::kByte);
        prop.type = *t;
        prop.name = std::string(tokens[2]);
      } else {
        throw ParseError("bad property line", line_start, ParseError::Unit::kByte);
      }
      elements.back().properties.push_back(std::move(prop));
    } else if (tokens[0] == "end_header") {
      header_done = true;
    } else {
      throw ParseError("unknown header keyword '" + std::string(tokens[0]) + "'",
                       line_start, ParseError::Unit::kByte);
    }
  }
  if (!saw_format) throw ParseError("missing format line", 0, ParseError::Unit::kByte);

  TriangleMesh mesh;
  PlyBody body(data, pos, ascii);
  for (const PlyElement& e : elements) {
    if (e.name == "vertex") {
      int ix = -1, iy = -1, iz = -1, ir = -1, ig = -1, ib = -1;
      for (int k = 0; k < static_cast<int>(e.properties.size()); ++k) {
        const auto& n = e.properties[static_cast<std::size_t>(k)].name;
        if (n == "x") ix = k;
        else if (n == "y") iy = k;
        else if (n == "z") iz = k;
        else if (n == "red" || n == "r") ir = k;
        else if (n == "green" || n == "g") ig = k;
        else if (n == "blue" || n == "b") ib = k;
      }
      if (ix < 0 || iy < 0 || iz < 0) {
        throw ParseError("vertex element lacks x/y/z", body.offset(), ParseError::Unit::kByte);
      }
      const bool colored = ir >= 0 && ig >= 0 && ib >= 0;
      mesh.vertices.reserve(e.count);
      std::vector<double> values(e.properties.size());
      for (std::size_t i = 0; i < e.count; ++i) {
        for (std::size_t k = 0; k < e.properties.size(); ++k) {
          const auto& p = e.properties[k];
          if (p.is_list) {
            const auto n = static_cast<std::size_t>(body.read(p.count_type));
            for (std::size_t j = 0; j < n; ++j) body.read(p.type);
            values[k] = 0.0;
          } else {
            values[k] = body.read(p.type);
          }
        }
        mesh.vertices.emplace_back(values[static_cast<std::size_t>(ix)],
                                   values[static_cast<std::size_t>(iy)],
                                   values[static_cast<std::size_t>(iz)]);
        if (colored) {
          mesh.colors.push_back({static_cast<std::uint8_t>(values[static_cast<std::size_t>(ir)]),
                                 static_cast<std::uint8_t>(values[static_cast<std::size_t>(ig)]),
                                 static_cast<std::uint8_t>(values[static_cast<std::size_t>(ib)])});
        }
      }
    } else if (e.name == "face") {
      mesh.faces.reserve(e.count);
      std::vector<std::uint32_t> polygon;
      for (std::size_t i = 0; i < e.count; ++i) {
        for (const auto& p : e.properties) {
          if (!p.is_list) {
            body.read(p.type);
            continue;
          }
          const std::size_t at = body.offset();
          const auto n = static_cast<std::size_t>(body.read(p.count_type));
          polygon.clear();
          for (std::size_t j = 0; j < n; ++j) {
            const double idx = body.read(p.type);
            if (idx < 0) {
              throw StructuralError("negative face index at byte " + std::to_string(at));
            }
            polygon.push_back(static_cast<std::uint32_t>(idx));
          }
          if (p.name != "vertex_indices" && p.name != "vertex_index") continue;
          if (n < 3) throw ParseError("face with fewer than 3 vertices", at, ParseError::Unit::kByte);
          for (std::size_t j = 1; j + 1 < polygon.size(); ++j) {
            mesh.faces.push_back({polygon[0], polygon[j], polygon[j + 1]});
          }
        }
      }
    } else {
      for (std::size_t i = 0; i < e.count; ++i) {
        for (const auto& p : e.properties) {
          if (p.is_list) {
            const auto n = static_cast<std::size_t>(body.read(p.count_type));
            for (std::size_t j = 0; j < n; ++j) body.read(p.type);
          } else {
            body.read(p.type);
          }
        }
      }
    }
  }
  check_faces(mesh);
  mesh.validate();
  return mesh;
}

void save_ply(const TriangleMesh& mesh, const std::filesystem::path& path) {
  mesh.validate();
  std::ostringstream header;
  header << "ply\nformat binary_little_endian 1.0\n"
         << "element vertex " << mesh.vertices.size() << '\n'
         << "property double x\nproperty double y\nproperty double z\n";
  if (mesh.has_colors()) {
    header << "property uchar red\nproperty uchar green\nproperty uchar blue\n";
  }
  header << "element face " << mesh.faces.size() << '\n'
         << "property list uchar int vertex_indices\nend_header\n";

  std::string bytes = header.str();
  const std::size_t vertex_bytes = 24 + (mesh.has_colors() ? 3 : 0);
  bytes.reserve(bytes.size() + mesh.vertices.size() * vertex_bytes + mesh.faces.size() * 13);
  auto put = [&bytes](const void* p, std::size_t n) {
    bytes.append(static_cast<const char*>(p), n);
  };
  for (std::size_t i = 0; i < mesh.vertices.size(); ++i) {
    const Vec3& v = mesh.vertices[i];
    for (int k = 0; k < 3; ++k) {
      const double c = v[k];
      put(&c, 8);
    }
    if (mesh.has_colors()) put(mesh.colors[i].data(), 3);
  }
  for (const Face& f : mesh.faces) {
    const std::uint8_t n = 3;
    put(&n, 1);
    for (auto idx : f) {
      const auto i = static_cast<std::int32_t>(idx);
      put(&i, 4);
    }
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("failed writing " + path.string());
}

TriangleMesh load_mesh(const std::filesystem::path& path) {
  const std::string ext = lower_extension(path);
  if (ext == ".obj") return load_obj(path);
  if (ext == ".ply") return load_ply(path);
  throw ParameterError("unsupported mesh extension '" + ext + "' for " + path.string());
}

void save_mesh(const TriangleMesh& mesh, const std::filesystem::path& path) {
  const std::string ext = lower_extension(path);
  if (ext == ".obj") return save_obj(mesh, path);
  if (ext == ".ply") return save_ply(mesh, path);
  throw ParameterError("unsupported mesh extension '" + ext + "' for " + path.string());
}

}  // namespace foodmet
