#pragma once

#include <algorithm>
#include <array>
#include <bit>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "kpose/error.hpp"
#include "kpose/geometry.hpp"
#include "kpose/kdtree.hpp"
#include "kpose/random.hpp"

namespace kpose {

/// Object model points in millimeters, model frame.
struct PointCloud {
  std::vector<Vec3> points;

  std::size_t size() const { return points.size(); }
  bool empty() const { return points.empty(); }

  friend bool operator==(const PointCloud& a, const PointCloud& b) {
    if (a.points.size() != b.points.size()) return false;
    for (std::size_t i = 0; i < a.points.size(); ++i)
      if (a.points[i] != b.points[i]) return false;
    return true;
  }
};

struct TriangleMesh {
  PointCloud vertices;
  std::vector<std::array<std::uint32_t, 3>> faces;

  bool has_faces() const { return !faces.empty(); }

  friend bool operator==(const TriangleMesh& a, const TriangleMesh& b) {
    return a.vertices == b.vertices && a.faces == b.faces;
  }
};

inline void validate(const PointCloud& pc) {
  if (pc.empty()) throw Error(ErrorKind::DegenerateInput, "point cloud is empty");
  for (const auto& p : pc.points)
    if (!p.allFinite()) throw Error(ErrorKind::DegenerateInput, "point cloud has non-finite coordinates");
}

inline Vec3 centroid(const PointCloud& pc) {
  if (pc.empty()) throw Error(ErrorKind::DegenerateInput, "centroid of an empty cloud");
  Vec3 sum = Vec3::Zero();
  for (const auto& p : pc.points) sum += p;
  return sum / static_cast<double>(pc.size());
}

inline constexpr std::size_t kExactDiameterLimit = 20000;

/// Maximum pairwise distance. Full O(n^2) scan up to kExactDiameterLimit
/// points; above that a k-d tree branch and bound that is still exact.
inline double diameter(const PointCloud& pc) {
  if (pc.size() < 2) throw Error(ErrorKind::DegenerateInput, "diameter needs at least 2 points");
  const auto& pts = pc.points;
  if (pts.size() <= kExactDiameterLimit) {
    double best = 0.0;
    for (std::size_t i = 0; i < pts.size(); ++i)
      for (std::size_t j = i + 1; j < pts.size(); ++j) best = std::max(best, dist2(pts[i], pts[j]));
    return std::sqrt(best);
  }
  return std::sqrt(KdTree(pts).farthest_pair_d2());
}

inline PointCloud transformed(const PointCloud& pc, const Pose& pose) {
  PointCloud out;
  out.points.reserve(pc.size());
  for (const auto& p : pc.points) out.points.push_back(transform_point(pose, p));
  return out;
}

/// Every `stride`-th point so that at most `max_points` remain; identity when already small.
inline PointCloud subsample_stride(const PointCloud& pc, std::size_t max_points) {
  if (pc.size() <= max_points || max_points == 0) return pc;
  const std::size_t stride = (pc.size() + max_points - 1) / max_points;
  PointCloud out;
  for (std::size_t i = 0; i < pc.size(); i += stride) out.points.push_back(pc.points[i]);
  return out;
}

/// Area-weighted uniform sampling of the triangle surfaces.
inline PointCloud sample_surface(const TriangleMesh& mesh, std::size_t n, std::uint64_t seed) {
  if (!mesh.has_faces()) throw Error(ErrorKind::DegenerateInput, "surface sampling needs faces");
  const auto& v = mesh.vertices.points;
  std::vector<double> cumulative;
  cumulative.reserve(mesh.faces.size());
  double total = 0.0;
  for (const auto& f : mesh.faces) {
    total += 0.5 * (v[f[1]] - v[f[0]]).cross(v[f[2]] - v[f[0]]).norm();
    cumulative.push_back(total);
  }
  if (!(total > 0.0)) throw Error(ErrorKind::DegenerateInput, "mesh has zero surface area");

  Rng rng(seed);
  PointCloud out;
  out.points.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double pick = rng.uniform01() * total;
    auto it = std::upper_bound(cumulative.begin(), cumulative.end(), pick);
    if (it == cumulative.end()) --it;
    const auto& f = mesh.faces[static_cast<std::size_t>(it - cumulative.begin())];
    double a = rng.uniform01();
    double b = rng.uniform01();
    if (a + b > 1.0) {
      a = 1.0 - a;
      b = 1.0 - b;
    }
    out.points.push_back(v[f[0]] + a * (v[f[1]] - v[f[0]]) + b * (v[f[2]] - v[f[0]]));
  }
  return out;
}

// ---------------------------------------------------------------------------
// PLY 1.0 (ascii / binary_little_endian)

namespace ply_detail {

enum class Scalar { I8, U8, I16, U16, I32, U32, F32, F64 };

inline std::optional<Scalar> parse_scalar(std::string_view name) {
  if (name == "char" || name == "int8") return Scalar::I8;
  if (name == "uchar" || name == "uint8") return Scalar::U8;
  if (name == "short" || name == "int16") return Scalar::I16;
  if (name == "ushort" || name == "uint16") return Scalar::U16;
  if (name == "int" || name == "int32") return Scalar::I32;
  if (name == "uint" || name == "uint32") return Scalar::U32;
  if (name == "float" || name == "float32") return Scalar::F32;
  if (name == "double" || name == "float64") return Scalar::F64;
  return std::nullopt;
}

inline std::size_t scalar_size(Scalar s) {
  switch (s) {
    case Scalar::I8:
    case Scalar::U8: return 1;
    case Scalar::I16:
    case Scalar::U16: return 2;
    case Scalar::I32:
    case Scalar::U32:
    case Scalar::F32: return 4;
    case Scalar::F64: return 8;
  }
  return 0;
}

struct Property {
  std::string name;
  Scalar type = Scalar::F32;
  bool is_list = false;
  Scalar count_type = Scalar::U8;
};

struct Element {
  std::string name;
  std::size_t count = 0;
  std::vector<Property> properties;
};

[[noreturn]] inline void fail(std::size_t offset, const std::string& what) {
  throw Error(ErrorKind::ParseError, what + " (byte offset " + std::to_string(offset) + ")");
}

template <typename T>
T read_le(const std::string& buf, std::size_t offset) {
  T value;
  std::memcpy(&value, buf.data() + offset, sizeof(T));
  static_assert(std::endian::native == std::endian::little, "big-endian hosts unsupported");
  return value;
}

class BinaryReader {
 public:
  BinaryReader(const std::string& buf, std::size_t pos) : buf_(buf), pos_(pos) {}

  double read(Scalar s) {
    const std::size_t n = scalar_size(s);
    if (pos_ + n > buf_.size()) fail(pos_, "truncated binary payload");
    double v = 0.0;
    switch (s) {
      case Scalar::I8: v = read_le<std::int8_t>(buf_, pos_); break;
      case Scalar::U8: v = read_le<std::uint8_t>(buf_, pos_); break;
      case Scalar::I16: v = read_le<std::int16_t>(buf_, pos_); break;
      case Scalar::U16: v = read_le<std::uint16_t>(buf_, pos_); break;
      case Scalar::I32: v = read_le<std::int32_t>(buf_, pos_); break;
      case Scalar::U32: v = read_le<std::uint32_t>(buf_, pos_); break;
      case Scalar::F32: v = read_le<float>(buf_, pos_); break;
      case Scalar::F64: v = read_le<double>(buf_, pos_); break;
    }
    pos_ += n;
    return v;
  }

  std::size_t pos() const { return pos_; }

 private:
  const std::string& buf_;
  std::size_t pos_;
};

class AsciiReader {
 public:
  AsciiReader(const std::string& buf, std::size_t pos) : buf_(buf), pos_(pos) {}

  double read(Scalar) {
    while (pos_ < buf_.size() && std::isspace(static_cast<unsigned char>(buf_[pos_]))) ++pos_;
    if (pos_ >= buf_.size()) fail(pos_, "truncated ascii payload");
    const char* first = buf_.data() + pos_;
    const char* last = buf_.data() + buf_.size();
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(first, last, v);
    if (ec != std::errc() ||
        (ptr != last && !std::isspace(static_cast<unsigned char>(*ptr))))
      fail(pos_, "malformed number");
    pos_ += static_cast<std::size_t>(ptr - first);
    return v;
  }

  std::size_t pos() const { return pos_; }

 private:
  const std::string& buf_;
  std::size_t pos_;
};

template <typename Reader>
TriangleMesh read_body(Reader reader, const std::vector<Element>& elements) {
  TriangleMesh mesh;
  for (const auto& el : elements) {
    const bool is_vertex = el.name == "vertex";
    const bool is_face = el.name == "face";
    int ix = -1, iy = -1, iz = -1, iface = -1;
    for (std::size_t p = 0; p < el.properties.size(); ++p) {
      const auto& prop = el.properties[p];
      if (is_vertex && !prop.is_list) {
        if (prop.name == "x") ix = static_cast<int>(p);
        if (prop.name == "y") iy = static_cast<int>(p);
        if (prop.name == "z") iz = static_cast<int>(p);
      }
      if (is_face && prop.is_list && (prop.name == "vertex_indices" || prop.name == "vertex_index"))
        iface = static_cast<int>(p);
    }
    if (is_vertex) mesh.vertices.points.reserve(el.count);
    if (is_face) mesh.faces.reserve(el.count);

    std::vector<double> list;
    for (std::size_t row = 0; row < el.count; ++row) {
      const std::size_t row_start = reader.pos();
      Vec3 p = Vec3::Zero();
      for (std::size_t pi = 0; pi < el.properties.size(); ++pi) {
        const auto& prop = el.properties[pi];
        if (prop.is_list) {
          const double n = reader.read(prop.count_type);
          if (n < 0 || n != std::floor(n)) fail(row_start, "invalid list length");
          list.resize(static_cast<std::size_t>(n));
          for (auto& item : list) item = reader.read(prop.type);
          if (static_cast<int>(pi) == iface) {
            if (list.size() < 3) fail(row_start, "face with fewer than 3 vertices");
            // Polygons are fanned into triangles.
            for (std::size_t t = 1; t + 1 < list.size(); ++t) {
              std::array<std::uint32_t, 3> f{};
              const double idx[3] = {list[0], list[t], list[t + 1]};
              for (int c = 0; c < 3; ++c) {
                if (idx[c] < 0 || idx[c] != std::floor(idx[c])) fail(row_start, "invalid face index");
                f[static_cast<std::size_t>(c)] = static_cast<std::uint32_t>(idx[c]);
              }
              mesh.faces.push_back(f);
            }
          }
        } else {
          const double v = reader.read(prop.type);
          if (static_cast<int>(pi) == ix) p.x() = v;
          if (static_cast<int>(pi) == iy) p.y() = v;
          if (static_cast<int>(pi) == iz) p.z() = v;
        }
      }
      if (is_vertex) {
        if (!p.allFinite()) fail(row_start, "non-finite vertex coordinate");
        mesh.vertices.points.push_back(p);
      }
    }
  }
  for (const auto& f : mesh.faces)
    for (auto idx : f)
      if (idx >= mesh.vertices.size())
        throw Error(ErrorKind::ParseError, "face index " + std::to_string(idx) + " out of range");
  return mesh;
}

}  // namespace ply_detail

/// Parses an in-memory PLY document.
inline TriangleMesh parse_ply(const std::string& buf) {
  using namespace ply_detail;
  std::size_t pos = 0;
  auto next_line = [&](std::size_t& line_start) -> std::string {
    line_start = pos;
    const std::size_t nl = buf.find('\n', pos);
    if (nl == std::string::npos) fail(pos, "unterminated header");
    std::string line = buf.substr(pos, nl - pos);
    if (!line.empty() && line.back() == '\r') line.pop_back();
    pos = nl + 1;
    return line;
  };

  std::size_t at = 0;
  if (next_line(at) != "ply") fail(at, "missing 'ply' magic");

  enum class Format { Unknown, Ascii, BinaryLE } format = Format::Unknown;
  std::vector<Element> elements;
  for (;;) {
    const std::string line = next_line(at);
    std::istringstream ss(line);
    std::string kw;
    ss >> kw;
    if (kw.empty() || kw == "comment" || kw == "obj_info") continue;
    if (kw == "end_header") break;
    if (kw == "format") {
      std::string fmt, version;
      ss >> fmt >> version;
      if (version != "1.0") fail(at, "unsupported PLY version '" + version + "'");
      if (fmt == "ascii") format = Format::Ascii;
      else if (fmt == "binary_little_endian") format = Format::BinaryLE;
      else fail(at, "unsupported format keyword '" + fmt + "'");
    } else if (kw == "element") {
      Element el;
      long long count = -1;
      ss >> el.name >> count;
      if (el.name.empty() || ss.fail() || count < 0) fail(at, "malformed element line");
      el.count = static_cast<std::size_t>(count);
      elements.push_back(std::move(el));
    } else if (kw == "property") {
      if (elements.empty()) fail(at, "property before any element");
      Property prop;
      std::string type;
      ss >> type;
      if (type == "list") {
        std::string ct, it;
        ss >> ct >> it >> prop.name;
        auto c = parse_scalar(ct);
        auto i = parse_scalar(it);
        if (!c || !i || prop.name.empty()) fail(at, "malformed list property");
        prop.is_list = true;
        prop.count_type = *c;
        prop.type = *i;
      } else {
        auto t = parse_scalar(type);
        ss >> prop.name;
        if (!t || prop.name.empty()) fail(at, "malformed property '" + type + "'");
        prop.type = *t;
      }
      elements.back().properties.push_back(std::move(prop));
    } else {
      fail(at, "unknown header keyword '" + kw + "'");
    }
  }
  if (format == Format::Unknown) fail(0, "missing format line");

  const Element* vertex = nullptr;
  for (const auto& el : elements)
    if (el.name == "vertex") vertex = &el;
  if (vertex == nullptr || vertex->count == 0) fail(0, "no vertex element");
  int found = 0;
  for (const auto& p : vertex->properties)
    if (!p.is_list && (p.name == "x" || p.name == "y" || p.name == "z")) ++found;
  if (found != 3) fail(0, "vertex element lacks x/y/z");

  if (format == Format::Ascii) return read_body(AsciiReader(buf, pos), elements);
  return read_body(BinaryReader(buf, pos), elements);
}

inline TriangleMesh load_ply(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::IoError, "cannot open " + path.string());
  std::string buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return parse_ply(buf);
}

/// ASCII PLY with shortest round-trip number formatting.
inline std::string format_ply(const TriangleMesh& mesh) {
  std::string out;
  out += "ply\nformat ascii 1.0\n";
  out += "element vertex " + std::to_string(mesh.vertices.size()) + "\n";
  out += "property double x\nproperty double y\nproperty double z\n";
  if (mesh.has_faces()) {
    out += "element face " + std::to_string(mesh.faces.size()) + "\n";
    out += "property list uchar uint vertex_indices\n";
  }
  out += "end_header\n";
  char num[64];
  for (const auto& p : mesh.vertices.points) {
    for (int c = 0; c < 3; ++c) {
      auto [ptr, ec] = std::to_chars(num, num + sizeof(num), p[c]);
      out.append(num, ptr);
      out += c < 2 ? ' ' : '\n';
    }
  }
  for (const auto& f : mesh.faces)
    out += "3 " + std::to_string(f[0]) + " " + std::to_string(f[1]) + " " + std::to_string(f[2]) + "\n";
  return out;
}

inline void write_ply(const std::filesystem::path& path, const TriangleMesh& mesh) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::IoError, "cannot write " + path.string());
  out << format_ply(mesh);
  if (!out) throw Error(ErrorKind::IoError, "write failed for " + path.string());
}

}  // namespace kpose
