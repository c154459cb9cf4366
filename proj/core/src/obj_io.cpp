#include "meshalign/obj_io.hpp"

#include <charconv>
#include <fstream>
#include <sstream>
#include <string_view>

#include <fmt/format.h>

#include "meshalign/error.hpp"

namespace meshalign {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) {
    s.remove_prefix(1);
  }
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) {
    s.remove_suffix(1);
  }
  return s;
}

std::vector<std::string_view> split_ws(std::string_view s) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && (s[i] == ' ' || s[i] == '\t')) {
      ++i;
    }
    std::size_t j = i;
    while (j < s.size() && s[j] != ' ' && s[j] != '\t') {
      ++j;
    }
    if (j > i) {
      out.push_back(s.substr(i, j - i));
    }
    i = j;
  }
  return out;
}

double parse_double(std::string_view token, int line) {
  // strtod handles the formats we write; from_chars for double is not
  // available on every toolchain we target.
  std::string tmp(token);
  char* end = nullptr;
  const double value = std::strtod(tmp.c_str(), &end);
  if (end == tmp.c_str() || *end != '\0') {
    throw ParseError(fmt::format("OBJ line {}: bad number '{}'", line, token));
  }
  return value;
}

long parse_index(std::string_view token, int line) {
  long value = 0;
  const auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), value);
  if (ec != std::errc() || ptr != token.data() + token.size()) {
    throw ParseError(fmt::format("OBJ line {}: bad index '{}'", line, token));
  }
  return value;
}

// Resolves a 1-based (or negative relative) OBJ index to 0-based.
int resolve(long index, std::size_t count, int line, const char* what) {
  if (index == 0) {
    throw ParseError(fmt::format("OBJ line {}: {} index 0 is invalid (OBJ is 1-based)", line, what));
  }
  const long resolved = index > 0 ? index - 1 : static_cast<long>(count) + index;
  if (resolved < 0 || resolved >= static_cast<long>(count)) {
    throw ParseError(fmt::format("OBJ line {}: {} index {} out of range ({} defined)", line, what,
                                 index, count));
  }
  return static_cast<int>(resolved);
}

} // namespace

TriangleMesh parse_obj(std::istream& in) {
  TriangleMesh mesh;
  std::vector<Vec2> raw_uvs;
  int faces_with_uv = 0;
  int faces_without_uv = 0;

  std::string line_buf;
  int line_no = 0;
  while (std::getline(in, line_buf)) {
    ++line_no;
    std::string_view line = trim(line_buf);
    if (line.empty() || line.front() == '#') {
      continue;
    }
    const auto tokens = split_ws(line);
    const std::string_view tag = tokens.front();
    if (tag == "v") {
      if (tokens.size() < 4) {
        throw ParseError(fmt::format("OBJ line {}: vertex needs 3 coordinates", line_no));
      }
      mesh.vertices.emplace_back(parse_double(tokens[1], line_no), parse_double(tokens[2], line_no),
                                 parse_double(tokens[3], line_no));
    } else if (tag == "vt") {
      if (tokens.size() < 3) {
        throw ParseError(fmt::format("OBJ line {}: texture coordinate needs 2 values", line_no));
      }
      raw_uvs.emplace_back(parse_double(tokens[1], line_no), parse_double(tokens[2], line_no));
    } else if (tag == "f") {
      if (tokens.size() != 4) {
        throw ParseError(fmt::format("OBJ line {}: only triangular faces are supported (got {} corners)",
                                     line_no, tokens.size() - 1));
      }
      Tri face{};
      Tri face_uv{-1, -1, -1};
      int corners_with_uv = 0;
      for (int k = 0; k < 3; ++k) {
        const std::string_view corner = tokens[k + 1];
        const std::size_t slash = corner.find('/');
        face[k] = resolve(parse_index(corner.substr(0, slash), line_no), mesh.vertices.size(),
                          line_no, "vertex");
        if (slash == std::string_view::npos) {
          continue;
        }
        std::string_view rest = corner.substr(slash + 1);
        const std::size_t slash2 = rest.find('/');
        const std::string_view vt = rest.substr(0, slash2);
        if (vt.empty()) {
          continue;
        }
        face_uv[k] = resolve(parse_index(vt, line_no), raw_uvs.size(), line_no, "texture");
        ++corners_with_uv;
      }
      if (corners_with_uv != 0 && corners_with_uv != 3) {
        throw ParseError(
            fmt::format("OBJ line {}: face references a texture coordinate on some corners only", line_no));
      }
      if (face[0] == face[1] || face[1] == face[2] || face[0] == face[2]) {
        throw GeometryError(fmt::format("OBJ line {}: degenerate face (repeated vertex)", line_no));
      }
      (corners_with_uv == 3 ? faces_with_uv : faces_without_uv)++;
      mesh.faces.push_back(face);
      mesh.face_uvs.push_back(face_uv);
    } else if (tag == "vn" || tag == "vp" || tag == "o" || tag == "g" || tag == "s" ||
               tag == "mtllib" || tag == "usemtl" || tag == "l") {
      continue;
    } else {
      throw ParseError(fmt::format("OBJ line {}: unknown record '{}'", line_no, tag));
    }
  }
  if (faces_with_uv > 0 && faces_without_uv > 0) {
    throw ParseError(fmt::format("OBJ: {} faces reference missing texture coordinates", faces_without_uv));
  }
  if (faces_with_uv == 0) {
    mesh.face_uvs.clear();
  } else {
    // Unreferenced coordinates are dropped; the rest keep their file order.
    std::vector<int> remap(raw_uvs.size(), -1);
    for (const Tri& fu : mesh.face_uvs) {
      for (int k = 0; k < 3; ++k) {
        remap[fu[k]] = 0;
      }
    }
    for (std::size_t i = 0; i < raw_uvs.size(); ++i) {
      if (remap[i] == 0) {
        remap[i] = static_cast<int>(mesh.uvs.size());
        mesh.uvs.push_back(raw_uvs[i]);
      }
    }
    for (Tri& fu : mesh.face_uvs) {
      for (int k = 0; k < 3; ++k) {
        fu[k] = remap[fu[k]];
      }
    }
  }

  const MeshTopology topo = build_topology(mesh);
  for (std::size_t e = 0; e < topo.edges.size(); ++e) {
    if (topo.edge_faces[e].size() > 2) {
      throw GeometryError(fmt::format("OBJ: non-manifold edge ({}, {}) shared by {} faces",
                                      topo.edges[e].a + 1, topo.edges[e].b + 1,
                                      topo.edge_faces[e].size()));
    }
  }
  return mesh;
}

TriangleMesh load_obj(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw IoError(fmt::format("cannot open OBJ file '{}'", path.string()));
  }
  return parse_obj(in);
}

void write_obj(const TriangleMesh& mesh, std::ostream& out) {
  std::string buf;
  for (const Vec3& p : mesh.vertices) {
    fmt::format_to(std::back_inserter(buf), "v {:.9g} {:.9g} {:.9g}\n", p.x(), p.y(), p.z());
  }
  for (const Vec2& uv : mesh.uvs) {
    fmt::format_to(std::back_inserter(buf), "vt {:.9g} {:.9g}\n", uv.x(), uv.y());
  }
  for (int f = 0; f < mesh.face_count(); ++f) {
    const Tri& t = mesh.faces[f];
    if (mesh.has_uvs()) {
      const Tri& u = mesh.face_uvs[f];
      fmt::format_to(std::back_inserter(buf), "f {}/{} {}/{} {}/{}\n", t[0] + 1, u[0] + 1, t[1] + 1,
                     u[1] + 1, t[2] + 1, u[2] + 1);
    } else {
      fmt::format_to(std::back_inserter(buf), "f {} {} {}\n", t[0] + 1, t[1] + 1, t[2] + 1);
    }
  }
  out << buf;
}

void save_obj(const TriangleMesh& mesh, const std::filesystem::path& path,
              const std::string& material_library) {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw IoError(fmt::format("cannot write OBJ file '{}'", path.string()));
  }
  if (!material_library.empty()) {
    out << "mtllib " << material_library << "\nusemtl material0\n";
  }
  write_obj(mesh, out);
  if (!out) {
    throw IoError(fmt::format("failed writing OBJ file '{}'", path.string()));
  }
}

} // namespace meshalign
