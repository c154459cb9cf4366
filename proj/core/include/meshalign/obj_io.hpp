#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>

#include "meshalign/mesh.hpp"

namespace meshalign {

/// Reads a Wavefront OBJ with v/vt/f records (1-based, per-corner vt indices,
/// negative relative indices allowed). Only the vt records referenced by faces
/// enter the UV pool, in order of first use. Normals (vn) are ignored.
/// Throws ParseError on malformed records and GeometryError on non-manifold
/// topology.
TriangleMesh load_obj(const std::filesystem::path& path);
TriangleMesh parse_obj(std::istream& in);

/// Writes positions and UVs with 9 significant digits.
void save_obj(const TriangleMesh& mesh, const std::filesystem::path& path,
              const std::string& material_library = {});
void write_obj(const TriangleMesh& mesh, std::ostream& out);

} // namespace meshalign
