#pragma once

#include <filesystem>

#include "foodmet/core/geometry.hpp"

namespace foodmet {

/// Reads `.obj` (ASCII; normals and texture coordinates ignored, polygons
/// fan-triangulated) or `.ply` (binary little-endian or ASCII). Throws
/// ParseError with a line number / byte offset on malformed input and
/// StructuralError when a face references a missing vertex.
TriangleMesh load_mesh(const std::filesystem::path& path);

/// Writes ASCII OBJ or binary little-endian PLY depending on the extension.
/// PLY stores coordinates as doubles.
void save_mesh(const TriangleMesh& mesh, const std::filesystem::path& path);

TriangleMesh load_obj(const std::filesystem::path& path);
TriangleMesh load_ply(const std::filesystem::path& path);
void save_obj(const TriangleMesh& mesh, const std::filesystem::path& path);
void save_ply(const TriangleMesh& mesh, const std::filesystem::path& path);

}  // namespace foodmet
