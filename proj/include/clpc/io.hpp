#pragma once

#include <string>

#include "clpc/geometry.hpp"

namespace clpc {

// Whitespace-separated "x y z" per line; blank lines and '#' comments allowed.
PointCloud read_xyz(const std::string& path);
void write_xyz(const PointCloud& cloud, const std::string& path);

// PLY with float64 x/y/z properties; ascii or binary_little_endian. Extra
// vertex properties are skipped; non-vertex elements are ignored.
PointCloud read_ply(const std::string& path);
void write_ply(const PointCloud& cloud, const std::string& path, bool binary = true);

// Dispatch on extension (.xyz/.ply, case-insensitive).
PointCloud read_cloud(const std::string& path);
void write_cloud(const PointCloud& cloud, const std::string& path);

} // namespace clpc
