#pragma once

#include <string>

#include "pointreg/geometry.hpp"

namespace pointreg {

/// Reads an ASCII XYZ file: one "x y z" triple per line. Blank lines and
/// lines starting with '#' are skipped.
PointCloud read_xyz(const std::string& path);
void write_xyz(const PointCloud& cloud, const std::string& path);

/// Reads an ASCII PLY whose first element is `vertex` with x,y,z properties
/// and optional nx,ny,nz. Binary PLY is rejected with an IoError.
PointCloud read_ply(const std::string& path);

/// Dispatches on extension: .ply -> read_ply, anything else -> read_xyz.
PointCloud read_cloud(const std::string& path);

}  // namespace pointreg
