#include "pointreg/io.hpp"

#include <fstream>
#include <sstream>
#include <vector>

#include "pointreg/error.hpp"

namespace pointreg {

PointCloud read_xyz(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  PointCloud cloud;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ss(line);
    Eigen::Vector3d p;
    if (!(ss >> p.x() >> p.y() >> p.z())) {
      throw IoError(path + ":" + std::to_string(lineno) + ": expected 'x y z'");
    }
    cloud.points.push_back(p);
  }
  cloud.validate();
  return cloud;
}

void write_xyz(const PointCloud& cloud, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path);
  out.precision(17);
  for (const auto& p : cloud.points) {
    out << p.x() << ' ' << p.y() << ' ' << p.z() << '\n';
  }
  if (!out) throw IoError("write failed: " + path);
}

PointCloud read_ply(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);

  std::string line;
  if (!std::getline(in, line) || line.substr(0, 3) != "ply") {
    throw IoError(path + ": missing 'ply' magic");
  }

  long vertex_count = -1;
  bool in_vertex_element = false;
  bool vertex_is_first_element = false;
  bool seen_any_element = false;
  std::vector<std::string> vertex_props;

  while (std::getline(in, line)) {
    std::istringstream ss(line);
    std::string tok;
    ss >> tok;
    if (tok == "comment" || tok.empty()) continue;
    if (tok == "format") {
      std::string fmt;
      ss >> fmt;
      if (fmt != "ascii") {
        throw IoError(path + ": binary PLY is not supported, convert to ascii");
      }
    } else if (tok == "element") {
      std::string name;
      long count = 0;
      ss >> name >> count;
      if (name == "vertex") {
        if (seen_any_element) {
          throw IoError(path + ": vertex must be the first element");
        }
        vertex_count = count;
        in_vertex_element = true;
        vertex_is_first_element = true;
      } else {
        in_vertex_element = false;
      }
      seen_any_element = true;
    } else if (tok == "property") {
      if (in_vertex_element) {
        std::string type, name;
        ss >> type >> name;
        if (type == "list") throw IoError(path + ": list property on vertex element");
        vertex_props.push_back(name);
      }
    } else if (tok == "end_header") {
      break;
    }
  }
  if (vertex_count < 0 || !vertex_is_first_element) {
    throw IoError(path + ": no vertex element in header");
  }

  auto prop_index = [&](const std::string& name) -> int {
    for (std::size_t i = 0; i < vertex_props.size(); ++i) {
      if (vertex_props[i] == name) return static_cast<int>(i);
    }
    return -1;
  };
  const int ix = prop_index("x"), iy = prop_index("y"), iz = prop_index("z");
  if (ix < 0 || iy < 0 || iz < 0) throw IoError(path + ": vertex element lacks x/y/z");
  const int inx = prop_index("nx"), iny = prop_index("ny"), inz = prop_index("nz");
  const bool has_normals = inx >= 0 && iny >= 0 && inz >= 0;

  PointCloud cloud;
  cloud.points.reserve(static_cast<std::size_t>(vertex_count));
  std::vector<double> row(vertex_props.size());
  for (long v = 0; v < vertex_count; ++v) {
    if (!std::getline(in, line)) throw IoError(path + ": truncated vertex data");
    std::istringstream ss(line);
    for (auto& value : row) {
      if (!(ss >> value)) throw IoError(path + ": malformed vertex line " + std::to_string(v));
    }
    cloud.points.emplace_back(row[static_cast<std::size_t>(ix)],
                              row[static_cast<std::size_t>(iy)],
                              row[static_cast<std::size_t>(iz)]);
    if (has_normals) {
      cloud.normals.emplace_back(row[static_cast<std::size_t>(inx)],
                                 row[static_cast<std::size_t>(iny)],
                                 row[static_cast<std::size_t>(inz)]);
    }
  }
  cloud.validate();
  return cloud;
}

PointCloud read_cloud(const std::string& path) {
  if (path.size() >= 4 && path.substr(path.size() - 4) == ".ply") return read_ply(path);
  return read_xyz(path);
}

}  // namespace pointreg
