#pragma once

#include <fstream>
#include <string>
#include <vector>

#include "bohmgrav/config.hpp"
#include "bohmgrav/errors.hpp"
#include "bohmgrav/fem.hpp"
#include "bohmgrav/mesh.hpp"

namespace bohmgrav {

namespace detail {

inline void check_export_args(std::size_t rows, const std::vector<std::string>& names,
                              const std::vector<ScalarField>& fields) {
  if (names.size() != fields.size())
    throw NumericalError("export: field count does not match name count");
  if (names.empty()) throw NumericalError("export: need at least one field");
  for (const auto& f : fields)
    if (f.size() != rows)
      throw NumericalError("export: field has " + std::to_string(f.size()) +
                           " values but the geometry has " + std::to_string(rows));
}

inline void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  out.flush();
  if (!out) throw IoError("failed while writing '" + path + "'");
}

}  // namespace detail

// CSV table of nodal fields: header "x,y,<names...>", one row per mesh node,
// 17 significant digits so values survive a round trip bit for bit, LF line
// endings regardless of platform.
inline std::string csv_text(const Mesh& mesh, const std::vector<std::string>& names,
                            const std::vector<ScalarField>& fields) {
  detail::check_export_args(mesh.node_count(), names, fields);
  std::string out = "x,y";
  for (const auto& n : names) {
    out += ',';
    out += n;
  }
  out += '\n';
  for (std::size_t a = 0; a < mesh.node_count(); ++a) {
    out += format_g17(mesh.nodes[a][0]);
    out += ',';
    out += format_g17(mesh.nodes[a][1]);
    for (const auto& f : fields) {
      out += ',';
      out += format_g17(f[a]);
    }
    out += '\n';
  }
  return out;
}

// Radial variant of the CSV table with an "r" coordinate column.
inline std::string radial_csv_text(const std::vector<double>& radii,
                                   const std::vector<std::string>& names,
                                   const std::vector<ScalarField>& fields) {
  if (radii.empty()) throw NumericalError("export: empty radial grid");
  detail::check_export_args(radii.size(), names, fields);
  std::string out = "r";
  for (const auto& n : names) {
    out += ',';
    out += n;
  }
  out += '\n';
  for (std::size_t i = 0; i < radii.size(); ++i) {
    out += format_g17(radii[i]);
    for (const auto& f : fields) {
      out += ',';
      out += format_g17(f.values[i]);
    }
    out += '\n';
  }
  return out;
}

// Legacy ASCII VTK (version 3.0) unstructured grid: mesh nodes as 3D points
// with z = 0, triangles as cell type 5, one SCALARS block per field.  Loads
// directly into ParaView and VisIt.
inline std::string vtk_text(const Mesh& mesh, const std::vector<std::string>& names,
                            const std::vector<ScalarField>& fields) {
  detail::check_export_args(mesh.node_count(), names, fields);
  std::string out = "# vtk DataFile Version 3.0\n";
  out += "nodal fields\n";
  out += "ASCII\n";
  out += "DATASET UNSTRUCTURED_GRID\n";
  out += "POINTS " + std::to_string(mesh.node_count()) + " double\n";
  for (const auto& p : mesh.nodes)
    out += format_g17(p[0]) + " " + format_g17(p[1]) + " 0\n";
  out += "CELLS " + std::to_string(mesh.triangle_count()) + " " +
         std::to_string(4 * mesh.triangle_count()) + "\n";
  for (const auto& t : mesh.triangles)
    out += "3 " + std::to_string(t[0]) + " " + std::to_string(t[1]) + " " +
           std::to_string(t[2]) + "\n";
  out += "CELL_TYPES " + std::to_string(mesh.triangle_count()) + "\n";
  for (std::size_t t = 0; t < mesh.triangle_count(); ++t) out += "5\n";
  out += "POINT_DATA " + std::to_string(mesh.node_count()) + "\n";
  for (std::size_t k = 0; k < names.size(); ++k) {
    out += "SCALARS " + names[k] + " double 1\n";
    out += "LOOKUP_TABLE default\n";
    for (std::size_t a = 0; a < mesh.node_count(); ++a) out += format_g17(fields[k][a]) + "\n";
  }
  return out;
}

inline void export_fields_csv(const std::string& path, const Mesh& mesh,
                              const std::vector<std::string>& names,
                              const std::vector<ScalarField>& fields) {
  detail::write_text_file(path, csv_text(mesh, names, fields));
}

inline void export_radial_csv(const std::string& path, const std::vector<double>& radii,
                              const std::vector<std::string>& names,
                              const std::vector<ScalarField>& fields) {
  detail::write_text_file(path, radial_csv_text(radii, names, fields));
}

inline void export_fields_vtk(const std::string& path, const Mesh& mesh,
                              const std::vector<std::string>& names,
                              const std::vector<ScalarField>& fields) {
  detail::write_text_file(path, vtk_text(mesh, names, fields));
}

}  // namespace bohmgrav
