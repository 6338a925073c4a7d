#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "pdedev/lbm/fields.hpp"

namespace pdedev::tasks {

// One point-data array, values stored node by node with x fastest.
struct VtkArray {
  std::string name;
  int components = 1;
  std::vector<double> values;

  friend bool operator==(const VtkArray&, const VtkArray&) = default;
};

struct VtkDataset {
  int nx = 0;
  int ny = 0;
  std::vector<VtkArray> arrays;

  const VtkArray* find(std::string_view name) const;
  std::vector<std::string> names() const;
  // Throws IoError if the array is missing or has the wrong arity.
  lbm::ScalarField scalar(std::string_view name) const;
  lbm::VectorField vector(std::string_view name) const;

  friend bool operator==(const VtkDataset&, const VtkDataset&) = default;
};

VtkDataset make_dataset(const lbm::ScalarField& scalar, std::string_view scalar_name,
                        const lbm::VectorField& vector, std::string_view vector_name);

// Legacy ASCII STRUCTURED_POINTS, 15 significant digits.
std::string render_vtk(const VtkDataset& data, std::string_view title);
void write_vtk(const std::string& path, const VtkDataset& data, std::string_view title);

// Accepts the subset render_vtk produces (SCALARS with LOOKUP_TABLE, VECTORS).
// Throws IoError on malformed input.
VtkDataset parse_vtk(std::string_view text);
VtkDataset read_vtk(const std::string& path);

// Minimal ASCII .vtu reader: points must form a regular nx-by-ny grid.
VtkDataset parse_vtu(std::string_view text);
// Dispatches on the file extension (.vtk or .vtu).
VtkDataset read_field_file(const std::string& path);

// Value as it appears in the files (15 significant digits).
double vtk_round(double v);

}  // namespace pdedev::tasks
