#pragma once

#include <string>
#include <vector>

#include "lgm/gmrf.hpp"

namespace lgm {

// Column-major table with per-cell missingness ("NA" or empty in CSV).
struct Dataset {
  std::vector<std::string> columns;
  std::vector<Vector> values;
  std::vector<std::vector<bool>> missing;

  int n_rows() const { return values.empty() ? 0 : static_cast<int>(values[0].size()); }
  int column_index(const std::string& name) const;  // -1 if absent
  bool has(const std::string& name) const { return column_index(name) >= 0; }
  const Vector& col(const std::string& name) const;
  const std::vector<bool>& missing_mask(const std::string& name) const;
  void add_column(const std::string& name, Vector v,
                  std::vector<bool> miss = {});
};

Dataset read_csv(const std::string& path);
void write_csv(const Dataset& data, const std::string& path);

}  // namespace lgm
