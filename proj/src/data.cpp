#include "lgm/data.hpp"

#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "lgm/errors.hpp"

namespace lgm {

int Dataset::column_index(const std::string& name) const {
  for (size_t i = 0; i < columns.size(); ++i)
    if (columns[i] == name) return static_cast<int>(i);
  return -1;
}

const Vector& Dataset::col(const std::string& name) const {
  const int i = column_index(name);
  if (i < 0) throw DataError("missing column '" + name + "'");
  return values[i];
}

const std::vector<bool>& Dataset::missing_mask(const std::string& name) const {
  const int i = column_index(name);
  if (i < 0) throw DataError("missing column '" + name + "'");
  return missing[i];
}

void Dataset::add_column(const std::string& name, Vector v,
                         std::vector<bool> miss) {
  if (!values.empty() && v.size() != n_rows())
    throw DataError("add_column: row count mismatch for '" + name + "'");
  if (miss.empty()) miss.assign(v.size(), false);
  columns.push_back(name);
  values.push_back(std::move(v));
  missing.push_back(std::move(miss));
}

namespace {

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::stringstream ss(line);
  while (std::getline(ss, field, ',')) {
    // trim whitespace and a possible trailing \r
    const auto b = field.find_first_not_of(" \t\r");
    const auto e = field.find_last_not_of(" \t\r");
    out.push_back(b == std::string::npos ? "" : field.substr(b, e - b + 1));
  }
  if (!line.empty() && line.back() == ',') out.push_back("");
  return out;
}

}  // namespace

Dataset read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path + "'");
  std::string line;
  if (!std::getline(in, line)) throw DataError("empty dataset: '" + path + "'");

  Dataset data;
  data.columns = split_line(line);
  if (data.columns.empty()) throw DataError("no header in '" + path + "'");
  std::set<std::string> seen;
  for (const auto& c : data.columns)
    if (!seen.insert(c).second)
      throw DataError("duplicate column header '" + c + "'");

  const size_t ncol = data.columns.size();
  std::vector<std::vector<double>> cols(ncol);
  std::vector<std::vector<bool>> miss(ncol);
  int row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto fields = split_line(line);
    if (fields.size() != ncol)
      throw DataError("row " + std::to_string(row) + ": expected " +
                      std::to_string(ncol) + " fields, got " +
                      std::to_string(fields.size()));
    for (size_t c = 0; c < ncol; ++c) {
      if (fields[c].empty() || fields[c] == "NA") {
        cols[c].push_back(0.0);
        miss[c].push_back(true);
        continue;
      }
      try {
        size_t pos = 0;
        const double v = std::stod(fields[c], &pos);
        if (pos != fields[c].size()) throw std::invalid_argument(fields[c]);
        cols[c].push_back(v);
        miss[c].push_back(false);
      } catch (const std::exception&) {
        throw DataError("row " + std::to_string(row) + ", column '" +
                        data.columns[c] + "': non-numeric value '" + fields[c] +
                        "'");
      }
    }
  }
  if (cols[0].empty()) throw DataError("empty dataset: '" + path + "'");
  for (size_t c = 0; c < ncol; ++c) {
    data.values.push_back(
        Eigen::Map<Vector>(cols[c].data(), static_cast<int>(cols[c].size())));
    data.missing.push_back(std::move(miss[c]));
  }
  return data;
}

void write_csv(const Dataset& data, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write '" + path + "'");
  for (size_t c = 0; c < data.columns.size(); ++c)
    out << data.columns[c] << (c + 1 == data.columns.size() ? "\n" : ",");
  char buf[64];
  for (int r = 0; r < data.n_rows(); ++r) {
    for (size_t c = 0; c < data.columns.size(); ++c) {
      if (data.missing[c][r]) {
        out << "NA";
      } else {
        std::snprintf(buf, sizeof buf, "%.17g", data.values[c][r]);
        out << buf;
      }
      out << (c + 1 == data.columns.size() ? "\n" : ",");
    }
  }
}

}  // namespace lgm
