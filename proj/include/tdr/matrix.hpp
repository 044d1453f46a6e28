#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "tdr/common.hpp"

namespace tdr {

// Dense row-major table of feature rows. Column names are carried along so
// exported CSVs are self-describing; they are not consulted by the learners.
struct FeatureMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> values;  // rows * cols, row-major
  std::vector<std::string> column_names;

  FeatureMatrix() = default;
  FeatureMatrix(std::size_t r, std::size_t c)
      : rows(r), cols(c), values(r * c, 0.0) {}

  double at(std::size_t r, std::size_t c) const { return values[r * cols + c]; }
  double& at(std::size_t r, std::size_t c) { return values[r * cols + c]; }

  std::span<const double> row(std::size_t r) const {
    return {values.data() + r * cols, cols};
  }

  void push_row(std::span<const double> row_values) {
    if (cols == 0) cols = row_values.size();
    if (row_values.size() != cols)
      throw dimension_error("FeatureMatrix: row width " +
                            std::to_string(row_values.size()) +
                            " does not match column count " + std::to_string(cols));
    values.insert(values.end(), row_values.begin(), row_values.end());
    ++rows;
  }
};

}  // namespace tdr
