#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <tuple>
#include <vector>

#include "bohmgrav/errors.hpp"

namespace bohmgrav {

// Compressed sparse row matrix.  Column indices are strictly increasing within
// each row and duplicates are merged at assembly time.
struct SparseMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<std::size_t> row_offsets;  // size rows + 1
  std::vector<std::size_t> col_indices;
  std::vector<double> values;

  std::size_t nnz() const { return values.size(); }

  void multiply(const std::vector<double>& x, std::vector<double>& y) const {
    y.assign(rows, 0.0);
    for (std::size_t i = 0; i < rows; ++i) {
      double acc = 0.0;
      for (std::size_t k = row_offsets[i]; k < row_offsets[i + 1]; ++k)
        acc += values[k] * x[col_indices[k]];
      y[i] = acc;
    }
  }

  std::vector<double> multiply(const std::vector<double>& x) const {
    std::vector<double> y;
    multiply(x, y);
    return y;
  }

  std::vector<double> diagonal() const {
    std::vector<double> d(rows, 0.0);
    for (std::size_t i = 0; i < rows; ++i)
      for (std::size_t k = row_offsets[i]; k < row_offsets[i + 1]; ++k)
        if (col_indices[k] == i) d[i] = values[k];
    return d;
  }

  double entry(std::size_t i, std::size_t j) const {
    for (std::size_t k = row_offsets[i]; k < row_offsets[i + 1]; ++k)
      if (col_indices[k] == j) return values[k];
    return 0.0;
  }
};

// Accumulates (row, col, value) triplets; duplicates sum on compression.
class CooBuilder {
public:
  CooBuilder(std::size_t rows, std::size_t cols) : rows_(rows), cols_(cols) {}

  void add(std::size_t i, std::size_t j, double v) {
    if (i >= rows_ || j >= cols_) throw NumericalError("sparse assembly: index out of range");
    entries_.emplace_back(i, j, v);
  }

  void reserve(std::size_t n) { entries_.reserve(n); }

  SparseMatrix compress() const {
    std::vector<std::tuple<std::size_t, std::size_t, double>> sorted(entries_);
    std::sort(sorted.begin(), sorted.end(), [](const auto& a, const auto& b) {
      return std::tie(std::get<0>(a), std::get<1>(a)) < std::tie(std::get<0>(b), std::get<1>(b));
    });

    SparseMatrix m;
    m.rows = rows_;
    m.cols = cols_;
    m.row_offsets.assign(rows_ + 1, 0);
    for (std::size_t k = 0; k < sorted.size();) {
      const std::size_t i = std::get<0>(sorted[k]);
      const std::size_t j = std::get<1>(sorted[k]);
      double acc = 0.0;
      while (k < sorted.size() && std::get<0>(sorted[k]) == i && std::get<1>(sorted[k]) == j)
        acc += std::get<2>(sorted[k++]);
      m.col_indices.push_back(j);
      m.values.push_back(acc);
      m.row_offsets[i + 1]++;
    }
    for (std::size_t i = 0; i < rows_; ++i) m.row_offsets[i + 1] += m.row_offsets[i];
    return m;
  }

private:
  std::size_t rows_, cols_;
  std::vector<std::tuple<std::size_t, std::size_t, double>> entries_;
};

}  // namespace bohmgrav
