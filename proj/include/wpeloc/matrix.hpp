#pragma once

#include <cstddef>
#include <stdexcept>
#include <vector>

namespace wpeloc {

// Minimal dense row-major matrix. Just storage plus bounds-free indexing;
// all numeric work happens in the algorithms that use it.
template <typename T>
struct Matrix {
  std::size_t rows{0};
  std::size_t cols{0};
  std::vector<T> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c, T fill = T{}) : rows(r), cols(c), data(r * c, fill) {}

  T& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  const T& operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }

  T* row_ptr(std::size_t r) { return data.data() + r * cols; }
  const T* row_ptr(std::size_t r) const { return data.data() + r * cols; }

  bool same_shape(const Matrix& other) const { return rows == other.rows && cols == other.cols; }
};

}  // namespace wpeloc
