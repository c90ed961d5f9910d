#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "clothkit/error.hpp"

namespace clothkit {

/// Dense row-major 2-D raster. (x, y) = (column, row).
template <typename T>
class Grid {
 public:
  Grid() = default;
  Grid(int width, int height, T fill = T{})
      : width_(width), height_(height),
        data_(static_cast<std::size_t>(width) * static_cast<std::size_t>(height), fill) {
    if (width < 0 || height < 0) throw Error(ErrorKind::Domain, "negative grid dimensions");
  }

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  bool contains(int x, int y) const noexcept {
    return x >= 0 && y >= 0 && x < width_ && y < height_;
  }
  std::size_t index(int x, int y) const noexcept {
    return static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) +
           static_cast<std::size_t>(x);
  }

  T& operator()(int x, int y) noexcept { return data_[index(x, y)]; }
  const T& operator()(int x, int y) const noexcept { return data_[index(x, y)]; }

  T& at(int x, int y) {
    if (!contains(x, y)) throw Error(ErrorKind::Domain, "grid access out of range");
    return data_[index(x, y)];
  }
  const T& at(int x, int y) const {
    if (!contains(x, y)) throw Error(ErrorKind::Domain, "grid access out of range");
    return data_[index(x, y)];
  }

  std::span<T> values() noexcept { return data_; }
  std::span<const T> values() const noexcept { return data_; }

  bool operator==(const Grid&) const = default;

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<T> data_;
};

using Mask = Grid<std::uint8_t>;

/// Row-major dense matrix used for descriptor and feature sets.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), data(r * c, fill) {}

  std::span<double> row(std::size_t i) noexcept { return {data.data() + i * cols, cols}; }
  std::span<const double> row(std::size_t i) const noexcept {
    return {data.data() + i * cols, cols};
  }
  double& operator()(std::size_t i, std::size_t j) noexcept { return data[i * cols + j]; }
  double operator()(std::size_t i, std::size_t j) const noexcept { return data[i * cols + j]; }

  void append_row(std::span<const double> values);

  bool operator==(const Matrix&) const = default;
};

inline void Matrix::append_row(std::span<const double> values) {
  if (rows == 0 && cols == 0) cols = values.size();
  if (values.size() != cols) throw Error(ErrorKind::Dimension, "row length does not match matrix");
  data.insert(data.end(), values.begin(), values.end());
  ++rows;
}

/// Integer pixel coordinate. Ordered row-major: (y, x) lexicographically.
struct Pixel {
  int x = 0;
  int y = 0;

  friend bool operator==(const Pixel&, const Pixel&) = default;
  friend bool operator<(const Pixel& a, const Pixel& b) noexcept {
    return a.y != b.y ? a.y < b.y : a.x < b.x;
  }
};

}  // namespace clothkit
