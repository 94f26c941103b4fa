#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include <Eigen/Core>

#include "kinema/error.hpp"

namespace kinema {

/// Row-major H x W grid. Pixel (row, col) covers [col, col+1) x [row, row+1)
/// in image coordinates; its center is (col + 0.5, row + 0.5).
/// Zero for Eigen fixed-size types (whose default constructor leaves storage
/// uninitialized), value-initialized otherwise.
template <typename T>
T zero_value() {
  if constexpr (requires { T::Zero(); }) {
    return T::Zero();
  } else {
    return T{};
  }
}

template <typename T>
class Grid {
 public:
  Grid() = default;
  Grid(int rows, int cols, const T& fill = zero_value<T>())
      : rows_(rows), cols_(cols), data_(static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols), fill) {
    if (rows < 0 || cols < 0) throw Error(Errc::InvalidArgument, "negative grid dimensions");
  }

  int rows() const { return rows_; }
  int cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }

  T& operator()(int row, int col) { return data_[index(row, col)]; }
  const T& operator()(int row, int col) const { return data_[index(row, col)]; }
  T& operator[](std::size_t i) { return data_[i]; }
  const T& operator[](std::size_t i) const { return data_[i]; }

  std::vector<T>& values() { return data_; }
  const std::vector<T>& values() const { return data_; }

  bool same_shape(int rows, int cols) const { return rows_ == rows && cols_ == cols; }

  bool operator==(const Grid& other) const {
    return rows_ == other.rows_ && cols_ == other.cols_ && data_ == other.data_;
  }

 private:
  std::size_t index(int row, int col) const {
    return static_cast<std::size_t>(row) * static_cast<std::size_t>(cols_) + static_cast<std::size_t>(col);
  }

  int rows_ = 0;
  int cols_ = 0;
  std::vector<T> data_;
};

using Rgb = Eigen::Vector3f;
using RgbFrame = Grid<Rgb>;
using RgbSequence = std::vector<RgbFrame>;
using OccupancyGrid = Grid<std::uint8_t>;
using MaskFrame = Grid<float>;

/// Camera-space coordinates per pixel plus validity. Invalid pixels hold (0,0,0).
template <typename Scalar>
struct PointMap {
  using Point = Eigen::Matrix<Scalar, 3, 1>;

  Grid<Point> coords;
  Grid<std::uint8_t> valid;

  PointMap() = default;
  PointMap(int height, int width) : coords(height, width, Point::Zero()), valid(height, width, 0) {}

  int height() const { return coords.rows(); }
  int width() const { return coords.cols(); }

  std::size_t valid_count() const {
    std::size_t n = 0;
    for (auto v : valid.values()) n += v != 0;
    return n;
  }

  void invalidate(std::size_t i) {
    valid[i] = 0;
    coords[i] = Point::Zero();
  }
};

using PointMapFrame = PointMap<float>;
template <typename Scalar>
using BasicPointMapSequence = std::vector<PointMap<Scalar>>;
using PointMapSequence = BasicPointMapSequence<float>;

template <typename Scalar>
struct DepthMap {
  Grid<Scalar> depth;
  Grid<std::uint8_t> valid;
};
using DepthFrame = DepthMap<float>;

template <typename Scalar>
DepthMap<Scalar> depth_from_pointmap(const PointMap<Scalar>& frame) {
  DepthMap<Scalar> out{Grid<Scalar>(frame.height(), frame.width(), Scalar(0)), frame.valid};
  for (std::size_t i = 0; i < frame.coords.size(); ++i) {
    if (frame.valid[i]) out.depth[i] = frame.coords[i].z();
  }
  return out;
}

template <typename Scalar>
void check_uniform_shape(const BasicPointMapSequence<Scalar>& seq) {
  for (const auto& f : seq) {
    if (f.height() != seq.front().height() || f.width() != seq.front().width()) {
      throw Error(Errc::ShapeMismatch, "pointmap frames differ in size");
    }
  }
}

}  // namespace kinema
