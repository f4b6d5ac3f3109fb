#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "birl/common.hpp"

namespace birl {

// Dense row-major array of doubles, rank 1 or 2. Scalars are shape {1}.
struct Array {
  std::vector<size_t> shape;
  std::vector<double> data;

  Array() = default;
  explicit Array(std::vector<size_t> s, double fill = 0.0);

  static Array scalar(double v);
  static Array vec(std::vector<double> v);
  static Array matrix(size_t r, size_t c, double fill = 0.0);

  size_t size() const { return data.size(); }
  size_t rank() const { return shape.size(); }
  size_t rows() const;
  size_t cols() const;
  double& at(size_t r, size_t c);
  double at(size_t r, size_t c) const;
  bool same_shape(const Array& o) const { return shape == o.shape; }
  bool all_finite() const;
  std::string shape_str() const;
};

}  // namespace birl
