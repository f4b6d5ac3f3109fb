#include "birl/array.hpp"

#include <cmath>
#include <numeric>

namespace birl {

Array::Array(std::vector<size_t> s, double fill) : shape(std::move(s)) {
  if (shape.empty() || shape.size() > 2) fail("Array: rank must be 1 or 2");
  size_t n = 1;
  for (size_t d : shape) {
    if (d == 0) fail("Array: zero dimension");
    n *= d;
  }
  data.assign(n, fill);
}

Array Array::scalar(double v) {
  Array a({1});
  a.data[0] = v;
  return a;
}

Array Array::vec(std::vector<double> v) {
  Array a;
  a.shape = {v.size()};
  a.data = std::move(v);
  if (a.data.empty()) fail("Array::vec: empty");
  return a;
}

Array Array::matrix(size_t r, size_t c, double fill) { return Array({r, c}, fill); }

size_t Array::rows() const {
  if (rank() != 2) fail("Array::rows: not rank-2 (" + shape_str() + ")");
  return shape[0];
}

size_t Array::cols() const {
  if (rank() != 2) fail("Array::cols: not rank-2 (" + shape_str() + ")");
  return shape[1];
}

double& Array::at(size_t r, size_t c) { return data[r * shape[1] + c]; }
double Array::at(size_t r, size_t c) const { return data[r * shape[1] + c]; }

bool Array::all_finite() const {
  for (double v : data)
    if (!std::isfinite(v)) return false;
  return true;
}

std::string Array::shape_str() const {
  std::string s;
  for (size_t i = 0; i < shape.size(); ++i) {
    if (i) s += "x";
    s += std::to_string(shape[i]);
  }
  return s;
}

}  // namespace birl
