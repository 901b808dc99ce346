#pragma once

#include <cstddef>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "irst/errors.hpp"

namespace irst {

using Shape = std::vector<int>;

inline long shape_numel(const Shape& s) {
  long n = 1;
  for (int d : s) n *= d;
  return n;
}

inline std::string shape_str(const Shape& s) {
  std::ostringstream os;
  os << "(";
  for (size_t i = 0; i < s.size(); ++i) os << (i ? "," : "") << s[i];
  os << ")";
  return os.str();
}

// Dense row-major n-d array of doubles.
struct NdArray {
  Shape shape;
  std::vector<double> data;

  NdArray() = default;
  explicit NdArray(Shape s, double fill = 0.0)
      : shape(std::move(s)), data(static_cast<size_t>(shape_numel(shape)), fill) {}
  NdArray(Shape s, std::vector<double> d) : shape(std::move(s)), data(std::move(d)) {
    if (static_cast<long>(data.size()) != shape_numel(shape))
      throw ShapeError("NdArray: data size does not match shape " + shape_str(shape));
  }

  long numel() const { return static_cast<long>(data.size()); }
  double& operator[](size_t i) { return data[i]; }
  double operator[](size_t i) const { return data[i]; }
};

}  // namespace irst
