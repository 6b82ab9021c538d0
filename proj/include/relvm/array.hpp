#pragma once

#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <numeric>
#include <string>
#include <vector>

#include "relvm/errors.hpp"

namespace relvm {

// Dense row-major tensor of doubles. Element count always equals the product
// of the shape.
struct Array {
  std::vector<std::size_t> shape;
  std::vector<double> v;

  Array() = default;

  explicit Array(std::vector<std::size_t> s) : shape(std::move(s)) {
    v.assign(count(shape), 0.0);
  }

  Array(std::vector<std::size_t> s, std::vector<double> values)
      : shape(std::move(s)), v(std::move(values)) {
    require_input(v.size() == count(shape), "Array: values do not match shape");
  }

  static Array of(std::initializer_list<double> values) {
    Array a;
    a.shape = {values.size()};
    a.v.assign(values.begin(), values.end());
    return a;
  }

  static std::size_t count(const std::vector<std::size_t>& s) {
    std::size_t n = 1;
    for (auto d : s) n *= d;
    return n;
  }

  static Array zeros(std::size_t n) { return Array({n}); }
  static Array zeros(std::size_t r, std::size_t c) { return Array({r, c}); }

  std::size_t size() const { return v.size(); }
  std::size_t rows() const { return shape.size() == 2 ? shape[0] : shape[0]; }
  std::size_t cols() const { return shape.size() == 2 ? shape[1] : 1; }

  double& operator[](std::size_t i) { return v[i]; }
  double operator[](std::size_t i) const { return v[i]; }

  // Row-major matrix access.
  double& at(std::size_t r, std::size_t c) { return v[r * shape[1] + c]; }
  double at(std::size_t r, std::size_t c) const { return v[r * shape[1] + c]; }

  double* data() { return v.data(); }
  const double* data() const { return v.data(); }

  void fill(double x) { std::fill(v.begin(), v.end(), x); }

  bool all_finite() const {
    for (double x : v)
      if (!std::isfinite(x)) return false;
    return true;
  }
};

inline std::string shape_str(const Array& a) {
  std::string s = "(";
  for (std::size_t i = 0; i < a.shape.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(a.shape[i]);
  }
  return s + ")";
}

inline bool same_shape(const Array& a, const Array& b) {
  return a.shape == b.shape;
}

inline double dot(const Array& a, const Array& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a.v[i] * b.v[i];
  return s;
}

inline void axpy(double alpha, const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

// y = W x, W row-major (rows x cols).
inline void matvec(const Array& W, const double* x, double* y) {
  const std::size_t r = W.shape[0], c = W.shape[1];
  const double* w = W.data();
  for (std::size_t i = 0; i < r; ++i) {
    double s = 0.0;
    const double* wr = w + i * c;
    for (std::size_t j = 0; j < c; ++j) s += wr[j] * x[j];
    y[i] = s;
  }
}

// dx += W^T dy
inline void matvec_t_acc(const Array& W, const double* dy, double* dx) {
  const std::size_t r = W.shape[0], c = W.shape[1];
  const double* w = W.data();
  for (std::size_t i = 0; i < r; ++i) axpy(dy[i], w + i * c, dx, c);
}

// dW += dy x^T
inline void outer_acc(const double* dy, const double* x, Array& dW) {
  const std::size_t r = dW.shape[0], c = dW.shape[1];
  double* w = dW.data();
  for (std::size_t i = 0; i < r; ++i) axpy(dy[i], x, w + i * c, c);
}

inline double l2_norm(const Array& a) { return std::sqrt(dot(a, a)); }

}  // namespace relvm
