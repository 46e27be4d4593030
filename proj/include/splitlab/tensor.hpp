#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "splitlab/error.hpp"
#include "splitlab/rng.hpp"

namespace splitlab {

// Dense N-d array, row-major. Images are {C, H, W}; vectors are {n}.
template <typename T>
struct TensorT {
  std::vector<int> shape;
  std::vector<T> data;

  TensorT() = default;
  explicit TensorT(std::vector<int> s) : shape(std::move(s)), data(count(shape), T(0)) {}
  TensorT(std::vector<int> s, std::vector<T> d) : shape(std::move(s)), data(std::move(d)) {
    if (count(shape) != static_cast<int64_t>(data.size()))
      throw ShapeError("tensor data length does not match shape product");
  }

  static int64_t count(const std::vector<int>& s) {
    int64_t n = 1;
    for (int d : s) {
      if (d <= 0) throw ShapeError("non-positive dimension in tensor shape");
      n *= d;
    }
    return n;
  }

  static TensorT zeros(std::vector<int> s) { return TensorT(std::move(s)); }

  static TensorT full(std::vector<int> s, T v) {
    TensorT t(std::move(s));
    std::fill(t.data.begin(), t.data.end(), v);
    return t;
  }

  static TensorT random_normal(std::vector<int> s, Rng& rng, T stddev = T(1)) {
    TensorT t(std::move(s));
    for (auto& v : t.data) v = static_cast<T>(rng.normal() * stddev);
    return t;
  }

  static TensorT random_uniform(std::vector<int> s, Rng& rng, T lo = T(0), T hi = T(1)) {
    TensorT t(std::move(s));
    for (auto& v : t.data) v = static_cast<T>(rng.uniform(lo, hi));
    return t;
  }

  int64_t size() const { return static_cast<int64_t>(data.size()); }
  int dim(int i) const { return shape[static_cast<size_t>(i)]; }
  int ndim() const { return static_cast<int>(shape.size()); }

  T& operator[](int64_t i) { return data[static_cast<size_t>(i)]; }
  const T& operator[](int64_t i) const { return data[static_cast<size_t>(i)]; }

  // {C,H,W} access
  T& at(int c, int y, int x) {
    return data[(static_cast<size_t>(c) * shape[1] + y) * shape[2] + x];
  }
  const T& at(int c, int y, int x) const {
    return data[(static_cast<size_t>(c) * shape[1] + y) * shape[2] + x];
  }

  bool same_shape(const TensorT& o) const { return shape == o.shape; }

  bool all_finite() const {
    for (T v : data)
      if (!std::isfinite(static_cast<double>(v))) return false;
    return true;
  }

  // l1 reductions accumulate in double regardless of T
  double l1_norm() const {
    double s = 0;
    for (T v : data) s += std::abs(static_cast<double>(v));
    return s;
  }

  double l1_distance(const TensorT& o) const {
    double s = 0;
    for (size_t i = 0; i < data.size(); ++i)
      s += std::abs(static_cast<double>(data[i]) - static_cast<double>(o.data[i]));
    return s;
  }

  double l2_distance(const TensorT& o) const {
    double s = 0;
    for (size_t i = 0; i < data.size(); ++i) {
      double d = static_cast<double>(data[i]) - static_cast<double>(o.data[i]);
      s += d * d;
    }
    return std::sqrt(s);
  }

  std::string shape_str() const {
    std::ostringstream os;
    os << "[";
    for (size_t i = 0; i < shape.size(); ++i) os << (i ? "x" : "") << shape[i];
    os << "]";
    return os.str();
  }
};

using Tensor = TensorT<float>;
using Tensord = TensorT<double>;

template <typename T>
TensorT<T> flatten(const TensorT<T>& t) {
  return TensorT<T>({static_cast<int>(t.size())}, t.data);
}

template <typename A, typename B>
TensorT<B> cast_tensor(const TensorT<A>& t, B /*tag*/) {
  TensorT<B> out(t.shape);
  for (int64_t i = 0; i < t.size(); ++i) out[i] = static_cast<B>(t[i]);
  return out;
}

// Content hash over shape and raw data bytes; used to assert models are
// untouched by attacks.
template <typename T>
uint64_t tensor_checksum(const TensorT<T>& t) {
  uint64_t h = fnv1a64_bytes(t.shape.data(), t.shape.size() * sizeof(int));
  return fnv1a64_bytes(t.data.data(), t.data.size() * sizeof(T), h);
}

}  // namespace splitlab
