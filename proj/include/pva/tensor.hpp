#pragma once

#include <cassert>
#include <cstdint>
#include <initializer_list>
#include <numeric>
#include <vector>

#include "pva/util.hpp"

namespace pva::nn {

// Dense row-major tensor. Images are stored CHW (or NCHW with a batch dim).
template <class T>
struct TensorT {
  std::vector<int64_t> shape;
  std::vector<T> data;

  TensorT() = default;
  explicit TensorT(std::vector<int64_t> s) : shape(std::move(s)), data(size_t(count(shape)), T(0)) {}
  TensorT(std::vector<int64_t> s, std::vector<T> d) : shape(std::move(s)), data(std::move(d)) {
    assert(int64_t(data.size()) == count(shape));
  }

  static int64_t count(const std::vector<int64_t>& s) {
    int64_t n = 1;
    for (int64_t d : s) n *= d;
    return n;
  }

  int64_t numel() const { return int64_t(data.size()); }
  int64_t dim(size_t i) const { return shape.at(i); }
  size_t ndim() const { return shape.size(); }

  T* ptr() { return data.data(); }
  const T* ptr() const { return data.data(); }

  T& at(int64_t i) { return data[size_t(i)]; }
  const T& at(int64_t i) const { return data[size_t(i)]; }
  // 2-D access
  T& at(int64_t r, int64_t c) { return data[size_t(r * shape[1] + c)]; }
  const T& at(int64_t r, int64_t c) const { return data[size_t(r * shape[1] + c)]; }

  void fill(T v) { std::fill(data.begin(), data.end(), v); }

  static TensorT zeros(std::vector<int64_t> s) { return TensorT(std::move(s)); }
  static TensorT full(std::vector<int64_t> s, T v) {
    TensorT t(std::move(s));
    t.fill(v);
    return t;
  }
  static TensorT scalar(T v) { return TensorT({1}, {v}); }

  static TensorT randn(std::vector<int64_t> s, Rng& rng, T std_dev = T(1), T mean = T(0)) {
    TensorT t(std::move(s));
    for (auto& v : t.data) v = T(rng.normal()) * std_dev + mean;
    return t;
  }

  bool same_shape(const TensorT& o) const { return shape == o.shape; }

  bool all_finite() const {
    for (T v : data)
      if (!std::isfinite(double(v))) return false;
    return true;
  }

  uint64_t checksum() const {
    uint64_t h = fnv1a64(shape.data(), shape.size() * sizeof(int64_t));
    return fnv1a64(data.data(), data.size() * sizeof(T), h);
  }

  template <class U>
  TensorT<U> cast() const {
    TensorT<U> out;
    out.shape = shape;
    out.data.resize(data.size());
    for (size_t i = 0; i < data.size(); ++i) out.data[i] = U(data[i]);
    return out;
  }
};

using Tensor = TensorT<float>;
using TensorD = TensorT<double>;

}  // namespace pva::nn
