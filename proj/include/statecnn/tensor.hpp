#pragma once

#include <algorithm>
#include <array>
#include <cassert>
#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <limits>
#include <sstream>
#include <string>
#include <type_traits>
#include <vector>

#include "statecnn/common.hpp"

namespace statecnn {

// Rank 1..4 shape of positive extents, row-major layout throughout.
class Shape {
 public:
  Shape() = default;

  Shape(std::initializer_list<int64_t> dims) { init(dims.begin(), dims.end()); }

  explicit Shape(const std::vector<int64_t>& dims) {
    init(dims.begin(), dims.end());
  }

  int rank() const { return rank_; }

  int64_t operator[](int axis) const {
    assert(axis >= 0 && axis < rank_);
    return dims_[axis];
  }

  int64_t count() const {
    int64_t n = 1;
    for (int i = 0; i < rank_; ++i) n *= dims_[i];
    return n;
  }

  bool operator==(const Shape& other) const {
    if (rank_ != other.rank_) return false;
    for (int i = 0; i < rank_; ++i)
      if (dims_[i] != other.dims_[i]) return false;
    return true;
  }
  bool operator!=(const Shape& other) const { return !(*this == other); }

  std::string str() const {
    std::ostringstream os;
    os << '[';
    for (int i = 0; i < rank_; ++i) {
      if (i) os << ',';
      os << dims_[i];
    }
    os << ']';
    return os.str();
  }

 private:
  template <typename It>
  void init(It first, It last) {
    auto n = last - first;
    if (n < 1 || n > 4)
      fail(ErrorKind::shape, "shape rank must be 1..4, got " + std::to_string(n));
    rank_ = static_cast<int>(n);
    int64_t total = 1;
    for (int i = 0; i < rank_; ++i) {
      int64_t e = first[i];
      if (e < 1)
        fail(ErrorKind::shape, "shape extent must be >= 1, got " + std::to_string(e));
      if (total > std::numeric_limits<int64_t>::max() / e)
        fail(ErrorKind::shape, "shape element count overflows");
      total *= e;
      dims_[i] = e;
    }
  }

  std::array<int64_t, 4> dims_{};
  int rank_ = 0;
};

// Dense row-major numeric array. T is float (training) or double
// (gradient-check suites).
template <typename T>
class Tensor {
  static_assert(std::is_same_v<T, float> || std::is_same_v<T, double>);

 public:
  Shape shape;
  std::vector<T> data;

  Tensor() = default;

  explicit Tensor(const Shape& s) : shape(s), data(s.count(), T(0)) {}

  Tensor(const Shape& s, std::vector<T> values) : shape(s), data(std::move(values)) {
    if (static_cast<int64_t>(data.size()) != shape.count())
      fail(ErrorKind::shape, "data length " + std::to_string(data.size()) +
                                 " does not match shape " + shape.str());
  }

  static Tensor full(const Shape& s, T value) {
    Tensor t(s);
    std::fill(t.data.begin(), t.data.end(), value);
    return t;
  }

  static Tensor zeros(const Shape& s) { return Tensor(s); }

  static Tensor uniform(const Shape& s, T lo, T hi, uint64_t seed) {
    Tensor t(s);
    Rng rng(seed);
    for (auto& v : t.data) v = static_cast<T>(uniform_draw(rng, lo, hi));
    return t;
  }

  static Tensor normal(const Shape& s, T mu, T sigma, uint64_t seed) {
    Tensor t(s);
    Rng rng(seed);
    for (auto& v : t.data) v = static_cast<T>(mu + sigma * normal_draw(rng));
    return t;
  }

  int64_t size() const { return static_cast<int64_t>(data.size()); }

  T& operator[](int64_t flat) {
    assert(flat >= 0 && flat < size());
    return data[flat];
  }
  T operator[](int64_t flat) const {
    assert(flat >= 0 && flat < size());
    return data[flat];
  }

  int64_t offset(int64_t i) const {
    assert(shape.rank() == 1);
    return i;
  }
  int64_t offset(int64_t i, int64_t j) const {
    assert(shape.rank() == 2);
    return i * shape[1] + j;
  }
  int64_t offset(int64_t i, int64_t j, int64_t k) const {
    assert(shape.rank() == 3);
    return (i * shape[1] + j) * shape[2] + k;
  }
  int64_t offset(int64_t i, int64_t j, int64_t k, int64_t l) const {
    assert(shape.rank() == 4);
    return ((i * shape[1] + j) * shape[2] + k) * shape[3] + l;
  }

  template <typename... Ix>
  T& at(Ix... ix) {
    return data[offset(ix...)];
  }
  template <typename... Ix>
  T at(Ix... ix) const {
    return data[offset(ix...)];
  }

  // Same element count, new rank/extents.
  Tensor reshaped(const Shape& s) const {
    if (s.count() != shape.count())
      fail(ErrorKind::shape,
           "reshape " + shape.str() + " -> " + s.str() + " changes element count");
    Tensor t = *this;
    t.shape = s;
    return t;
  }
};

inline bool finite_value(float v) { return std::isfinite(v); }
inline bool finite_value(double v) { return std::isfinite(v); }

template <typename T>
bool has_nonfinite(const Tensor<T>& t) {
  for (T v : t.data)
    if (!finite_value(v)) return true;
  return false;
}

enum class Ew { add, sub, mul, div };

// Elementwise op on identical shapes, or with b a rank-1 vector matching
// a's trailing (channel) extent, broadcast over all other axes.
template <typename T>
Tensor<T> elementwise(const Tensor<T>& a, const Tensor<T>& b, Ew op) {
  const int64_t channels = a.shape[a.shape.rank() - 1];
  bool channel_broadcast = b.shape.rank() == 1 && b.shape[0] == channels &&
                           a.shape != b.shape;
  if (a.shape != b.shape && !channel_broadcast)
    fail(ErrorKind::shape, "elementwise shapes incompatible: " + a.shape.str() +
                               " vs " + b.shape.str());
  Tensor<T> out(a.shape);
  const int64_t n = a.size();
  for (int64_t i = 0; i < n; ++i) {
    T rhs = channel_broadcast ? b.data[i % channels] : b.data[i];
    T lhs = a.data[i];
    switch (op) {
      case Ew::add: out.data[i] = lhs + rhs; break;
      case Ew::sub: out.data[i] = lhs - rhs; break;
      case Ew::mul: out.data[i] = lhs * rhs; break;
      case Ew::div: out.data[i] = lhs / rhs; break;
    }
  }
  return out;
}

// c[m,n] = a[m,k] * b[k,n]
template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b) {
  if (a.shape.rank() != 2 || b.shape.rank() != 2)
    fail(ErrorKind::shape, "matmul needs rank-2 operands");
  const int64_t m = a.shape[0], k = a.shape[1];
  if (b.shape[0] != k)
    fail(ErrorKind::shape, "matmul inner extents differ: " + a.shape.str() +
                               " x " + b.shape.str());
  const int64_t n = b.shape[1];
  Tensor<T> c({m, n});
  for (int64_t i = 0; i < m; ++i) {
    T* crow = &c.data[i * n];
    for (int64_t t = 0; t < k; ++t) {
      const T av = a.data[i * k + t];
      if (av == T(0)) continue;
      const T* brow = &b.data[t * n];
      for (int64_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
  return c;
}

// c[k2,n] = a[m,k2]^T * b[m,n]   (contract over rows)
template <typename T>
Tensor<T> matmul_tn(const Tensor<T>& a, const Tensor<T>& b) {
  if (a.shape.rank() != 2 || b.shape.rank() != 2 || a.shape[0] != b.shape[0])
    fail(ErrorKind::shape, "matmul_tn shapes incompatible");
  const int64_t m = a.shape[0], k = a.shape[1], n = b.shape[1];
  Tensor<T> c({k, n});
  for (int64_t i = 0; i < m; ++i) {
    const T* arow = &a.data[i * k];
    const T* brow = &b.data[i * n];
    for (int64_t t = 0; t < k; ++t) {
      const T av = arow[t];
      if (av == T(0)) continue;
      T* crow = &c.data[t * n];
      for (int64_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
  return c;
}

// c[m,k2] = a[m,n] * b[k2,n]^T   (contract over columns)
template <typename T>
Tensor<T> matmul_nt(const Tensor<T>& a, const Tensor<T>& b) {
  if (a.shape.rank() != 2 || b.shape.rank() != 2 || a.shape[1] != b.shape[1])
    fail(ErrorKind::shape, "matmul_nt shapes incompatible");
  const int64_t m = a.shape[0], n = a.shape[1], k = b.shape[0];
  Tensor<T> c({m, k});
  for (int64_t i = 0; i < m; ++i) {
    const T* arow = &a.data[i * n];
    for (int64_t t = 0; t < k; ++t) {
      const T* brow = &b.data[t * n];
      T acc = 0;
      for (int64_t j = 0; j < n; ++j) acc += arow[j] * brow[j];
      c.data[i * k + t] = acc;
    }
  }
  return c;
}

enum class Stat { sum, mean, variance, max };

// Reduce over the given axes; reduced axes are removed from the shape.
// Reducing every axis yields shape [1]. Variance is the population
// variance (divide by count).
template <typename T>
Tensor<T> reduce(const Tensor<T>& a, std::vector<int> axes, Stat stat) {
  const int rank = a.shape.rank();
  std::array<bool, 4> reduced{};
  for (int ax : axes) {
    if (ax < 0 || ax >= rank)
      fail(ErrorKind::shape,
           "reduce axis " + std::to_string(ax) + " out of range for " + a.shape.str());
    reduced[ax] = true;
  }
  std::vector<int64_t> out_dims;
  int64_t reduce_count = 1;
  for (int i = 0; i < rank; ++i) {
    if (reduced[i])
      reduce_count *= a.shape[i];
    else
      out_dims.push_back(a.shape[i]);
  }
  if (out_dims.empty()) out_dims.push_back(1);
  Shape out_shape(out_dims);

  // Map each input element to its output offset by walking multi-indices.
  std::array<int64_t, 4> idx{};
  auto out_offset = [&]() {
    int64_t off = 0;
    for (int i = 0; i < rank; ++i) {
      if (reduced[i]) continue;
      off = off * a.shape[i] + idx[i];
    }
    return off;
  };

  Tensor<T> acc(out_shape);
  if (stat == Stat::max)
    std::fill(acc.data.begin(), acc.data.end(),
              -std::numeric_limits<T>::infinity());

  Tensor<T> mean_acc(out_shape);  // used by variance only
  auto walk = [&](auto&& body) {
    std::fill(idx.begin(), idx.end(), 0);
    for (int64_t flat = 0; flat < a.size(); ++flat) {
      body(flat);
      for (int i = rank - 1; i >= 0; --i) {
        if (++idx[i] < a.shape[i]) break;
        idx[i] = 0;
      }
    }
  };

  if (stat == Stat::variance) {
    walk([&](int64_t flat) { mean_acc.data[out_offset()] += a.data[flat]; });
    for (auto& v : mean_acc.data) v /= static_cast<T>(reduce_count);
    walk([&](int64_t flat) {
      T d = a.data[flat] - mean_acc.data[out_offset()];
      acc.data[out_offset()] += d * d;
    });
    for (auto& v : acc.data) v /= static_cast<T>(reduce_count);
    return acc;
  }

  walk([&](int64_t flat) {
    T v = a.data[flat];
    T& slot = acc.data[out_offset()];
    if (stat == Stat::max)
      slot = std::max(slot, v);
    else
      slot += v;
  });
  if (stat == Stat::mean)
    for (auto& v : acc.data) v /= static_cast<T>(reduce_count);
  return acc;
}

// Smallest index attaining the maximum of a rank-1 tensor.
template <typename T>
int64_t argmax(const Tensor<T>& a) {
  if (a.shape.rank() != 1)
    fail(ErrorKind::shape, "argmax needs a rank-1 tensor");
  int64_t best = 0;
  for (int64_t i = 1; i < a.size(); ++i)
    if (a.data[i] > a.data[best]) best = i;
  return best;
}

enum class Padding { same, valid };

// Output-position grid of a sliding window over one [H,W] plane.
// same: zero-pads so out = ceil(in/stride), extra row/column on the
// bottom/right when the total padding is odd. valid: out =
// floor((in-k)/stride)+1. Patch origin for output (oy,ox) is
// (oy*stride_h - pad_top, ox*stride_w - pad_left) in input coordinates.
struct WindowGrid {
  int64_t in_h = 0, in_w = 0;
  int64_t kh = 0, kw = 0;
  int64_t stride_h = 0, stride_w = 0;
  int64_t out_h = 0, out_w = 0;
  int64_t pad_top = 0, pad_left = 0;

  int64_t origin_y(int64_t oy) const { return oy * stride_h - pad_top; }
  int64_t origin_x(int64_t ox) const { return ox * stride_w - pad_left; }
};

inline WindowGrid make_window_grid(int64_t in_h, int64_t in_w, int64_t kh,
                                   int64_t kw, int64_t stride_h,
                                   int64_t stride_w, Padding padding) {
  if (kh < 1 || kw < 1 || stride_h < 1 || stride_w < 1)
    fail(ErrorKind::shape, "window kernel and stride extents must be >= 1");
  WindowGrid g;
  g.in_h = in_h;
  g.in_w = in_w;
  g.kh = kh;
  g.kw = kw;
  g.stride_h = stride_h;
  g.stride_w = stride_w;
  if (padding == Padding::same) {
    g.out_h = (in_h + stride_h - 1) / stride_h;
    g.out_w = (in_w + stride_w - 1) / stride_w;
    int64_t pad_h = std::max<int64_t>(0, (g.out_h - 1) * stride_h + kh - in_h);
    int64_t pad_w = std::max<int64_t>(0, (g.out_w - 1) * stride_w + kw - in_w);
    g.pad_top = pad_h / 2;
    g.pad_left = pad_w / 2;
  } else {
    if (kh > in_h || kw > in_w)
      fail(ErrorKind::shape, "window kernel " + std::to_string(kh) + "x" +
                                 std::to_string(kw) + " larger than input " +
                                 std::to_string(in_h) + "x" + std::to_string(in_w));
    g.out_h = (in_h - kh) / stride_h + 1;
    g.out_w = (in_w - kw) / stride_w + 1;
  }
  return g;
}

}  // namespace statecnn
