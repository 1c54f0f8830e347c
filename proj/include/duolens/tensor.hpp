#pragma once

#include <atomic>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstring>
#include <limits>
#include <memory>
#include <numeric>
#include <span>
#include <sstream>
#include <string>
#include <type_traits>
#include <vector>

#include "duolens/errors.hpp"

namespace duolens {

// Tracks live and peak bytes of every tensor buffer in the process. The peak
// is the engine's portable stand-in for device memory high-water marks.
class AllocationMeter {
 public:
  void acquire(std::uint64_t bytes) noexcept {
    const std::uint64_t now = live_.fetch_add(bytes, std::memory_order_relaxed) + bytes;
    std::uint64_t peak = peak_.load(std::memory_order_relaxed);
    while (now > peak && !peak_.compare_exchange_weak(peak, now, std::memory_order_relaxed)) {
    }
  }

  void release(std::uint64_t bytes) noexcept { live_.fetch_sub(bytes, std::memory_order_relaxed); }

  std::uint64_t live_bytes() const noexcept { return live_.load(std::memory_order_relaxed); }
  std::uint64_t peak_bytes() const noexcept { return peak_.load(std::memory_order_relaxed); }

  // Starts a new measurement window: the peak collapses to the current live total.
  void reset_peak() noexcept { peak_.store(live_.load(std::memory_order_relaxed), std::memory_order_relaxed); }

 private:
  std::atomic<std::uint64_t> live_{0};
  std::atomic<std::uint64_t> peak_{0};
};

inline AllocationMeter& allocation_meter() {
  static AllocationMeter meter;
  return meter;
}

template <class T>
struct MeteredAllocator {
  using value_type = T;

  MeteredAllocator() noexcept = default;
  template <class U>
  MeteredAllocator(const MeteredAllocator<U>&) noexcept {}

  T* allocate(std::size_t n) {
    T* p = std::allocator<T>{}.allocate(n);
    allocation_meter().acquire(n * sizeof(T));
    return p;
  }

  void deallocate(T* p, std::size_t n) noexcept {
    std::allocator<T>{}.deallocate(p, n);
    allocation_meter().release(n * sizeof(T));
  }

  template <class U>
  bool operator==(const MeteredAllocator<U>&) const noexcept {
    return true;
  }
};

// Dense row-major f32 tensor. Every dimension is >= 1; a default-constructed
// tensor is the empty placeholder with rank 0.
class Tensor {
 public:
  using Shape = std::vector<std::size_t>;
  using Buffer = std::vector<float, MeteredAllocator<float>>;

  Tensor() = default;

  explicit Tensor(Shape shape, float fill = 0.0f) : shape_(std::move(shape)) {
    data_.assign(checked_numel(shape_), fill);
  }

  Tensor(Shape shape, std::span<const float> values) : shape_(std::move(shape)) {
    const std::size_t n = checked_numel(shape_);
    if (values.size() != n) {
      throw ShapeError("tensor of shape " + shape_string(shape_) + " needs " + std::to_string(n) +
                       " values, got " + std::to_string(values.size()));
    }
    data_.assign(values.begin(), values.end());
  }

  Tensor(Shape shape, std::initializer_list<float> values)
      : Tensor(std::move(shape), std::span<const float>(values.begin(), values.size())) {}

  static Tensor scalar(float v) { return Tensor({1}, {v}); }

  const Shape& shape() const noexcept { return shape_; }
  std::size_t rank() const noexcept { return shape_.size(); }
  std::size_t dim(std::size_t i) const { return shape_.at(i); }
  std::size_t numel() const noexcept { return data_.size(); }
  std::size_t byte_len() const noexcept { return data_.size() * sizeof(float); }
  bool empty() const noexcept { return data_.empty(); }

  // Last dimension, and the product of all leading dimensions.
  std::size_t cols() const noexcept { return shape_.empty() ? 0 : shape_.back(); }
  std::size_t rows() const noexcept { return cols() == 0 ? 0 : numel() / cols(); }

  std::span<float> data() noexcept { return {data_.data(), data_.size()}; }
  std::span<const float> data() const noexcept { return {data_.data(), data_.size()}; }

  float& operator[](std::size_t i) noexcept { return data_[i]; }
  float operator[](std::size_t i) const noexcept { return data_[i]; }

  std::span<float> row(std::size_t r) noexcept { return data().subspan(r * cols(), cols()); }
  std::span<const float> row(std::size_t r) const noexcept { return data().subspan(r * cols(), cols()); }

  float& at(std::size_t r, std::size_t c) noexcept { return data_[r * cols() + c]; }
  float at(std::size_t r, std::size_t c) const noexcept { return data_[r * cols() + c]; }

  Tensor reshaped(Shape shape) const {
    if (checked_numel(shape) != numel()) {
      throw ShapeError("cannot reshape " + shape_string(shape_) + " to " + shape_string(shape));
    }
    Tensor out;
    out.shape_ = std::move(shape);
    out.data_ = data_;
    return out;
  }

  std::string shape_string() const { return shape_string(shape_); }

  static std::string shape_string(const Shape& s) {
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < s.size(); ++i) os << (i ? "x" : "") << s[i];
    os << ']';
    return os.str();
  }

  static std::size_t checked_numel(const Shape& s) {
    if (s.empty()) throw ShapeError("tensor shape must have rank >= 1");
    std::size_t n = 1;
    for (std::size_t d : s) {
      if (d == 0) throw ShapeError("tensor dimensions must be >= 1, got " + shape_string(s));
      n *= d;
    }
    return n;
  }

 private:
  Shape shape_;
  Buffer data_;
};

inline bool bitwise_equal(const Tensor& a, const Tensor& b) {
  return a.shape() == b.shape() &&
         std::memcmp(a.data().data(), b.data().data(), a.byte_len()) == 0;
}

namespace kernels {

// Reductions over f32 run in f64; wider types reduce in their own precision.
template <class T>
using Accum = std::conditional_t<std::is_same_v<T, float>, double, T>;

template <class T>
T dot(std::span<const T> a, std::span<const T> b) noexcept {
  T s0 = 0, s1 = 0, s2 = 0, s3 = 0;
  const std::size_t n = a.size();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    s0 += a[i] * b[i];
    s1 += a[i + 1] * b[i + 1];
    s2 += a[i + 2] * b[i + 2];
    s3 += a[i + 3] * b[i + 3];
  }
  for (; i < n; ++i) s0 += a[i] * b[i];
  return (s0 + s1) + (s2 + s3);
}

// Numerically stable softmax in place. NaN anywhere in the row yields a NaN row.
template <class T>
void softmax_inplace(std::span<T> row) noexcept {
  if (row.empty()) return;
  using A = Accum<T>;
  T mx = row[0];
  for (T v : row) mx = (v > mx) ? v : mx;
  A sum = 0;
  for (T v : row) sum += std::exp(static_cast<A>(v) - static_cast<A>(mx));
  for (T& v : row) v = static_cast<T>(std::exp(static_cast<A>(v) - static_cast<A>(mx)) / sum);
}

// Per-row (x - mean) / sqrt(var + eps) * gamma + beta with population variance.
template <class T>
void layer_norm_row(std::span<const T> x, std::span<const T> gamma, std::span<const T> beta, T eps,
                    std::span<T> out) noexcept {
  using A = Accum<T>;
  const std::size_t d = x.size();
  A mean = 0;
  for (T v : x) mean += v;
  mean /= static_cast<A>(d);
  A var = 0;
  for (T v : x) {
    const A c = static_cast<A>(v) - mean;
    var += c * c;
  }
  var /= static_cast<A>(d);
  const A inv = A(1) / std::sqrt(var + static_cast<A>(eps));
  for (std::size_t i = 0; i < d; ++i) {
    out[i] = static_cast<T>((static_cast<A>(x[i]) - mean) * inv * static_cast<A>(gamma[i]) +
                            static_cast<A>(beta[i]));
  }
}

// Exact-erf GELU.
template <class T>
T gelu(T x) noexcept {
  using A = Accum<T>;
  const A v = static_cast<A>(x);
  return static_cast<T>(A(0.5) * v * (A(1) + std::erf(v / std::sqrt(A(2)))));
}

template <class T>
T sigmoid(T z) noexcept {
  if (z >= 0) {
    return T(1) / (T(1) + std::exp(-z));
  }
  const T e = std::exp(z);
  return e / (T(1) + e);
}

// log(1 + exp(z)) without overflow.
template <class T>
T softplus(T z) noexcept {
  return z > 0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z));
}

}  // namespace kernels

// c = a * b for a [m x k], b [k x n].
inline Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(0)) {
    throw ShapeError("matmul shape mismatch: " + a.shape_string() + " x " + b.shape_string());
  }
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  Tensor c({m, n});
  for (std::size_t i = 0; i < m; ++i) {
    auto crow = c.row(i);
    for (std::size_t t = 0; t < k; ++t) {
      const float av = a.at(i, t);
      const auto brow = b.row(t);
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
  return c;
}

// y = x * W^T + bias for x [n x in], W [out x in], bias [out].
inline Tensor linear(const Tensor& x, const Tensor& w, const Tensor& bias) {
  if (w.rank() != 2 || x.cols() != w.dim(1) || bias.numel() != w.dim(0)) {
    throw ShapeError("linear shape mismatch: x " + x.shape_string() + ", W " + w.shape_string() +
                     ", b " + bias.shape_string());
  }
  const std::size_t n = x.rows(), out = w.dim(0);
  Tensor y({n, out});
  for (std::size_t i = 0; i < n; ++i) {
    const auto xr = x.row(i);
    auto yr = y.row(i);
    for (std::size_t o = 0; o < out; ++o) {
      yr[o] = kernels::dot<float>(xr, w.row(o)) + bias[o];
    }
  }
  return y;
}

inline Tensor softmax(const Tensor& x) {
  Tensor y = x;
  for (std::size_t r = 0; r < y.rows(); ++r) kernels::softmax_inplace<float>(y.row(r));
  return y;
}

inline Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, float eps) {
  if (gamma.numel() != x.cols() || beta.numel() != x.cols()) {
    throw ShapeError("layer_norm shape mismatch: x " + x.shape_string() + ", gamma " +
                     gamma.shape_string() + ", beta " + beta.shape_string());
  }
  Tensor y(x.shape());
  for (std::size_t r = 0; r < x.rows(); ++r) {
    kernels::layer_norm_row<float>(x.row(r), gamma.data(), beta.data(), eps, y.row(r));
  }
  return y;
}

inline Tensor gelu(const Tensor& x) {
  Tensor y = x;
  for (float& v : y.data()) v = kernels::gelu(v);
  return y;
}

inline Tensor add(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) {
    throw ShapeError("add shape mismatch: " + a.shape_string() + " + " + b.shape_string());
  }
  Tensor c = a;
  auto cd = c.data();
  auto bd = b.data();
  for (std::size_t i = 0; i < cd.size(); ++i) cd[i] += bd[i];
  return c;
}

}  // namespace duolens
