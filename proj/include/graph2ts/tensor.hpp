#pragma once

#include <bit>
#include <cstdint>
#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace graph2ts {

/// Dense row-major matrix of doubles.
struct Tensor2 {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Tensor2() = default;
  Tensor2(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), data(r * c, fill) {}
  Tensor2(std::size_t r, std::size_t c, std::vector<double> values) : rows(r), cols(c), data(std::move(values)) {
    if (data.size() != r * c) throw std::invalid_argument("Tensor2: data length does not match shape");
  }

  static Tensor2 from_rows(std::initializer_list<std::initializer_list<double>> rs) {
    Tensor2 t;
    t.rows = rs.size();
    t.cols = rs.size() ? rs.begin()->size() : 0;
    for (const auto& r : rs) {
      if (r.size() != t.cols) throw std::invalid_argument("Tensor2::from_rows: ragged rows");
      t.data.insert(t.data.end(), r.begin(), r.end());
    }
    return t;
  }

  static Tensor2 scalar(double v) { return Tensor2(1, 1, v); }

  double& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
  std::span<double> row(std::size_t r) { return {data.data() + r * cols, cols}; }
  std::span<const double> row(std::size_t r) const { return {data.data() + r * cols, cols}; }
  std::size_t size() const { return data.size(); }
  double item() const {
    if (data.size() != 1) throw std::logic_error("Tensor2::item: not a scalar");
    return data[0];
  }
  bool same_shape(const Tensor2& o) const { return rows == o.rows && cols == o.cols; }
  bool operator==(const Tensor2&) const = default;
};

inline std::string shape_str(const Tensor2& t) {
  return std::to_string(t.rows) + "x" + std::to_string(t.cols);
}

// Adding one to an all-ones exponent carries into the sign bit; no other exponent does.
inline bool all_finite(const Tensor2& t) {
  constexpr std::uint64_t kExp = 0x7ff0000000000000ULL;
  constexpr std::uint64_t kOne = 0x0010000000000000ULL;
  constexpr std::uint64_t kTop = 0x8000000000000000ULL;
  std::uint64_t acc = 0;
  for (double v : t.data) acc |= ((std::bit_cast<std::uint64_t>(v) & kExp) + kOne) & kTop;
  return acc == 0;
}

namespace kernel {

// C (+)= A·B,  A: m×k, B: k×n. Each row of B is streamed once for all rows of A;
// every C entry still accumulates over p in increasing order.
inline void gemm_nn(const Tensor2& a, const Tensor2& b, Tensor2& c) {
  const std::size_t n = b.cols;
  for (std::size_t p = 0; p < a.cols; ++p) {
    const double* bp = b.data.data() + p * n;
    for (std::size_t i = 0; i < a.rows; ++i) {
      const double s = a.data[i * a.cols + p];
      if (s == 0.0) continue;
      double* ci = c.data.data() + i * n;
      for (std::size_t j = 0; j < n; ++j) ci[j] += s * bp[j];
    }
  }
}

// C (+)= A·Bᵀ,  A: m×k, B: n×k
inline void gemm_nt(const Tensor2& a, const Tensor2& b, Tensor2& c) {
  const std::size_t k = a.cols;
  for (std::size_t i = 0; i < a.rows; ++i) {
    const double* ai = a.data.data() + i * k;
    for (std::size_t j = 0; j < b.rows; ++j) {
      const double* bj = b.data.data() + j * k;
      double s = 0.0;
      for (std::size_t p = 0; p < k; ++p) s += ai[p] * bj[p];
      c.data[i * c.cols + j] += s;
    }
  }
}

// C (+)= Aᵀ·B,  A: k×m, B: k×n
inline void gemm_tn(const Tensor2& a, const Tensor2& b, Tensor2& c) {
  const std::size_t n = b.cols;
  for (std::size_t p = 0; p < a.rows; ++p) {
    const double* ap = a.data.data() + p * a.cols;
    const double* bp = b.data.data() + p * n;
    for (std::size_t i = 0; i < a.cols; ++i) {
      const double s = ap[i];
      if (s == 0.0) continue;
      double* ci = c.data.data() + i * n;
      for (std::size_t j = 0; j < n; ++j) ci[j] += s * bp[j];
    }
  }
}

}  // namespace kernel
}  // namespace graph2ts
