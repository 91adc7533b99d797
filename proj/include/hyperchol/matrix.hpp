#pragma once

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "hyperchol/errors.hpp"

namespace hyperchol {

/// Element precision. The numeric values are the CWM1 precision byte.
enum class precision : std::uint8_t { f32 = 0, f64 = 1 };

template <class T>
concept element = std::same_as<T, float> || std::same_as<T, double>;

template <element T>
inline constexpr precision precision_of =
    std::same_as<T, float> ? precision::f32 : precision::f64;

inline constexpr std::size_t element_size(precision p) {
  return p == precision::f32 ? sizeof(float) : sizeof(double);
}

inline std::string_view to_string(precision p) {
  return p == precision::f32 ? "f32" : "f64";
}

inline precision parse_precision(std::string_view s) {
  if (s == "f32" || s == "single") return precision::f32;
  if (s == "f64" || s == "double") return precision::f64;
  throw std::invalid_argument("unknown precision '" + std::string(s) + "'");
}

/// Offset of (i, j), j >= i, in a packed row-major upper triangle of order n.
constexpr std::size_t packed_offset(std::size_t n, std::size_t i,
                                    std::size_t j) noexcept {
  return i * n - (i * (i - 1)) / 2 + (j - i);
}

constexpr std::size_t packed_size(std::size_t n) noexcept {
  return n * (n + 1) / 2;
}

/// Dense row-major matrix.
template <element T>
class DenseMat {
 public:
  using value_type = T;

  DenseMat() = default;
  DenseMat(std::size_t rows, std::size_t cols)
      : rows_(rows), cols_(cols), data_(rows * cols, T{0}) {}
  DenseMat(std::size_t rows, std::size_t cols, std::vector<T> data)
      : rows_(rows), cols_(cols), data_(std::move(data)) {
    if (data_.size() != rows_ * cols_) {
      throw dimension_error("dense matrix buffer has " +
                            std::to_string(data_.size()) + " elements, expected " +
                            std::to_string(rows_ * cols_));
    }
  }

  static DenseMat identity(std::size_t n) {
    DenseMat m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = T{1};
    return m;
  }

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  T& operator()(std::size_t i, std::size_t j) noexcept {
    return data_[i * cols_ + j];
  }
  const T& operator()(std::size_t i, std::size_t j) const noexcept {
    return data_[i * cols_ + j];
  }
  std::span<T> data() noexcept { return data_; }
  std::span<const T> data() const noexcept { return data_; }

  friend bool operator==(const DenseMat&, const DenseMat&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<T> data_;
};

/// Upper-triangular Cholesky factor L with A = L^T L, stored packed by rows:
/// row i holds columns i..n-1.
template <element T>
class TriFactor {
 public:
  using value_type = T;

  TriFactor() = default;

  /// Identity factor of order n.
  explicit TriFactor(std::size_t n) : n_(n), data_(packed_size(n), T{0}) {
    for (std::size_t i = 0; i < n; ++i) (*this)(i, i) = T{1};
  }

  /// Throws dimension_error on a wrong buffer length and non_positive_pivot
  /// when a diagonal entry is not strictly positive.
  TriFactor(std::size_t n, std::vector<T> packed)
      : n_(n), data_(std::move(packed)) {
    if (data_.size() != packed_size(n_)) {
      throw dimension_error("packed factor of order " + std::to_string(n_) +
                            " needs " + std::to_string(packed_size(n_)) +
                            " elements, got " + std::to_string(data_.size()));
    }
    for (std::size_t i = 0; i < n_; ++i) {
      if (!((*this)(i, i) > T{0})) throw non_positive_pivot(i);
    }
  }

  std::size_t n() const noexcept { return n_; }

  T& operator()(std::size_t i, std::size_t j) noexcept {
    return data_[packed_offset(n_, i, j)];
  }
  const T& operator()(std::size_t i, std::size_t j) const noexcept {
    return data_[packed_offset(n_, i, j)];
  }

  /// Row i from the diagonal to the last column (length n - i).
  std::span<T> row(std::size_t i) noexcept {
    return std::span<T>(data_).subspan(packed_offset(n_, i, i), n_ - i);
  }
  std::span<const T> row(std::size_t i) const noexcept {
    return std::span<const T>(data_).subspan(packed_offset(n_, i, i), n_ - i);
  }

  std::span<T> data() noexcept { return data_; }
  std::span<const T> data() const noexcept { return data_; }

  /// Full n x n copy with zeros below the diagonal.
  DenseMat<T> unpack() const {
    DenseMat<T> out(n_, n_);
    for (std::size_t i = 0; i < n_; ++i)
      for (std::size_t j = i; j < n_; ++j) out(i, j) = (*this)(i, j);
    return out;
  }

  friend bool operator==(const TriFactor&, const TriFactor&) = default;

 private:
  std::size_t n_ = 0;
  std::vector<T> data_;
};

/// The n x k modification matrix V, column-major so each update vector is
/// contiguous.
template <element T>
class UpdateMat {
 public:
  using value_type = T;

  UpdateMat() = default;
  UpdateMat(std::size_t n, std::size_t k) : n_(n), k_(k), data_(n * k, T{0}) {
    check();
  }
  UpdateMat(std::size_t n, std::size_t k, std::vector<T> data)
      : n_(n), k_(k), data_(std::move(data)) {
    check();
  }

  std::size_t n() const noexcept { return n_; }
  std::size_t k() const noexcept { return k_; }

  T& operator()(std::size_t i, std::size_t e) noexcept {
    return data_[e * n_ + i];
  }
  const T& operator()(std::size_t i, std::size_t e) const noexcept {
    return data_[e * n_ + i];
  }

  std::span<T> column(std::size_t e) noexcept {
    return std::span<T>(data_).subspan(e * n_, n_);
  }
  std::span<const T> column(std::size_t e) const noexcept {
    return std::span<const T>(data_).subspan(e * n_, n_);
  }

  std::span<T> data() noexcept { return data_; }
  std::span<const T> data() const noexcept { return data_; }

  friend bool operator==(const UpdateMat&, const UpdateMat&) = default;

 private:
  void check() const {
    if (k_ == 0) throw dimension_error("update matrix needs at least one column");
    if (data_.size() != n_ * k_) {
      throw dimension_error("update matrix buffer has " +
                            std::to_string(data_.size()) +
                            " elements, expected " + std::to_string(n_ * k_));
    }
  }

  std::size_t n_ = 0;
  std::size_t k_ = 0;
  std::vector<T> data_;
};

/// C = L^T L. Each C_ij (i <= j) accumulates L_mi * L_mj over m = 0..i in
/// ascending order; the lower half is mirrored, so C is exactly symmetric.
template <element T>
DenseMat<T> tri_transpose_mul(const TriFactor<T>& L) {
  const std::size_t n = L.n();
  DenseMat<T> C(n, n);
  for (std::size_t m = 0; m < n; ++m) {
    const auto row = L.row(m);
    for (std::size_t i = m; i < n; ++i) {
      const T lmi = row[i - m];
      T* c = &C(i, 0);
      for (std::size_t j = i; j < n; ++j) c[j] += lmi * row[j - m];
    }
  }
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < i; ++j) C(i, j) = C(j, i);
  return C;
}

/// max_ij |a_ij - b_ij|, evaluated in T and widened to double.
template <element T>
double max_abs_diff(const DenseMat<T>& a, const DenseMat<T>& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw dimension_error("max_abs_diff: shape mismatch");
  double worst = 0.0;
  const auto x = a.data();
  const auto y = b.data();
  for (std::size_t i = 0; i < x.size(); ++i) {
    const T d = x[i] - y[i];
    worst = std::max(worst, static_cast<double>(std::fabs(d)));
  }
  return worst;
}

template <element T>
double max_abs_diff(const TriFactor<T>& a, const TriFactor<T>& b) {
  if (a.n() != b.n()) throw dimension_error("max_abs_diff: order mismatch");
  double worst = 0.0;
  const auto x = a.data();
  const auto y = b.data();
  for (std::size_t i = 0; i < x.size(); ++i) {
    const T d = x[i] - y[i];
    worst = std::max(worst, static_cast<double>(std::fabs(d)));
  }
  return worst;
}

}  // namespace hyperchol
