#pragma once

// Serial reference kernels for modifying an upper-triangular Cholesky factor
// L (A = L^T L) so that it factors A + sigma * V V^T.
//
// Each rank-1 step is a sequence of scaled ("hyperbolic") rotations:
//
//   Compute at row i:  w = sqrt(L_ii^2 + sigma V_i^2),  c = w / L_ii,
//                      s = V_i / L_ii,                  L_ii <- w
//   Apply to (i, j):   L_ij <- (L_ij + sigma s V_j) / c
//                      V_j  <- c V_j - s L_ij           (uses the new L_ij)
//
// Apply must use the freshly written L_ij. Expanding the two assignments gives
// V_j <- (L_ii V_j - V_i L_ij) / w, which is the residual that makes
// new_L^T new_L = L^T L + sigma v v^T; using the old L_ij does not.
//
// Two loop orders are provided. modify_b walks rows: Compute at i, then Apply
// along row i. modify_a walks columns: for column i, first apply the
// rotations of rows 0..i-1 to (L_ji, V_i), then Compute at i with the fully
// rotated V_i. Written this way both orders feed every scalar operation
// identical operands, so their results agree bit for bit as long as the
// compiler does not contract a*b+c into an FMA (the library target builds with
// -ffp-contract=off). Note that the textbook listing of the column order puts
// Compute before the inner loop; read literally that would use an unrotated
// V_i and produce a wrong factor.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "hyperchol/errors.hpp"
#include "hyperchol/matrix.hpp"

namespace hyperchol {

enum class sigma : int { update = 1, downdate = -1 };

inline std::string_view to_string(sigma s) {
  return s == sigma::update ? "update" : "downdate";
}

inline sigma parse_sigma(std::string_view s) {
  if (s == "update" || s == "+1" || s == "1") return sigma::update;
  if (s == "downdate" || s == "-1") return sigma::downdate;
  throw std::invalid_argument("unknown direction '" + std::string(s) + "'");
}

template <element T>
constexpr T sign_of(sigma s) noexcept {
  return s == sigma::update ? T{1} : T{-1};
}

/// Rotation coefficients, row-major n x width: entry (i, e) is the rotation
/// produced at row i by update column e.
template <element T>
struct RotCoeffs {
  std::size_t n = 0;
  std::size_t width = 0;
  std::vector<T> c;
  std::vector<T> s;

  RotCoeffs() = default;
  RotCoeffs(std::size_t rows, std::size_t cols)
      : n(rows), width(cols), c(rows * cols), s(rows * cols) {}

  T& c_at(std::size_t i, std::size_t e) noexcept { return c[i * width + e]; }
  T& s_at(std::size_t i, std::size_t e) noexcept { return s[i * width + e]; }
  const T& c_at(std::size_t i, std::size_t e) const noexcept {
    return c[i * width + e];
  }
  const T& s_at(std::size_t i, std::size_t e) const noexcept {
    return s[i * width + e];
  }

  friend bool operator==(const RotCoeffs&, const RotCoeffs&) = default;
};

/// Operation and element-transaction tallies. `computes` and `applies` are
/// schedule-independent (k*n and k*n(n-1)/2 for a rank-k modify). The element
/// reads/writes follow the memory-access pattern of the loop order that ran:
///   row order (modify_b, modify_rank_k, diagonal chunks):
///     Compute reads L_ii, V_i and writes L_ii, c, s;
///     Apply reads L_ij, V_j and writes L_ij, V_j.
///   column order (modify_a):
///     V_i is read once before and written once after its column;
///     Apply reads c_j, s_j, L_ji and writes L_ji;
///     Compute reads L_ii and writes L_ii, c, s.
///   panel rectangles: see panel.hpp.
struct OpCounts {
  std::uint64_t computes = 0;
  std::uint64_t applies = 0;
  std::uint64_t elem_reads = 0;
  std::uint64_t elem_writes = 0;

  OpCounts& operator+=(const OpCounts& o) noexcept {
    computes += o.computes;
    applies += o.applies;
    elem_reads += o.elem_reads;
    elem_writes += o.elem_writes;
    return *this;
  }
  friend bool operator==(const OpCounts&, const OpCounts&) = default;
};

template <element T>
struct Rotation {
  T c;
  T s;
  T w;
};

enum class compute_status { ok, non_positive_pivot, indefinite };

/// Non-throwing Compute; on failure `out` is left untouched.
template <element T>
inline compute_status try_rot_compute(T l_ii, T v_i, sigma sg,
                                      Rotation<T>& out) noexcept {
  if (!(l_ii > T{0})) return compute_status::non_positive_pivot;
  const T w2 = l_ii * l_ii + sign_of<T>(sg) * v_i * v_i;
  if (!(w2 > T{0})) return compute_status::indefinite;
  const T w = std::sqrt(w2);
  out = Rotation<T>{w / l_ii, v_i / l_ii, w};
  return compute_status::ok;
}

/// Throws non_positive_pivot / indefinite_downdate with the given indices.
template <element T>
inline Rotation<T> rot_compute(T l_ii, T v_i, sigma sg, std::size_t row = 0,
                               std::size_t column = 0) {
  Rotation<T> r{};
  switch (try_rot_compute(l_ii, v_i, sg, r)) {
    case compute_status::ok: return r;
    case compute_status::non_positive_pivot: throw non_positive_pivot(row);
    case compute_status::indefinite: throw indefinite_downdate(column, row);
  }
  return r;
}

/// Apply in place. Every schedule funnels through this one expression.
template <element T>
inline void apply_rotation(T c, T s, T sg, T& l_ij, T& v_j) noexcept {
  l_ij = (l_ij + sg * s * v_j) / c;
  v_j = c * v_j - s * l_ij;
}

template <element T>
struct ApplyResult {
  T l;
  T v;
};

template <element T>
inline ApplyResult<T> rot_apply(T c, T s, T l_ij, T v_j, sigma sg) noexcept {
  apply_rotation(c, s, sign_of<T>(sg), l_ij, v_j);
  return {l_ij, v_j};
}

namespace detail {

inline void require_length(std::size_t n, std::size_t len, const char* what) {
  if (n != len) {
    throw dimension_error(std::string(what) + ": vector has " +
                          std::to_string(len) + " rows, factor has " +
                          std::to_string(n));
  }
}

/// Row-order rank-1 modify writing coefficients to c_out[i * stride].
template <element T>
void modify_rows(TriFactor<T>& L, std::span<T> v, sigma sg, OpCounts& counts,
                 std::size_t column, T* c_out, T* s_out, std::size_t stride) {
  const std::size_t n = L.n();
  const T sgn = sign_of<T>(sg);
  for (std::size_t i = 0; i < n; ++i) {
    auto row = L.row(i);
    Rotation<T> r{};
    switch (try_rot_compute(row[0], v[i], sg, r)) {
      case compute_status::ok: break;
      case compute_status::non_positive_pivot: throw non_positive_pivot(i);
      case compute_status::indefinite: throw indefinite_downdate(column, i);
    }
    row[0] = r.w;
    c_out[i * stride] = r.c;
    s_out[i * stride] = r.s;
    for (std::size_t j = i + 1; j < n; ++j)
      apply_rotation(r.c, r.s, sgn, row[j - i], v[j]);
    const std::uint64_t tail = n - i - 1;
    counts.computes += 1;
    counts.applies += tail;
    counts.elem_reads += 2 + 2 * tail;
    counts.elem_writes += 3 + 2 * tail;
  }
}

}  // namespace detail

/// Rank-1 modify, column order. On indefinite_downdate at row i, columns < i
/// of L are final, the above-diagonal entries of column i have been rotated,
/// v[0..i] hold rotated values and columns > i are untouched.
template <element T>
RotCoeffs<T> modify_a(TriFactor<T>& L, std::span<T> v, sigma sg,
                      OpCounts& counts) {
  const std::size_t n = L.n();
  detail::require_length(n, v.size(), "modify_a");
  RotCoeffs<T> rc(n, 1);
  const T sgn = sign_of<T>(sg);
  for (std::size_t i = 0; i < n; ++i) {
    T v_i = v[i];
    for (std::size_t j = 0; j < i; ++j)
      apply_rotation(rc.c[j], rc.s[j], sgn, L(j, i), v_i);
    v[i] = v_i;
    counts.applies += i;
    counts.elem_reads += 1 + 3 * i;
    counts.elem_writes += 1 + i;
    Rotation<T> r{};
    switch (try_rot_compute(L(i, i), v_i, sg, r)) {
      case compute_status::ok: break;
      case compute_status::non_positive_pivot: throw non_positive_pivot(i);
      case compute_status::indefinite: throw indefinite_downdate(0, i);
    }
    L(i, i) = r.w;
    rc.c[i] = r.c;
    rc.s[i] = r.s;
    counts.computes += 1;
    counts.elem_reads += 1;
    counts.elem_writes += 3;
  }
  return rc;
}

/// Rank-1 modify, row order. On indefinite_downdate at row i, rows < i of L
/// are final, rows >= i are untouched, and v[j] for j > i has been rotated by
/// rows < i.
template <element T>
RotCoeffs<T> modify_b(TriFactor<T>& L, std::span<T> v, sigma sg,
                      OpCounts& counts) {
  detail::require_length(L.n(), v.size(), "modify_b");
  RotCoeffs<T> rc(L.n(), 1);
  detail::modify_rows(L, v, sg, counts, 0, rc.c.data(), rc.s.data(), 1);
  return rc;
}

/// Rank-k modify: modify_b over V's columns in order, each consuming the
/// factor left by the previous. V holds the rotated residuals on exit. On
/// failure, columns before the failing one have been fully applied.
template <element T>
RotCoeffs<T> modify_rank_k(TriFactor<T>& L, UpdateMat<T>& V, sigma sg,
                           OpCounts& counts) {
  detail::require_length(L.n(), V.n(), "modify_rank_k");
  const std::size_t k = V.k();
  RotCoeffs<T> rc(L.n(), k);
  for (std::size_t e = 0; e < k; ++e) {
    detail::modify_rows(L, V.column(e), sg, counts, e, rc.c.data() + e,
                        rc.s.data() + e, k);
  }
  return rc;
}

/// Right-looking Cholesky factorization A = L^T L with L upper triangular.
/// Symmetry is checked exactly.
template <element T>
TriFactor<T> chol_factor(const DenseMat<T>& A) {
  if (A.rows() != A.cols()) {
    throw dimension_error("chol_factor: matrix is " + std::to_string(A.rows()) +
                          "x" + std::to_string(A.cols()));
  }
  const std::size_t n = A.rows();
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
      if (!(A(i, j) == A(j, i))) throw asymmetric_input(i, j);

  std::vector<T> p(packed_size(n));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i; j < n; ++j) p[packed_offset(n, i, j)] = A(i, j);

  for (std::size_t k = 0; k < n; ++k) {
    T* rk = p.data() + packed_offset(n, k, k);
    if (!(rk[0] > T{0}) || !std::isfinite(rk[0])) throw not_positive_definite(k);
    const T pivot = std::sqrt(rk[0]);
    rk[0] = pivot;
    for (std::size_t j = 1; j < n - k; ++j) rk[j] /= pivot;
    for (std::size_t i = k + 1; i < n; ++i) {
      const T lki = rk[i - k];
      T* ri = p.data() + packed_offset(n, i, i);
      const T* src = rk + (i - k);
      for (std::size_t j = 0; j < n - i; ++j) ri[j] -= lki * src[j];
    }
  }
  return TriFactor<T>(n, std::move(p));
}

}  // namespace hyperchol
