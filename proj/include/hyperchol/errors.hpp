#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace hyperchol {

/// Base of every exception thrown by the library.
class error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class parse_failure {
  bad_magic,
  bad_header,
  truncated,
  length_mismatch,
  dimension_mismatch,
  nan_payload,
  bad_csv,
};

inline const char* to_string(parse_failure kind) {
  switch (kind) {
    case parse_failure::bad_magic: return "malformed magic";
    case parse_failure::bad_header: return "malformed header";
    case parse_failure::truncated: return "truncated payload";
    case parse_failure::length_mismatch: return "payload length mismatch";
    case parse_failure::dimension_mismatch: return "dimension mismatch";
    case parse_failure::nan_payload: return "NaN in payload";
    case parse_failure::bad_csv: return "malformed CSV";
  }
  return "parse error";
}

class parse_error : public error {
 public:
  parse_error(parse_failure kind, const std::string& what)
      : error(std::string(to_string(kind)) + ": " + what),
        kind_(kind),
        detail_(what) {}
  parse_failure kind() const noexcept { return kind_; }
  const std::string& detail() const noexcept { return detail_; }

 private:
  parse_failure kind_;
  std::string detail_;
};

class io_error : public error {
 public:
  using error::error;
};

/// Operands disagree in shape or precision.
class dimension_error : public error {
 public:
  using error::error;
};

class precision_mismatch : public error {
 public:
  using error::error;
};

/// Base for failures caused by the numbers rather than the plumbing.
class numerical_error : public error {
 public:
  using error::error;
};

class non_positive_pivot : public numerical_error {
 public:
  explicit non_positive_pivot(std::size_t row)
      : numerical_error("non-positive pivot at row " + std::to_string(row)),
        row_(row) {}
  std::size_t row() const noexcept { return row_; }

 private:
  std::size_t row_;
};

class not_positive_definite : public numerical_error {
 public:
  explicit not_positive_definite(std::size_t pivot)
      : numerical_error("matrix is not positive definite (pivot " +
                        std::to_string(pivot) + ")"),
        pivot_(pivot) {}
  std::size_t pivot() const noexcept { return pivot_; }

 private:
  std::size_t pivot_;
};

class asymmetric_input : public numerical_error {
 public:
  asymmetric_input(std::size_t row, std::size_t col)
      : numerical_error("input is not symmetric at (" + std::to_string(row) +
                        "," + std::to_string(col) + ")"),
        row_(row),
        col_(col) {}
  std::size_t row() const noexcept { return row_; }
  std::size_t col() const noexcept { return col_; }

 private:
  std::size_t row_;
  std::size_t col_;
};

/// L_ii^2 - V_i^2 <= 0: the downdated matrix is not positive definite.
/// `column` is the update vector index, `row` the failing pivot.
class indefinite_downdate : public numerical_error {
 public:
  indefinite_downdate(std::size_t column, std::size_t row,
                      const std::string& context = {})
      : numerical_error("indefinite downdate at update column " +
                        std::to_string(column) + ", row " +
                        std::to_string(row) +
                        (context.empty() ? "" : " (" + context + ")")),
        column_(column),
        row_(row) {}
  std::size_t column() const noexcept { return column_; }
  std::size_t row() const noexcept { return row_; }

 private:
  std::size_t column_;
  std::size_t row_;
};

}  // namespace hyperchol
