#pragma once

// CWM1 binary and CSV readers/writers.
//
// CWM1 layout (all integers little-endian):
//   0..3   magic "CWM1"
//   4      precision (0 = binary32, 1 = binary64)
//   5      layout (0 = dense row-major, 1 = packed upper, 2 = column-major V)
//   6..7   reserved, zero
//   8..15  rows (u64)
//   16..23 cols (u64; equals rows for packed upper)
//   24..   raw little-endian element payload
//
// CSV: a header row "cwm1-csv,<layout>,<precision>,<rows>,<cols>" followed by
// one line per matrix row. Packed factors are written as the full square with
// zeros below the diagonal.

#include <bit>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <limits>
#include <sstream>
#include <string>
#include <string_view>
#include <type_traits>
#include <variant>
#include <vector>

#include "hyperchol/errors.hpp"
#include "hyperchol/matrix.hpp"

namespace hyperchol {

enum class layout : std::uint8_t { dense = 0, packed_upper = 1, update = 2 };

inline std::string_view to_string(layout l) {
  switch (l) {
    case layout::dense: return "dense";
    case layout::packed_upper: return "packed-upper";
    case layout::update: return "update";
  }
  return "?";
}

using AnyMatrix = std::variant<DenseMat<float>, DenseMat<double>,
                               TriFactor<float>, TriFactor<double>,
                               UpdateMat<float>, UpdateMat<double>>;

namespace detail {

inline constexpr char cwm1_magic[4] = {'C', 'W', 'M', '1'};
inline constexpr std::size_t cwm1_header_size = 24;

template <class Mat>
struct matrix_traits;

template <element T>
struct matrix_traits<DenseMat<T>> {
  using value_type = T;
  static constexpr layout kind = layout::dense;
};
template <element T>
struct matrix_traits<TriFactor<T>> {
  using value_type = T;
  static constexpr layout kind = layout::packed_upper;
};
template <element T>
struct matrix_traits<UpdateMat<T>> {
  using value_type = T;
  static constexpr layout kind = layout::update;
};

template <class U>
U byteswap_if_big(U v) {
  if constexpr (std::endian::native == std::endian::big) {
    U out = 0;
    for (std::size_t b = 0; b < sizeof(U); ++b) {
      out = static_cast<U>((out << 8) | ((v >> (8 * b)) & 0xFF));
    }
    return out;
  } else {
    return v;
  }
}

inline void put_u64(std::string& out, std::uint64_t v) {
  v = byteswap_if_big(v);
  char buf[8];
  std::memcpy(buf, &v, 8);
  out.append(buf, 8);
}

inline std::uint64_t get_u64(const char* p) {
  std::uint64_t v;
  std::memcpy(&v, p, 8);
  return byteswap_if_big(v);
}

template <element T>
using bits_t = std::conditional_t<sizeof(T) == 4, std::uint32_t, std::uint64_t>;

template <element T>
void put_elements(std::string& out, std::span<const T> xs) {
  out.reserve(out.size() + xs.size() * sizeof(T));
  for (const T x : xs) {
    auto u = byteswap_if_big(std::bit_cast<bits_t<T>>(x));
    char buf[sizeof(T)];
    std::memcpy(buf, &u, sizeof(T));
    out.append(buf, sizeof(T));
  }
}

template <element T>
std::vector<T> get_elements(const char* p, std::size_t count) {
  std::vector<T> xs(count);
  for (std::size_t i = 0; i < count; ++i) {
    bits_t<T> u;
    std::memcpy(&u, p + i * sizeof(T), sizeof(T));
    xs[i] = std::bit_cast<T>(byteswap_if_big(u));
    if (std::isnan(xs[i])) {
      throw parse_error(parse_failure::nan_payload,
                        "element " + std::to_string(i));
    }
  }
  return xs;
}

template <element T>
void append_number(std::string& out, T x) {
  char buf[64];
  const int digits = std::is_same_v<T, float> ? 9 : 17;
  const int len = std::snprintf(buf, sizeof buf, "%.*g", digits,
                                static_cast<double>(x));
  out.append(buf, static_cast<std::size_t>(len));
}

inline std::vector<std::string_view> split(std::string_view line, char sep) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(sep, start);
    fields.push_back(line.substr(start, pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return fields;
}

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r'))
    s.remove_suffix(1);
  return s;
}

inline std::uint64_t parse_count(std::string_view s, const char* what) {
  s = trim(s);
  std::uint64_t v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size()) {
    throw parse_error(parse_failure::bad_header,
                      std::string("bad ") + what + " '" + std::string(s) + "'");
  }
  return v;
}

template <element T>
T parse_element(std::string_view s, std::size_t row, std::size_t col) {
  s = trim(s);
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  T v{};
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size()) {
    throw parse_error(parse_failure::bad_csv,
                      "bad number '" + std::string(s) + "' at row " +
                          std::to_string(row) + ", column " + std::to_string(col));
  }
  if (std::isnan(v)) {
    throw parse_error(parse_failure::nan_payload,
                      "row " + std::to_string(row) + ", column " +
                          std::to_string(col));
  }
  return v;
}

inline std::size_t expected_count(layout l, std::uint64_t rows,
                                  std::uint64_t cols) {
  constexpr auto max = std::numeric_limits<std::uint64_t>::max();
  if (rows == 0 || cols == 0) {
    throw parse_error(parse_failure::dimension_mismatch,
                      "zero dimension (" + std::to_string(rows) + "x" +
                          std::to_string(cols) + ")");
  }
  if (l == layout::packed_upper) {
    if (rows != cols) {
      throw parse_error(parse_failure::dimension_mismatch,
                        "packed factor must be square, got " +
                            std::to_string(rows) + "x" + std::to_string(cols));
    }
    if (rows > (1ull << 31)) {
      throw parse_error(parse_failure::length_mismatch, "order too large");
    }
    return static_cast<std::size_t>(packed_size(rows));
  }
  if (rows > max / cols / 8) {
    throw parse_error(parse_failure::length_mismatch, "dimensions too large");
  }
  return static_cast<std::size_t>(rows * cols);
}

template <element T>
AnyMatrix build(layout l, std::uint64_t rows, std::uint64_t cols,
                std::vector<T> data) {
  switch (l) {
    case layout::dense: return DenseMat<T>(rows, cols, std::move(data));
    case layout::packed_upper: return TriFactor<T>(rows, std::move(data));
    case layout::update: return UpdateMat<T>(rows, cols, std::move(data));
  }
  throw parse_error(parse_failure::bad_header, "unknown layout");
}

inline AnyMatrix parse_binary(std::string_view bytes) {
  if (bytes.size() < 4 || std::memcmp(bytes.data(), cwm1_magic, 4) != 0)
    throw parse_error(parse_failure::bad_magic, "expected CWM1");
  if (bytes.size() < cwm1_header_size)
    throw parse_error(parse_failure::truncated, "header shorter than 24 bytes");
  const auto prec_byte = static_cast<std::uint8_t>(bytes[4]);
  const auto layout_byte = static_cast<std::uint8_t>(bytes[5]);
  if (prec_byte > 1)
    throw parse_error(parse_failure::bad_header,
                      "precision byte " + std::to_string(prec_byte));
  if (layout_byte > 2)
    throw parse_error(parse_failure::bad_header,
                      "layout byte " + std::to_string(layout_byte));
  if (bytes[6] != 0 || bytes[7] != 0)
    throw parse_error(parse_failure::bad_header, "reserved bytes not zero");
  const auto l = static_cast<layout>(layout_byte);
  const auto p = static_cast<precision>(prec_byte);
  const std::uint64_t rows = get_u64(bytes.data() + 8);
  const std::uint64_t cols = get_u64(bytes.data() + 16);
  const std::size_t count = expected_count(l, rows, cols);
  const std::size_t want = count * element_size(p);
  const std::size_t have = bytes.size() - cwm1_header_size;
  if (have < want)
    throw parse_error(parse_failure::truncated,
                      "payload has " + std::to_string(have) + " bytes, expected " +
                          std::to_string(want));
  if (have > want)
    throw parse_error(parse_failure::length_mismatch,
                      "payload has " + std::to_string(have) + " bytes, expected " +
                          std::to_string(want));
  const char* payload = bytes.data() + cwm1_header_size;
  if (p == precision::f32)
    return build<float>(l, rows, cols, get_elements<float>(payload, count));
  return build<double>(l, rows, cols, get_elements<double>(payload, count));
}

template <element T>
std::vector<T> parse_csv_body(layout l, std::size_t rows, std::size_t cols,
                              const std::vector<std::string_view>& lines) {
  if (lines.size() != rows) {
    throw parse_error(parse_failure::dimension_mismatch,
                      "expected " + std::to_string(rows) + " data rows, got " +
                          std::to_string(lines.size()));
  }
  std::vector<T> data;
  data.reserve(expected_count(l, rows, cols));
  std::vector<T> update(l == layout::update ? rows * cols : 0);
  for (std::size_t i = 0; i < rows; ++i) {
    const auto fields = split(lines[i], ',');
    if (fields.size() != cols) {
      throw parse_error(parse_failure::dimension_mismatch,
                        "row " + std::to_string(i) + " has " +
                            std::to_string(fields.size()) + " fields, expected " +
                            std::to_string(cols));
    }
    for (std::size_t j = 0; j < cols; ++j) {
      const T v = parse_element<T>(fields[j], i, j);
      switch (l) {
        case layout::dense: data.push_back(v); break;
        case layout::packed_upper:
          if (j >= i) {
            data.push_back(v);
          } else if (v != T{0}) {
            throw parse_error(parse_failure::bad_csv,
                              "nonzero below the diagonal at row " +
                                  std::to_string(i));
          }
          break;
        case layout::update: update[j * rows + i] = v; break;
      }
    }
  }
  return l == layout::update ? update : data;
}

inline AnyMatrix parse_csv(std::string_view text) {
  std::vector<std::string_view> lines;
  for (auto line : split(text, '\n')) {
    line = trim(line);
    if (!line.empty()) lines.push_back(line);
  }
  if (lines.empty()) throw parse_error(parse_failure::bad_csv, "empty file");
  const auto header = split(lines.front(), ',');
  if (header.size() != 5 || trim(header[0]) != "cwm1-csv")
    throw parse_error(parse_failure::bad_magic,
                      "expected CWM1 binary or a 'cwm1-csv' header row");
  layout l;
  const auto lname = trim(header[1]);
  if (lname == "dense") l = layout::dense;
  else if (lname == "packed-upper") l = layout::packed_upper;
  else if (lname == "update") l = layout::update;
  else throw parse_error(parse_failure::bad_header, "layout '" + std::string(lname) + "'");
  const auto pname = trim(header[2]);
  if (pname != "f32" && pname != "f64")
    throw parse_error(parse_failure::bad_header, "precision '" + std::string(pname) + "'");
  const auto rows = parse_count(header[3], "rows");
  const auto cols = parse_count(header[4], "cols");
  (void)expected_count(l, rows, cols);
  lines.erase(lines.begin());
  if (pname == "f32")
    return build<float>(l, rows, cols, parse_csv_body<float>(l, rows, cols, lines));
  return build<double>(l, rows, cols, parse_csv_body<double>(l, rows, cols, lines));
}

inline bool has_csv_extension(const std::filesystem::path& path) {
  return path.extension() == ".csv";
}

}  // namespace detail

/// Serializes a matrix as CWM1 bytes.
template <class Mat>
std::string to_cwm1(const Mat& m) {
  using traits = detail::matrix_traits<Mat>;
  using T = typename traits::value_type;
  std::string out(detail::cwm1_magic, 4);
  out.push_back(static_cast<char>(precision_of<T>));
  out.push_back(static_cast<char>(traits::kind));
  out.push_back('\0');
  out.push_back('\0');
  std::uint64_t rows, cols;
  if constexpr (traits::kind == layout::dense) {
    rows = m.rows();
    cols = m.cols();
  } else if constexpr (traits::kind == layout::packed_upper) {
    rows = cols = m.n();
  } else {
    rows = m.n();
    cols = m.k();
  }
  detail::put_u64(out, rows);
  detail::put_u64(out, cols);
  detail::put_elements<T>(out, m.data());
  return out;
}

template <class Mat>
std::string to_csv(const Mat& m) {
  using traits = detail::matrix_traits<Mat>;
  using T = typename traits::value_type;
  std::size_t rows, cols;
  if constexpr (traits::kind == layout::dense) {
    rows = m.rows();
    cols = m.cols();
  } else if constexpr (traits::kind == layout::packed_upper) {
    rows = cols = m.n();
  } else {
    rows = m.n();
    cols = m.k();
  }
  std::string out = "cwm1-csv,";
  out += to_string(traits::kind);
  out += ',';
  out += to_string(precision_of<T>);
  out += ',' + std::to_string(rows) + ',' + std::to_string(cols) + '\n';
  for (std::size_t i = 0; i < rows; ++i) {
    for (std::size_t j = 0; j < cols; ++j) {
      if (j) out += ',';
      T v;
      if constexpr (traits::kind == layout::packed_upper) {
        v = j >= i ? m(i, j) : T{0};
      } else {
        v = m(i, j);
      }
      detail::append_number(out, v);
    }
    out += '\n';
  }
  return out;
}

/// Parses CWM1 or CSV content already in memory.
inline AnyMatrix parse_matrix(std::string_view bytes) {
  if (bytes.size() >= 4 && std::memcmp(bytes.data(), detail::cwm1_magic, 4) == 0)
    return detail::parse_binary(bytes);
  return detail::parse_csv(bytes);
}

inline AnyMatrix mat_read(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw io_error("cannot open '" + path.string() + "' for reading");
  std::string bytes((std::istreambuf_iterator<char>(in)),
                    std::istreambuf_iterator<char>());
  if (in.bad()) throw io_error("read failure on '" + path.string() + "'");
  try {
    return parse_matrix(bytes);
  } catch (const parse_error& e) {
    throw parse_error(e.kind(), path.string() + ": " + e.detail());
  }
}

/// Writes CSV when the path ends in ".csv", CWM1 otherwise.
template <class Mat>
void mat_write(const Mat& m, const std::filesystem::path& path) {
  const std::string bytes =
      detail::has_csv_extension(path) ? to_csv(m) : to_cwm1(m);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw io_error("cannot open '" + path.string() + "' for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  out.flush();
  if (!out) throw io_error("write failure on '" + path.string() + "'");
}

inline void mat_write(const AnyMatrix& m, const std::filesystem::path& path) {
  std::visit([&](const auto& x) { mat_write(x, path); }, m);
}

}  // namespace hyperchol
