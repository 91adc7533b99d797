#pragma once

// Seeded experiment harness: builds A = B^T B + I (optionally + V V^T),
// modifies its factor by V with a chosen implementation and reports
// max_ij |A_target - L~^T L~|.
//
// Random stream: xoshiro256** seeded through splitmix64. B is drawn first in
// column-major order, then V column by column. A 64-bit draw x maps to
// [0, 1) as (x >> 11) * 2^-53 for f64 and (x >> 40) * 2^-24 for f32.

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <cstdio>
#include <memory>
#include <ostream>
#include <string>
#include <vector>

#include "hyperchol/errors.hpp"
#include "hyperchol/kernel.hpp"
#include "hyperchol/matrix.hpp"
#include "hyperchol/panel.hpp"

namespace hyperchol {

inline std::uint64_t splitmix64(std::uint64_t& state) noexcept {
  std::uint64_t z = (state += 0x9E3779B97F4A7C15ull);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

class Xoshiro256ss {
 public:
  using result_type = std::uint64_t;

  explicit Xoshiro256ss(std::uint64_t seed) noexcept {
    for (auto& word : s_) word = splitmix64(seed);
  }

  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept { return ~result_type{0}; }

  result_type operator()() noexcept {
    const std::uint64_t result = rotl(s_[1] * 5, 7) * 9;
    const std::uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = rotl(s_[3], 45);
    return result;
  }

  template <element T>
  T uniform() noexcept {
    const std::uint64_t x = (*this)();
    if constexpr (std::is_same_v<T, double>) {
      return static_cast<double>(x >> 11) * 0x1.0p-53;
    } else {
      return static_cast<float>(x >> 40) * 0x1.0p-24f;
    }
  }

 private:
  static constexpr std::uint64_t rotl(std::uint64_t x, int k) noexcept {
    return (x << k) | (x >> (64 - k));
  }

  std::uint64_t s_[4];
};

enum class impl_kind { serial_a, serial_b, rank_k, panelled };

inline std::string_view to_string(impl_kind k) {
  switch (k) {
    case impl_kind::serial_a: return "serial-a";
    case impl_kind::serial_b: return "serial-b";
    case impl_kind::rank_k: return "serial";
    case impl_kind::panelled: return "panel";
  }
  return "?";
}

inline impl_kind parse_impl(std::string_view s) {
  if (s == "serial-a" || s == "a") return impl_kind::serial_a;
  if (s == "serial-b" || s == "b") return impl_kind::serial_b;
  if (s == "serial" || s == "rank-k") return impl_kind::rank_k;
  if (s == "panel" || s == "panelled") return impl_kind::panelled;
  throw std::invalid_argument("unknown implementation '" + std::string(s) + "'");
}

struct ExperimentConfig {
  std::size_t n = 64;
  std::size_t k = 16;
  precision prec = precision::f64;
  sigma direction = sigma::update;
  std::uint64_t seed = 0;
  impl_kind impl = impl_kind::rank_k;
  PanelParams params;
  std::size_t repetitions = 1;

  void validate() const {
    if (n == 0 || k == 0) throw std::invalid_argument("n and k must be at least 1");
    if (repetitions == 0) throw std::invalid_argument("repetitions must be at least 1");
    if (impl == impl_kind::panelled) params.validate();
  }
};

/// Regression bound on error_maxabs for unit-scale instances.
inline double error_bound(precision p) noexcept {
  return p == precision::f64 ? 1e-9 : 1e-2;
}

template <element T>
struct Instance {
  DenseMat<T> A;
  TriFactor<T> L;
  UpdateMat<T> V;
  DenseMat<T> target;
};

namespace detail {

/// Upper half of sum_m x_m x_m^T accumulated into C, m ascending.
template <element T>
void accumulate_gram_upper(DenseMat<T>& C, const T* rows, std::size_t count,
                           std::size_t n) {
  for (std::size_t m = 0; m < count; ++m) {
    const T* x = rows + m * n;
    for (std::size_t i = 0; i < n; ++i) {
      const T xi = x[i];
      T* c = &C(i, 0);
      for (std::size_t j = i; j < n; ++j) c[j] += xi * x[j];
    }
  }
}

template <element T>
void mirror_upper(DenseMat<T>& C) {
  for (std::size_t i = 0; i < C.rows(); ++i)
    for (std::size_t j = 0; j < i; ++j) C(i, j) = C(j, i);
}

}  // namespace detail

template <element T>
Instance<T> gen_instance(const ExperimentConfig& cfg) {
  cfg.validate();
  const std::size_t n = cfg.n;
  const std::size_t k = cfg.k;
  Xoshiro256ss rng(cfg.seed);

  DenseMat<T> B(n, n);
  for (std::size_t j = 0; j < n; ++j)
    for (std::size_t i = 0; i < n; ++i) B(i, j) = rng.template uniform<T>();
  UpdateMat<T> V(n, k);
  for (auto& x : V.data()) x = rng.template uniform<T>();

  // G = B^T B + I; row m of B is the m-th term of the sum.
  DenseMat<T> G(n, n);
  detail::accumulate_gram_upper(G, B.data().data(), n, n);
  for (std::size_t i = 0; i < n; ++i) G(i, i) += T{1};
  detail::mirror_upper(G);

  DenseMat<T> P(n, n);
  detail::accumulate_gram_upper(P, V.data().data(), k, n);
  detail::mirror_upper(P);
  DenseMat<T> GP(n, n);
  for (std::size_t i = 0; i < n * n; ++i) GP.data()[i] = G.data()[i] + P.data()[i];

  Instance<T> inst;
  if (cfg.direction == sigma::update) {
    inst.A = std::move(G);
    inst.target = std::move(GP);
  } else {
    inst.A = std::move(GP);
    inst.target = std::move(G);
  }
  inst.L = chol_factor(inst.A);
  inst.V = std::move(V);
  return inst;
}

struct TrialResult {
  double error_maxabs = 0.0;
  std::vector<double> wall_times;
  OpCounts op_counts;
  TrafficStats traffic;
  TriFactor<double> factor_f64;  // the modified factor (one of these is set)
  TriFactor<float> factor_f32;
};

/// Runs one implementation on (L, V) in place.
template <element T>
void run_impl(impl_kind impl, TriFactor<T>& L, UpdateMat<T>& V, sigma sg,
              const PanelParams& params, ThreadPool* pool, OpCounts& counts,
              TrafficStats& traffic) {
  switch (impl) {
    case impl_kind::serial_a:
      for (std::size_t e = 0; e < V.k(); ++e) {
        try {
          modify_a(L, V.column(e), sg, counts);
        } catch (const indefinite_downdate& err) {
          throw indefinite_downdate(e, err.row());
        }
      }
      return;
    case impl_kind::serial_b:
      for (std::size_t e = 0; e < V.k(); ++e) {
        try {
          modify_b(L, V.column(e), sg, counts);
        } catch (const indefinite_downdate& err) {
          throw indefinite_downdate(e, err.row());
        }
      }
      return;
    case impl_kind::rank_k:
      modify_rank_k(L, V, sg, counts);
      return;
    case impl_kind::panelled:
      if (pool) {
        run_panelled(*pool, L, V, sg, params, traffic, counts);
      } else {
        run_panelled(L, V, sg, params, traffic, counts);
      }
      return;
  }
}

template <element T>
TrialResult run_trial_typed(const ExperimentConfig& cfg) {
  cfg.validate();
  const Instance<T> inst = gen_instance<T>(cfg);
  std::unique_ptr<ThreadPool> pool;
  if (cfg.impl == impl_kind::panelled)
    pool = std::make_unique<ThreadPool>(cfg.params.workers);

  TrialResult result;
  TriFactor<T> L;
  for (std::size_t rep = 0; rep < cfg.repetitions; ++rep) {
    L = inst.L;
    UpdateMat<T> V = inst.V;
    OpCounts counts;
    TrafficStats traffic;
    const auto t0 = std::chrono::steady_clock::now();
    try {
      run_impl(cfg.impl, L, V, cfg.direction, cfg.params, pool.get(), counts,
               traffic);
    } catch (const indefinite_downdate& e) {
      throw indefinite_downdate(
          e.column(), e.row(),
          "seed=" + std::to_string(cfg.seed) + " n=" + std::to_string(cfg.n) +
              " k=" + std::to_string(cfg.k));
    }
    const auto t1 = std::chrono::steady_clock::now();
    result.wall_times.push_back(std::chrono::duration<double>(t1 - t0).count());
    result.op_counts = counts;
    result.traffic = std::move(traffic);
  }
  result.error_maxabs = max_abs_diff(inst.target, tri_transpose_mul(L));
  if constexpr (std::is_same_v<T, double>) {
    result.factor_f64 = std::move(L);
  } else {
    result.factor_f32 = std::move(L);
  }
  return result;
}

inline TrialResult run_trial(const ExperimentConfig& cfg) {
  return cfg.prec == precision::f64 ? run_trial_typed<double>(cfg)
                                    : run_trial_typed<float>(cfg);
}

inline double median(std::vector<double> xs) {
  if (xs.empty()) return 0.0;
  std::sort(xs.begin(), xs.end());
  const std::size_t mid = xs.size() / 2;
  return xs.size() % 2 ? xs[mid] : 0.5 * (xs[mid - 1] + xs[mid]);
}

struct SweepRow {
  std::size_t n = 0;
  std::size_t k = 0;
  precision prec = precision::f64;
  sigma direction = sigma::update;
  impl_kind impl = impl_kind::rank_k;
  double median_time_s = 0.0;
  double error_maxabs = 0.0;
  std::uint64_t applies = 0;
  std::uint64_t bytes_L_written = 0;
  std::string error;  // empty on success
};

/// One row per (n, impl), n outermost, in list order. Failures are recorded
/// in the row's `error` field and the sweep continues.
inline std::vector<SweepRow> run_sweep(const ExperimentConfig& base,
                                       const std::vector<std::size_t>& n_list,
                                       const std::vector<impl_kind>& impl_list) {
  if (n_list.empty() || impl_list.empty())
    throw std::invalid_argument("run_sweep: empty n or impl list");
  std::vector<SweepRow> rows;
  for (const std::size_t n : n_list) {
    for (const impl_kind impl : impl_list) {
      ExperimentConfig cfg = base;
      cfg.n = n;
      cfg.impl = impl;
      SweepRow row;
      row.n = n;
      row.k = cfg.k;
      row.prec = cfg.prec;
      row.direction = cfg.direction;
      row.impl = impl;
      try {
        const TrialResult r = run_trial(cfg);
        row.median_time_s = median(r.wall_times);
        row.error_maxabs = r.error_maxabs;
        row.applies = r.op_counts.applies;
        row.bytes_L_written = r.traffic.bytes_L_written;
      } catch (const std::exception& e) {
        row.error = e.what();
      }
      rows.push_back(std::move(row));
    }
  }
  return rows;
}

inline constexpr const char* sweep_csv_header =
    "n,k,precision,direction,impl,median_time_s,error_maxabs,applies,"
    "bytes_L_written,error";

namespace detail {

inline std::string csv_quote(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (const char c : s) {
    if (c == '"') out += '"';
    out += c == '\n' ? ' ' : c;
  }
  return out + '"';
}

}  // namespace detail

inline std::string format_sweep_row(const SweepRow& r) {
  char err[64];
  char time[64];
  std::snprintf(err, sizeof err, "%.*g", r.prec == precision::f64 ? 17 : 9,
                r.error_maxabs);
  std::snprintf(time, sizeof time, "%.9g", r.median_time_s);
  std::string out = std::to_string(r.n) + ',' + std::to_string(r.k) + ',' +
                    std::string(to_string(r.prec)) + ',' +
                    std::string(to_string(r.direction)) + ',' +
                    std::string(to_string(r.impl)) + ',';
  if (r.error.empty()) {
    out += std::string(time) + ',' + err + ',' + std::to_string(r.applies) + ',' +
           std::to_string(r.bytes_L_written) + ',';
  } else {
    out += ",,,," + detail::csv_quote(r.error);
  }
  return out;
}

inline void write_sweep_csv(std::ostream& os, const std::vector<SweepRow>& rows,
                            bool header = true) {
  if (header) os << sweep_csv_header << '\n';
  for (const auto& r : rows) os << format_sweep_row(r) << '\n';
}

}  // namespace hyperchol
