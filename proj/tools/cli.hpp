#pragma once

// Command-line front end. Exit codes:
//   0 ok, 1 verification bound exceeded, 2 usage or parse error,
//   3 numerical precondition (asymmetric / not positive definite /
//     non-positive pivot), 4 indefinite downdate.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include "hyperchol/hyperchol.hpp"

namespace hyperchol::cli {

enum exit_code : int {
  exit_ok = 0,
  exit_verify_failed = 1,
  exit_usage = 2,
  exit_numerical = 3,
  exit_indefinite = 4,
};

namespace detail {

struct PanelFlags {
  std::size_t bpk = 28;
  std::size_t tpb = 32;
  std::size_t ept = 16;
  std::size_t workers = default_workers();

  PanelParams params() const { return PanelParams{bpk, tpb, ept, workers}; }
};

inline void add_panel_flags(CLI::App* app, PanelFlags& f) {
  app->add_option("--bpk", f.bpk, "blocks per kernel")->capture_default_str();
  app->add_option("--tpb", f.tpb, "threads per block (rectangle width)")
      ->capture_default_str();
  app->add_option("--ept", f.ept, "elements per thread (update batch width)")
      ->capture_default_str();
  app->add_option("--workers", f.workers, "worker threads (default: hardware)")
      ->capture_default_str();
}

template <class T>
std::vector<T> parse_list(const std::string& text, T (*parse)(std::string_view)) {
  std::vector<T> out;
  std::size_t start = 0;
  while (start <= text.size()) {
    auto pos = text.find(',', start);
    if (pos == std::string::npos) pos = text.size();
    const auto item = std::string_view(text).substr(start, pos - start);
    if (item.empty()) throw std::invalid_argument("empty item in list '" + text + "'");
    out.push_back(parse(item));
    start = pos + 1;
  }
  if (out.empty()) throw std::invalid_argument("empty list");
  return out;
}

inline std::size_t parse_size(std::string_view s) {
  std::size_t v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size() || v == 0)
    throw std::invalid_argument("bad size '" + std::string(s) + "'");
  return v;
}

inline precision parse_prec(std::string_view s) { return parse_precision(s); }
inline sigma parse_dir(std::string_view s) { return parse_sigma(s); }
inline impl_kind parse_impl_name(std::string_view s) { return parse_impl(s); }

template <element T>
UpdateMat<T> as_update(AnyMatrix&& m) {
  if (auto* v = std::get_if<UpdateMat<T>>(&m)) return std::move(*v);
  if (auto* d = std::get_if<DenseMat<T>>(&m)) {
    UpdateMat<T> v(d->rows(), d->cols());
    for (std::size_t i = 0; i < d->rows(); ++i)
      for (std::size_t e = 0; e < d->cols(); ++e) v(i, e) = (*d)(i, e);
    return v;
  }
  throw dimension_error("update file must hold an update or dense matrix of the factor's precision");
}

template <element T>
int modify_typed(TriFactor<T> L, AnyMatrix&& vfile, sigma sg, impl_kind impl,
                 const PanelParams& params, const std::string& out_path,
                 const std::string& check_path, bool traffic, std::ostream& out) {
  UpdateMat<T> V = as_update<T>(std::move(vfile));
  if (V.n() != L.n()) {
    throw dimension_error("update matrix has " + std::to_string(V.n()) +
                          " rows, factor has order " + std::to_string(L.n()));
  }
  OpCounts counts;
  TrafficStats stats;
  run_impl(impl, L, V, sg, params, nullptr, counts, stats);
  mat_write(L, out_path);
  if (traffic && impl == impl_kind::panelled)
    out << format_traffic_text(traffic_report(stats, counts, L.n(), V.k()));
  if (!check_path.empty()) {
    AnyMatrix ref = mat_read(check_path);
    auto* r = std::get_if<TriFactor<T>>(&ref);
    if (!r) throw dimension_error("--check file must be a factor of the same precision");
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", max_abs_diff(L, *r));
    out << "max_abs_diff=" << buf << '\n';
  }
  return exit_ok;
}

inline void print_plan(std::ostream& os, const PanelPlan& plan, precision p) {
  os << "plan n=" << plan.n << " k=" << plan.k << '\n'
     << "params bpk=" << plan.params.blocks_per_kernel
     << " tpb=" << plan.params.threads_per_block
     << " ept=" << plan.params.elements_per_thread
     << " workers=" << plan.params.workers << '\n'
     << "chunk=" << plan.chunk << " phases=" << plan.phases.size()
     << " batches=" << plan.batches.size()
     << " rectangles=" << plan.rect_count() << '\n';
  for (std::size_t i = 0; i < plan.phases.size(); ++i) {
    const auto& ph = plan.phases[i];
    os << "phase " << i << ' ' << to_string(ph.kind) << " rows [" << ph.rows.begin
       << ',' << ph.rows.end << ") cols [" << ph.cols.begin << ',' << ph.cols.end
       << ')';
    if (ph.kind == phase_kind::off_diagonal) os << " rects=" << ph.rects.size();
    os << '\n';
  }
  for (std::size_t b = 0; b < plan.batches.size(); ++b) {
    os << "batch " << b << " cols [" << plan.batches[b].begin << ','
       << plan.batches[b].end << ")\n";
  }
  const std::size_t D = plan.chunk;
  const std::size_t width = plan.batches.front().size();
  const std::size_t es = element_size(p);
  const std::size_t reg = plan.params.threads_per_block * width * es;
  os << "launch_equivalents=" << ((plan.n + D - 1) / D) * plan.batches.size()
     << " kernel_launches=" << plan.kernel_launches()
     << " naive_launches=" << plan.n * plan.batches.size() << '\n'
     << "scratch precision=" << to_string(p) << " register_bytes=" << reg
     << " shared_bytes=" << 2 * reg << '\n';
}

}  // namespace detail

/// Entry point shared by the executable and the tests.
inline int run(int argc, const char* const* argv, std::ostream& out,
               std::ostream& err) {
  CLI::App app{"Rank-k Cholesky factor update/downdate"};
  app.require_subcommand(1);

  // factor
  std::string factor_in, factor_out;
  auto* factor = app.add_subcommand("factor", "Cholesky-factor a dense SPD matrix");
  factor->add_option("input", factor_in, "dense matrix (CWM1 or CSV)")->required();
  factor->add_option("output", factor_out, "packed factor output")->required();

  // update / downdate
  std::string mod_l, mod_v, mod_out, mod_impl = "serial", mod_check;
  bool mod_traffic = false;
  detail::PanelFlags mod_panel;
  CLI::App* modify[2];
  const char* names[2] = {"update", "downdate"};
  for (int i = 0; i < 2; ++i) {
    modify[i] = app.add_subcommand(
        names[i], i == 0 ? "Modify a factor to L~^T L~ = A + V V^T"
                         : "Modify a factor to L~^T L~ = A - V V^T");
    modify[i]->add_option("factor", mod_l, "packed factor L")->required();
    modify[i]->add_option("vectors", mod_v, "update matrix V (n x k)")->required();
    modify[i]->add_option("output", mod_out, "modified factor output")->required();
    modify[i]->add_option("--impl", mod_impl, "serial | serial-a | serial-b | panel")
        ->capture_default_str();
    modify[i]->add_option("--check", mod_check,
                          "reference factor; prints max elementwise difference");
    modify[i]->add_flag("--traffic", mod_traffic, "print the panel traffic report");
    detail::add_panel_flags(modify[i], mod_panel);
  }

  // verify
  ExperimentConfig vcfg;
  std::string v_prec = "f64", v_dir = "update", v_impl = "serial";
  bool v_traffic = false;
  detail::PanelFlags v_panel;
  auto* verify = app.add_subcommand("verify", "Run one seeded trial and check the error bound");
  verify->add_option("--n", vcfg.n, "dimension")->capture_default_str();
  verify->add_option("--k", vcfg.k, "update columns")->capture_default_str();
  verify->add_option("--precision", v_prec, "f32 | f64")->capture_default_str();
  verify->add_option("--direction", v_dir, "update | downdate")->capture_default_str();
  verify->add_option("--seed", vcfg.seed, "PRNG seed")->capture_default_str();
  verify->add_option("--impl", v_impl, "serial | serial-a | serial-b | panel")
      ->capture_default_str();
  verify->add_option("--repetitions", vcfg.repetitions, "timed repetitions")
      ->capture_default_str();
  verify->add_flag("--traffic", v_traffic, "print the panel traffic report");
  detail::add_panel_flags(verify, v_panel);

  // bench
  ExperimentConfig bcfg;
  bcfg.repetitions = 3;
  std::string b_nlist = "256,512,1024", b_ilist = "serial,panel", b_precs = "f64",
              b_dirs = "update", b_out;
  detail::PanelFlags b_panel;
  auto* bench = app.add_subcommand("bench", "Sweep sizes and implementations, CSV output");
  bench->add_option("--n-list", b_nlist, "comma-separated sizes")->capture_default_str();
  bench->add_option("--impl-list", b_ilist, "comma-separated implementations")
      ->capture_default_str();
  bench->add_option("--k", bcfg.k, "update columns")->capture_default_str();
  bench->add_option("--precisions", b_precs, "comma-separated: f32,f64")
      ->capture_default_str();
  bench->add_option("--directions", b_dirs, "comma-separated: update,downdate")
      ->capture_default_str();
  bench->add_option("--seed", bcfg.seed, "PRNG seed")->capture_default_str();
  bench->add_option("--repetitions", bcfg.repetitions, "timed repetitions per cell")
      ->capture_default_str();
  bench->add_option("--out", b_out, "CSV output path (default: stdout)");
  detail::add_panel_flags(bench, b_panel);

  // plan
  std::size_t p_n = 5000, p_k = 16;
  std::string p_prec = "f64";
  detail::PanelFlags p_panel;
  auto* plan = app.add_subcommand("plan", "Print the panel schedule without running it");
  plan->add_option("--n", p_n, "dimension")->capture_default_str();
  plan->add_option("--k", p_k, "update columns")->capture_default_str();
  plan->add_option("--precision", p_prec, "f32 | f64 (scratch model)")
      ->capture_default_str();
  detail::add_panel_flags(plan, p_panel);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err) == 0 ? exit_ok : exit_usage;
  }

  try {
    if (*factor) {
      AnyMatrix m = mat_read(factor_in);
      return std::visit(
          [&](auto& x) -> int {
            using M = std::decay_t<decltype(x)>;
            if constexpr (std::is_same_v<M, DenseMat<float>> ||
                          std::is_same_v<M, DenseMat<double>>) {
              mat_write(chol_factor(x), factor_out);
              return exit_ok;
            } else {
              err << "factor: input must be a dense matrix\n";
              return exit_usage;
            }
          },
          m);
    }

    for (int i = 0; i < 2; ++i) {
      if (!*modify[i]) continue;
      const sigma sg = i == 0 ? sigma::update : sigma::downdate;
      const impl_kind impl = parse_impl(mod_impl);
      const PanelParams params = mod_panel.params();
      if (impl == impl_kind::panelled) params.validate();
      AnyMatrix lfile = mat_read(mod_l);
      AnyMatrix vfile = mat_read(mod_v);
      if (auto* L = std::get_if<TriFactor<double>>(&lfile))
        return detail::modify_typed(std::move(*L), std::move(vfile), sg, impl,
                                    params, mod_out, mod_check, mod_traffic, out);
      if (auto* L = std::get_if<TriFactor<float>>(&lfile))
        return detail::modify_typed(std::move(*L), std::move(vfile), sg, impl,
                                    params, mod_out, mod_check, mod_traffic, out);
      err << names[i] << ": factor file must hold a packed-upper factor\n";
      return exit_usage;
    }

    if (*verify) {
      vcfg.prec = parse_precision(v_prec);
      vcfg.direction = parse_sigma(v_dir);
      vcfg.impl = parse_impl(v_impl);
      vcfg.params = v_panel.params();
      const TrialResult r = run_trial(vcfg);
      SweepRow row{vcfg.n, vcfg.k, vcfg.prec, vcfg.direction, vcfg.impl,
                   median(r.wall_times), r.error_maxabs, r.op_counts.applies,
                   r.traffic.bytes_L_written, {}};
      write_sweep_csv(out, {row});
      if (v_traffic && vcfg.impl == impl_kind::panelled)
        out << format_traffic_text(traffic_report(r.traffic, r.op_counts, vcfg.n, vcfg.k));
      if (!(r.error_maxabs <= error_bound(vcfg.prec))) {
        err << "verify: error " << r.error_maxabs << " exceeds bound "
            << error_bound(vcfg.prec) << '\n';
        return exit_verify_failed;
      }
      return exit_ok;
    }

    if (*bench) {
      const auto n_list = detail::parse_list<std::size_t>(b_nlist, detail::parse_size);
      const auto i_list = detail::parse_list<impl_kind>(b_ilist, detail::parse_impl_name);
      const auto precs = detail::parse_list<precision>(b_precs, detail::parse_prec);
      const auto dirs = detail::parse_list<sigma>(b_dirs, detail::parse_dir);
      bcfg.params = b_panel.params();
      if (bcfg.k == 0 || bcfg.repetitions == 0)
        throw std::invalid_argument("--k and --repetitions must be at least 1");
      std::ofstream file;
      if (!b_out.empty()) {
        file.open(b_out, std::ios::trunc);
        if (!file) throw io_error("cannot open '" + b_out + "' for writing");
      }
      std::ostream& os = b_out.empty() ? out : file;
      os << sweep_csv_header << '\n';
      for (const precision p : precs) {
        for (const sigma d : dirs) {
          ExperimentConfig cfg = bcfg;
          cfg.prec = p;
          cfg.direction = d;
          write_sweep_csv(os, run_sweep(cfg, n_list, i_list), false);
          os.flush();
        }
      }
      return exit_ok;
    }

    if (*plan) {
      const PanelParams params = p_panel.params();
      detail::print_plan(out, build_plan(p_n, p_k, params), parse_precision(p_prec));
      return exit_ok;
    }
  } catch (const indefinite_downdate& e) {
    err << "error: " << e.what() << '\n';
    return exit_indefinite;
  } catch (const numerical_error& e) {
    err << "error: " << e.what() << '\n';
    return exit_numerical;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return exit_usage;
  }
  return exit_usage;
}

}  // namespace hyperchol::cli
