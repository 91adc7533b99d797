#pragma once

// Panelled executor. The upper triangle of L is cut into square diagonal
// chunks of edge D = blocks_per_kernel * threads_per_block. Chunks are
// processed top-left to bottom-right; after every chunk except the last comes
// an off-diagonal panel covering the chunk's rows and every column to its
// right:
//
//   Diag[0,D)  Off[0,D)x[D,n)  Diag[D,2D)  Off[D,2D)x[2D,n)  ...  Diag[.., n)
//
// Diagonal chunks run on the calling thread with the row-order kernel and
// leave behind a (c, s) slab: one coefficient pair per chunk row and batch
// column. An off-diagonal panel is split into rectangles threads_per_block
// columns wide. Each rectangle runs as one pool task mirroring one GPU thread
// block: it copies its V entries to private scratch ("registers"), walks down
// its rows in threads_per_block-tall tiles, staging the tile's slab rows into
// a second scratch buffer ("shared memory"), and for every row reads an L
// element once, applies the batch's rotations, and writes it back once.
// Finally it flushes its V scratch. Rectangles own disjoint columns of L and
// disjoint rows of V, so tasks of one panel never touch the same data.
//
// The update columns are consumed in batches of elements_per_thread; the batch
// loop is outermost, so each batch sweeps every chunk and panel.
//
// Every scalar operation sees the same operands as in modify_rank_k, so the
// result is bitwise identical regardless of parameters or worker count.

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <mutex>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "hyperchol/errors.hpp"
#include "hyperchol/kernel.hpp"
#include "hyperchol/matrix.hpp"
#include "hyperchol/thread_pool.hpp"

namespace hyperchol {

struct PanelParams {
  std::size_t blocks_per_kernel = 28;
  std::size_t threads_per_block = 32;
  std::size_t elements_per_thread = 16;
  std::size_t workers = default_workers();

  std::size_t chunk() const noexcept {
    return blocks_per_kernel * threads_per_block;
  }

  void validate() const {
    if (blocks_per_kernel == 0 || threads_per_block == 0 ||
        elements_per_thread == 0 || workers == 0) {
      throw std::invalid_argument(
          "panel parameters must all be strictly positive");
    }
  }
};

struct Range {
  std::size_t begin = 0;
  std::size_t end = 0;

  std::size_t size() const noexcept { return end - begin; }
  friend bool operator==(const Range&, const Range&) = default;
};

enum class phase_kind { diagonal, off_diagonal };

inline std::string_view to_string(phase_kind k) {
  return k == phase_kind::diagonal ? "diagonal" : "off-diagonal";
}

struct Phase {
  phase_kind kind = phase_kind::diagonal;
  Range rows;
  Range cols;
  std::vector<Range> rects;  // column strips; empty for diagonal phases
};

struct RectTask {
  std::size_t phase = 0;
  Range rows;
  Range cols;
  Range batch;
};

struct PanelPlan {
  std::size_t n = 0;
  std::size_t k = 0;
  PanelParams params;
  std::size_t chunk = 0;
  std::vector<Phase> phases;
  std::vector<Range> batches;

  std::size_t off_diagonal_phases() const noexcept {
    return static_cast<std::size_t>(
        std::count_if(phases.begin(), phases.end(), [](const Phase& p) {
          return p.kind == phase_kind::off_diagonal;
        }));
  }

  std::size_t rect_count() const noexcept {
    std::size_t total = 0;
    for (const auto& p : phases) total += p.rects.size();
    return total;
  }

  /// Simulated kernel launches: one per off-diagonal panel per batch.
  std::size_t kernel_launches() const noexcept {
    return off_diagonal_phases() * batches.size();
  }

  std::vector<RectTask> tasks(std::size_t phase, std::size_t batch) const {
    std::vector<RectTask> out;
    const Phase& p = phases.at(phase);
    out.reserve(p.rects.size());
    for (const auto& cols : p.rects)
      out.push_back(RectTask{phase, p.rows, cols, batches.at(batch)});
    return out;
  }
};

/// Deterministic chunk/panel/rectangle schedule for an order-n factor and k
/// update columns. Throws std::logic_error if rectangles of one panel would
/// overlap.
inline PanelPlan build_plan(std::size_t n, std::size_t k,
                            const PanelParams& params) {
  params.validate();
  if (n == 0 || k == 0)
    throw std::invalid_argument("build_plan: n and k must be at least 1");
  PanelPlan plan;
  plan.n = n;
  plan.k = k;
  plan.params = params;
  plan.chunk = params.chunk();
  const std::size_t D = plan.chunk;
  const std::size_t tpb = params.threads_per_block;

  for (std::size_t r0 = 0; r0 < n; r0 += D) {
    const std::size_t r1 = std::min(n, r0 + D);
    plan.phases.push_back(Phase{phase_kind::diagonal, {r0, r1}, {r0, r1}, {}});
    if (r1 < n) {
      Phase off{phase_kind::off_diagonal, {r0, r1}, {r1, n}, {}};
      for (std::size_t c0 = r1; c0 < n; c0 += tpb)
        off.rects.push_back(Range{c0, std::min(n, c0 + tpb)});
      plan.phases.push_back(std::move(off));
    }
  }
  for (std::size_t e0 = 0; e0 < k; e0 += params.elements_per_thread)
    plan.batches.push_back(Range{e0, std::min(k, e0 + params.elements_per_thread)});

  for (const auto& p : plan.phases) {
    for (std::size_t a = 0; a < p.rects.size(); ++a) {
      for (std::size_t b = a + 1; b < p.rects.size(); ++b) {
        const auto& x = p.rects[a];
        const auto& y = p.rects[b];
        if (x.begin < y.end && y.begin < x.end)
          throw std::logic_error("build_plan: overlapping rectangles");
      }
    }
  }
  return plan;
}

/// Byte traffic of one phase, summed over batches.
struct PhaseTraffic {
  phase_kind kind = phase_kind::diagonal;
  std::uint64_t bytes_L_read = 0;
  std::uint64_t bytes_L_written = 0;
  std::uint64_t bytes_L_global_read = 0;
  std::uint64_t bytes_L_global_written = 0;
  std::uint64_t bytes_V_read = 0;
  std::uint64_t bytes_V_written = 0;
  std::uint64_t bytes_cs_read = 0;

  PhaseTraffic& operator+=(const PhaseTraffic& o) noexcept {
    bytes_L_read += o.bytes_L_read;
    bytes_L_written += o.bytes_L_written;
    bytes_L_global_read += o.bytes_L_global_read;
    bytes_L_global_written += o.bytes_L_global_written;
    bytes_V_read += o.bytes_V_read;
    bytes_V_written += o.bytes_V_written;
    bytes_cs_read += o.bytes_cs_read;
    return *this;
  }
  friend bool operator==(const PhaseTraffic&, const PhaseTraffic&) = default;
};

/// Traffic counters for a panelled run.
///
/// bytes_L_read / bytes_L_written count one element per Apply, the tally of
/// the unblocked inner loop. bytes_L_global_* count what the rectangles
/// actually move: one read and one write per L element per batch, the point of
/// holding V in registers. bytes_V_* are rectangle register loads/flushes and
/// bytes_cs_read the slab rows staged per tile. Scratch peaks use the launch
/// geometry: threads_per_block x batch width V entries in registers and twice
/// that (c and s) in shared scratch, regardless of ragged edges, as a GPU
/// allocates per block.
struct TrafficStats {
  std::uint64_t bytes_L_read = 0;
  std::uint64_t bytes_L_written = 0;
  std::uint64_t bytes_L_global_read = 0;
  std::uint64_t bytes_L_global_written = 0;
  std::uint64_t bytes_V_read = 0;
  std::uint64_t bytes_V_written = 0;
  std::uint64_t bytes_cs_read = 0;
  std::uint64_t kernel_launch_equivalents = 0;
  std::uint64_t tiles = 0;
  std::uint64_t scratch_shared_peak = 0;
  std::uint64_t scratch_register_peak = 0;
  std::size_t chunk_edge = 0;
  std::size_t batches = 0;
  std::size_t element_bytes = 0;
  std::vector<PhaseTraffic> phases;

  friend bool operator==(const TrafficStats&, const TrafficStats&) = default;
};

/// Optional instrumentation: records when each phase's work started and
/// finished on a global logical clock.
struct ScheduleTrace {
  struct Event {
    std::size_t sequence;  // batch * phases + phase
    std::uint64_t start;
    std::uint64_t end;
  };

  std::atomic<std::uint64_t> clock{0};
  std::mutex mutex;
  std::vector<Event> events;

  std::uint64_t tick() noexcept { return clock.fetch_add(1); }
  void record(std::size_t sequence, std::uint64_t start, std::uint64_t end) {
    std::lock_guard lock(mutex);
    events.push_back(Event{sequence, start, end});
  }
};

namespace detail {

struct TaskTally {
  OpCounts counts;
  PhaseTraffic traffic;
  std::uint64_t tiles = 0;
  std::uint64_t register_bytes = 0;
  std::uint64_t shared_bytes = 0;
};

/// Algorithm 1 (row order) over one diagonal chunk for every column of the
/// batch, recording the slab.
template <element T>
void run_diagonal(TriFactor<T>& L, UpdateMat<T>& V, sigma sg, Range rows,
                  Range batch, std::size_t batch_index, std::vector<T>& slab_c,
                  std::vector<T>& slab_s, TaskTally& tally) {
  const std::size_t bw = batch.size();
  const T sgn = sign_of<T>(sg);
  constexpr std::uint64_t es = sizeof(T);
  for (std::size_t e = batch.begin; e < batch.end; ++e) {
    auto v = V.column(e);
    for (std::size_t i = rows.begin; i < rows.end; ++i) {
      auto row = L.row(i);
      Rotation<T> r{};
      switch (try_rot_compute(row[0], v[i], sg, r)) {
        case compute_status::ok: break;
        case compute_status::non_positive_pivot: throw non_positive_pivot(i);
        case compute_status::indefinite:
          throw indefinite_downdate(e, i,
                                    "batch " + std::to_string(batch_index));
      }
      row[0] = r.w;
      slab_c[(i - rows.begin) * bw + (e - batch.begin)] = r.c;
      slab_s[(i - rows.begin) * bw + (e - batch.begin)] = r.s;
      for (std::size_t j = i + 1; j < rows.end; ++j)
        apply_rotation(r.c, r.s, sgn, row[j - i], v[j]);
      const std::uint64_t tail = rows.end - i - 1;
      tally.counts.computes += 1;
      tally.counts.applies += tail;
      tally.counts.elem_reads += 2 + 2 * tail;
      tally.counts.elem_writes += 3 + 2 * tail;
      tally.traffic.bytes_L_read += tail * es;
      tally.traffic.bytes_L_written += tail * es;
    }
  }
}

/// One rectangle of an off-diagonal panel. Infallible arithmetic.
template <element T>
void run_rect(TriFactor<T>& L, UpdateMat<T>& V, sigma sg, const RectTask& task,
              std::size_t tpb, std::span<const T> slab_c,
              std::span<const T> slab_s, TaskTally& tally) {
  const std::size_t bw = task.batch.size();
  const std::size_t width = task.cols.size();
  const T sgn = sign_of<T>(sg);
  constexpr std::uint64_t es = sizeof(T);

  // Register scratch: one V entry per (column, batch column).
  std::vector<T> regs(tpb * bw);
  // Shared scratch: c and s for every (tile row, batch column).
  std::vector<T> shared_c(tpb * bw);
  std::vector<T> shared_s(tpb * bw);
  tally.register_bytes = std::max<std::uint64_t>(tally.register_bytes, regs.size() * es);
  tally.shared_bytes = std::max<std::uint64_t>(
      tally.shared_bytes, (shared_c.size() + shared_s.size()) * es);

  for (std::size_t col = 0; col < width; ++col)
    for (std::size_t e = 0; e < bw; ++e)
      regs[col * bw + e] = V(task.cols.begin + col, task.batch.begin + e);
  tally.traffic.bytes_V_read += width * bw * es;
  tally.counts.elem_reads += width * bw;

  for (std::size_t t0 = task.rows.begin; t0 < task.rows.end; t0 += tpb) {
    const std::size_t t1 = std::min(task.rows.end, t0 + tpb);
    const std::size_t slab_off = (t0 - task.rows.begin) * bw;
    std::copy_n(slab_c.begin() + slab_off, (t1 - t0) * bw, shared_c.begin());
    std::copy_n(slab_s.begin() + slab_off, (t1 - t0) * bw, shared_s.begin());
    tally.tiles += 1;
    tally.traffic.bytes_cs_read += (t1 - t0) * bw * 2 * es;
    tally.counts.elem_reads += (t1 - t0) * bw * 2;

    for (std::size_t i = t0; i < t1; ++i) {
      const T* cs = shared_c.data() + (i - t0) * bw;
      const T* ss = shared_s.data() + (i - t0) * bw;
      T* lrow = &L(i, task.cols.begin);
      for (std::size_t col = 0; col < width; ++col) {
        T l = lrow[col];
        T* v = regs.data() + col * bw;
        for (std::size_t e = 0; e < bw; ++e) apply_rotation(cs[e], ss[e], sgn, l, v[e]);
        lrow[col] = l;
      }
    }
    const std::uint64_t elems = (t1 - t0) * width;
    tally.counts.applies += elems * bw;
    tally.counts.elem_reads += elems;
    tally.counts.elem_writes += elems;
    tally.traffic.bytes_L_read += elems * bw * es;
    tally.traffic.bytes_L_written += elems * bw * es;
    tally.traffic.bytes_L_global_read += elems * es;
    tally.traffic.bytes_L_global_written += elems * es;
  }

  for (std::size_t col = 0; col < width; ++col)
    for (std::size_t e = 0; e < bw; ++e)
      V(task.cols.begin + col, task.batch.begin + e) = regs[col * bw + e];
  tally.traffic.bytes_V_written += width * bw * es;
  tally.counts.elem_writes += width * bw;
}

inline void merge(TrafficStats& stats, OpCounts& counts, std::size_t phase,
                  const TaskTally& t) {
  counts += t.counts;
  stats.phases[phase] += t.traffic;
  stats.bytes_L_read += t.traffic.bytes_L_read;
  stats.bytes_L_written += t.traffic.bytes_L_written;
  stats.bytes_L_global_read += t.traffic.bytes_L_global_read;
  stats.bytes_L_global_written += t.traffic.bytes_L_global_written;
  stats.bytes_V_read += t.traffic.bytes_V_read;
  stats.bytes_V_written += t.traffic.bytes_V_written;
  stats.bytes_cs_read += t.traffic.bytes_cs_read;
  stats.tiles += t.tiles;
  stats.scratch_register_peak = std::max(stats.scratch_register_peak, t.register_bytes);
  stats.scratch_shared_peak = std::max(stats.scratch_shared_peak, t.shared_bytes);
}

}  // namespace detail

/// Panelled rank-k modify on an existing pool. L and V are mutated; counters
/// accumulate into `stats` and `counts`. An indefinite downdate can only be
/// raised by a diagonal chunk; the exception names the update column and row.
template <element T>
void run_panelled(ThreadPool& pool, TriFactor<T>& L, UpdateMat<T>& V, sigma sg,
                  const PanelParams& params, TrafficStats& stats,
                  OpCounts& counts, ScheduleTrace* trace = nullptr) {
  detail::require_length(L.n(), V.n(), "run_panelled");
  const PanelPlan plan = build_plan(L.n(), V.k(), params);
  const std::size_t tpb = params.threads_per_block;

  stats.chunk_edge = plan.chunk;
  stats.batches = plan.batches.size();
  stats.element_bytes = sizeof(T);
  if (stats.phases.size() != plan.phases.size()) {
    stats.phases.assign(plan.phases.size(), PhaseTraffic{});
    for (std::size_t p = 0; p < plan.phases.size(); ++p)
      stats.phases[p].kind = plan.phases[p].kind;
  }

  std::vector<T> slab_c(plan.chunk * params.elements_per_thread);
  std::vector<T> slab_s(plan.chunk * params.elements_per_thread);
  std::vector<std::function<void()>> jobs;
  std::vector<detail::TaskTally> tallies;

  for (std::size_t b = 0; b < plan.batches.size(); ++b) {
    const Range batch = plan.batches[b];
    for (std::size_t p = 0; p < plan.phases.size(); ++p) {
      const Phase& phase = plan.phases[p];
      const std::size_t seq = b * plan.phases.size() + p;
      if (phase.kind == phase_kind::diagonal) {
        const auto start = trace ? trace->tick() : 0;
        detail::TaskTally tally;
        detail::run_diagonal(L, V, sg, phase.rows, batch, b, slab_c, slab_s,
                             tally);
        detail::merge(stats, counts, p, tally);
        if (trace) trace->record(seq, start, trace->tick());
        continue;
      }
      const auto tasks = plan.tasks(p, b);
      tallies.assign(tasks.size(), detail::TaskTally{});
      jobs.clear();
      const std::span<const T> cs(slab_c.data(), phase.rows.size() * batch.size());
      const std::span<const T> ss(slab_s.data(), phase.rows.size() * batch.size());
      for (std::size_t t = 0; t < tasks.size(); ++t) {
        jobs.emplace_back([&, t, seq] {
          const auto start = trace ? trace->tick() : 0;
          detail::run_rect(L, V, sg, tasks[t], tpb, cs, ss, tallies[t]);
          if (trace) trace->record(seq, start, trace->tick());
        });
      }
      pool.run_all(jobs);
      for (const auto& tally : tallies) detail::merge(stats, counts, p, tally);
      stats.kernel_launch_equivalents += 1;
    }
  }
}

/// Convenience overload that owns a pool of params.workers threads.
template <element T>
void run_panelled(TriFactor<T>& L, UpdateMat<T>& V, sigma sg,
                  const PanelParams& params, TrafficStats& stats,
                  OpCounts& counts) {
  params.validate();
  ThreadPool pool(params.workers);
  run_panelled(pool, L, V, sg, params, stats, counts);
}

/// Summary derived from a run's counters.
struct TrafficReport {
  std::size_t n = 0;
  std::size_t k = 0;
  std::size_t element_bytes = 0;
  std::size_t chunk_edge = 0;
  std::size_t batches = 0;
  std::uint64_t computes = 0;
  std::uint64_t applies = 0;
  TrafficStats stats;
  double intensity = 0.0;         // applies per byte of per-Apply L traffic
  double global_intensity = 0.0;  // applies per byte of rectangle L traffic
  std::uint64_t launch_equivalents = 0;  // ceil(n / D) per batch
  std::uint64_t naive_launches = 0;      // one launch per row per batch
};

inline TrafficReport traffic_report(const TrafficStats& stats,
                                    const OpCounts& counts, std::size_t n,
                                    std::size_t k) {
  TrafficReport r;
  r.n = n;
  r.k = k;
  r.element_bytes = stats.element_bytes;
  r.chunk_edge = stats.chunk_edge;
  r.batches = stats.batches;
  r.computes = counts.computes;
  r.applies = counts.applies;
  r.stats = stats;
  const auto l_bytes = stats.bytes_L_read + stats.bytes_L_written;
  const auto g_bytes = stats.bytes_L_global_read + stats.bytes_L_global_written;
  r.intensity = l_bytes ? static_cast<double>(counts.applies) / l_bytes : 0.0;
  r.global_intensity = g_bytes ? static_cast<double>(counts.applies) / g_bytes : 0.0;
  if (stats.chunk_edge > 0) {
    r.launch_equivalents =
        ((n + stats.chunk_edge - 1) / stats.chunk_edge) * stats.batches;
  }
  r.naive_launches = static_cast<std::uint64_t>(n) * stats.batches;
  return r;
}

inline std::string format_traffic_text(const TrafficReport& r) {
  std::ostringstream os;
  const auto& s = r.stats;
  os << "traffic n=" << r.n << " k=" << r.k << " element_bytes=" << r.element_bytes
     << " chunk=" << r.chunk_edge << " batches=" << r.batches << '\n'
     << "  computes=" << r.computes << " applies=" << r.applies << '\n'
     << "  L bytes read=" << s.bytes_L_read << " written=" << s.bytes_L_written
     << " (rectangle global read=" << s.bytes_L_global_read
     << " written=" << s.bytes_L_global_written << ")\n"
     << "  V bytes read=" << s.bytes_V_read << " written=" << s.bytes_V_written
     << "  c/s bytes read=" << s.bytes_cs_read << " tiles=" << s.tiles << '\n'
     << "  intensity=" << r.intensity << " applies/byte"
     << " global_intensity=" << r.global_intensity << " applies/byte\n"
     << "  launch_equivalents=" << r.launch_equivalents
     << " (off-diagonal kernels=" << s.kernel_launch_equivalents
     << ", naive per-row launches=" << r.naive_launches << ")\n"
     << "  scratch register_peak=" << s.scratch_register_peak
     << " shared_peak=" << s.scratch_shared_peak << '\n';
  for (std::size_t p = 0; p < s.phases.size(); ++p) {
    const auto& ph = s.phases[p];
    os << "  phase " << p << ' ' << to_string(ph.kind)
       << " L_read=" << ph.bytes_L_read << " L_written=" << ph.bytes_L_written
       << " L_global_read=" << ph.bytes_L_global_read
       << " L_global_written=" << ph.bytes_L_global_written
       << " V_read=" << ph.bytes_V_read << " V_written=" << ph.bytes_V_written
       << " cs_read=" << ph.bytes_cs_read << '\n';
  }
  return os.str();
}

/// CSV: a "total" row followed by one row per phase.
inline std::string format_traffic_csv(const TrafficReport& r) {
  std::ostringstream os;
  const auto& s = r.stats;
  os << "scope,kind,bytes_L_read,bytes_L_written,bytes_L_global_read,"
        "bytes_L_global_written,bytes_V_read,bytes_V_written,bytes_cs_read,"
        "applies,intensity,global_intensity,launch_equivalents,"
        "kernel_launch_equivalents,naive_launches,scratch_register_peak,"
        "scratch_shared_peak\n";
  os << "total,all," << s.bytes_L_read << ',' << s.bytes_L_written << ','
     << s.bytes_L_global_read << ',' << s.bytes_L_global_written << ','
     << s.bytes_V_read << ',' << s.bytes_V_written << ',' << s.bytes_cs_read
     << ',' << r.applies << ',' << r.intensity << ',' << r.global_intensity
     << ',' << r.launch_equivalents << ',' << s.kernel_launch_equivalents << ','
     << r.naive_launches << ',' << s.scratch_register_peak << ','
     << s.scratch_shared_peak << '\n';
  for (std::size_t p = 0; p < s.phases.size(); ++p) {
    const auto& ph = s.phases[p];
    os << "phase" << p << ',' << to_string(ph.kind) << ',' << ph.bytes_L_read
       << ',' << ph.bytes_L_written << ',' << ph.bytes_L_global_read << ','
       << ph.bytes_L_global_written << ',' << ph.bytes_V_read << ','
       << ph.bytes_V_written << ',' << ph.bytes_cs_read << ",,,,,,,,\n";
  }
  return os.str();
}

}  // namespace hyperchol
