#include "pbe/pipeline.hpp"

#include <time.h>

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <ostream>
#include <thread>

namespace pbe {

namespace {

using Clock = std::chrono::steady_clock;

double thread_cpu_seconds() {
  timespec ts{};
  clock_gettime(CLOCK_THREAD_CPUTIME_ID, &ts);
  return static_cast<double>(ts.tv_sec) + 1e-9 * static_cast<double>(ts.tv_nsec);
}

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

struct FailureSlot {
  std::mutex mutex;
  bool failed = false;
  std::string what;
  int worker = -1;
  int level = -1;
  std::exception_ptr cause;

  void record(const std::string& w, int p, int n, std::exception_ptr e) {
    std::lock_guard lock(mutex);
    if (failed) return;
    failed = true;
    what = w;
    worker = p;
    level = n;
    cause = std::move(e);
  }
};

}  // namespace

PipelinePlan partition(int cells, int workers) {
  const int count = cells + 1;
  if (cells < 0 || workers < 1 || workers > count) {
    throw InvalidArgument("worker count " + std::to_string(workers) + " must lie in [1, M+1] = [1, " +
                          std::to_string(count) + "]");
  }
  PipelinePlan plan;
  plan.workers = workers;
  const int base = count / workers;
  const int extra = count % workers;
  int first = 0;
  for (int p = 0; p < workers; ++p) {
    const int size = base + (p < extra ? 1 : 0);
    plan.blocks.push_back({first, first + size - 1});
    first += size;
  }
  return plan;
}

void SyntheticKernel::burn() const {
  if (cost_ <= 0.0) return;
  if (mode_ == CostMode::Sleep) {
    std::this_thread::sleep_for(std::chrono::duration<double>(cost_));
    return;
  }
  const double until = thread_cpu_seconds() + cost_;
  volatile double sink = 0.0;
  while (thread_cpu_seconds() < until) {
    for (int i = 0; i < 256; ++i) sink = sink + 1.0;
  }
}

FieldSlice SyntheticKernel::initial(int m) {
  burn();
  return {Vector::Constant(length_, static_cast<double>(m)), 0, m};
}

FieldSlice SyntheticKernel::boundary(int n) {
  burn();
  return {Vector::Constant(length_, -static_cast<double>(n)), n, 0};
}

FieldSlice SyntheticKernel::step(int n, int m, const FieldSlice& prev_left,
                                 const FieldSlice& prev_same) {
  burn();
  return {0.5 * (prev_left.values + prev_same.values) + Vector::Constant(length_, 1.0), n, m};
}

PipelineRun execute_pipeline(const PipelinePlan& plan, int steps, const KernelFactory& factory,
                             const PipelineOptions& options) {
  if (steps < 0) throw InvalidArgument("negative step count");
  const int P = plan.workers;
  if (P < 1 || static_cast<int>(plan.blocks.size()) != P) {
    throw InvalidArgument("malformed pipeline plan");
  }

  // links[p] carries messages from worker p to worker p+1.
  std::vector<std::unique_ptr<Channel<BoundaryMessage>>> links;
  for (int p = 0; p + 1 < P; ++p) {
    links.push_back(
        std::make_unique<Channel<BoundaryMessage>>(static_cast<std::size_t>(std::max(steps, 1))));
  }

  std::vector<int> snapshot_levels = options.snapshot_levels;
  std::sort(snapshot_levels.begin(), snapshot_levels.end());
  auto wants_snapshot = [&](int n) {
    return n != steps && std::binary_search(snapshot_levels.begin(), snapshot_levels.end(), n);
  };

  PipelineRun run;
  run.plan = plan;
  run.workers.resize(static_cast<std::size_t>(P));
  std::vector<std::vector<FieldSlice>> finals(static_cast<std::size_t>(P));
  std::vector<std::map<int, std::vector<FieldSlice>>> snaps(static_cast<std::size_t>(P));
  FailureSlot failure;

  auto abort_all = [&] {
    for (auto& link : links) link->close();
  };

  const Clock::time_point start = Clock::now();

  auto worker = [&](int p) {
    WorkerStats& stats = run.workers[static_cast<std::size_t>(p)];
    const Block block = plan.blocks[static_cast<std::size_t>(p)];
    stats.block = block;
    stats.intervals.resize(static_cast<std::size_t>(steps) + 1);
    int level = 0;    // last completed level
    int working = 0;  // level being produced
    try {
      const double setup_begin = seconds_since(start);
      std::unique_ptr<SliceKernel> kernel = factory(p);
      stats.setup_seconds = seconds_since(start) - setup_begin;

      auto local = [&](int m) { return static_cast<std::size_t>(m - block.first); };
      std::vector<FieldSlice> prev(static_cast<std::size_t>(block.size()));
      std::vector<FieldSlice> cur(prev.size());

      auto compute_level = [&](int n, const FieldSlice* left) {
        const double wall0 = seconds_since(start);
        const double cpu0 = thread_cpu_seconds();
        for (int m = block.first; m <= block.last; ++m) {
          FieldSlice& out = (n == 0 ? prev : cur)[local(m)];
          if (m == 0) {
            out = kernel->boundary(n);
          } else if (n == 0) {
            out = kernel->initial(m);
          } else {
            const FieldSlice& l = m == block.first ? *left : prev[local(m - 1)];
            out = kernel->step(n, m, l, prev[local(m)]);
          }
        }
        const double wall1 = seconds_since(start);
        stats.busy_cpu_seconds += thread_cpu_seconds() - cpu0;
        stats.busy_wall_seconds += wall1 - wall0;
        stats.intervals[static_cast<std::size_t>(n)] = {wall0, wall1};
        if (n > 0) std::swap(prev, cur);
        if (wants_snapshot(n)) snaps[static_cast<std::size_t>(p)][n] = prev;
      };

      auto send_last = [&](int n) {
        if (p + 1 == P || n >= steps) return;
        links[static_cast<std::size_t>(p)]->push({p, n, prev.back()});
        ++stats.messages_sent;
      };

      compute_level(0, nullptr);
      send_last(0);

      for (int n = 1; n <= steps; ++n) {
        working = n;
        std::optional<BoundaryMessage> msg;
        if (p > 0) {
          const double wait0 = seconds_since(start);
          msg = links[static_cast<std::size_t>(p) - 1]->pop();
          stats.wait_seconds += seconds_since(start) - wait0;
          ++stats.messages_received;
          stats.clock_at_receipt.push_back(level);
          if (msg->n != level || msg->n != n - 1 || msg->sender != p - 1 ||
              msg->slice.m != block.first - 1) {
            throw Error("out-of-order boundary message (sender " + std::to_string(msg->sender) +
                        ", level " + std::to_string(msg->n) + ", slice " +
                        std::to_string(msg->slice.m) + ") while at level " + std::to_string(level));
          }
        }
        compute_level(n, msg ? &msg->slice : nullptr);
        level = n;
        send_last(n);
      }
      finals[static_cast<std::size_t>(p)] = std::move(prev);
    } catch (const ChannelClosed&) {
      // Another worker failed first and closed the links.
      failure.record("aborted", p, working, std::current_exception());
      abort_all();
    } catch (const std::exception& e) {
      failure.record(e.what(), p, working, std::current_exception());
      abort_all();
    }
  };

  std::vector<std::thread> threads;
  threads.reserve(static_cast<std::size_t>(P));
  for (int p = 0; p < P; ++p) threads.emplace_back(worker, p);
  for (auto& t : threads) t.join();
  run.total_seconds = seconds_since(start);

  if (failure.failed) {
    throw WorkerFailure("pipeline worker " + std::to_string(failure.worker) + " failed at level " +
                            std::to_string(failure.level) + ": " + failure.what,
                        failure.worker, failure.level, failure.cause);
  }

  for (const auto& link : links) run.message_count += link->pushed();

  run.surface.n = steps;
  for (auto& block : finals) {
    for (auto& s : block) run.surface.slices.push_back(std::move(s));
  }
  for (int n : snapshot_levels) {
    if (n < 0 || n > steps) continue;
    if (n == steps) {
      run.snapshots[n] = run.surface;
      continue;
    }
    SolutionSurface& s = run.snapshots[n];
    s.n = n;
    for (auto& per_worker : snaps) {
      for (auto& slice : per_worker[n]) s.slices.push_back(std::move(slice));
    }
  }
  return run;
}

PipelineRun run_pipeline(const ProblemSpec& spec, const SpatialMesh& mesh, const BasisSet& basis,
                         const LGrid& lgrid, const TimeGrid& tgrid, int workers,
                         const SolverConfig& solver, const PipelineOptions& options) {
  const PipelinePlan plan = partition(lgrid.cells(), workers);
  // Fail fast on the calling thread for CFL and configuration errors.
  for (int m = 1; m <= lgrid.cells(); ++m) backtrace(m, tgrid.tau(), lgrid, spec.growth);
  solver.validate();
  KernelFactory factory = [&](int) -> std::unique_ptr<SliceKernel> {
    return std::make_unique<SchemeKernel>(
        std::make_unique<Scheme>(spec, mesh, basis, lgrid, tgrid, solver));
  };
  return execute_pipeline(plan, tgrid.steps(), factory, options);
}

TimingReport timing_report(const PipelineRun& run, std::optional<double> baseline_total_seconds) {
  TimingReport r;
  r.workers = run.plan.workers;
  r.total_seconds = run.total_seconds;
  double sum = 0.0;
  for (const auto& w : run.workers) {
    sum += w.busy_cpu_seconds;
    r.max_worker_seconds = std::max(r.max_worker_seconds, w.busy_cpu_seconds);
  }
  r.avg_worker_seconds = run.workers.empty() ? 0.0 : sum / static_cast<double>(run.workers.size());
  r.speedup = baseline_total_seconds ? *baseline_total_seconds / run.total_seconds : 1.0;
  return r;
}

void write_timing_csv(std::ostream& out, const std::vector<TimingReport>& rows) {
  out << "workers,total_seconds,speedup,avg_worker_seconds,max_worker_seconds\n";
  char buf[160];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%d,%.6f,%.2f,%.6f,%.6f\n", r.workers, r.total_seconds,
                  r.speedup, r.avg_worker_seconds, r.max_worker_seconds);
    out << buf;
  }
}

std::vector<int> concurrency_profile(const PipelineRun& run) {
  std::vector<int> counts;
  if (run.workers.empty()) return counts;
  const auto& last = run.workers.back();
  const int steps = static_cast<int>(last.intervals.size()) - 1;
  for (int n = 1; n <= steps; ++n) {
    const StepInterval& iv = last.intervals[static_cast<std::size_t>(n)];
    const double probe = 0.5 * (iv.start + iv.end);
    int busy = 0;
    for (const auto& w : run.workers) {
      const bool active = std::any_of(w.intervals.begin(), w.intervals.end(), [&](const StepInterval& s) {
        return s.start <= probe && probe <= s.end;
      });
      busy += active ? 1 : 0;
    }
    counts.push_back(busy);
  }
  return counts;
}

}  // namespace pbe
