#pragma once

#include <condition_variable>
#include <cstddef>
#include <deque>
#include <exception>
#include <functional>
#include <iosfwd>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "pbe/error.hpp"
#include "pbe/stepper.hpp"

namespace pbe {

/// Contiguous, inclusive range of internal-coordinate indices.
struct Block {
  int first = 0;
  int last = 0;
  int size() const { return last - first + 1; }
};

struct PipelinePlan {
  int workers = 0;
  std::vector<Block> blocks;
};

/// Splits {0..M} into P contiguous blocks; the first (M+1) mod P blocks get
/// one extra index. Throws InvalidArgument unless 1 <= P <= M+1.
PipelinePlan partition(int cells, int workers);

/// Last slice of block `sender` at level n, sent to block sender+1.
struct BoundaryMessage {
  int sender = 0;
  int n = 0;
  FieldSlice slice;
};

class ChannelClosed : public Error {
 public:
  ChannelClosed() : Error("channel closed") {}
};

/// Bounded FIFO between two workers. push() blocks while full, pop() while
/// empty; close() wakes every waiter, after which both throw ChannelClosed.
template <typename T>
class Channel {
 public:
  explicit Channel(std::size_t capacity) : capacity_(capacity == 0 ? 1 : capacity) {}

  void push(T value) {
    std::unique_lock lock(mutex_);
    not_full_.wait(lock, [&] { return closed_ || queue_.size() < capacity_; });
    if (closed_) throw ChannelClosed();
    queue_.push_back(std::move(value));
    ++pushed_;
    not_empty_.notify_one();
  }

  T pop() {
    std::unique_lock lock(mutex_);
    not_empty_.wait(lock, [&] { return closed_ || !queue_.empty(); });
    if (queue_.empty()) throw ChannelClosed();
    T value = std::move(queue_.front());
    queue_.pop_front();
    not_full_.notify_one();
    return value;
  }

  void close() {
    std::lock_guard lock(mutex_);
    closed_ = true;
    not_empty_.notify_all();
    not_full_.notify_all();
  }

  std::size_t pushed() const {
    std::lock_guard lock(mutex_);
    return pushed_;
  }

 private:
  mutable std::mutex mutex_;
  std::condition_variable not_empty_;
  std::condition_variable not_full_;
  std::deque<T> queue_;
  std::size_t capacity_;
  std::size_t pushed_ = 0;
  bool closed_ = false;
};

/// Produces the slices a worker owns. The real kernel wraps a Scheme; tests
/// and the scaling harness also use a synthetic fixed-cost kernel.
class SliceKernel {
 public:
  virtual ~SliceKernel() = default;
  virtual FieldSlice initial(int m) = 0;
  virtual FieldSlice boundary(int n) = 0;
  virtual FieldSlice step(int n, int m, const FieldSlice& prev_left, const FieldSlice& prev_same) = 0;
};

/// Called once per worker, on that worker's thread.
using KernelFactory = std::function<std::unique_ptr<SliceKernel>(int worker)>;

class SchemeKernel : public SliceKernel {
 public:
  explicit SchemeKernel(std::unique_ptr<Scheme> scheme) : scheme_(std::move(scheme)) {}
  FieldSlice initial(int m) override { return scheme_->initial_slice(m); }
  FieldSlice boundary(int n) override { return scheme_->boundary_slice(n); }
  FieldSlice step(int n, int m, const FieldSlice& prev_left, const FieldSlice& prev_same) override {
    return scheme_->step_slice(n, m, prev_left, prev_same);
  }

 private:
  std::unique_ptr<Scheme> scheme_;
};

enum class CostMode { Sleep, Spin };

/// Each slice costs a fixed duration and produces a small deterministic
/// vector that still depends on its left neighbour.
class SyntheticKernel : public SliceKernel {
 public:
  SyntheticKernel(double seconds_per_slice, CostMode mode, Eigen::Index length = 4)
      : cost_(seconds_per_slice), mode_(mode), length_(length) {}
  FieldSlice initial(int m) override;
  FieldSlice boundary(int n) override;
  FieldSlice step(int n, int m, const FieldSlice& prev_left, const FieldSlice& prev_same) override;

 private:
  void burn() const;
  double cost_;
  CostMode mode_;
  Eigen::Index length_;
};

/// Wall-clock interval of one worker's level-n computation, seconds from run start.
struct StepInterval {
  double start = 0.0;
  double end = 0.0;
};

struct WorkerStats {
  Block block;
  double setup_seconds = 0.0;
  /// Thread CPU time spent computing slices (setup excluded).
  double busy_cpu_seconds = 0.0;
  /// Wall time spent computing slices (setup excluded).
  double busy_wall_seconds = 0.0;
  double wait_seconds = 0.0;
  std::size_t messages_sent = 0;
  std::size_t messages_received = 0;
  /// Index n holds the level-n interval; index 0 is initialization.
  std::vector<StepInterval> intervals;
  /// The worker's completed level at each message receipt, in receipt order.
  std::vector<int> clock_at_receipt;
};

struct PipelineOptions {
  /// Levels whose full surface should be gathered besides the final one.
  std::vector<int> snapshot_levels;
};

struct PipelineRun {
  PipelinePlan plan;
  SolutionSurface surface;
  std::map<int, SolutionSurface> snapshots;
  std::vector<WorkerStats> workers;
  double total_seconds = 0.0;
  std::size_t message_count = 0;
};

/// Failure inside a worker, with the worker and level where it happened.
class WorkerFailure : public Error {
 public:
  WorkerFailure(const std::string& what, int worker, int level, std::exception_ptr cause)
      : Error(what), worker_(worker), level_(level), cause_(std::move(cause)) {}
  int worker() const noexcept { return worker_; }
  int level() const noexcept { return level_; }
  /// The exception thrown inside the worker.
  std::exception_ptr cause() const noexcept { return cause_; }

 private:
  int worker_;
  int level_;
  std::exception_ptr cause_;
};

/// Runs `steps` levels with one thread per block. Worker p starts level n
/// only after receiving the level n-1 last slice of worker p-1; worker 0
/// produces index 0 from the kernel's boundary(). Throws WorkerFailure.
PipelineRun execute_pipeline(const PipelinePlan& plan, int steps, const KernelFactory& factory,
                             const PipelineOptions& options = {});

/// The fully discrete scheme on P workers; each worker owns a private Scheme.
PipelineRun run_pipeline(const ProblemSpec& spec, const SpatialMesh& mesh, const BasisSet& basis,
                         const LGrid& lgrid, const TimeGrid& tgrid, int workers,
                         const SolverConfig& solver = {}, const PipelineOptions& options = {});

struct TimingReport {
  int workers = 0;
  double total_seconds = 0.0;
  double speedup = 1.0;
  double avg_worker_seconds = 0.0;
  double max_worker_seconds = 0.0;
};

/// Per-worker busy CPU time averaged and maximized over workers; speedup is
/// baseline_total_seconds / total_seconds (1.0 when no baseline is given).
TimingReport timing_report(const PipelineRun& run,
                           std::optional<double> baseline_total_seconds = std::nullopt);

void write_timing_csv(std::ostream& out, const std::vector<TimingReport>& rows);

/// For each level n in [1, steps], the number of workers whose level
/// computation overlaps the midpoint of the last worker's level-n interval.
std::vector<int> concurrency_profile(const PipelineRun& run);

}  // namespace pbe
