#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <thread>
#include <vector>

#include "asyvrsc/bounded_queue.hpp"
#include "asyvrsc/problem.hpp"

namespace asyvrsc {

/// One point of a convergence trajectory.
struct RunRecord {
  std::size_t epoch = 0;
  std::size_t iteration = 0;  ///< global update count since the start of the run
  double seconds = 0.0;
  double gap = 0.0;           ///< |f(x) - f(x*)|, NaN when no reference is known
  std::uint64_t queries = 0;  ///< cumulative oracle queries

  friend bool operator==(const RunRecord&, const RunRecord&) = default;
};

/// Writes `epoch,iter,seconds,gap,queries` with 17 significant digits.
void emit_csv(const std::vector<RunRecord>& records, const std::filesystem::path& path);
std::vector<RunRecord> parse_csv(const std::filesystem::path& path);

/// Observation hooks shared by the solvers and engines.
struct Monitor {
  /// f(x*); when unset the gap column is NaN and f is never evaluated.
  std::optional<double> reference_value;
  /// Intermediate records every this many updates (0: epoch ends only).
  std::size_t record_every = 0;
  /// Called after every applied update with the new iterate x_{t+1}. Not
  /// available for free-running shared-memory runs.
  std::function<void(std::size_t epoch, std::size_t t, const Vector& x)> on_iterate;
  /// Called when update t of an epoch reads its (possibly stale) point.
  std::function<void(std::size_t epoch, std::size_t t, std::size_t tau, const Vector& x_read)> on_read;

  double gap(const CompositionProblem& problem, const Vector& x) const;
};

/// Monotonic stopwatch that can exclude bookkeeping time.
class RunClock {
 public:
  RunClock() : start_(std::chrono::steady_clock::now()) {}
  double seconds() const;
  void pause();
  void resume();

 private:
  std::chrono::steady_clock::time_point start_;
  std::chrono::steady_clock::time_point paused_at_{};
  std::chrono::steady_clock::duration excluded_{};
  bool paused_ = false;
};

/// Evaluates objective gaps on a background thread so that the producer
/// only pays for copying x.
class TrajectoryLogger {
 public:
  TrajectoryLogger(const CompositionProblem& problem, std::optional<double> reference_value,
                   std::size_t capacity = 64);
  ~TrajectoryLogger();
  TrajectoryLogger(const TrajectoryLogger&) = delete;
  TrajectoryLogger& operator=(const TrajectoryLogger&) = delete;

  void submit(std::size_t epoch, std::size_t iteration, double seconds, std::uint64_t queries, Vector x);
  /// Waits for outstanding evaluations; records come back in submission order.
  std::vector<RunRecord> finish();

 private:
  struct Item {
    RunRecord record;
    Vector x;
  };
  void run();

  const CompositionProblem& problem_;
  std::optional<double> reference_;
  BoundedQueue<Item> queue_;
  std::vector<RunRecord> records_;
  std::thread thread_;
  bool finished_ = false;
};

}  // namespace asyvrsc
