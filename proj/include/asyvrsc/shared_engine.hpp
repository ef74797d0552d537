#pragma once

#include <atomic>
#include <memory>
#include <span>

#include "asyvrsc/delay.hpp"
#include "asyvrsc/solvers.hpp"

namespace asyvrsc {

/// Parameter vector with independently atomic cells. Whole-vector reads are
/// not consistent across cells while writers are active.
class SharedParameter {
 public:
  explicit SharedParameter(const Vector& initial);

  std::size_t size() const { return size_; }
  double load(std::size_t k) const { return cells_[k].load(std::memory_order_relaxed); }
  void store(const Vector& values);
  /// Cell-by-cell copy; may mix generations under concurrent writes.
  Vector read() const;
  void read_into(Vector& out) const;

  std::uint64_t version() const { return version_.load(std::memory_order_acquire); }
  /// Increments the update counter; returns the value before the increment.
  std::uint64_t bump_version() { return version_.fetch_add(1, std::memory_order_acq_rel); }

  void subtract(std::size_t k, double delta) { cells_[k].fetch_sub(delta, std::memory_order_relaxed); }

 private:
  std::size_t size_;
  std::unique_ptr<std::atomic<double>[]> cells_;
  std::atomic<std::uint64_t> version_{0};
};

/// cell_k <- cell_k - eta * grad[k] for every k in coords (distinct, in
/// range), then one version increment. Returns the pre-increment version.
std::uint64_t coordinate_update(SharedParameter& shared, std::span<const std::size_t> coords, const Vector& grad,
                                double eta);
/// Same, with `values[m]` the gradient entry for coords[m].
std::uint64_t coordinate_update(SharedParameter& shared, std::span<const std::size_t> coords,
                                std::span<const double> values, double eta);

/// h distinct coordinates drawn uniformly without replacement (partial
/// Fisher-Yates over `scratch`, which must hold a permutation of [d1]).
void sample_coordinates(Rng& rng, std::vector<std::size_t>& scratch, std::size_t h,
                        std::vector<std::size_t>& out);

enum class SharedScheduler { kFreeRunning, kReplay };

struct SharedOptions {
  SolverOptions solver;
  std::size_t workers = 1;
  std::size_t subset = 10;  ///< h, coordinates written per update
  SharedScheduler scheduler = SharedScheduler::kFreeRunning;
  DelaySchedule delays = DelaySchedule::zero();  ///< replay only

  void validate(std::size_t d1) const;
};

struct SharedResult {
  Vector x;
  std::vector<RunRecord> trajectory;
  DelayTrace delays;
  std::uint64_t oracle_queries = 0;
};

/// Per epoch: a snapshot computed by all workers over contiguous sample
/// blocks, then K updates on coordinate subsets. Worker w samples batches
/// from Rng(seed ^ w) and coordinates from its own stream.
///
/// Free-running: W threads claim update slots from an atomic counter and
/// race on the shared cells; staleness is the version at write minus the
/// version at read. Records are taken at epoch ends.
///
/// Replay: one thread executes update t on behalf of worker t mod W, reading
/// the exact iterate x_{t - tau} with tau from the delay schedule.
SharedResult run_shared(const CompositionProblem& problem, const SharedOptions& options, const Vector& x0,
                        const Monitor& monitor = {});

}  // namespace asyvrsc
