#pragma once

#include <filesystem>
#include <map>

#include "asyvrsc/delay.hpp"
#include "asyvrsc/solvers.hpp"
#include "asyvrsc/transport.hpp"

namespace asyvrsc {

/// Contiguous sample blocks owned by each worker.
struct Partition {
  std::vector<IndexRange> inner_blocks;  ///< N_k over [n2]
  std::vector<IndexRange> outer_blocks;  ///< M_k over [n1]

  /// First n mod W blocks get one extra index.
  static Partition even(const Dimensions& dims, std::size_t workers);
  std::size_t workers() const { return inner_blocks.size(); }
  /// Blocks must be disjoint, ordered and cover [n2] and [n1].
  void validate(const Dimensions& dims) const;
};

/// Chooses whose gradient the master applies at update t. Every worker holds
/// exactly one outstanding iterate; `reads[w]` is the iteration of worker w's.
class InterleavingScript {
 public:
  /// Worker t mod W.
  static InterleavingScript round_robin();
  /// Serves the worker with the oldest read among those whose staleness is
  /// at most `bound`; workers that fall further behind are never served
  /// again within the epoch, so at most bound + 1 workers stay active.
  static InterleavingScript oldest_within(std::size_t bound);
  /// CSV lines `s,t,worker`; unlisted updates fall back to round robin.
  static InterleavingScript from_file(const std::filesystem::path& path);
  static InterleavingScript from_entries(std::map<std::pair<std::size_t, std::size_t>, std::size_t> entries);

  std::size_t pick(std::size_t epoch, std::size_t t, const std::vector<std::size_t>& reads) const;
  std::optional<std::size_t> bound() const;

 private:
  enum class Kind { kRoundRobin, kOldestWithin, kTable };
  Kind kind_ = Kind::kRoundRobin;
  std::size_t bound_ = 0;
  std::map<std::pair<std::size_t, std::size_t>, std::size_t> table_;
};

enum class DistributedScheduler { kFifo, kScript };

struct DistributedOptions {
  SolverOptions solver;
  std::size_t workers = 1;
  TransportKind transport = TransportKind::kInProcess;
  DistributedScheduler scheduler = DistributedScheduler::kFifo;
  InterleavingScript script = InterleavingScript::round_robin();
  /// Keep every master iterate, every iterate a worker received and every
  /// gradient it sent (memory grows with S K d1).
  bool log_traffic = false;

  void validate() const;
};

struct IterateLogEntry {
  std::size_t worker = 0;  ///< receiving or sending worker; unused for master iterates
  std::size_t epoch = 0;
  std::size_t iteration = 0;
  Vector values;
};

struct TrafficLog {
  std::vector<IterateLogEntry> master_iterates;  ///< x_t for t = 0..K of every epoch
  std::vector<IterateLogEntry> received;         ///< Param payloads as seen by workers
  std::vector<IterateLogEntry> gradients;        ///< Gradient payloads, iteration = read iteration
};

struct DistributedResult {
  Vector x;
  std::vector<RunRecord> trajectory;
  DelayTrace delays;
  std::uint64_t oracle_queries = 0;
  std::vector<std::size_t> updates_per_epoch;
  std::size_t stragglers = 0;  ///< gradients of a finished epoch, dropped on arrival
  TrafficLog traffic;
};

/// Master side of the synchronous snapshot phase for `epoch`. Gradients left
/// over from earlier epochs are dropped and counted in `stragglers`.
Snapshot master_phase1(const CompositionProblem& problem, const Vector& x_tilde, const Partition& partition,
                       Transport& transport, std::size_t epoch, std::size_t* stragglers = nullptr);

struct WorkerConfig {
  std::size_t worker = 0;
  Partition partition;
  std::size_t batch_a = 1;
  std::size_t batch_b = 1;
  std::uint64_t seed = 1;
  /// Optional sinks for received iterates and sent gradients.
  std::vector<IterateLogEntry>* received_log = nullptr;
  std::vector<IterateLogEntry>* gradient_log = nullptr;
};

/// Serves phase-1 requests and answers every Param with a variance-reduced
/// gradient at that iterate; returns on Shutdown. Throws ProtocolError on an
/// unexpected tag, a payload of the wrong size or an epoch that goes
/// backwards.
void worker_loop(const CompositionProblem& problem, const WorkerConfig& config, Transport& transport);

/// Master loop: per epoch a snapshot from worker partial sums, then K
/// serialized updates x <- x - eta g, each fresh iterate going back only to
/// the worker whose gradient was applied. Workers run as threads in this
/// process; with the socket transport every message crosses a socket as a
/// frame. Trajectory records at the start, after every epoch and every
/// monitor.record_every updates.
DistributedResult run_distributed(const CompositionProblem& problem, const DistributedOptions& options,
                                  const Vector& x0, const Monitor& monitor = {});

}  // namespace asyvrsc
