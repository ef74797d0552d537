#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <utility>
#include <vector>

namespace asyvrsc {

/// Staleness of one applied update, counted in completed updates.
struct DelayRecord {
  std::size_t epoch = 0;
  std::size_t iteration = 0;
  std::size_t tau = 0;
  std::size_t worker = 0;

  friend bool operator==(const DelayRecord&, const DelayRecord&) = default;
};

struct DelayTrace {
  std::vector<DelayRecord> records;
  std::optional<std::size_t> bound;  ///< set when a scheduler enforced it
  std::size_t max_observed = 0;

  void add(const DelayRecord& r);
  /// Appends `other` and keeps max_observed consistent.
  void merge(const DelayTrace& other);
  /// Sorts records by (epoch, iteration).
  void sort();
};

/// Delay script for deterministic replay: tau for update t of epoch s.
/// Values are clamped to t, the number of updates already applied.
class DelaySchedule {
 public:
  static DelaySchedule zero();
  /// tau = min(t, workers - 1), i.e. a steady round-robin pipeline.
  static DelaySchedule round_robin(std::size_t workers);
  /// tau drawn uniformly from {0, ..., bound}, reproducible from seed.
  static DelaySchedule bounded_uniform(std::size_t bound, std::uint64_t seed);
  /// CSV lines `s,t,tau`; updates missing from the file use `fallback`.
  static DelaySchedule from_file(const std::filesystem::path& path, std::size_t fallback = 0);
  static DelaySchedule from_entries(std::map<std::pair<std::size_t, std::size_t>, std::size_t> entries,
                                    std::size_t fallback = 0);

  std::size_t delay(std::size_t epoch, std::size_t t) const;
  /// Largest delay the schedule can produce before clamping.
  std::size_t max_delay() const;

 private:
  enum class Kind { kZero, kRoundRobin, kBoundedUniform, kTable };
  Kind kind_ = Kind::kZero;
  std::size_t parameter_ = 0;
  std::uint64_t seed_ = 0;
  std::map<std::pair<std::size_t, std::size_t>, std::size_t> table_;
};

}  // namespace asyvrsc
