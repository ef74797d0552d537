#include "asyvrsc/delay.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <system_error>

#include "asyvrsc/rng.hpp"

namespace asyvrsc {

void DelayTrace::add(const DelayRecord& r) {
  records.push_back(r);
  max_observed = std::max(max_observed, r.tau);
}

void DelayTrace::merge(const DelayTrace& other) {
  records.insert(records.end(), other.records.begin(), other.records.end());
  max_observed = std::max(max_observed, other.max_observed);
}

void DelayTrace::sort() {
  std::stable_sort(records.begin(), records.end(), [](const DelayRecord& a, const DelayRecord& b) {
    return std::pair(a.epoch, a.iteration) < std::pair(b.epoch, b.iteration);
  });
}

DelaySchedule DelaySchedule::zero() { return {}; }

DelaySchedule DelaySchedule::round_robin(std::size_t workers) {
  if (workers == 0) throw std::invalid_argument("round_robin: workers must be positive");
  DelaySchedule s;
  s.kind_ = Kind::kRoundRobin;
  s.parameter_ = workers - 1;
  return s;
}

DelaySchedule DelaySchedule::bounded_uniform(std::size_t bound, std::uint64_t seed) {
  DelaySchedule s;
  s.kind_ = Kind::kBoundedUniform;
  s.parameter_ = bound;
  s.seed_ = seed;
  return s;
}

DelaySchedule DelaySchedule::from_entries(std::map<std::pair<std::size_t, std::size_t>, std::size_t> entries,
                                          std::size_t fallback) {
  DelaySchedule s;
  s.kind_ = Kind::kTable;
  s.parameter_ = fallback;
  s.table_ = std::move(entries);
  return s;
}

DelaySchedule DelaySchedule::from_file(const std::filesystem::path& path, std::size_t fallback) {
  std::ifstream in(path);
  if (!in) throw std::system_error(errno, std::generic_category(), "cannot open delay file " + path.string());
  std::map<std::pair<std::size_t, std::size_t>, std::size_t> entries;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    std::replace(line.begin(), line.end(), ',', ' ');
    std::istringstream ss(line);
    long long s = -1, t = -1, tau = -1;
    std::string rest;
    if (!(ss >> s >> t >> tau) || (ss >> rest) || s < 0 || t < 0 || tau < 0) {
      if (line_no == 1 && line.find('s') != std::string::npos) continue;  // header
      throw std::runtime_error(path.string() + ":" + std::to_string(line_no) + ": expected 's,t,tau'");
    }
    entries[{static_cast<std::size_t>(s), static_cast<std::size_t>(t)}] = static_cast<std::size_t>(tau);
  }
  return from_entries(std::move(entries), fallback);
}

std::size_t DelaySchedule::delay(std::size_t epoch, std::size_t t) const {
  std::size_t tau = 0;
  switch (kind_) {
    case Kind::kZero:
      break;
    case Kind::kRoundRobin:
      tau = parameter_;
      break;
    case Kind::kBoundedUniform: {
      Rng rng(splitmix64(stream_seed(seed_, Stream::kDelays, epoch) ^ t));
      tau = static_cast<std::size_t>(rng.index(parameter_ + 1));
      break;
    }
    case Kind::kTable: {
      const auto it = table_.find({epoch, t});
      tau = it == table_.end() ? parameter_ : it->second;
      break;
    }
  }
  return std::min(tau, t);
}

std::size_t DelaySchedule::max_delay() const {
  if (kind_ != Kind::kTable) return parameter_;
  std::size_t m = parameter_;
  for (const auto& [key, tau] : table_) m = std::max(m, tau);
  return m;
}

}  // namespace asyvrsc
