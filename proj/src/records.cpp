#include "asyvrsc/records.hpp"

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <sstream>
#include <system_error>

#include "asyvrsc/format.hpp"

namespace asyvrsc {

namespace {
constexpr const char* kHeader = "epoch,iter,seconds,gap,queries";

double parse_double(const std::string& field) {
  if (field == "nan" || field == "-nan") return std::numeric_limits<double>::quiet_NaN();
  // strtod rather than stod: subnormals are valid values, not range errors.
  if (field.empty()) throw std::invalid_argument("empty number");
  char* end = nullptr;
  const double v = std::strtod(field.c_str(), &end);
  if (end != field.c_str() + field.size()) throw std::invalid_argument("bad number '" + field + "'");
  return v;
}

std::uint64_t parse_unsigned(const std::string& field) {
  if (field.empty() || field[0] == '-') throw std::invalid_argument("bad count '" + field + "'");
  std::size_t used = 0;
  const auto v = std::stoull(field, &used);
  if (used != field.size()) throw std::invalid_argument("bad count '" + field + "'");
  return v;
}
}  // namespace

void emit_csv(const std::vector<RunRecord>& records, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::system_error(errno, std::generic_category(), "cannot open " + path.string());
  out << kHeader << '\n';
  for (const auto& r : records) {
    out << r.epoch << ',' << r.iteration << ',' << format_double(r.seconds) << ',' << format_double(r.gap) << ','
        << r.queries << '\n';
  }
  out.flush();
  if (!out) throw std::system_error(errno, std::generic_category(), "write failed for " + path.string());
}

std::vector<RunRecord> parse_csv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::system_error(errno, std::generic_category(), "cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line) || line != kHeader) {
    throw std::runtime_error(path.string() + ": missing header '" + kHeader + "'");
  }
  std::vector<RunRecord> records;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string field;
    while (std::getline(ss, field, ',')) fields.push_back(field);
    if (fields.size() != 5) {
      throw std::runtime_error(path.string() + ":" + std::to_string(line_no) + ": expected 5 fields");
    }
    try {
      RunRecord r;
      r.epoch = parse_unsigned(fields[0]);
      r.iteration = parse_unsigned(fields[1]);
      r.seconds = parse_double(fields[2]);
      r.gap = parse_double(fields[3]);
      r.queries = parse_unsigned(fields[4]);
      records.push_back(r);
    } catch (const std::exception& e) {
      throw std::runtime_error(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return records;
}

double Monitor::gap(const CompositionProblem& problem, const Vector& x) const {
  if (!reference_value) return std::numeric_limits<double>::quiet_NaN();
  return std::abs(evaluate_objective(problem, x) - *reference_value);
}

double RunClock::seconds() const {
  const auto now = paused_ ? paused_at_ : std::chrono::steady_clock::now();
  return std::chrono::duration<double>(now - start_ - excluded_).count();
}

void RunClock::pause() {
  if (paused_) return;
  paused_ = true;
  paused_at_ = std::chrono::steady_clock::now();
}

void RunClock::resume() {
  if (!paused_) return;
  paused_ = false;
  excluded_ += std::chrono::steady_clock::now() - paused_at_;
}

TrajectoryLogger::TrajectoryLogger(const CompositionProblem& problem, std::optional<double> reference_value,
                                   std::size_t capacity)
    : problem_(problem), reference_(reference_value), queue_(capacity) {
  thread_ = std::thread([this] { run(); });
}

TrajectoryLogger::~TrajectoryLogger() {
  if (!finished_) {
    queue_.close();
    thread_.join();
  }
}

void TrajectoryLogger::submit(std::size_t epoch, std::size_t iteration, double seconds, std::uint64_t queries,
                              Vector x) {
  queue_.push(Item{RunRecord{epoch, iteration, seconds, 0.0, queries}, std::move(x)});
}

std::vector<RunRecord> TrajectoryLogger::finish() {
  if (!finished_) {
    queue_.close();
    thread_.join();
    finished_ = true;
  }
  return records_;
}

void TrajectoryLogger::run() {
  Monitor scorer;
  scorer.reference_value = reference_;
  while (auto item = queue_.pop()) {
    item->record.gap = scorer.gap(problem_, item->x);
    records_.push_back(item->record);
  }
}

}  // namespace asyvrsc
