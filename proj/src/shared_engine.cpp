#include "asyvrsc/shared_engine.hpp"

#include <deque>
#include <numeric>
#include <stdexcept>
#include <string>
#include <thread>

namespace asyvrsc {

namespace {

void check_coordinates(const SharedParameter& shared, std::span<const std::size_t> coords) {
  std::vector<bool> seen(shared.size(), false);
  for (const auto k : coords) {
    if (k >= shared.size()) {
      throw std::out_of_range("coordinate " + std::to_string(k) + " out of range [0, " +
                              std::to_string(shared.size()) + ")");
    }
    if (seen[k]) throw std::invalid_argument("duplicate coordinate " + std::to_string(k));
    seen[k] = true;
  }
}

// Per-worker sampling state, persistent across epochs.
struct WorkerState {
  WorkerState(std::uint64_t seed, std::size_t w, std::size_t d1)
      : batches(seed ^ static_cast<std::uint64_t>(w)),
        coordinates(stream_seed(seed, Stream::kCoordinates, w)),
        scratch(d1) {
    std::iota(scratch.begin(), scratch.end(), std::size_t{0});
  }
  Rng batches;
  Rng coordinates;
  std::vector<std::size_t> scratch;
  std::vector<std::size_t> coords;
  std::vector<double> values;
};

}  // namespace

SharedParameter::SharedParameter(const Vector& initial)
    : size_(static_cast<std::size_t>(initial.size())), cells_(new std::atomic<double>[size_]) {
  store(initial);
}

void SharedParameter::store(const Vector& values) {
  if (static_cast<std::size_t>(values.size()) != size_) throw DimensionError("SharedParameter::store size");
  for (std::size_t k = 0; k < size_; ++k) cells_[k].store(values[static_cast<Eigen::Index>(k)]);
}

Vector SharedParameter::read() const {
  Vector out;
  read_into(out);
  return out;
}

void SharedParameter::read_into(Vector& out) const {
  out.resize(static_cast<Eigen::Index>(size_));
  for (std::size_t k = 0; k < size_; ++k) out[static_cast<Eigen::Index>(k)] = load(k);
}

std::uint64_t coordinate_update(SharedParameter& shared, std::span<const std::size_t> coords,
                                std::span<const double> values, double eta) {
  if (coords.size() != values.size()) throw DimensionError("coordinate_update: values do not match coords");
  check_coordinates(shared, coords);
  for (std::size_t m = 0; m < coords.size(); ++m) shared.subtract(coords[m], eta * values[m]);
  return shared.bump_version();
}

std::uint64_t coordinate_update(SharedParameter& shared, std::span<const std::size_t> coords, const Vector& grad,
                                double eta) {
  if (static_cast<std::size_t>(grad.size()) != shared.size()) {
    throw DimensionError("coordinate_update: gradient length " + std::to_string(grad.size()) + ", expected " +
                         std::to_string(shared.size()));
  }
  std::vector<double> values(coords.size());
  for (std::size_t m = 0; m < coords.size(); ++m) {
    if (coords[m] >= shared.size()) {
      throw std::out_of_range("coordinate " + std::to_string(coords[m]) + " out of range");
    }
    values[m] = grad[static_cast<Eigen::Index>(coords[m])];
  }
  return coordinate_update(shared, coords, values, eta);
}

void sample_coordinates(Rng& rng, std::vector<std::size_t>& scratch, std::size_t h, std::vector<std::size_t>& out) {
  if (h > scratch.size()) throw std::invalid_argument("subset larger than the dimension");
  for (std::size_t m = 0; m < h; ++m) {
    const auto pick = m + static_cast<std::size_t>(rng.index(scratch.size() - m));
    std::swap(scratch[m], scratch[pick]);
  }
  out.assign(scratch.begin(), scratch.begin() + static_cast<std::ptrdiff_t>(h));
}

void SharedOptions::validate(std::size_t d1) const {
  solver.validate();
  if (workers == 0) throw std::invalid_argument("workers must be at least 1");
  if (subset == 0 || subset > d1) {
    throw std::invalid_argument("subset size must lie in [1, " + std::to_string(d1) + "]");
  }
}

SharedResult run_shared(const CompositionProblem& problem, const SharedOptions& options, const Vector& x0,
                        const Monitor& monitor) {
  require_parameter_length(problem, x0);
  const auto dims = problem.dimensions();
  options.validate(dims.d1);
  const auto& so = options.solver;
  const std::size_t W = options.workers;
  const std::size_t K = so.inner_iterations;
  const std::size_t h = options.subset;
  const bool replay = options.scheduler == SharedScheduler::kReplay;

  SharedResult result;
  if (replay) result.delays.bound = options.delays.max_delay();
  std::vector<WorkerState> workers;
  workers.reserve(W);
  for (std::size_t w = 0; w < W; ++w) workers.emplace_back(so.seed, w, dims.d1);

  SharedParameter shared(x0);
  Vector x_tilde = x0;
  std::uint64_t queries = 0;
  std::size_t global = 0;
  RunClock clock;
  TrajectoryLogger logger(problem, monitor.reference_value);
  logger.submit(0, 0, 0.0, 0, x0);

  for (std::size_t s = 1; s <= so.epochs; ++s) {
    // Phase 1 completes (threads joined) before any update of this epoch.
    const Snapshot snapshot = take_snapshot(problem, x_tilde, W, s);
    queries += snapshot_queries(dims);
    shared.store(x_tilde);
    const std::size_t r = anchor_index(so, s);
    Vector anchor;

    if (replay) {
      // Ring of the last max_delay + 1 iterates; x_t lives at slot t mod size.
      const std::size_t window = options.delays.max_delay() + 1;
      std::vector<Vector> history(std::min(window, K + 1));
      history[0] = x_tilde;
      Vector current = x_tilde;
      for (std::size_t t = 0; t < K; ++t) {
        if (t == r) anchor = current;
        const std::size_t tau = options.delays.delay(s, t);
        const Vector& x_read = history[(t - tau) % history.size()];
        if (monitor.on_read) monitor.on_read(s, t, tau, x_read);
        auto& ws = workers[t % W];
        const MiniBatch batch = MiniBatch::sample(ws.batches, dims, so.batch_a, so.batch_b);
        sample_coordinates(ws.coordinates, ws.scratch, h, ws.coords);
        ws.values.resize(h);
        variance_reduced_gradient(problem, snapshot, x_read, batch, ws.coords, ws.values);
        coordinate_update(shared, ws.coords, ws.values, so.learning_rate);
        result.delays.add(DelayRecord{s, t, tau, t % W});
        shared.read_into(current);
        history[(t + 1) % history.size()] = current;
        queries += update_queries(so.batch_a, so.batch_b);
        ++global;
        if (monitor.on_iterate) monitor.on_iterate(s, t, current);
        if (monitor.record_every != 0 && (t + 1) % monitor.record_every == 0 && t + 1 < K) {
          logger.submit(s, global, clock.seconds(), queries, current);
        }
      }
    } else {
      std::atomic<std::size_t> next{0};
      const std::uint64_t base_version = shared.version();
      std::vector<DelayTrace> traces(W);
      std::vector<Vector> anchors(W);
      {
        std::vector<std::jthread> pool;
        pool.reserve(W);
        for (std::size_t w = 0; w < W; ++w) {
          pool.emplace_back([&, w] {
            auto& ws = workers[w];
            Vector x_read;
            for (;;) {
              const std::size_t t = next.fetch_add(1, std::memory_order_relaxed);
              if (t >= K) break;
              const std::uint64_t read_version = shared.version();
              shared.read_into(x_read);
              if (t == r) anchors[w] = x_read;
              const MiniBatch batch = MiniBatch::sample(ws.batches, dims, so.batch_a, so.batch_b);
              sample_coordinates(ws.coordinates, ws.scratch, h, ws.coords);
              ws.values.resize(h);
              variance_reduced_gradient(problem, snapshot, x_read, batch, ws.coords, ws.values);
              const std::uint64_t write_version = coordinate_update(shared, ws.coords, ws.values, so.learning_rate);
              traces[w].add(DelayRecord{s, static_cast<std::size_t>(write_version - base_version),
                                        static_cast<std::size_t>(write_version - read_version), w});
            }
          });
        }
      }
      for (std::size_t w = 0; w < W; ++w) {
        result.delays.merge(traces[w]);
        if (anchors[w].size() != 0) anchor = std::move(anchors[w]);
      }
      queries += K * update_queries(so.batch_a, so.batch_b);
      global += K;
    }

    x_tilde = r < K ? std::move(anchor) : shared.read();
    logger.submit(s, global, clock.seconds(), queries, x_tilde);
  }

  result.delays.sort();
  result.x = x_tilde;
  result.trajectory = logger.finish();
  result.oracle_queries = queries;
  return result;
}

}  // namespace asyvrsc
