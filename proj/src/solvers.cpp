#include "asyvrsc/solvers.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace asyvrsc {

namespace {

// Rounds up unless v is an integer up to floating-point noise.
double ceil_tolerant(double v) {
  const double nearest = std::round(v);
  if (std::abs(v - nearest) <= 1e-9 * std::max(1.0, std::abs(v))) return nearest;
  return std::ceil(v);
}

double floor_tolerant(double v) {
  const double nearest = std::round(v);
  if (std::abs(v - nearest) <= 1e-9 * std::max(1.0, std::abs(v))) return nearest;
  return std::floor(v);
}

std::size_t to_count(double v, const char* what) {
  if (!std::isfinite(v) || v < 0 || v > 1e18) {
    throw std::overflow_error(std::string("recommended ") + what + " is not representable");
  }
  return static_cast<std::size_t>(v);
}

}  // namespace

void SolverOptions::validate() const {
  if (inner_iterations == 0) throw std::invalid_argument("inner_iterations must be at least 1");
  if (batch_a == 0 || batch_b == 0) throw std::invalid_argument("batch sizes must be at least 1");
  if (!(learning_rate > 0) || !std::isfinite(learning_rate)) {
    throw std::invalid_argument("learning_rate must be positive and finite");
  }
}

std::size_t anchor_index(const SolverOptions& options, std::size_t epoch) {
  if (options.anchor == EpochAnchor::kLastIterate) return options.inner_iterations;
  Rng rng(stream_seed(options.seed, Stream::kAnchor, epoch));
  return static_cast<std::size_t>(rng.index(options.inner_iterations));
}

SolveResult vrsc_solve(const CompositionProblem& problem, const SolverOptions& options, const Vector& x0,
                       const Monitor& monitor) {
  options.validate();
  require_parameter_length(problem, x0);
  const auto dims = problem.dimensions();
  const std::size_t K = options.inner_iterations;

  SolveResult result;
  result.x = x0;
  RunClock clock;
  std::size_t global = 0;
  const auto record = [&](std::size_t epoch) {
    clock.pause();
    result.trajectory.push_back(
        RunRecord{epoch, global, clock.seconds(), monitor.gap(problem, result.x), result.oracle_queries});
    clock.resume();
  };
  record(0);

  Rng rng(options.seed);
  Vector grad(x0.size());
  for (std::size_t s = 1; s <= options.epochs; ++s) {
    const Snapshot snapshot = take_snapshot(problem, result.x, 1, s);
    result.oracle_queries += snapshot_queries(dims);
    const std::size_t r = anchor_index(options, s);
    Vector anchor;
    Vector& x = result.x;
    for (std::size_t t = 0; t < K; ++t) {
      if (t == r) anchor = x;
      const MiniBatch batch = MiniBatch::sample(rng, dims, options.batch_a, options.batch_b);
      if (monitor.on_read) monitor.on_read(s, t, 0, x);
      variance_reduced_gradient(problem, snapshot, x, batch, grad);
      for (Eigen::Index k = 0; k < x.size(); ++k) x[k] = x[k] - options.learning_rate * grad[k];
      result.oracle_queries += update_queries(options.batch_a, options.batch_b);
      ++global;
      if (monitor.on_iterate) monitor.on_iterate(s, t, x);
      if (monitor.record_every != 0 && (t + 1) % monitor.record_every == 0 && t + 1 < K) record(s);
    }
    if (r < K) x = std::move(anchor);
    record(s);
  }
  return result;
}

void ScgdOptions::validate() const {
  if (batch_a == 0 || batch_b == 0) throw std::invalid_argument("batch sizes must be at least 1");
  if (!(eta_scale >= 0) || !std::isfinite(eta_scale)) throw std::invalid_argument("eta_scale must be >= 0");
  if (!(eta_exponent >= 0) || !std::isfinite(eta_exponent)) {
    throw std::invalid_argument("eta_exponent must be >= 0");
  }
  if (!(beta_scale > 0) || !std::isfinite(beta_scale)) throw std::invalid_argument("beta_scale must be > 0");
  if (!(beta_exponent >= 0) || !std::isfinite(beta_exponent)) {
    throw std::invalid_argument("beta_exponent must be >= 0");
  }
}

double ScgdOptions::eta(std::size_t t) const {
  return eta_scale * std::pow(static_cast<double>(t), -eta_exponent);
}

double ScgdOptions::beta(std::size_t t) const {
  return std::min(1.0, beta_scale * std::pow(static_cast<double>(t), -beta_exponent));
}

ScgdResult scgd_solve(const CompositionProblem& problem, const ScgdOptions& options, const Vector& x0,
                      const Monitor& monitor) {
  options.validate();
  require_parameter_length(problem, x0);
  const auto dims = problem.dimensions();
  const std::size_t every =
      options.record_every != 0 ? options.record_every : std::max<std::size_t>(1, options.iterations / 100);
  const double l2 = problem.l2_weight();

  ScgdResult result;
  result.x = x0;
  result.tracking = Vector::Zero(static_cast<Eigen::Index>(dims.d2));
  RunClock clock;
  const auto record = [&](std::size_t t) {
    clock.pause();
    result.trajectory.push_back(
        RunRecord{0, t, clock.seconds(), monitor.gap(problem, result.x), result.oracle_queries});
    clock.resume();
  };
  record(0);

  Rng rng(options.seed);
  Vector& x = result.x;
  Vector& y = result.tracking;
  RowMatrix jacobian(static_cast<Eigen::Index>(dims.d2), static_cast<Eigen::Index>(dims.d1));
  for (std::size_t t = 1; t <= options.iterations; ++t) {
    const MiniBatch batch = MiniBatch::sample(rng, dims, options.batch_a, options.batch_b);
    Vector inner = Vector::Zero(y.size());
    for (const auto j : batch.batch_a) inner += problem.inner_value(j, x);
    inner /= static_cast<double>(options.batch_a);
    jacobian.setZero();
    for (const auto j : batch.batch_b) problem.inner_jacobian(j, x).add_to(jacobian);
    jacobian /= static_cast<double>(options.batch_b);

    const double beta = options.beta(t);
    y = (1.0 - beta) * y + beta * inner;
    const Vector outer = problem.outer_gradient(batch.outer_index, y);
    const double eta = options.eta(t);
    const Vector step = jacobian.transpose() * outer;
    for (Eigen::Index k = 0; k < x.size(); ++k) x[k] = x[k] - eta * (step[k] + l2 * x[k]);
    result.oracle_queries += options.batch_a + options.batch_b + 1;
    if (monitor.on_iterate) monitor.on_iterate(0, t - 1, x);
    if (t % every == 0 || t == options.iterations) record(t);
  }
  return result;
}

Recommendation recommend_hyperparameters(const HyperparameterConstants& c, std::size_t d1, EngineMode mode) {
  c.validate();
  if (d1 == 0) throw std::invalid_argument("d1 must be positive");
  const double BG4 = std::pow(c.B_G, 4);
  const double LF2 = c.L_F * c.L_F;
  Recommendation rec;
  const double a = std::max(1024.0 * BG4 * LF2 / (c.mu_f * c.mu_f), 32.0 * BG4 * LF2 / (5.0 * c.mu_f * c.L_f));
  const double b = 32.0 * c.B_F * c.B_F * c.L_G * c.L_G / (c.mu_f * c.L_f);
  rec.batch_a = std::max<std::size_t>(1, to_count(ceil_tolerant(a), "a"));
  rec.batch_b = std::max<std::size_t>(1, to_count(ceil_tolerant(b), "b"));
  rec.learning_rate =
      std::min({1.0 / (9.0 * c.B_G * c.B_G * c.L_F), 1.0 / (9.0 * c.B_F * c.L_G), 1.0 / (320.0 * c.L_f)});
  if (mode == EngineMode::kShared) {
    rec.inner_iterations = to_count(ceil_tolerant(1024.0 * c.L_f * static_cast<double>(d1) / c.mu_f), "K");
    rec.max_delay = to_count(floor_tolerant(std::sqrt(static_cast<double>(d1))), "T");
  } else {
    rec.inner_iterations = to_count(ceil_tolerant(1024.0 * c.L_f / c.mu_f), "K");
    rec.max_delay = to_count(floor_tolerant(std::sqrt(1.0 / c.delta)), "T");
  }
  rec.inner_iterations = std::max<std::size_t>(1, rec.inner_iterations);
  return rec;
}

}  // namespace asyvrsc
