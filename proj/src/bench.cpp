#include "asyvrsc/bench.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>
#include <variant>

#include <json.hpp>

#include "asyvrsc/distributed_engine.hpp"
#include "asyvrsc/format.hpp"
#include "asyvrsc/generators.hpp"
#include "asyvrsc/shared_engine.hpp"

namespace asyvrsc {

std::optional<RunRecord> first_reaching(const std::vector<RunRecord>& records, double target_gap) {
  for (const auto& r : records) {
    if (r.gap <= target_gap) return r;
  }
  return std::nullopt;
}

namespace {

double ratio(double num, double den) {
  if (den == 0.0) return num == 0.0 ? 1.0 : std::numeric_limits<double>::infinity();
  return num / den;
}

}  // namespace

SpeedupReport compute_speedup(const std::map<std::size_t, std::vector<RunRecord>>& runs, double target_gap) {
  const auto base_it = runs.find(1);
  if (base_it == runs.end()) throw std::invalid_argument("speedup needs a single-worker baseline run");
  SpeedupReport report;
  report.target_gap = target_gap;
  const auto base = first_reaching(base_it->second, target_gap);
  for (const auto& [workers, records] : runs) {
    if (workers == 0) throw std::invalid_argument("worker count 0 in speedup input");
    SpeedupEntry e;
    e.workers = workers;
    if (const auto hit = first_reaching(records, target_gap)) {
      e.seconds = hit->seconds;
      e.iterations = hit->iteration;
      if (base) {
        e.time_speedup = ratio(base->seconds, hit->seconds);
        e.iteration_speedup =
            ratio(static_cast<double>(base->iteration), static_cast<double>(hit->iteration)) * static_cast<double>(workers);
      }
    }
    report.entries.push_back(e);
  }
  return report;
}

ReferenceResult reference_minimizer(const CompositionProblem& problem, const Vector& x0,
                                    const ReferenceOptions& options) {
  require_parameter_length(problem, x0);
  constexpr double kArmijo = 1e-4;
  ReferenceResult out;
  Vector x = x0;
  double f = evaluate_objective(problem, x);
  Vector g = full_gradient(problem, x);
  double step = 1.0 / std::max(1.0, g.lpNorm<Eigen::Infinity>());
  Vector x_prev, g_prev;
  Vector best_x = x;
  double best_norm = g.norm();
  std::size_t since_best = 0;
  std::size_t it = 0;
  // Rounding in the gradient itself can stop progress short of the
  // tolerance; give up after a long run with neither a new best gradient
  // norm nor a resolvable decrease of f.
  for (; it < options.max_iterations && g.norm() > options.tolerance && since_best < 500; ++it) {
    if (it > 0) {
      const Vector s = x - x_prev;
      const Vector y = g - g_prev;
      const double sy = s.dot(y);
      if (sy > 0) step = s.squaredNorm() / sy;
    }
    const double g2 = g.squaredNorm();
    bool accepted = false;
    Vector x_new, g_new;
    double f_new = f;
    for (int halvings = 0; halvings < 60; ++halvings) {
      x_new = x - step * g;
      f_new = evaluate_objective(problem, x_new);
      if (std::isfinite(f_new) && f_new <= f - kArmijo * step * g2) {
        accepted = true;
        break;
      }
      // Near the minimiser decreases fall below the resolution of f; accept
      // steps that keep f flat and shrink the gradient instead.
      if (std::isfinite(f_new) && f_new <= f + 1e-11 * (1.0 + std::abs(f))) {
        g_new = full_gradient(problem, x_new);
        if (g_new.norm() < g.norm()) {
          accepted = true;
          break;
        }
        g_new.resize(0);
      }
      step *= 0.5;
    }
    if (!accepted) break;
    x_prev = std::move(x);
    g_prev = std::move(g);
    x = std::move(x_new);
    const bool decreased = f_new < f - 1e-14 * (1.0 + std::abs(f));
    f = f_new;
    g = g_new.size() != 0 ? std::move(g_new) : full_gradient(problem, x);
    if (g.norm() < best_norm) {
      best_norm = g.norm();
      best_x = x;
      since_best = 0;
    } else if (decreased) {
      since_best = 0;
    } else {
      ++since_best;
    }
  }
  x = best_x;
  out.x = x;
  out.value = evaluate_objective(problem, x);
  out.gradient_norm = full_gradient(problem, x).norm();
  out.iterations = it;
  if (!(out.gradient_norm <= options.acceptance)) {
    throw std::runtime_error("reference minimizer stalled at gradient norm " + format_double(out.gradient_norm) +
                             " after " + std::to_string(it) + " iterations");
  }
  return out;
}

ExperimentConfig ExperimentConfig::parse(const std::string& text) {
  ExperimentConfig config;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  const auto trim = [](std::string s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return std::string();
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
  };
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw std::invalid_argument("config line " + std::to_string(line_no) + ": expected key = value");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty()) throw std::invalid_argument("config line " + std::to_string(line_no) + ": empty key");
    if (config.values_.count(key)) throw std::invalid_argument("config line " + std::to_string(line_no) + ": duplicate key '" + key + "'");
    config.values_[key] = value;
  }
  return config;
}

ExperimentConfig ExperimentConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse(buffer.str());
}

std::string ExperimentConfig::get(const std::string& key, const std::string& fallback) const {
  const auto it = values_.find(key);
  return it == values_.end() ? fallback : it->second;
}

std::string ExperimentConfig::require(const std::string& key) const {
  const auto it = values_.find(key);
  if (it == values_.end()) throw std::invalid_argument("config is missing '" + key + "'");
  return it->second;
}

double ExperimentConfig::number(const std::string& key, double fallback) const {
  const auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  try {
    std::size_t used = 0;
    const double v = std::stod(it->second, &used);
    if (used == it->second.size()) return v;
  } catch (const std::exception&) {
  }
  throw std::invalid_argument("config key '" + key + "': '" + it->second + "' is not a number");
}

std::size_t ExperimentConfig::count(const std::string& key, std::size_t fallback) const {
  const auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  try {
    std::size_t used = 0;
    if (!it->second.empty() && it->second[0] != '-') {
      const auto v = std::stoull(it->second, &used);
      if (used == it->second.size()) return static_cast<std::size_t>(v);
    }
  } catch (const std::exception&) {
  }
  throw std::invalid_argument("config key '" + key + "': '" + it->second + "' is not a non-negative integer");
}

std::vector<std::string> ExperimentConfig::list(const std::string& key, const std::string& fallback) const {
  std::vector<std::string> out;
  std::stringstream ss(get(key, fallback));
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto b = item.find_first_not_of(" \t");
    if (b == std::string::npos) continue;
    out.push_back(item.substr(b, item.find_last_not_of(" \t") - b + 1));
  }
  return out;
}

void ExperimentConfig::check_known_keys() const {
  static const std::set<std::string> known = {
      "problem", "n", "N", "lambda_max", "lambda_min", "density", "S", "d", "discount", "actions_per_state", "l2",
      "seed", "engines", "workers", "epochs", "inner_iterations", "batch_a", "batch_b", "learning_rate", "anchor",
      "solver_seed", "subset", "shared_scheduler", "delay_file", "delay_bound", "transport", "dist_scheduler",
      "script_file", "staleness_bound", "scgd_iterations", "scgd_eta", "scgd_eta_exponent", "scgd_beta",
      "scgd_beta_exponent", "target_gap", "record_every", "reference_tolerance", "reference_max_iterations"};
  for (const auto& [key, value] : values_) {
    if (!known.count(key)) throw std::invalid_argument("unknown config key '" + key + "'");
  }
}

namespace {

struct Workload {
  std::unique_ptr<CompositionProblem> problem;
  nlohmann::json description;
};

Workload build_workload(const ExperimentConfig& c) {
  const std::string kind = c.require("problem");
  Workload w;
  if (kind == "portfolio") {
    PortfolioConfig pc;
    pc.n = c.count("n", pc.n);
    pc.N = c.count("N", pc.N);
    pc.lambda_max = c.number("lambda_max", pc.lambda_max);
    pc.lambda_min = c.number("lambda_min", pc.lambda_min);
    pc.density = c.number("density", pc.density);
    pc.l2_reg = c.number("l2", pc.l2_reg);
    pc.seed = c.count("seed", pc.seed);
    auto generated = generate_portfolio(pc);
    w.problem = std::make_unique<PortfolioProblem>(std::move(generated.problem));
    w.description = {{"problem", "portfolio"}, {"n", pc.n}, {"N", pc.N}, {"lambda_max", pc.lambda_max},
                     {"lambda_min", pc.lambda_min}, {"density", pc.density}, {"l2", pc.l2_reg}, {"seed", pc.seed}};
  } else if (kind == "mdp") {
    MdpConfig mc;
    mc.S = c.count("S", mc.S);
    mc.d = c.count("d", mc.d);
    mc.discount = c.number("discount", mc.discount);
    mc.actions_per_state = c.count("actions_per_state", mc.actions_per_state);
    mc.l2_reg = c.number("l2", mc.l2_reg);
    mc.seed = c.count("seed", mc.seed);
    auto generated = generate_mdp(mc);
    w.problem = std::make_unique<MdpProblem>(std::move(generated.problem));
    w.description = {{"problem", "mdp"}, {"S", mc.S}, {"d", mc.d}, {"discount", mc.discount},
                     {"actions_per_state", mc.actions_per_state}, {"l2", mc.l2_reg}, {"seed", mc.seed}};
  } else {
    throw std::invalid_argument("unknown problem '" + kind + "' (expected portfolio or mdp)");
  }
  return w;
}

SolverOptions solver_options(const ExperimentConfig& c) {
  SolverOptions o;
  o.epochs = c.count("epochs", o.epochs);
  o.inner_iterations = c.count("inner_iterations", o.inner_iterations);
  o.batch_a = c.count("batch_a", o.batch_a);
  o.batch_b = c.count("batch_b", o.batch_b);
  o.learning_rate = c.number("learning_rate", o.learning_rate);
  o.seed = c.count("solver_seed", o.seed);
  const std::string anchor = c.get("anchor", "last");
  if (anchor == "random") {
    o.anchor = EpochAnchor::kRandomIterate;
  } else if (anchor != "last") {
    throw std::invalid_argument("anchor must be 'last' or 'random'");
  }
  o.validate();
  return o;
}

}  // namespace

ExperimentSummary run_experiment(const ExperimentConfig& config, const std::filesystem::path& directory) {
  config.check_known_keys();
  const Workload workload = build_workload(config);
  const CompositionProblem& problem = *workload.problem;
  const auto dims = problem.dimensions();
  const SolverOptions solver = solver_options(config);
  const double target_gap = config.number("target_gap", 1e-4);
  const auto engines = config.list("engines", "vrsc");
  std::vector<std::size_t> worker_counts;
  for (const auto& w : config.list("workers", "1")) {
    ExperimentConfig one;
    one.set("w", w);
    worker_counts.push_back(one.count("w", 1));
    if (worker_counts.back() == 0) throw std::invalid_argument("worker counts must be positive");
  }

  ReferenceOptions ref_options;
  ref_options.tolerance = config.number("reference_tolerance", ref_options.tolerance);
  ref_options.max_iterations = config.count("reference_max_iterations", ref_options.max_iterations);
  const Vector x0 = Vector::Zero(static_cast<Eigen::Index>(dims.d1));
  const ReferenceResult reference = reference_minimizer(problem, x0, ref_options);

  Monitor monitor;
  monitor.reference_value = reference.value;
  monitor.record_every = config.count("record_every", 0);

  std::filesystem::create_directories(directory);
  ExperimentSummary summary;
  summary.directory = directory;
  summary.reference_value = reference.value;
  summary.reference_gradient_norm = reference.gradient_norm;

  nlohmann::json cells = nlohmann::json::array();
  const auto finish_cell = [&](const std::string& engine, std::size_t W, const std::vector<RunRecord>& records,
                               nlohmann::json extra) {
    CellSummary cell;
    cell.engine = engine;
    cell.workers = W;
    cell.csv = directory / (engine + "_W" + std::to_string(W) + ".csv");
    emit_csv(records, cell.csv);
    cell.records = records.size();
    cell.final_gap = records.empty() ? std::numeric_limits<double>::quiet_NaN() : records.back().gap;
    cell.reached_target = first_reaching(records, target_gap).has_value();
    nlohmann::json j = {{"engine", engine},
                        {"workers", W},
                        {"csv", cell.csv.filename().string()},
                        {"status", cell.reached_target ? "reached" : "DNF"},
                        {"final_gap", format_double(cell.final_gap)},
                        {"records", cell.records}};
    j.update(extra);
    cells.push_back(j);
    summary.cells.push_back(cell);
  };

  for (const auto& engine : engines) {
    if (engine == "vrsc") {
      const auto r = vrsc_solve(problem, solver, x0, monitor);
      finish_cell(engine, 1, r.trajectory, {{"oracle_queries", r.oracle_queries}});
    } else if (engine == "scgd") {
      ScgdOptions so;
      so.batch_a = solver.batch_a;
      so.batch_b = solver.batch_b;
      so.seed = solver.seed;
      const std::uint64_t budget =
          solver.epochs * (snapshot_queries(dims) + solver.inner_iterations * update_queries(solver.batch_a, solver.batch_b));
      so.iterations = config.count("scgd_iterations", budget / (solver.batch_a + solver.batch_b + 1));
      so.eta_scale = config.number("scgd_eta", so.eta_scale);
      so.eta_exponent = config.number("scgd_eta_exponent", so.eta_exponent);
      so.beta_scale = config.number("scgd_beta", so.beta_scale);
      so.beta_exponent = config.number("scgd_beta_exponent", so.beta_exponent);
      const auto r = scgd_solve(problem, so, x0, monitor);
      finish_cell(engine, 1, r.trajectory, {{"oracle_queries", r.oracle_queries}, {"iterations", so.iterations}});
    } else if (engine == "shared") {
      for (const auto W : worker_counts) {
        SharedOptions o;
        o.solver = solver;
        o.workers = W;
        o.subset = config.count("subset", std::min<std::size_t>(10, dims.d1));
        const std::string sched = config.get("shared_scheduler", "free");
        if (sched == "replay") {
          o.scheduler = SharedScheduler::kReplay;
          if (config.has("delay_file")) {
            o.delays = DelaySchedule::from_file(config.get("delay_file", ""));
          } else if (config.has("delay_bound")) {
            o.delays = DelaySchedule::bounded_uniform(config.count("delay_bound", 0), solver.seed);
          } else {
            o.delays = DelaySchedule::round_robin(W);
          }
        } else if (sched != "free") {
          throw std::invalid_argument("shared_scheduler must be 'free' or 'replay'");
        }
        const auto r = run_shared(problem, o, x0, monitor);
        finish_cell(engine, W, r.trajectory,
                    {{"oracle_queries", r.oracle_queries}, {"max_staleness", r.delays.max_observed},
                     {"scheduler", sched}});
      }
    } else if (engine == "distributed") {
      for (const auto W : worker_counts) {
        DistributedOptions o;
        o.solver = solver;
        o.workers = W;
        const std::string transport = config.get("transport", "inproc");
        if (transport == "socket") {
          o.transport = TransportKind::kSocket;
        } else if (transport != "inproc") {
          throw std::invalid_argument("transport must be 'inproc' or 'socket'");
        }
        const std::string sched = config.get("dist_scheduler", "fifo");
        if (sched == "script") {
          o.scheduler = DistributedScheduler::kScript;
          if (config.has("script_file")) {
            o.script = InterleavingScript::from_file(config.get("script_file", ""));
          } else if (config.has("staleness_bound")) {
            o.script = InterleavingScript::oldest_within(config.count("staleness_bound", 0));
          }
        } else if (sched != "fifo") {
          throw std::invalid_argument("dist_scheduler must be 'fifo' or 'script'");
        }
        const auto r = run_distributed(problem, o, x0, monitor);
        finish_cell(engine, W, r.trajectory,
                    {{"oracle_queries", r.oracle_queries}, {"max_staleness", r.delays.max_observed},
                     {"stragglers", r.stragglers}, {"scheduler", sched}, {"transport", transport}});
      }
    } else {
      throw std::invalid_argument("unknown engine '" + engine + "' (expected vrsc, scgd, shared or distributed)");
    }
  }

  const auto sparsity = problem.sparsity();
  nlohmann::json manifest = {
      {"instance", workload.description},
      {"dimensions", {{"n1", dims.n1}, {"n2", dims.n2}, {"d1", dims.d1}, {"d2", dims.d2}}},
      {"sparsity", {{"delta_F", sparsity.delta_F}, {"delta_G", sparsity.delta_G}, {"delta_f", sparsity.delta_f}}},
      {"solver",
       {{"epochs", solver.epochs}, {"inner_iterations", solver.inner_iterations}, {"batch_a", solver.batch_a},
        {"batch_b", solver.batch_b}, {"learning_rate", solver.learning_rate}, {"seed", solver.seed},
        {"anchor", solver.anchor == EpochAnchor::kLastIterate ? "last" : "random"}}},
      {"reference",
       {{"value", format_double(reference.value)}, {"gradient_norm", format_double(reference.gradient_norm)},
        {"iterations", reference.iterations}}},
      {"target_gap", target_gap},
      {"config", config.values()},
      {"cells", cells}};
  std::ofstream out(directory / "manifest.json", std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + (directory / "manifest.json").string());
  out << manifest.dump(2) << '\n';
  return summary;
}

}  // namespace asyvrsc
