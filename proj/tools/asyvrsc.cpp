// asyvrsc: instance generation, benchmark runs and speedup tables.

#include <cstdio>
#include <iostream>
#include <map>
#include <regex>

#include <CLI11.hpp>

#include "asyvrsc/bench.hpp"
#include "asyvrsc/format.hpp"
#include "asyvrsc/generators.hpp"
#include "asyvrsc/instance_io.hpp"

namespace {

using namespace asyvrsc;

struct GenArgs {
  std::string problem = "portfolio";
  PortfolioConfig portfolio;
  MdpConfig mdp;
  double l2 = -1.0;
  std::uint64_t seed = 1;
  std::string out;
  std::string csv;
};

void print_sparsity(const CompositionProblem& problem) {
  const auto d = problem.dimensions();
  const auto s = problem.sparsity();
  std::printf("n1=%zu n2=%zu d1=%zu d2=%zu\n", d.n1, d.n2, d.d1, d.d2);
  std::printf("delta_F=%s delta_G=%s delta_f=%s delta=%s\n", format_double(s.delta_F).c_str(),
              format_double(s.delta_G).c_str(), format_double(s.delta_f).c_str(), format_double(s.delta()).c_str());
}

int run_gen(const GenArgs& a) {
  Instance instance;
  if (a.problem == "portfolio") {
    PortfolioConfig c = a.portfolio;
    c.seed = a.seed;
    if (a.l2 >= 0) c.l2_reg = a.l2;
    auto g = generate_portfolio(c);
    const double nnz = static_cast<double>(g.problem.nonzeros());
    std::printf("portfolio %zux%zu, nonzero fraction %s\n", c.n, c.N,
                format_double(nnz / static_cast<double>(c.n * c.N)).c_str());
    print_sparsity(g.problem);
    instance = std::move(g.instance);
  } else if (a.problem == "mdp") {
    MdpConfig c = a.mdp;
    c.seed = a.seed;
    if (a.l2 >= 0) c.l2_reg = a.l2;
    auto g = generate_mdp(c);
    std::printf("mdp S=%zu d=%zu discount=%s\n", c.S, c.d, format_double(c.discount).c_str());
    print_sparsity(g.problem);
    instance = std::move(g.instance);
  } else {
    throw CLI::ValidationError("--problem", "expected portfolio or mdp");
  }
  save_instance(instance, a.out);
  std::printf("wrote %s\n", a.out.c_str());
  if (!a.csv.empty()) {
    write_instance_csv(instance, a.csv);
    std::printf("wrote %s\n", a.csv.c_str());
  }
  return 0;
}

int run_speedup(const std::string& dir, double target_gap, const std::string& only_engine) {
  const std::regex name(R"(([A-Za-z]+)_W([0-9]+)\.csv)");
  std::map<std::string, std::map<std::size_t, std::vector<RunRecord>>> runs;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    std::smatch m;
    const std::string file = entry.path().filename().string();
    if (!std::regex_match(file, m, name)) continue;
    if (!only_engine.empty() && m[1] != only_engine) continue;
    runs[m[1]][std::stoul(m[2])] = parse_csv(entry.path());
  }
  if (runs.empty()) throw std::runtime_error("no <engine>_W<k>.csv files in " + dir);
  const auto show = [](const std::optional<double>& v) { return v ? format_double(*v) : std::string("DNF"); };
  std::printf("engine,workers,seconds,iterations,time_speedup,iteration_speedup\n");
  for (const auto& [engine, cells] : runs) {
    const SpeedupReport report = compute_speedup(cells, target_gap);
    for (const auto& e : report.entries) {
      std::printf("%s,%zu,%s,%s,%s,%s\n", engine.c_str(), e.workers, show(e.seconds).c_str(),
                  e.iterations ? std::to_string(*e.iterations).c_str() : "DNF", show(e.time_speedup).c_str(),
                  show(e.iteration_speedup).c_str());
    }
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Asynchronous variance-reduced compositional optimisation toolkit"};
  app.require_subcommand(1);

  GenArgs gen;
  auto* gen_cmd = app.add_subcommand("gen", "Generate a portfolio or MDP instance");
  gen_cmd->add_option("--problem", gen.problem, "portfolio | mdp")->check(CLI::IsMember({"portfolio", "mdp"}));
  gen_cmd->add_option("--n", gen.portfolio.n, "portfolio: number of reward samples");
  gen_cmd->add_option("--N", gen.portfolio.N, "portfolio: number of assets");
  gen_cmd->add_option("--lambda-max", gen.portfolio.lambda_max, "portfolio: largest covariance eigenvalue");
  gen_cmd->add_option("--lambda-min", gen.portfolio.lambda_min, "portfolio: smallest covariance eigenvalue");
  gen_cmd->add_option("--density", gen.portfolio.density, "portfolio: fraction of nonzero rewards");
  gen_cmd->add_option("--S", gen.mdp.S, "mdp: number of states");
  gen_cmd->add_option("--d", gen.mdp.d, "mdp: feature dimension");
  gen_cmd->add_option("--discount", gen.mdp.discount, "mdp: Bellman discount factor");
  gen_cmd->add_option("--l2", gen.l2, "L2 regularisation weight");
  gen_cmd->add_option("--seed", gen.seed, "generator seed");
  gen_cmd->add_option("--out", gen.out, "binary instance file")->required();
  gen_cmd->add_option("--csv", gen.csv, "also write a CSV dump");

  std::string config_path, out_dir = "run";
  std::map<std::string, std::string> overrides;
  auto* bench_cmd = app.add_subcommand("bench", "Run the experiment described by a config file");
  bench_cmd->add_option("--config", config_path, "flat key = value config file")->required()->check(CLI::ExistingFile);
  bench_cmd->add_option("--out", out_dir, "run directory for CSVs and manifest.json");
  const std::vector<std::pair<std::string, std::string>> override_flags = {
      {"--engine", "engines"},          {"--workers", "workers"},       {"--subset", "subset"},
      {"--delay-file", "delay_file"},   {"--transport", "transport"},   {"--script-file", "script_file"},
      {"--learning-rate", "learning_rate"}, {"--epochs", "epochs"},   {"--target-gap", "target_gap"}};
  for (const auto& [flag, key] : override_flags) {
    bench_cmd->add_option_function<std::string>(flag, [&overrides, key = key](const std::string& v) { overrides[key] = v; },
                                                "overrides config key '" + key + "'");
  }
  std::string scheduler;
  bench_cmd->add_option("--scheduler", scheduler, "free | replay (shared), fifo | script (distributed)")
      ->check(CLI::IsMember({"free", "replay", "fifo", "script"}));

  std::string speedup_dir, speedup_engine;
  double target_gap = 0.0;
  auto* speedup_cmd = app.add_subcommand("speedup", "Speedup table from a run directory");
  speedup_cmd->add_option("--dir", speedup_dir, "run directory")->required()->check(CLI::ExistingDirectory);
  speedup_cmd->add_option("--target-gap", target_gap, "objective gap that counts as converged")->required();
  speedup_cmd->add_option("--engine", speedup_engine, "restrict to one engine");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*gen_cmd) return run_gen(gen);
    if (*bench_cmd) {
      ExperimentConfig config = ExperimentConfig::load(config_path);
      for (const auto& [key, value] : overrides) config.set(key, value);
      if (scheduler == "free" || scheduler == "replay") config.set("shared_scheduler", scheduler);
      if (scheduler == "fifo" || scheduler == "script") config.set("dist_scheduler", scheduler);
      const auto summary = run_experiment(config, out_dir);
      std::printf("reference f(x*) = %s (|grad| = %s)\n", format_double(summary.reference_value).c_str(),
                  format_double(summary.reference_gradient_norm).c_str());
      for (const auto& cell : summary.cells) {
        std::printf("%-12s W=%-3zu %-8s final gap %s -> %s\n", cell.engine.c_str(), cell.workers,
                    cell.reached_target ? "reached" : "DNF", format_double(cell.final_gap).c_str(),
                    cell.csv.string().c_str());
      }
      return 0;
    }
    if (*speedup_cmd) return run_speedup(speedup_dir, target_gap, speedup_engine);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "asyvrsc: %s\n", e.what());
    return 1;
  }
  return 0;
}
