#include <doctest.h>

#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "asyvrsc/bench.hpp"
#include "asyvrsc/generators.hpp"
#include "test_support.hpp"

using namespace asyvrsc;
using namespace asyvrsc::testing;

namespace {

std::vector<RunRecord> curve(double seconds_per_iter, std::size_t iters_per_record, std::size_t records,
                             double gap0 = 1.0, double rate = 0.5) {
  std::vector<RunRecord> out;
  double gap = gap0;
  for (std::size_t k = 0; k < records; ++k) {
    RunRecord r;
    r.epoch = k;
    r.iteration = k * iters_per_record;
    r.seconds = seconds_per_iter * static_cast<double>(r.iteration);
    r.gap = gap;
    r.queries = 10 * r.iteration;
    out.push_back(r);
    gap *= rate;
  }
  return out;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<std::string> lines_of(const std::filesystem::path& path) {
  std::vector<std::string> out;
  std::ifstream in(path);
  for (std::string line; std::getline(in, line);) out.push_back(line);
  return out;
}

// CSV text with the seconds column blanked.
std::string without_seconds(const std::filesystem::path& path) {
  std::string out;
  for (const auto& line : lines_of(path)) {
    std::stringstream ss(line);
    std::string field;
    for (int col = 0; std::getline(ss, field, ','); ++col) out += (col == 2 ? std::string("-") : field) + ",";
    out += "\n";
  }
  return out;
}

}  // namespace

TEST_SUITE("speedup") {
  TEST_CASE("identical single-worker runs give unit speedups") {
    const auto run = curve(1e-3, 100, 12);
    const auto report = compute_speedup({{1, run}}, 1e-2);
    REQUIRE(report.entries.size() == 1);
    CHECK(*report.entries[0].time_speedup == 1.0);
    CHECK(*report.entries[0].iteration_speedup == 1.0);
    CHECK(report.target_gap == 1e-2);
  }

  TEST_CASE("half the time at equal total iterations") {
    const auto base = curve(1e-3, 100, 12);
    const auto two = curve(0.5e-3, 100, 12);
    const auto report = compute_speedup({{1, base}, {2, two}}, 1e-2);
    REQUIRE(report.entries.size() == 2);
    // The iteration speedup multiplies the iteration ratio by W: equal counts at W = 2 give 2.
    CHECK(*report.entries[1].time_speedup == doctest::Approx(2.0).epsilon(1e-15));
    CHECK(*report.entries[1].iteration_speedup == 2.0);
    CHECK(*report.entries[1].iterations == 700);
  }

  TEST_CASE("four workers needing twice the iterations") {
    const auto base = curve(1e-3, 100, 12);
    const auto four = curve(1e-3, 200, 12);
    const auto report = compute_speedup({{1, base}, {4, four}}, 1e-2);
    CHECK(*report.entries[1].iteration_speedup == 2.0);
    CHECK(*report.entries[1].time_speedup == doctest::Approx(0.5).epsilon(1e-15));
  }

  TEST_CASE("first record at or below the target counts") {
    auto run = curve(1.0, 10, 5, 1.0, 0.1);
    const auto hit = first_reaching(run, 1.5e-2);
    REQUIRE(hit.has_value());
    CHECK(hit->iteration == 20);
    CHECK_FALSE(first_reaching(run, 1e-9).has_value());
  }

  TEST_CASE("missing baseline is an error and unreached targets are DNF") {
    CHECK_THROWS_AS(compute_speedup({{2, curve(1e-3, 100, 5)}}, 1e-2), std::invalid_argument);
    const auto report = compute_speedup({{1, curve(1e-3, 100, 12)}, {2, curve(1e-3, 100, 3)}}, 1e-2);
    CHECK_FALSE(report.entries[1].seconds.has_value());
    CHECK_FALSE(report.entries[1].iteration_speedup.has_value());
    const auto dnf_base = compute_speedup({{1, curve(1e-3, 100, 3)}, {2, curve(1e-3, 100, 12)}}, 1e-2);
    CHECK(dnf_base.entries[1].iterations.has_value());
    CHECK_FALSE(dnf_base.entries[1].time_speedup.has_value());
  }

  TEST_CASE("recomputation is deterministic") {
    const std::map<std::size_t, std::vector<RunRecord>> runs{{1, curve(1e-3, 100, 12)}, {4, curve(3e-4, 150, 12)}};
    const auto a = compute_speedup(runs, 1e-3);
    const auto b = compute_speedup(runs, 1e-3);
    CHECK(*a.entries[1].time_speedup == *b.entries[1].time_speedup);
    CHECK(*a.entries[1].iteration_speedup == *b.entries[1].iteration_speedup);
  }
}

TEST_SUITE("records") {
  TEST_CASE("empty list writes only the header") {
    const auto path = temp_dir("csv") / "empty.csv";
    emit_csv({}, path);
    const auto lines = lines_of(path);
    REQUIRE(lines.size() == 1);
    CHECK(lines[0] == "epoch,iter,seconds,gap,queries");
    CHECK(parse_csv(path).empty());
  }

  TEST_CASE("one record writes two lines") {
    const auto path = temp_dir("csv") / "one.csv";
    emit_csv({RunRecord{1, 10, 0.5, 0.25, 42}}, path);
    const auto lines = lines_of(path);
    REQUIRE(lines.size() == 2);
    CHECK(lines[1].rfind("1,10,", 0) == 0);
  }

  TEST_CASE("parse of an emitted file reproduces the records exactly") {
    Rng rng(12);
    std::vector<RunRecord> records;
    for (std::size_t k = 0; k < 200; ++k) {
      records.push_back(RunRecord{k / 10, k * 37, rng.uniform() * 1e3, std::exp(-30.0 * rng.uniform()), k * 1234567});
    }
    records.push_back(RunRecord{99, 1, 5e-324, std::numeric_limits<double>::quiet_NaN(), 0});
    records.push_back(RunRecord{99, 2, 0.1, 1.0 / 3.0, std::uint64_t{1} << 60});
    const auto path = temp_dir("csv") / "roundtrip.csv";
    emit_csv(records, path);
    const auto back = parse_csv(path);
    REQUIRE(back.size() == records.size());
    for (std::size_t k = 0; k < records.size(); ++k) {
      CHECK(back[k].epoch == records[k].epoch);
      CHECK(back[k].iteration == records[k].iteration);
      CHECK(back[k].queries == records[k].queries);
      CHECK(std::memcmp(&back[k].seconds, &records[k].seconds, sizeof(double)) == 0);
      if (std::isnan(records[k].gap)) {
        CHECK(std::isnan(back[k].gap));
      } else {
        CHECK(back[k].gap == records[k].gap);
      }
    }
  }

  TEST_CASE("unwritable path is reported with the path") {
    const auto path = temp_dir("csv") / "missing" / "x.csv";
    try {
      emit_csv({}, path);
      FAIL("expected an error");
    } catch (const std::exception& e) {
      CHECK(std::string(e.what()).find(path.string()) != std::string::npos);
    }
  }
}

TEST_SUITE("reference minimizer") {
  TEST_CASE("stationary point of a portfolio instance") {
    PortfolioConfig c;
    c.n = 200;
    c.N = 15;
    const auto g = generate_portfolio(c);
    const auto ref = reference_minimizer(g.problem, Vector::Zero(15));
    CHECK(ref.gradient_norm <= 1e-10);
    CHECK(full_gradient(g.problem, ref.x).norm() == doctest::Approx(ref.gradient_norm).epsilon(1e-6));
    CHECK(ref.value == evaluate_objective(g.problem, ref.x));
    Rng rng(3);
    for (int k = 0; k < 20; ++k) {
      const Vector y = ref.x + 1e-3 * random_vector(rng, 15);
      CHECK(evaluate_objective(g.problem, y) >= ref.value - 1e-14);
    }
  }

  TEST_CASE("a quadratic with a known minimizer") {
    const Vector center = (Vector(3) << 1.0, -2.0, 0.5).finished();
    CenteredQuadratic q(center);
    const auto ref = reference_minimizer(q, Vector::Zero(3));
    CHECK(max_rel_diff(ref.x, center) <= 1e-10);
  }
}

TEST_SUITE("experiment config") {
  TEST_CASE("flat key = value with comments") {
    const auto c = ExperimentConfig::parse("# header\nproblem = portfolio\n n=50 # trailing\n\nworkers = 1, 2 ,4\n");
    CHECK(c.require("problem") == "portfolio");
    CHECK(c.count("n", 0) == 50);
    CHECK(c.list("workers", "") == std::vector<std::string>{"1", "2", "4"});
    CHECK(c.number("learning_rate", 0.5) == 0.5);
    CHECK_NOTHROW(c.check_known_keys());
  }

  TEST_CASE("malformed configs are rejected") {
    CHECK_THROWS_AS(ExperimentConfig::parse("problem portfolio\n"), std::invalid_argument);
    CHECK_THROWS_AS(ExperimentConfig::parse("= 3\n"), std::invalid_argument);
    CHECK_THROWS_AS(ExperimentConfig::parse("n = 1\nn = 2\n"), std::invalid_argument);
    const auto c = ExperimentConfig::parse("n = ten\nN = -3\neta = 1e-3x\nbogus = 1\n");
    CHECK_THROWS_AS(c.count("n", 0), std::invalid_argument);
    CHECK_THROWS_AS(c.count("N", 0), std::invalid_argument);
    CHECK_THROWS_AS(c.number("eta", 0), std::invalid_argument);
    CHECK_THROWS_AS(c.require("problem"), std::invalid_argument);
    CHECK_THROWS_AS(c.check_known_keys(), std::invalid_argument);
    CHECK_THROWS(ExperimentConfig::load(temp_dir("cfg") / "nope.cfg"));
  }

  TEST_CASE("invalid experiments fail before running") {
    const auto dir = temp_dir("bad");
    CHECK_THROWS_AS(run_experiment(ExperimentConfig::parse("problem = lasso\n"), dir), std::invalid_argument);
    CHECK_THROWS_AS(run_experiment(ExperimentConfig::parse("problem = portfolio\nn = 20\nN = 4\nengines = magic\n"), dir),
                    std::invalid_argument);
    CHECK_THROWS_AS(run_experiment(ExperimentConfig::parse("problem = portfolio\nn = 20\nN = 4\nworkers = 0\n"), dir),
                    std::invalid_argument);
    CHECK_THROWS_AS(run_experiment(ExperimentConfig::parse("problem = portfolio\nn = 20\nN = 4\nepochs = x\n"), dir),
                    std::invalid_argument);
  }
}

TEST_SUITE("run experiment") {
  TEST_CASE("five worker counts give five cells per engine") {
    const auto dir = temp_dir("grid");
    const auto config = ExperimentConfig::parse(
        "problem = portfolio\nn = 100\nN = 8\nengines = shared, distributed\nworkers = 1,2,4,8,16\n"
        "epochs = 2\ninner_iterations = 64\nlearning_rate = 1e-3\nsubset = 4\n"
        "shared_scheduler = replay\ndist_scheduler = script\ntarget_gap = 1e-30\n");
    const auto summary = run_experiment(config, dir);
    REQUIRE(summary.cells.size() == 10);
    for (const std::string engine : {"shared", "distributed"}) {
      for (std::size_t W : {1u, 2u, 4u, 8u, 16u}) {
        const auto path = dir / (engine + "_W" + std::to_string(W) + ".csv");
        CHECK(std::filesystem::exists(path));
        const auto records = parse_csv(path);
        REQUIRE(records.size() == 3);
        CHECK(records.front().iteration == 0);
        CHECK(records.back().iteration == 128);
        for (std::size_t k = 1; k < records.size(); ++k) {
          CHECK(records[k].queries >= records[k - 1].queries);
          CHECK(records[k].seconds >= records[k - 1].seconds);
        }
      }
    }
    const auto manifest = nlohmann::json::parse(read_file(dir / "manifest.json"));
    CHECK(manifest["cells"].size() == 10);
    for (const auto& cell : manifest["cells"]) CHECK(cell["status"] == "DNF");
    CHECK(manifest["instance"]["seed"] == 1);
    CHECK(manifest["solver"]["seed"] == 1);
    CHECK(manifest["config"]["workers"] == "1,2,4,8,16");
    CHECK(manifest["reference"].contains("value"));
  }

  TEST_CASE("scripted reruns differ only in the clock column") {
    const auto config = ExperimentConfig::parse(
        "problem = portfolio\nn = 120\nN = 10\nengines = vrsc, scgd, shared, distributed\nworkers = 1,3\n"
        "epochs = 3\ninner_iterations = 100\nlearning_rate = 1e-3\nrecord_every = 20\nsubset = 5\n"
        "shared_scheduler = replay\ndelay_bound = 2\ndist_scheduler = script\nstaleness_bound = 1\n");
    const auto a = temp_dir("rerun_a");
    const auto b = temp_dir("rerun_b");
    const auto sa = run_experiment(config, a);
    const auto sb = run_experiment(config, b);
    REQUIRE(sa.cells.size() == 6);
    for (const auto& cell : sa.cells) {
      CAPTURE(cell.csv.filename().string());
      CHECK(without_seconds(cell.csv) == without_seconds(b / cell.csv.filename()));
    }
    CHECK(sa.reference_value == sb.reference_value);
  }

  TEST_CASE("reached targets are marked in the manifest") {
    const auto dir = temp_dir("reach");
    const auto summary = run_experiment(
        ExperimentConfig::parse("problem = portfolio\nn = 100\nN = 8\nepochs = 20\ninner_iterations = 200\n"
                                "learning_rate = 2e-3\ntarget_gap = 1e-6\n"),
        dir);
    REQUIRE(summary.cells.size() == 1);
    CHECK(summary.cells[0].reached_target);
    const auto manifest = nlohmann::json::parse(read_file(dir / "manifest.json"));
    CHECK(manifest["cells"][0]["status"] == "reached");
    CHECK(manifest["cells"][0]["csv"] == "vrsc_W1.csv");
  }

  TEST_CASE("MDP manifest echoes the instance shape") {
    const auto dir = temp_dir("mdp");
    const auto summary = run_experiment(
        ExperimentConfig::parse("problem = mdp\nS = 2000\nd = 50\nl2 = 1e-5\nepochs = 1\ninner_iterations = 20\n"
                                "learning_rate = 1e-4\n"),
        dir);
    const auto manifest = nlohmann::json::parse(read_file(dir / "manifest.json"));
    CHECK(manifest["instance"]["problem"] == "mdp");
    CHECK(manifest["instance"]["S"] == 2000);
    CHECK(manifest["instance"]["d"] == 50);
    CHECK(manifest["instance"]["l2"] == 1e-5);
    CHECK(manifest["dimensions"]["d1"] == 50);
    CHECK(manifest["dimensions"]["n1"] == 2000);
    CHECK(summary.reference_gradient_norm <= 1e-10);
  }
}
