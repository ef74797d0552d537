#include <doctest.h>

#include "asyvrsc/estimators.hpp"
#include "asyvrsc/generators.hpp"
#include "test_support.hpp"

using namespace asyvrsc;
using namespace asyvrsc::testing;

namespace {

MiniBatch fixed_batch(std::vector<std::size_t> a, std::vector<std::size_t> b, std::size_t i) {
  MiniBatch m;
  m.batch_a = std::move(a);
  m.batch_b = std::move(b);
  m.outer_index = i;
  return m;
}

GeneratedPortfolio small_portfolio(std::size_t n, std::size_t N, double density, std::uint64_t seed) {
  PortfolioConfig c;
  c.n = n;
  c.N = N;
  c.density = density;
  c.seed = seed;
  return generate_portfolio(c);
}

}  // namespace

TEST_SUITE("snapshot") {
  TEST_CASE("identical inner components give that component") {
    const auto p = identity_square(3, 2, 4);
    const Vector x = (Vector(3) << 1.0, -0.5, 2.0).finished();
    const Snapshot s = take_snapshot(p, x);
    CHECK(bitwise_equal(s.inner_value, x));
  }

  TEST_CASE("full gradient matches full_gradient bitwise") {
    ToyProblem toy(5, 6, 4, 3, 2, 0.2);
    const auto port = small_portfolio(40, 7, 0.4, 3);
    Rng rng(1);
    for (int rep = 0; rep < 5; ++rep) {
      const Vector x = random_vector(rng, 4);
      CHECK(bitwise_equal(take_snapshot(toy, x).full_grad, full_gradient(toy, x)));
      const Vector y = random_vector(rng, 7);
      CHECK(bitwise_equal(take_snapshot(port.problem, y).full_grad, full_gradient(port.problem, y)));
    }
  }

  TEST_CASE("mean-return entry equals a hand-rolled average") {
    const auto g = small_portfolio(5, 3, 1.0, 9);
    const Vector x = (Vector(3) << 0.3, -1.2, 0.8).finished();
    const Snapshot s = take_snapshot(g.problem, x);
    double sum = 0.0;
    for (int j = 0; j < 5; ++j) {
      double dot = 0.0;
      for (int k = 0; k < 3; ++k) dot += g.instance.rewards(j, k) * x[k];
      sum += dot;
    }
    CHECK(s.inner_value[3] == doctest::Approx(sum / 5.0).epsilon(1e-14));
  }

  TEST_CASE("full gradient is consistent with the stored Jacobian and outer gradient") {
    ToyProblem p(7, 5, 4, 3, 12, 0.1);
    Rng rng(2);
    const Vector x = random_vector(rng, 4);
    const Snapshot s = take_snapshot(p, x, 1, 3);
    CHECK(s.epoch == 3);
    Vector outer = Vector::Zero(3);
    for (std::size_t i = 0; i < 7; ++i) outer += p.outer_gradient(i, s.inner_value);
    outer /= 7.0;
    const Vector expected = s.inner_jacobian.to_dense().transpose() * outer + 0.1 * x;
    CHECK(max_rel_diff(s.full_grad, expected) <= 1e-12);
  }

  TEST_CASE("block-parallel snapshot agrees with the single block") {
    ToyProblem p(13, 11, 5, 3, 4, 0.05);
    Rng rng(3);
    const Vector x = random_vector(rng, 5);
    const Snapshot one = take_snapshot(p, x, 1);
    for (std::size_t blocks : {2u, 3u, 4u, 16u}) {
      const Snapshot many = take_snapshot(p, x, blocks);
      CHECK(max_rel_diff(many.inner_value, one.inner_value) <= 1e-12);
      CHECK(max_rel_diff(many.inner_jacobian.to_dense(), one.inner_jacobian.to_dense()) <= 1e-12);
      CHECK(max_rel_diff(many.full_grad, one.full_grad) <= 1e-12);
      CHECK(bitwise_equal(take_snapshot(p, x, blocks).full_grad, many.full_grad));
    }
  }

  TEST_CASE("wrong-length point is rejected") {
    ToyProblem p(2, 2, 3, 2, 1);
    CHECK_THROWS_AS(take_snapshot(p, Vector::Zero(4)), DimensionError);
  }
}

TEST_SUITE("estimators") {
  TEST_CASE("inner estimate at the snapshot point is exact") {
    ToyProblem p(3, 6, 4, 2, 5);
    Rng rng(4);
    const Vector xt = random_vector(rng, 4);
    const Snapshot s = take_snapshot(p, xt);
    for (int rep = 0; rep < 20; ++rep) {
      const auto batch = MiniBatch::sample(rng, p.dimensions(), 1 + rep % 4, 1);
      CHECK(bitwise_equal(estimate_inner(p, s, xt, batch.batch_a), s.inner_value));
      CHECK(bitwise_equal(estimate_jacobian(p, s, xt, batch.batch_b).to_dense(), s.inner_jacobian.to_dense()));
    }
  }

  TEST_CASE("single inner component makes the estimate exact") {
    ToyProblem p(2, 1, 3, 2, 6);
    Rng rng(5);
    const Snapshot s = take_snapshot(p, random_vector(rng, 3));
    const Vector x = random_vector(rng, 3);
    const std::vector<std::size_t> batch{0, 0, 0};
    CHECK(max_rel_diff(estimate_inner(p, s, x, batch), p.inner_value(0, x)) <= 1e-15);
    CHECK(max_rel_diff(estimate_jacobian(p, s, x, batch).to_dense(), p.inner_jacobian(0, x).to_dense()) <= 1e-15);
  }

  TEST_CASE("enumerating all single-index batches recovers G and its Jacobian") {
    for (std::size_t n2 : {1u, 3u, 8u, 10u}) {
      ToyProblem p(2, n2, 3, 4, 20 + n2);
      Rng rng(n2);
      const Snapshot s = take_snapshot(p, random_vector(rng, 3));
      const Vector x = random_vector(rng, 3);
      Vector avg = Vector::Zero(4);
      RowMatrix avg_jac = RowMatrix::Zero(4, 3);
      RowMatrix exact_jac = RowMatrix::Zero(4, 3);
      for (std::size_t j = 0; j < n2; ++j) {
        const std::vector<std::size_t> batch{j};
        avg += estimate_inner(p, s, x, batch);
        avg_jac += estimate_jacobian(p, s, x, batch).to_dense();
        exact_jac += p.inner_jacobian(j, x).to_dense();
      }
      avg /= static_cast<double>(n2);
      avg_jac /= static_cast<double>(n2);
      exact_jac /= static_cast<double>(n2);
      CHECK(max_rel_diff(avg, full_inner(p, x)) <= 1e-12);
      CHECK(max_rel_diff(avg_jac, exact_jac) <= 1e-12);
    }
  }

  TEST_CASE("constant Jacobians are returned unchanged for any point") {
    const auto g = small_portfolio(20, 6, 0.5, 2);
    Rng rng(6);
    const Snapshot s = take_snapshot(g.problem, random_vector(rng, 6));
    for (int rep = 0; rep < 5; ++rep) {
      const auto batch = MiniBatch::sample(rng, g.problem.dimensions(), 3, 3);
      const Jacobian est = estimate_jacobian(g.problem, s, random_vector(rng, 6), batch.batch_b);
      CHECK(bitwise_equal(est.to_dense(), s.inner_jacobian.to_dense()));
    }
  }

  TEST_CASE("out-of-range batch indices are rejected") {
    ToyProblem p(3, 4, 2, 2, 1);
    const Snapshot s = take_snapshot(p, Vector::Zero(2));
    const std::vector<std::size_t> bad{0, 4};
    CHECK_THROWS_AS(estimate_inner(p, s, Vector::Zero(2), bad), std::out_of_range);
    CHECK_THROWS_AS(estimate_jacobian(p, s, Vector::Zero(2), bad), std::out_of_range);
    CHECK_THROWS_AS(estimate_gradient(p, s, Vector::Zero(2), fixed_batch({0}, {0}, 3)), std::out_of_range);
    CHECK_THROWS_AS(estimate_gradient(p, s, Vector::Zero(2), fixed_batch({0}, {5}, 0)), std::out_of_range);
    CHECK_THROWS_AS(estimate_gradient(p, s, Vector::Zero(2), fixed_batch({}, {0}, 0)), std::invalid_argument);
  }

  TEST_CASE("gradient estimate at the snapshot point equals the full gradient") {
    ToyProblem p(6, 7, 5, 3, 8, 0.2);
    const auto g = small_portfolio(30, 8, 0.3, 5);
    Rng rng(7);
    const Vector xt = random_vector(rng, 5);
    const Vector yt = random_vector(rng, 8);
    const Snapshot s = take_snapshot(p, xt);
    const Snapshot sp = take_snapshot(g.problem, yt);
    for (int rep = 0; rep < 100; ++rep) {
      const auto batch = MiniBatch::sample(rng, p.dimensions(), 1 + rep % 5, 1 + rep % 3);
      CHECK(bitwise_equal(estimate_gradient(p, s, xt, batch).grad, s.full_grad));
      const auto pb = MiniBatch::sample(rng, g.problem.dimensions(), 1 + rep % 5, 1 + rep % 3);
      CHECK(bitwise_equal(estimate_gradient(g.problem, sp, yt, pb).grad, sp.full_grad));
    }
  }

  TEST_CASE("degenerate single-sample problem gives the exact gradient") {
    ToyProblem p(1, 1, 3, 2, 9, 0.4);
    Rng rng(8);
    const Snapshot s = take_snapshot(p, random_vector(rng, 3));
    for (int rep = 0; rep < 10; ++rep) {
      const Vector x = random_vector(rng, 3);
      const Vector grad = estimate_gradient(p, s, x, fixed_batch({0}, {0}, 0)).grad;
      CHECK(max_rel_diff(grad, full_gradient(p, x)) <= 1e-12);
    }
  }

  TEST_CASE("fixed indices on a 2x2 instance match a straight-line transcription") {
    const double l2 = 0.1;
    ToyProblem p(2, 2, 2, 2, 31, l2);
    const Vector xt = (Vector(2) << 0.4, -0.7).finished();
    const Vector x = (Vector(2) << -0.2, 0.9).finished();
    const std::vector<std::size_t> A{1, 0, 1};
    const std::vector<std::size_t> B{1, 1};
    const std::size_t i = 1;

    const auto G = [&](std::size_t j, const Vector& z) {
      Vector out(2);
      for (int k = 0; k < 2; ++k) out[k] = std::sin(p.a(j).row(k).dot(z)) + p.b(j).row(k).dot(z);
      return out;
    };
    const auto dG = [&](std::size_t j, const Vector& z) {
      Eigen::Matrix2d out;
      for (int k = 0; k < 2; ++k) out.row(k) = std::cos(p.a(j).row(k).dot(z)) * p.a(j).row(k) + p.b(j).row(k);
      return out;
    };
    const auto dF = [&](std::size_t r, const Vector& y) {
      Vector out(2);
      for (int k = 0; k < 2; ++k) out[k] = 2.0 * p.c(r, k) * y[k] / (1.0 + y[k] * y[k]) + p.e(r, k);
      return out;
    };

    const Vector Gt = 0.5 * (G(0, xt) + G(1, xt));
    const Eigen::Matrix2d Jt = 0.5 * (dG(0, xt) + dG(1, xt));
    const Vector full = Jt.transpose() * (0.5 * (dF(0, Gt) + dF(1, Gt))) + l2 * xt;
    Vector g_hat = Gt;
    for (auto j : A) g_hat -= (G(j, xt) - G(j, x)) / 3.0;
    Eigen::Matrix2d j_hat = Jt;
    for (auto j : B) j_hat -= (dG(j, xt) - dG(j, x)) / 2.0;
    const Vector expected =
        (j_hat.transpose() * dF(i, g_hat) + l2 * x) - (Jt.transpose() * dF(i, Gt) + l2 * xt) + full;

    const Snapshot s = take_snapshot(p, xt);
    const auto est = estimate_gradient(p, s, x, fixed_batch(A, B, i));
    CHECK(max_rel_diff(est.g_hat, g_hat) <= 1e-12);
    CHECK(max_rel_diff(est.jac_hat.to_dense(), RowMatrix(j_hat)) <= 1e-12);
    CHECK(max_rel_diff(est.grad, expected) <= 1e-12);
  }

  TEST_CASE("estimate parts re-derive the gradient") {
    ToyProblem p(4, 5, 3, 2, 41, 0.05);
    Rng rng(10);
    const Snapshot s = take_snapshot(p, random_vector(rng, 3));
    for (int rep = 0; rep < 20; ++rep) {
      const Vector x = random_vector(rng, 3);
      const auto batch = MiniBatch::sample(rng, p.dimensions(), 2, 3);
      const auto est = estimate_gradient(p, s, x, batch);
      CHECK(est.batch.batch_a == batch.batch_a);
      const std::size_t i = batch.outer_index;
      const Vector local = est.jac_hat.transpose_multiply(p.outer_gradient(i, est.g_hat)) + 0.05 * x;
      const Vector anchor = s.inner_jacobian.transpose_multiply(p.outer_gradient(i, s.inner_value)) + 0.05 * s.x_tilde;
      CHECK(max_rel_diff(est.grad, Vector(local - anchor + s.full_grad)) <= 1e-12);
    }
  }

  TEST_CASE("coordinate subsets are bitwise equal to the full gradient") {
    ToyProblem toy(4, 6, 9, 3, 3, 0.1);
    const auto port = small_portfolio(50, 12, 0.2, 8);
    Rng rng(11);
    for (const CompositionProblem* p : {static_cast<const CompositionProblem*>(&toy),
                                        static_cast<const CompositionProblem*>(&port.problem)}) {
      const std::size_t d = p->dimensions().d1;
      const Snapshot s = take_snapshot(*p, random_vector(rng, d));
      for (int rep = 0; rep < 20; ++rep) {
        const Vector x = random_vector(rng, d);
        const auto batch = MiniBatch::sample(rng, p->dimensions(), 3, 2);
        Vector full;
        variance_reduced_gradient(*p, s, x, batch, full);
        CHECK(bitwise_equal(full, estimate_gradient(*p, s, x, batch).grad));
        std::vector<std::size_t> coords{d - 1, 0, d / 2};
        std::vector<double> out(coords.size());
        variance_reduced_gradient(*p, s, x, batch, coords, out);
        for (std::size_t m = 0; m < coords.size(); ++m) {
          CHECK(std::bit_cast<std::uint64_t>(out[m]) == std::bit_cast<std::uint64_t>(full[coords[m]]));
        }
      }
    }
  }

  TEST_CASE("mini-batch sampling stays in range and follows the draw order") {
    const Dimensions dims{3, 7, 2, 2};
    Rng rng(12), replay(12);
    for (int rep = 0; rep < 200; ++rep) {
      const auto b = MiniBatch::sample(rng, dims, 4, 2);
      REQUIRE(b.batch_a.size() == 4);
      REQUIRE(b.batch_b.size() == 2);
      CHECK_NOTHROW(b.validate(dims));
      for (auto j : b.batch_a) CHECK(j == replay.index(7));
      for (auto j : b.batch_b) CHECK(j == replay.index(7));
      CHECK(b.outer_index == replay.index(3));
    }
  }

  TEST_CASE("query accounting constants") {
    CHECK(snapshot_queries(Dimensions{10, 20, 3, 4}) == 50);
    CHECK(update_queries(5, 3) == 10);
  }
}
