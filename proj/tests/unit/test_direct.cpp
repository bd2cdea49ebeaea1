#include <doctest.h>

#include "latentgibbs/analysis.hpp"
#include "latentgibbs/direct.hpp"
#include "latentgibbs/error.hpp"

#include <Eigen/LU>

#include <chrono>
#include <cmath>

using namespace latentgibbs;

namespace {

DirectedTree random_tree(Index n, Rng &rng) {
  std::vector<Index> parent(static_cast<std::size_t>(n));
  parent[0] = -1;
  for (Index i = 1; i < n; ++i)
    parent[static_cast<std::size_t>(i)] =
        static_cast<Index>(uniform01(rng) * static_cast<double>(i));
  return DirectedTree(std::move(parent));
}

} // namespace

TEST_CASE("tree solve examples") {
  Vector u(2);
  u << 1.0, 1.0;
  Vector x = tree_solve(DirectedTree::chain(3), 6.0, u);
  CHECK((x - Vector::LinSpaced(3, 1.0, 3.0)).norm() < 1e-14);

  const DirectedTree star({-1, 0, 0});
  u << 0.7, -0.7;
  x = tree_solve(star, 0.0, u);
  CHECK(x[0] == doctest::Approx(0.0));
  CHECK(x[1] == doctest::Approx(0.7));
  CHECK(x[2] == doctest::Approx(-0.7));

  x = tree_solve(DirectedTree::chain(5), 2.0, Vector::Zero(4));
  CHECK((x - Vector::Constant(5, 0.4)).norm() < 1e-15);
}

TEST_CASE("tree solve matches the dense system") {
  Rng rng = make_stream(401, 0);
  const DirectedTree tree = random_tree(9, rng);
  Vector u(8);
  for (Index i = 0; i < 8; ++i)
    u[i] = standard_normal(rng);
  const double u0 = 1.3;
  Matrix a = Matrix::Zero(9, 9);
  Vector rhs(9);
  a.row(0).setOnes();
  rhs[0] = u0;
  for (std::size_t e = 0; e < tree.edges().size(); ++e) {
    const auto [p, c] = tree.edges()[e];
    a(static_cast<Index>(e) + 1, c) = 1.0;
    a(static_cast<Index>(e) + 1, p) = -1.0;
    rhs[static_cast<Index>(e) + 1] = u[static_cast<Index>(e)];
  }
  const Vector oracle = a.fullPivLu().solve(rhs);
  CHECK((tree_solve(tree, u0, u) - oracle).norm() < 1e-12);
}

TEST_CASE("tree solve is exact on large random trees") {
  Rng rng = make_stream(402, 0);
  const Index n = 10000;
  const DirectedTree tree = random_tree(n, rng);
  Vector u(n - 1);
  for (Index i = 0; i < n - 1; ++i)
    u[i] = standard_normal(rng);
  const Vector x = tree_solve(tree, 3.0, u);
  CHECK(std::abs(x.sum() - 3.0) < 1e-9);
  double worst = 0.0;
  for (std::size_t e = 0; e < tree.edges().size(); ++e) {
    const auto [p, c] = tree.edges()[e];
    worst = std::max(worst, std::abs(x[c] - x[p] - u[static_cast<Index>(e)]));
  }
  CHECK(worst < 1e-11);
}

TEST_CASE("tree validation") {
  CHECK_THROWS_AS(DirectedTree({0, -1}), Error);
  CHECK_THROWS_AS(DirectedTree({-1, -1}), Error);
  CHECK_THROWS_AS(DirectedTree({1, 2, 1}), Error);
  CHECK_THROWS_AS(DirectedTree({-1, 2, 1}), Error);
  const DirectedTree t({-1, 0, 0, 1});
  CHECK(t.preorder() == std::vector<Index>{0, 1, 3, 2});
  CHECK(t.edge_of(0) == -1);
  CHECK(t.edge_of(3) == 2);
}

TEST_CASE("tree prior edge marginals") {
  Rng rng = make_stream(403, 0);
  const DirectedTree tree = DirectedTree::chain(7);
  const Factor lap = Factor::laplace(1.0);
  const std::size_t count = 100000;
  std::vector<double> edge(count), direct(count);
  for (std::size_t s = 0; s < count; ++s) {
    const Vector x = sample_tree_prior(tree, Factor::normal(0.0, 1.0), {lap}, rng);
    edge[s] = x[4] - x[3];
    direct[s] = sample_factor(lap, rng);
  }
  CHECK(wasserstein1(edge, direct) < 0.01);

  Rng a = make_stream(404, 0), b = make_stream(404, 0);
  const Vector one = sample_tree_prior(DirectedTree::chain(1), Factor::normal(2.0, 1.0), {lap}, a);
  CHECK(one[0] == sample_factor(Factor::normal(2.0, 1.0), b));
  CHECK_THROWS_AS(sample_tree_prior(tree, lap, {lap, lap}, rng), Error);
}

TEST_CASE("tree sampling time is linear") {
  Rng rng = make_stream(405, 0);
  const Factor lap = Factor::laplace(1.0);
  auto time = [&](Index n) {
    const DirectedTree tree = DirectedTree::chain(n);
    const auto t0 = std::chrono::steady_clock::now();
    for (int r = 0; r < 5; ++r)
      sample_tree_prior(tree, lap, {lap}, rng);
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  };
  time(10000);
  CHECK(time(100000) < 15.0 * time(10000));
}

TEST_CASE("complete models") {
  Rng rng = make_stream(406, 0);
  Matrix k = Matrix::Zero(2, 2);
  k(0, 0) = 2.0;
  k(1, 1) = 4.0;
  const std::vector<Factor> normals(2, Factor::normal(0.0, 1.0));
  const CompleteSampler diag(k);
  const std::size_t count = 100000;
  double s0 = 0, s1 = 0;
  for (std::size_t i = 0; i < count; ++i) {
    const Vector x = diag.draw(normals, rng);
    s0 += x[0] * x[0];
    s1 += x[1] * x[1];
  }
  const double c = static_cast<double>(count);
  CHECK(std::abs(s0 / c - 0.25) < 3.5 * 0.25 * std::sqrt(2.0 / c));
  CHECK(std::abs(s1 / c - 1.0 / 16.0) < 3.5 * std::sqrt(2.0 / c) / 16.0);

  Matrix singular(2, 2);
  singular << 1.0, 2.0, 2.0, 4.0;
  try {
    CompleteSampler bad(singular);
    FAIL("expected invalid-argument");
  } catch (const Error &e) {
    CHECK(e.code() == ErrorCode::invalid_argument);
  }
  CHECK_THROWS_AS(CompleteSampler(Matrix::Zero(2, 3)), Error);

  // general K: (K X)_i follows phi_i exactly
  Matrix g(3, 3);
  g << 1.0, 0.5, -0.2, 0.3, -1.0, 0.4, 0.0, 0.7, 1.2;
  const std::vector<Factor> fs{Factor::laplace(1.0), Factor::student_t(3.0),
                               Factor::gmm({0.4, 0.6}, {-1.0, 1.0}, {0.2, 0.5})};
  const CompleteSampler gen(g);
  std::vector<double> proj(count), ref(count);
  for (std::size_t i = 0; i < count; ++i) {
    proj[i] = (g * gen.draw(fs, rng))[2];
    ref[i] = sample_factor(fs[2], rng);
  }
  CHECK(wasserstein1(proj, ref) < 0.01);
  const Vector u = Vector::LinSpaced(3, -1.0, 1.0);
  CHECK((g * gen.solve(u) - u).norm() < 1e-12);

  // triangular difference chain via the operator path
  Matrix chain(3, 3);
  chain << 1.0, 0.0, 0.0, -1.0, 1.0, 0.0, 0.0, -1.0, 1.0;
  const CompleteSampler tri(dense(chain));
  Vector cum(3);
  cum << -1.0, -1.0, 0.0;
  CHECK((tri.solve(u) - cum).norm() < 1e-15);
}
