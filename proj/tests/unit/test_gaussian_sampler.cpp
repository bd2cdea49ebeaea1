#include <doctest.h>

#include "latentgibbs/error.hpp"
#include "latentgibbs/gaussian_sampler.hpp"
#include "latentgibbs/glm.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include <cmath>

using namespace latentgibbs;

namespace {

Matrix random_matrix(Index rows, Index cols, Rng &rng) {
  Matrix m(rows, cols);
  for (Index i = 0; i < m.size(); ++i)
    m.data()[i] = standard_normal(rng);
  return m;
}

// Empirical mean/covariance of `count` draws compared entrywise with the
// oracle, each within 3.5 standard errors.
void check_moments(const std::function<Vector()> &draw, const Vector &mean,
                   const Matrix &cov, std::size_t count) {
  const Index n = mean.size();
  Vector sum = Vector::Zero(n);
  Matrix outer = Matrix::Zero(n, n);
  for (std::size_t s = 0; s < count; ++s) {
    const Vector x = draw() - mean;
    sum += x;
    outer.noalias() += x * x.transpose();
  }
  const double c = static_cast<double>(count);
  const Vector emp_mean = sum / c;
  const Matrix emp_cov = outer / c - emp_mean * emp_mean.transpose();
  for (Index i = 0; i < n; ++i) {
    CHECK(std::abs(emp_mean[i]) < 3.5 * std::sqrt(cov(i, i) / c));
    for (Index j = 0; j < n; ++j) {
      const double se = std::sqrt((cov(i, i) * cov(j, j) + cov(i, j) * cov(i, j)) / c);
      CHECK(std::abs(emp_cov(i, j) - cov(i, j)) < 3.5 * se);
    }
  }
}

} // namespace

TEST_CASE("perturbation draws per-row Gaussians") {
  Rng rng = make_stream(201, 0);
  const std::vector<Factor> cat{Factor::laplace(1.0), Factor::gmm({0.5, 0.5}, {-1.0, 2.0}, {0.5, 0.3})};
  const GlmModel model(identity(2), cat, {{{0}, 0}, {{1}, 1}});
  const LatentState z{0.25, std::size_t{1}};
  double s0 = 0, q0 = 0, s1 = 0, q1 = 0;
  const int count = 100000;
  for (int i = 0; i < count; ++i) {
    const Vector y = perturb(model, z, rng);
    s0 += y[0];
    q0 += y[0] * y[0];
    s1 += y[1];
    q1 += (y[1] - 2.0) * (y[1] - 2.0);
  }
  CHECK(std::abs(s0 / count) < 3.5 * std::sqrt(0.25 / count));
  CHECK(q0 / count == doctest::Approx(0.25).epsilon(0.015));
  CHECK(std::abs(s1 / count - 2.0) < 3.5 * std::sqrt(0.3 / count));
  CHECK(q1 / count == doctest::Approx(0.3).epsilon(0.015));
}

TEST_CASE("CG solves identity and dense systems") {
  Rng rng = make_stream(202, 0);
  const GlmModel id = GlmModel::uniform(identity(4), Factor::normal(0.0, 1.0));
  const Vector y = Vector::LinSpaced(4, -1.0, 2.0);
  const CgResult r = solve_normal_eq(id, id.neutral_latents(), y, Vector::Zero(4), CgConfig{});
  CHECK(r.iterations == 1);
  CHECK((r.x - y).norm() < 1e-12);

  const Matrix k = random_matrix(8, 5, rng);
  std::vector<Factor> cat;
  std::vector<RowGroup> groups;
  Vector w(8);
  for (Index i = 0; i < 8; ++i) {
    w[i] = 0.5 + std::abs(standard_normal(rng));
    cat.push_back(Factor::normal(0.0, 1.0 / w[i]));
    groups.push_back({{i}, static_cast<std::uint32_t>(i)});
  }
  const GlmModel model(dense(k), cat, groups);
  const Vector b = random_matrix(8, 1, rng);
  const Matrix a = k.transpose() * w.asDiagonal() * k;
  const Vector oracle = a.llt().solve(k.transpose() * w.cwiseProduct(b));
  CgConfig cfg;
  cfg.record_residuals = true;
  const CgResult cg = solve_normal_eq(model, model.neutral_latents(), b, Vector::Zero(5), cfg);
  CHECK((cg.x - oracle).norm() < 1e-8 * std::max(1.0, oracle.norm()));
  CHECK(cg.residual_history.size() == cg.iterations + 1);
  CHECK(cg.residual == cg.residual_history.back());
}

TEST_CASE("preconditioning on an extended gradient model") {
  Rng rng = make_stream(203, 0);
  const GlmModel prior = extend_improper(
      build_image_prior(6, 5, Factor::laplace(1.0), 1.0, false), Factor::normal(0.0, 1.0));
  LatentState z = prior.neutral_latents();
  for (std::size_t g = 0; g + 1 < z.size(); ++g)
    z[g] = std::exp(2.0 * standard_normal(rng));
  const Vector y = perturb(prior, z, rng);
  CgConfig pre, plain;
  pre.tolerance = plain.tolerance = 1e-12;
  plain.preconditioner = Preconditioner::identity;
  const CgResult a = solve_normal_eq(prior, z, y, Vector::Zero(prior.n()), pre);
  const CgResult b = solve_normal_eq(prior, z, y, Vector::Zero(prior.n()), plain);
  CHECK(a.iterations <= b.iterations);
  CHECK((a.x - b.x).norm() < 1e-6);
}

TEST_CASE("CG reports convergence failure") {
  const GlmModel prior = extend_improper(
      build_image_prior(8, 8, Factor::normal(0.0, 1.0), 1.0, false), Factor::normal(0.0, 1.0));
  Rng rng = make_stream(204, 0);
  const Vector y = perturb(prior, prior.neutral_latents(), rng);
  CgConfig cfg;
  cfg.max_iterations = 2;
  try {
    solve_normal_eq(prior, prior.neutral_latents(), y, Vector::Zero(prior.n()), cfg);
    FAIL("expected convergence failure");
  } catch (const ConvergenceFailure &e) {
    CHECK(e.code() == ErrorCode::convergence_failure);
    CHECK(e.iterations() == 2);
    CHECK(e.residual() > 0.0);
  }
}

TEST_CASE("dense conditional parameters") {
  const double a = 0.7, b = -1.9;
  const GlmModel two(dense(Matrix::Ones(2, 1)),
                     {Factor::normal(a, 1.0), Factor::normal(b, 1.0)}, {{{0}, 0}, {{1}, 1}});
  const auto [mu, cov] = cond_gaussian_params_dense(two, two.neutral_latents());
  CHECK(mu[0] == doctest::Approx(0.5 * (a + b)));
  CHECK(cov(0, 0) == doctest::Approx(0.5));

  const std::vector<Factor> cat{Factor::normal(1.0, 2.0), Factor::normal(-3.0, 0.5)};
  const GlmModel diag(identity(2), cat, {{{0}, 0}, {{1}, 1}});
  const auto [m2, c2] = cond_gaussian_params_dense(diag, diag.neutral_latents());
  CHECK(m2[0] == doctest::Approx(1.0));
  CHECK(m2[1] == doctest::Approx(-3.0));
  CHECK(c2(0, 0) == doctest::Approx(2.0));
  CHECK(c2(1, 1) == doctest::Approx(0.5));
  CHECK(c2(0, 1) == doctest::Approx(0.0));

  const GlmModel ext = extend_improper(
      build_image_prior(2, 2, Factor::normal(0.0, 1.0), 1.0, false), Factor::normal(0.0, 1.0));
  const auto [m3, c3] = cond_gaussian_params_dense(ext, ext.neutral_latents());
  CHECK((c3 - c3.transpose()).norm() < 1e-12);
  const Eigen::SelfAdjointEigenSolver<Matrix> eig(c3);
  CHECK(eig.eigenvalues().minCoeff() > 0.0);

  const GlmModel big = GlmModel::uniform(identity(65), Factor::normal(0.0, 1.0));
  try {
    cond_gaussian_params_dense(big, big.neutral_latents());
    FAIL("expected size-exceeded");
  } catch (const Error &e) {
    CHECK(e.code() == ErrorCode::size_exceeded);
  }
}

TEST_CASE("perturb-and-MAP draws match the dense conditional") {
  Rng rng = make_stream(205, 0);
  SUBCASE("identity") {
    const GlmModel id = GlmModel::uniform(identity(3), Factor::normal(0.0, 1.0));
    const auto z = id.neutral_latents();
    check_moments([&] { return sample_x_given_z(id, z, Vector::Zero(3), CgConfig{}, rng); },
                  Vector::Zero(3), Matrix::Identity(3, 3), 100000);
  }
  SUBCASE("random mixed model, warm and cold starts") {
    const Matrix k = random_matrix(12, 6, rng);
    const std::vector<Factor> cat{Factor::laplace(1.0), Factor::student_t(3.0),
                                  Factor::gmm({0.3, 0.7}, {-1.0, 0.5}, {0.4, 2.0}),
                                  Factor::normal(0.2, 0.8)};
    std::vector<RowGroup> groups;
    LatentState z;
    for (Index i = 0; i < 12; ++i) {
      const auto f = static_cast<std::uint32_t>(i % 4);
      groups.push_back({{i}, f});
      if (f == 2)
        z.emplace_back(static_cast<std::size_t>(i % 2));
      else if (f == 3)
        z.emplace_back(std::monostate{});
      else
        z.emplace_back(0.3 + std::abs(standard_normal(rng)));
    }
    const GlmModel model(dense(k), cat, groups);
    const auto [mean, cov] = cond_gaussian_params_dense(model, z);
    check_moments([&] { return sample_x_given_z(model, z, Vector::Zero(6), CgConfig{}, rng); },
                  mean, cov, 60000);
    Vector warm = Vector::Constant(6, 5.0);
    check_moments(
        [&] {
          warm = sample_x_given_z(model, z, warm, CgConfig{}, rng);
          return warm;
        },
        mean, cov, 60000);
  }
}

TEST_CASE("residual history ends below the stopping bound") {
  Rng rng = make_stream(206, 0);
  const GlmModel prior = extend_improper(
      build_image_prior(8, 7, Factor::laplace(1.0), 1.0, false), Factor::normal(0.0, 1.0));
  LatentState z = prior.neutral_latents();
  for (std::size_t g = 0; g + 1 < z.size(); ++g)
    z[g] = std::exp(2.0 * standard_normal(rng));
  const Vector y = perturb(prior, z, rng);
  CgConfig cfg;
  cfg.record_residuals = true;
  const CgResult r = solve_normal_eq(prior, z, y, Vector::Zero(prior.n()), cfg);
  const Vector w = row_gaussians(prior, z).precision;
  const Vector rhs = prior.op().apply_adjoint(w.cwiseProduct(y));
  CHECK(r.residual <= cfg.tolerance * std::max(1.0, rhs.norm()));
  CHECK(r.residual_history.front() > r.residual_history.back());
  const Vector check = rhs - prior.op().apply_adjoint(w.cwiseProduct(prior.op().apply(r.x)));
  CHECK(check.norm() <= 10.0 * cfg.tolerance * std::max(1.0, rhs.norm()));
}
