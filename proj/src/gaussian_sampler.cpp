#include "latentgibbs/gaussian_sampler.hpp"

#include "latentgibbs/error.hpp"

#include <Eigen/Cholesky>

#include <algorithm>
#include <cmath>

namespace latentgibbs {

RowGaussians row_gaussians(const GlmModel &model, const LatentState &z) {
  require(z.size() == model.group_count(), "latent state does not match model");
  RowGaussians rg{Vector(model.m()), Vector(model.m())};
  for (std::size_t g = 0; g < model.group_count(); ++g) {
    const auto [mu, var] = latent_mean_var(model.group_factor(g), z[g]);
    for (Index r : model.group(g).rows) {
      rg.mean[r] = mu;
      rg.precision[r] = 1.0 / var;
    }
  }
  return rg;
}

Vector perturb(const GlmModel &model, const LatentState &z, Rng &rng) {
  const RowGaussians rg = row_gaussians(model, z);
  Vector y(model.m());
  for (Index i = 0; i < model.m(); ++i)
    y[i] = rg.mean[i] + standard_normal(rng) / std::sqrt(rg.precision[i]);
  return y;
}

namespace {

CgResult conjugate_gradient(const GlmModel &model, const Vector &w,
                            const Vector &y, const Vector &x0,
                            const CgConfig &cfg) {
  const auto &op = model.op();
  const Index n = model.n();
  require(y.size() == model.m(), "solve_normal_eq: y has wrong length");
  require(x0.size() == n, "solve_normal_eq: x0 has wrong length");
  require(cfg.tolerance > 0.0, "solve_normal_eq: tolerance must be positive");
  const std::size_t max_iter =
      cfg.max_iterations == 0 ? 10 * static_cast<std::size_t>(n) : cfg.max_iterations;

  Vector d = Vector::Ones(n);
  if (cfg.preconditioner == Preconditioner::normal_eq_diagonal &&
      model.has_diagonal_preconditioner())
    d = model.normal_eq_diagonal(w);

  Vector tmp_m(model.m());
  Vector rhs(n), ap(n);
  tmp_m = w.cwiseProduct(y);
  op.apply_adjoint_into(tmp_m, rhs);

  auto apply_a = [&](const Vector &v, Vector &out) {
    op.apply_into(v, tmp_m);
    tmp_m.array() *= w.array();
    op.apply_adjoint_into(tmp_m, out);
  };

  CgResult res;
  res.x = x0;
  Vector r(n);
  apply_a(res.x, ap);
  r = rhs - ap;
  Vector zr = r.cwiseQuotient(d);
  Vector p = zr;
  double rz = r.dot(zr);
  double rnorm = r.norm();
  const double stop = cfg.tolerance * std::max(1.0, rhs.norm());
  if (cfg.record_residuals)
    res.residual_history.push_back(rnorm);

  std::size_t it = 0;
  while (rnorm > stop) {
    if (it == max_iter)
      throw ConvergenceFailure(rnorm, it);
    apply_a(p, ap);
    const double alpha = rz / p.dot(ap);
    res.x += alpha * p;
    r -= alpha * ap;
    zr = r.cwiseQuotient(d);
    const double rz_new = r.dot(zr);
    const double beta = rz_new / rz;
    rz = rz_new;
    p = zr + beta * p;
    rnorm = r.norm();
    ++it;
    if (cfg.record_residuals)
      res.residual_history.push_back(rnorm);
  }
  res.iterations = it;
  res.residual = rnorm;
  return res;
}

} // namespace

CgResult solve_normal_eq(const GlmModel &model, const LatentState &z,
                         const Vector &y, const Vector &x0, const CgConfig &cfg) {
  return conjugate_gradient(model, row_gaussians(model, z).precision, y, x0, cfg);
}

Vector sample_x_given_z(const GlmModel &model, const LatentState &z,
                        const Vector &warm_start, const CgConfig &cfg, Rng &rng) {
  const RowGaussians rg = row_gaussians(model, z);
  Vector y(model.m());
  for (Index i = 0; i < model.m(); ++i)
    y[i] = rg.mean[i] + standard_normal(rng) / std::sqrt(rg.precision[i]);
  return conjugate_gradient(model, rg.precision, y, warm_start, cfg).x;
}

std::pair<Vector, Matrix> cond_gaussian_params_dense(const GlmModel &model,
                                                     const LatentState &z) {
  if (model.n() > 64)
    fail(ErrorCode::size_exceeded, "dense conditional parameters need n <= 64");
  const RowGaussians rg = row_gaussians(model, z);
  const Matrix k = model.op().to_dense();
  const Matrix precision = k.transpose() * rg.precision.asDiagonal() * k;
  const Matrix cov = precision.llt().solve(Matrix::Identity(model.n(), model.n()));
  const Vector mean = cov * (k.transpose() * rg.precision.cwiseProduct(rg.mean));
  return {mean, cov};
}

} // namespace latentgibbs
