#pragma once

#include "latentgibbs/model.hpp"
#include "latentgibbs/rng.hpp"

#include <cstddef>
#include <utility>
#include <vector>

namespace latentgibbs {

enum class Preconditioner { identity, normal_eq_diagonal };

struct CgConfig {
  /// Stop once ||r|| <= tolerance * max(1, ||b||).
  double tolerance = 1e-8;
  /// 0 selects 10 n.
  std::size_t max_iterations = 0;
  /// Falls back to identity when the model has no diagonal plan.
  Preconditioner preconditioner = Preconditioner::normal_eq_diagonal;
  bool record_residuals = false;
};

struct CgResult {
  Vector x;
  std::size_t iterations = 0;
  double residual = 0.0;
  std::vector<double> residual_history;
};

/// Per-row means and precisions of the Gaussian factors given the latents.
struct RowGaussians {
  Vector mean;
  Vector precision;
};

RowGaussians row_gaussians(const GlmModel &model, const LatentState &z);

/// Y_i ~ N(mu_i(z_i), sigma_i^2(z_i)) independently.
Vector perturb(const GlmModel &model, const LatentState &z, Rng &rng);

/// Solves K^T W K x = K^T W y with W = diag of row precisions by diagonally
/// preconditioned conjugate gradient started at x0. Throws
/// ConvergenceFailure when the iteration budget runs out.
CgResult solve_normal_eq(const GlmModel &model, const LatentState &z,
                         const Vector &y, const Vector &x0, const CgConfig &cfg);

/// Exact draw from f_{X|Z=z} (up to the CG tolerance) by perturb-and-MAP.
Vector sample_x_given_z(const GlmModel &model, const LatentState &z,
                        const Vector &warm_start, const CgConfig &cfg, Rng &rng);

/// Dense mean and covariance of f_{X|Z=z}; n <= 64 only.
std::pair<Vector, Matrix> cond_gaussian_params_dense(const GlmModel &model,
                                                     const LatentState &z);

} // namespace latentgibbs
