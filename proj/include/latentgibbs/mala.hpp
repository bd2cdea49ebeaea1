#pragma once

#include "latentgibbs/glm.hpp"
#include "latentgibbs/model.hpp"

#include <cstddef>
#include <cstdint>
#include <utility>

namespace latentgibbs {

struct MalaConfig {
  double step_size = 0.1;
  bool record_accept_rate = false;
};

/// K^T g with g_r = dlogpdf(phi, (Kx)_r) for linear rows and
/// dlogpdf(phi, s) (Kx)_r / s for rows of an isotropic group with norm s.
Vector grad_logpdf(const GlmModel &model, const Vector &x);

/// One Metropolis-adjusted Langevin step. Returns the new state and whether
/// the proposal was accepted.
std::pair<Vector, bool> mala_step(const GlmModel &model, const Vector &x,
                                  const MalaConfig &cfg, Rng &rng);

/// Step-size helper, not part of the sampler itself: dual averaging of
/// log tau on a single chain started at x0 so the acceptance rate
/// approaches `target`.
double tune_step_size(const GlmModel &model, const Vector &x0, double target,
                      std::size_t iterations, std::uint64_t seed,
                      double initial_step = 0.1);

struct MalaRun {
  SampleStore samples;
  double accept_rate = 0.0;
};

MalaRun run_mala_chains(const GlmModel &model, const Vector &x0, const MalaConfig &cfg,
                        const RunOptions &opts, const RecorderSpec &recorder);

} // namespace latentgibbs
