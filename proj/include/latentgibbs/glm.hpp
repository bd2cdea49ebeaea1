#pragma once

#include "latentgibbs/gaussian_sampler.hpp"
#include "latentgibbs/model.hpp"

#include <cstdint>
#include <functional>
#include <vector>

namespace latentgibbs {

/// Image prior prod_i phi((lambda K x)_i) with K the circular 2D gradient.
/// Isotropic priors pair the horizontal and vertical row of every pixel.
GlmModel build_image_prior(Index height, Index width, const Factor &f,
                           double lambda, bool isotropic);

/// Appends the row mean_row(n) with factor phi0, making an improper prior
/// whose operator annihilates constants proper.
GlmModel extend_improper(const GlmModel &model, const Factor &phi0);

/// Prepends identity rows with Normal(y_i, sigma2) factors.
GlmModel build_posterior_denoising(const GlmModel &prior, const Vector &y,
                                   double sigma2);

/// Prepends rows M D x, D the orthonormal 2D DCT and M the selection of
/// `mask`, with Normal(y_k, sigma2) factors.
GlmModel build_posterior_dct_inpaint(const GlmModel &prior, Index height,
                                     Index width, const Vector &y,
                                     const std::vector<Index> &mask,
                                     double sigma2);

/// D^T M^T y.
Vector zero_fill(Index height, Index width, const Vector &y,
                 const std::vector<Index> &mask);

LatentState sample_z_given_x(const GlmModel &model, const Vector &x, Rng &rng);

struct ChainState {
  Vector x;
  LatentState z;
  Vector warm_start;
  Rng rng;
};

/// Chain `chain` of a run seeded with `seed`, positioned at x0.
ChainState make_chain(const GlmModel &model, const Vector &x0,
                      std::uint64_t seed, std::uint64_t chain);

/// z from f_{Z|X=x}, then x from f_{X|Z=z} warm-started at the old x.
void gibbs_step(const GlmModel &model, ChainState &state, const CgConfig &cfg);

/// Which scalar projections <v, x> to record, and whether to keep the
/// final full states.
struct RecorderSpec {
  std::vector<Vector> functionals;
  bool keep_final_states = false;
};

/// values[k][iter * chains + chain] holds <v_k, x> after iteration iter+1.
struct SampleStore {
  std::size_t iterations = 0;
  std::size_t chains = 0;
  std::vector<std::vector<double>> values;
  /// n x chains, filled when requested.
  Matrix final_states;

  double at(std::size_t k, std::size_t iter, std::size_t chain) const {
    return values[k][iter * chains + chain];
  }
  std::vector<double> across_chains(std::size_t k, std::size_t iter) const;
  std::vector<double> trajectory(std::size_t k, std::size_t chain,
                                 std::size_t first_iter = 0) const;
};

using StepFunction = std::function<void(ChainState &)>;

struct RunOptions {
  std::size_t iterations = 1;
  std::size_t chains = 1;
  std::uint64_t seed = 0;
  unsigned threads = 1;
};

/// Runs independent chains from x0 with `step`, each on its own stream.
SampleStore run_chains_with(const GlmModel &model, const Vector &x0,
                            const StepFunction &step, const RunOptions &opts,
                            const RecorderSpec &recorder);

SampleStore run_chains(const GlmModel &model, const Vector &x0,
                       const CgConfig &cfg, const RunOptions &opts,
                       const RecorderSpec &recorder);

} // namespace latentgibbs
