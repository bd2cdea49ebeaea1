#include "latentgibbs/glm.hpp"

#include "latentgibbs/error.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <mutex>
#include <string>
#include <thread>

namespace latentgibbs {

GlmModel build_image_prior(Index height, Index width, const Factor &f,
                           double lambda, bool isotropic) {
  require(lambda > 0.0 && std::isfinite(lambda), "image prior: lambda must be positive");
  if (isotropic)
    require(f.is_gsm(), "image prior: isotropic priors need a scale-mixture factor, got " +
                            f.describe());
  LinearOperator k = grad2d_circ(height, width);
  if (lambda != 1.0)
    k = scaled(k, lambda);
  const Index n = height * width;
  std::vector<RowGroup> groups;
  if (isotropic) {
    groups.reserve(static_cast<std::size_t>(n));
    for (Index i = 0; i < n; ++i)
      groups.push_back(RowGroup{{i, n + i}, 0});
  } else {
    groups.reserve(static_cast<std::size_t>(2 * n));
    for (Index i = 0; i < 2 * n; ++i)
      groups.push_back(RowGroup{{i}, 0});
  }
  return GlmModel(std::move(k), {f}, std::move(groups));
}

GlmModel extend_improper(const GlmModel &model, const Factor &phi0) {
  const Vector ones = Vector::Ones(model.n());
  require(model.op().apply(ones).cwiseAbs().maxCoeff() <= 1e-10,
          "extend_improper: operator does not annihilate constants");
  std::vector<LinearOperator> blocks = model.op().blocks();
  blocks.push_back(mean_row(model.n()));
  std::vector<Factor> factors = model.factors();
  factors.push_back(phi0);
  std::vector<RowGroup> groups = model.groups();
  groups.push_back(RowGroup{{model.m()}, static_cast<std::uint32_t>(factors.size() - 1)});
  return GlmModel(stacked(std::move(blocks)), std::move(factors), std::move(groups));
}

namespace {

GlmModel prepend_gaussian_rows(const GlmModel &prior, LinearOperator data_op,
                               const Vector &y, double sigma2) {
  require(sigma2 > 0.0 && std::isfinite(sigma2), "posterior: sigma2 must be positive");
  require(y.size() == data_op.rows(), "posterior: measurement length mismatch");
  const Index d = data_op.rows();
  std::vector<LinearOperator> blocks{std::move(data_op)};
  for (auto &b : prior.op().blocks())
    blocks.push_back(b);

  std::vector<Factor> factors;
  factors.reserve(static_cast<std::size_t>(d) + prior.factors().size());
  std::vector<RowGroup> groups;
  groups.reserve(static_cast<std::size_t>(d) + prior.group_count());
  for (Index i = 0; i < d; ++i) {
    factors.push_back(Factor::normal(y[i], sigma2));
    groups.push_back(RowGroup{{i}, static_cast<std::uint32_t>(i)});
  }
  const auto shift = static_cast<std::uint32_t>(d);
  for (const auto &f : prior.factors())
    factors.push_back(f);
  for (const auto &g : prior.groups()) {
    RowGroup moved{g.rows, g.factor + shift};
    for (Index &r : moved.rows)
      r += d;
    groups.push_back(std::move(moved));
  }
  return GlmModel(stacked(std::move(blocks)), std::move(factors), std::move(groups));
}

} // namespace

GlmModel build_posterior_denoising(const GlmModel &prior, const Vector &y,
                                   double sigma2) {
  require(y.size() == prior.n(), "denoising: y must have one entry per pixel");
  return prepend_gaussian_rows(prior, identity(prior.n()), y, sigma2);
}

GlmModel build_posterior_dct_inpaint(const GlmModel &prior, Index height,
                                     Index width, const Vector &y,
                                     const std::vector<Index> &mask,
                                     double sigma2) {
  require(!mask.empty(), "dct inpainting: empty mask");
  require(height * width == prior.n(), "dct inpainting: image size mismatch");
  require(static_cast<Index>(mask.size()) == y.size(),
          "dct inpainting: mask and measurement lengths differ");
  auto data_op = composed(select_rows(prior.n(), mask), dct2d(height, width));
  return prepend_gaussian_rows(prior, std::move(data_op), y, sigma2);
}

Vector zero_fill(Index height, Index width, const Vector &y,
                 const std::vector<Index> &mask) {
  require(!mask.empty(), "zero_fill: empty mask");
  return composed(select_rows(height * width, mask), dct2d(height, width))
      .apply_adjoint(y);
}

LatentState sample_z_given_x(const GlmModel &model, const Vector &x, Rng &rng) {
  const Vector kx = model.op().apply(x);
  LatentState z(model.group_count());
  for (std::size_t g = 0; g < model.group_count(); ++g)
    z[g] = sample_conditional_latent(model.group_factor(g),
                                     model.group_projection(g, kx), rng);
  return z;
}

ChainState make_chain(const GlmModel &model, const Vector &x0,
                      std::uint64_t seed, std::uint64_t chain) {
  require(x0.size() == model.n(), "chain: x0 has wrong length");
  return ChainState{x0, model.neutral_latents(), x0, make_stream(seed, chain)};
}

void gibbs_step(const GlmModel &model, ChainState &state, const CgConfig &cfg) {
  state.z = sample_z_given_x(model, state.x, state.rng);
  state.x = sample_x_given_z(model, state.z, state.warm_start, cfg, state.rng);
  state.warm_start = state.x;
}

std::vector<double> SampleStore::across_chains(std::size_t k, std::size_t iter) const {
  const auto first = values[k].begin() + static_cast<std::ptrdiff_t>(iter * chains);
  return {first, first + static_cast<std::ptrdiff_t>(chains)};
}

std::vector<double> SampleStore::trajectory(std::size_t k, std::size_t chain,
                                            std::size_t first_iter) const {
  std::vector<double> out;
  out.reserve(iterations - std::min(first_iter, iterations));
  for (std::size_t it = first_iter; it < iterations; ++it)
    out.push_back(at(k, it, chain));
  return out;
}

SampleStore run_chains_with(const GlmModel &model, const Vector &x0,
                            const StepFunction &step, const RunOptions &opts,
                            const RecorderSpec &recorder) {
  require(opts.iterations >= 1 && opts.chains >= 1,
          "run_chains: need at least one chain and one iteration");
  for (const auto &v : recorder.functionals)
    require(v.size() == model.n(), "run_chains: functional has wrong length");

  SampleStore store;
  store.iterations = opts.iterations;
  store.chains = opts.chains;
  store.values.assign(recorder.functionals.size(),
                      std::vector<double>(opts.iterations * opts.chains));
  if (recorder.keep_final_states)
    store.final_states.resize(model.n(), static_cast<Index>(opts.chains));

  // Chains write disjoint slots of the store, so no locking is needed.
  auto run_chain = [&](std::size_t c) {
    ChainState state = make_chain(model, x0, opts.seed, c);
    for (std::size_t it = 0; it < opts.iterations; ++it) {
      try {
        step(state);
      } catch (const Error &e) {
        throw Error(e.code(), "chain " + std::to_string(c) + ", iteration " +
                                  std::to_string(it + 1) + ": " + e.what());
      }
      for (std::size_t k = 0; k < recorder.functionals.size(); ++k)
        store.values[k][it * opts.chains + c] = recorder.functionals[k].dot(state.x);
    }
    if (recorder.keep_final_states)
      store.final_states.col(static_cast<Index>(c)) = state.x;
  };

  const unsigned threads =
      std::max(1u, std::min<unsigned>(opts.threads, static_cast<unsigned>(opts.chains)));
  if (threads == 1) {
    for (std::size_t c = 0; c < opts.chains; ++c)
      run_chain(c);
    return store;
  }

  std::exception_ptr first_error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  for (unsigned t = 0; t < threads; ++t) {
    pool.emplace_back([&, t] {
      for (std::size_t c = t; c < opts.chains; c += threads) {
        try {
          run_chain(c);
        } catch (...) {
          std::lock_guard lock(error_mutex);
          if (!first_error)
            first_error = std::current_exception();
          return;
        }
      }
    });
  }
  for (auto &th : pool)
    th.join();
  if (first_error)
    std::rethrow_exception(first_error);
  return store;
}

SampleStore run_chains(const GlmModel &model, const Vector &x0,
                       const CgConfig &cfg, const RunOptions &opts,
                       const RecorderSpec &recorder) {
  return run_chains_with(
      model, x0, [&](ChainState &s) { gibbs_step(model, s, cfg); }, opts, recorder);
}

} // namespace latentgibbs
