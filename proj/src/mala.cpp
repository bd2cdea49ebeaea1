#include "latentgibbs/mala.hpp"

#include "latentgibbs/error.hpp"

#include <atomic>
#include <cmath>

namespace latentgibbs {

namespace {

constexpr double kOriginClamp = 1e-8;

// Log-density and gradient share one application of K.
double log_density_and_grad(const GlmModel &model, const Vector &x, Vector &grad) {
  const Vector kx = model.op().apply(x);
  Vector g(model.m());
  double total = 0.0;
  for (std::size_t k = 0; k < model.group_count(); ++k) {
    const auto &rows = model.group(k).rows;
    const Factor &f = model.group_factor(k);
    if (rows.size() == 1) {
      const double t = kx[rows.front()];
      total += logpdf(f, t);
      g[rows.front()] = dlogpdf(f, t);
      continue;
    }
    const double s = model.group_projection(k, kx);
    total += logpdf(f, s);
    const double se = std::max(s, kOriginClamp);
    const double ds = dlogpdf(f, se) / se;
    for (Index r : rows)
      g[r] = ds * kx[r];
  }
  grad = model.op().apply_adjoint(g);
  return total;
}

} // namespace

Vector grad_logpdf(const GlmModel &model, const Vector &x) {
  Vector g;
  log_density_and_grad(model, x, g);
  return g;
}

std::pair<Vector, bool> mala_step(const GlmModel &model, const Vector &x,
                                  const MalaConfig &cfg, Rng &rng) {
  require(cfg.step_size > 0.0, "mala: step size must be positive");
  const double tau = cfg.step_size;
  Vector grad_x;
  const double lx = log_density_and_grad(model, x, grad_x);
  Vector prop(x.size());
  const double noise = std::sqrt(2.0 * tau);
  for (Index i = 0; i < x.size(); ++i)
    prop[i] = x[i] + tau * grad_x[i] + noise * standard_normal(rng);
  Vector grad_p;
  const double lp = log_density_and_grad(model, prop, grad_p);
  // log q(a | b) = -||a - b - tau grad(b)||^2 / (4 tau) + const
  const double fwd = (prop - x - tau * grad_x).squaredNorm();
  const double bwd = (x - prop - tau * grad_p).squaredNorm();
  const double log_ratio = lp - lx - (bwd - fwd) / (4.0 * tau);
  const double u = uniform_open(rng);
  if (std::isfinite(log_ratio) && std::log(u) < log_ratio)
    return {std::move(prop), true};
  return {x, false};
}

double tune_step_size(const GlmModel &model, const Vector &x0, double target,
                      std::size_t iterations, std::uint64_t seed, double initial_step) {
  require(target > 0.0 && target < 1.0, "tune_step_size: target must lie in (0, 1)");
  require(initial_step > 0.0, "tune_step_size: initial step must be positive");
  Rng rng = make_stream(seed, 0x7475u);
  Vector x = x0;
  const double mu = std::log(10.0 * initial_step);
  const double gamma = 0.05, t0 = 10.0, kappa = 0.75;
  double h_bar = 0.0, log_tau = std::log(initial_step), log_tau_bar = 0.0;
  for (std::size_t it = 1; it <= iterations; ++it) {
    const MalaConfig cfg{std::exp(log_tau), false};
    Vector grad_x;
    const double lx = log_density_and_grad(model, x, grad_x);
    const double tau = cfg.step_size;
    Vector prop = x + tau * grad_x;
    for (Index i = 0; i < prop.size(); ++i)
      prop[i] += std::sqrt(2.0 * tau) * standard_normal(rng);
    Vector grad_p;
    const double lp = log_density_and_grad(model, prop, grad_p);
    const double fwd = (prop - x - tau * grad_x).squaredNorm();
    const double bwd = (x - prop - tau * grad_p).squaredNorm();
    const double log_ratio = lp - lx - (bwd - fwd) / (4.0 * tau);
    const double accept = std::isfinite(log_ratio) ? std::min(1.0, std::exp(log_ratio)) : 0.0;
    if (uniform01(rng) < accept)
      x = prop;
    const double t = static_cast<double>(it);
    h_bar = (1.0 - 1.0 / (t + t0)) * h_bar + (target - accept) / (t + t0);
    log_tau = mu - std::sqrt(t) / gamma * h_bar;
    const double eta = std::pow(t, -kappa);
    log_tau_bar = eta * log_tau + (1.0 - eta) * log_tau_bar;
  }
  return std::exp(log_tau_bar);
}

MalaRun run_mala_chains(const GlmModel &model, const Vector &x0, const MalaConfig &cfg,
                        const RunOptions &opts, const RecorderSpec &recorder) {
  std::atomic<std::size_t> accepted{0};
  auto step = [&](ChainState &s) {
    auto [next, ok] = mala_step(model, s.x, cfg, s.rng);
    s.x = std::move(next);
    if (ok)
      accepted.fetch_add(1, std::memory_order_relaxed);
  };
  MalaRun run{run_chains_with(model, x0, step, opts, recorder), 0.0};
  run.accept_rate = static_cast<double>(accepted.load()) /
                    static_cast<double>(opts.iterations * opts.chains);
  return run;
}

} // namespace latentgibbs
