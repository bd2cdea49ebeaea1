#include "latentgibbs/factors.hpp"

#include "latentgibbs/error.hpp"

#include <boost/math/distributions/students_t.hpp>
#include <boost/math/quadrature/exp_sinh.hpp>
#include <boost/math/special_functions/bessel.hpp>
#include <boost/math/special_functions/gamma.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <sstream>

namespace latentgibbs {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kLogTwoPi = 1.8378770664093453;

template <class... Ts> struct overloaded : Ts... { using Ts::operator()...; };

void require_positive(double v, const char *what) {
  require(std::isfinite(v) && v > 0.0, std::string(what) + " must be positive");
}

// log K_nu(z) for z > 0 that survives both underflow (large z) and overflow
// (tiny z with nu > 0).
double log_bessel_k(double nu, double z) {
  nu = std::abs(nu);
  if (z > 600.0) {
    const double mu = 4.0 * nu * nu;
    const double w = 8.0 * z;
    const double series = 1.0 + (mu - 1.0) / w +
                          (mu - 1.0) * (mu - 9.0) / (2.0 * w * w) +
                          (mu - 1.0) * (mu - 9.0) * (mu - 25.0) / (6.0 * w * w * w);
    return 0.5 * std::log(kPi / (2.0 * z)) - z + std::log(series);
  }
  if (nu > 0.0 && nu * std::log(2.0 / z) > 600.0)
    return std::lgamma(nu) + (nu - 1.0) * std::log(2.0) - nu * std::log(z);
  return std::log(boost::math::cyl_bessel_k(nu, z));
}

double normal_cdf(double t) { return 0.5 * std::erfc(-t / std::numbers::sqrt2); }

double sym_gamma_logpdf(const SymGammaFactor &p, double t) {
  const double nu = p.alpha - 0.5;
  double x = std::abs(t);
  if (nu > 0.0) {
    const double z = std::sqrt(2.0 * p.beta) * x;
    if (x == 0.0 || nu * std::log(2.0 / z) > 600.0) {
      // limit at the origin: sqrt(2 beta) Gamma(alpha - 1/2) / (2 sqrt(pi) Gamma(alpha))
      return 0.5 * std::log(2.0 * p.beta) + std::lgamma(nu) -
             std::log(2.0 * std::sqrt(kPi)) - std::lgamma(p.alpha);
    }
  } else {
    x = std::max(x, 1e-300);
  }
  const double z = std::sqrt(2.0 * p.beta) * x;
  return 0.5 * std::log(2.0) + p.alpha * std::log(p.beta) - 0.5 * std::log(kPi) -
         std::lgamma(p.alpha) + nu * (std::log(x) - 0.5 * std::log(2.0 * p.beta)) +
         log_bessel_k(nu, z);
}

double sym_gamma_dlogpdf(const SymGammaFactor &p, double t) {
  const double nu = p.alpha - 0.5;
  double x = std::abs(t);
  if (nu <= 0.0)
    x = std::max(x, 1e-8);
  else if (x == 0.0)
    return 0.0;
  const double c = std::sqrt(2.0 * p.beta);
  const double z = c * x;
  const double ratio = std::exp(log_bessel_k(nu - 1.0, z) - log_bessel_k(nu, z));
  return (t < 0.0 ? 1.0 : -1.0) * c * ratio;
}

// P(T <= -x) for x >= 0 by quadrature of the density.
double sym_gamma_lower_tail(const SymGammaFactor &p, double x) {
  if (x <= 0.0)
    return 0.5;
  boost::math::quadrature::exp_sinh<double> integrator;
  const SymGammaFactor params = p;
  auto integrand = [&](double u) {
    return std::exp(sym_gamma_logpdf(params, x + u));
  };
  return integrator.integrate(integrand, 0.0, std::numeric_limits<double>::infinity());
}

double survival(const Factor &f, double t) {
  return std::visit(
      overloaded{
          [&](const NormalFactor &p) {
            return 0.5 * std::erfc((t - p.mean) / std::sqrt(2.0 * p.variance));
          },
          [&](const LaplaceFactor &p) {
            return t < 0.0 ? 1.0 - 0.5 * std::exp(t / p.b) : 0.5 * std::exp(-t / p.b);
          },
          [&](const StudentTFactor &p) {
            boost::math::students_t dist(p.nu);
            return boost::math::cdf(boost::math::complement(dist, t));
          },
          [&](const SymGammaFactor &p) {
            return t >= 0.0 ? sym_gamma_lower_tail(p, t)
                            : 1.0 - sym_gamma_lower_tail(p, -t);
          },
          [&](const GmmFactor &p) {
            double s = 0.0;
            for (std::size_t j = 0; j < p.weights.size(); ++j)
              s += p.weights[j] * 0.5 *
                   std::erfc((t - p.means[j]) / std::sqrt(2.0 * p.variances[j]));
            return s;
          },
      },
      f.params());
}

} // namespace

Factor Factor::normal(double mean, double variance) {
  require(std::isfinite(mean), "normal: mean must be finite");
  require_positive(variance, "normal: variance");
  return Factor(NormalFactor{mean, variance});
}

Factor Factor::laplace(double b) {
  require_positive(b, "laplace: b");
  return Factor(LaplaceFactor{b});
}

Factor Factor::student_t(double nu) {
  require_positive(nu, "student-t: nu");
  return Factor(StudentTFactor{nu});
}

Factor Factor::sym_gamma(double alpha, double beta) {
  require_positive(alpha, "sym-gamma: alpha");
  require_positive(beta, "sym-gamma: beta");
  return Factor(SymGammaFactor{alpha, beta});
}

Factor Factor::gmm(std::vector<double> weights, std::vector<double> means,
                   std::vector<double> variances) {
  require(!weights.empty(), "gmm: no components");
  require(weights.size() == means.size() && weights.size() == variances.size(),
          "gmm: weights, means and variances differ in length");
  double total = 0.0;
  for (std::size_t j = 0; j < weights.size(); ++j) {
    require(std::isfinite(weights[j]) && weights[j] >= 0.0,
            "gmm: weights must be nonnegative");
    require(std::isfinite(means[j]), "gmm: means must be finite");
    require_positive(variances[j], "gmm: variance");
    total += weights[j];
  }
  require(std::abs(total - 1.0) <= 1e-12, "gmm: weights must sum to 1");
  for (double &w : weights)
    w /= total;
  GmmFactor p{std::move(weights), std::move(means), std::move(variances), {}};
  p.log_norm.resize(p.weights.size());
  for (std::size_t j = 0; j < p.weights.size(); ++j)
    p.log_norm[j] = std::log(p.weights[j]) - 0.5 * (kLogTwoPi + std::log(p.variances[j]));
  return Factor(std::move(p));
}

bool Factor::is_gsm() const {
  switch (family()) {
  case Family::laplace:
  case Family::student_t:
  case Family::sym_gamma:
    return true;
  default:
    return false;
  }
}

std::string Factor::describe() const {
  std::ostringstream os;
  std::visit(overloaded{
                 [&](const NormalFactor &p) {
                   os << "normal(" << p.mean << ", " << p.variance << ")";
                 },
                 [&](const LaplaceFactor &p) { os << "laplace(" << p.b << ")"; },
                 [&](const StudentTFactor &p) { os << "student-t(" << p.nu << ")"; },
                 [&](const SymGammaFactor &p) {
                   os << "sym-gamma(" << p.alpha << ", " << p.beta << ")";
                 },
                 [&](const GmmFactor &p) { os << "gmm(" << p.weights.size() << ")"; },
             },
             params_);
  return os.str();
}

double logpdf(const Factor &f, double t) {
  return std::visit(
      overloaded{
          [&](const NormalFactor &p) {
            const double d = t - p.mean;
            return -0.5 * (kLogTwoPi + std::log(p.variance)) - d * d / (2.0 * p.variance);
          },
          [&](const LaplaceFactor &p) { return -std::log(2.0 * p.b) - std::abs(t) / p.b; },
          [&](const StudentTFactor &p) {
            return std::lgamma(0.5 * (p.nu + 1.0)) - std::lgamma(0.5 * p.nu) -
                   0.5 * std::log(p.nu * kPi) -
                   0.5 * (p.nu + 1.0) * std::log1p(t * t / p.nu);
          },
          [&](const SymGammaFactor &p) { return sym_gamma_logpdf(p, t); },
          [&](const GmmFactor &p) {
            double top = -std::numeric_limits<double>::infinity();
            for (std::size_t j = 0; j < p.weights.size(); ++j) {
              const double d = t - p.means[j];
              top = std::max(top, p.log_norm[j] - d * d / (2.0 * p.variances[j]));
            }
            double s = 0.0;
            for (std::size_t j = 0; j < p.weights.size(); ++j) {
              const double d = t - p.means[j];
              s += std::exp(p.log_norm[j] - d * d / (2.0 * p.variances[j]) - top);
            }
            return top + std::log(s);
          },
      },
      f.params());
}

double pdf(const Factor &f, double t) { return std::exp(logpdf(f, t)); }

double dlogpdf(const Factor &f, double t) {
  return std::visit(
      overloaded{
          [&](const NormalFactor &p) { return -(t - p.mean) / p.variance; },
          [&](const LaplaceFactor &p) {
            return t > 0.0 ? -1.0 / p.b : (t < 0.0 ? 1.0 / p.b : 0.0);
          },
          [&](const StudentTFactor &p) { return -(p.nu + 1.0) * t / (p.nu + t * t); },
          [&](const SymGammaFactor &p) { return sym_gamma_dlogpdf(p, t); },
          [&](const GmmFactor &p) {
            const double lp = logpdf(f, t);
            double g = 0.0;
            for (std::size_t j = 0; j < p.weights.size(); ++j) {
              const double d = t - p.means[j];
              const double r = std::exp(p.log_norm[j] - d * d / (2.0 * p.variances[j]) - lp);
              g -= r * d / p.variances[j];
            }
            return g;
          },
      },
      f.params());
}

double cdf(const Factor &f, double t) {
  if (f.family() == Family::sym_gamma)
    return t <= 0.0 ? sym_gamma_lower_tail(f.as<SymGammaFactor>(), -t)
                    : 1.0 - sym_gamma_lower_tail(f.as<SymGammaFactor>(), t);
  if (f.family() == Family::student_t) {
    boost::math::students_t dist(f.as<StudentTFactor>().nu);
    return boost::math::cdf(dist, t);
  }
  if (f.family() == Family::normal) {
    const auto &p = f.as<NormalFactor>();
    return normal_cdf((t - p.mean) / std::sqrt(p.variance));
  }
  return 1.0 - survival(f, t);
}

double std_dev(const Factor &f) {
  return std::visit(
      overloaded{
          [](const NormalFactor &p) { return std::sqrt(p.variance); },
          [](const LaplaceFactor &p) { return std::numbers::sqrt2 * p.b; },
          [](const StudentTFactor &p) {
            return p.nu > 2.0 ? std::sqrt(p.nu / (p.nu - 2.0))
                              : std::numeric_limits<double>::infinity();
          },
          [](const SymGammaFactor &p) { return std::sqrt(p.alpha / p.beta); },
          [](const GmmFactor &p) {
            double m1 = 0.0, m2 = 0.0;
            for (std::size_t j = 0; j < p.weights.size(); ++j) {
              m1 += p.weights[j] * p.means[j];
              m2 += p.weights[j] * (p.variances[j] + p.means[j] * p.means[j]);
            }
            return std::sqrt(std::max(m2 - m1 * m1, 0.0));
          },
      },
      f.params());
}

double tail_quantile(const Factor &f, double tail) {
  require(tail > 0.0 && tail < 1.0, "tail_quantile: tail must lie in (0, 1)");
  auto mass = [&](double q) { return cdf(f, -q) + survival(f, q); };
  double hi = 1.0;
  while (mass(hi) > tail) {
    hi *= 2.0;
    if (hi > 1e300)
      fail(ErrorCode::invalid_argument, "tail_quantile: tail too heavy");
  }
  double lo = 0.0;
  for (int it = 0; it < 200 && hi - lo > 1e-12 * hi; ++it) {
    const double mid = 0.5 * (lo + hi);
    (mass(mid) > tail ? lo : hi) = mid;
  }
  return hi;
}

std::pair<double, double> latent_mean_var(const Factor &f, const LatentValue &z) {
  auto scalar = [&]() {
    const double *v = std::get_if<double>(&z);
    require(v != nullptr && *v > 0.0,
            "latent_mean_var: " + f.describe() + " needs a positive real latent");
    return *v;
  };
  switch (f.family()) {
  case Family::normal: {
    const auto &p = f.as<NormalFactor>();
    return {p.mean, p.variance};
  }
  case Family::laplace:
  case Family::sym_gamma:
    return {0.0, scalar()};
  case Family::student_t:
    return {0.0, 1.0 / scalar()};
  case Family::gmm: {
    const auto &p = f.as<GmmFactor>();
    const std::size_t *j = std::get_if<std::size_t>(&z);
    require(j != nullptr && *j < p.weights.size(),
            "latent_mean_var: gmm needs a component index");
    return {p.means[*j], p.variances[*j]};
  }
  }
  fail(ErrorCode::invalid_argument, "latent_mean_var: unknown factor");
}

LatentValue sample_conditional_latent(const Factor &f, double projection,
                                      Rng &rng) {
  const double s2 = projection * projection;
  switch (f.family()) {
  case Family::normal:
    return std::monostate{};
  case Family::laplace: {
    const double b = f.as<LaplaceFactor>().b;
    return sample_gig(1.0 / (b * b), std::max(s2, kSafeSquare), 0.5, rng);
  }
  case Family::student_t: {
    const double nu = f.as<StudentTFactor>().nu;
    return sample_gamma(0.5 * (nu + 1.0), 0.5 * (nu + s2), rng);
  }
  case Family::sym_gamma: {
    const auto &p = f.as<SymGammaFactor>();
    return sample_gig(2.0 * p.beta, std::max(s2, kSafeSquare), p.alpha - 0.5, rng);
  }
  case Family::gmm: {
    const auto &p = f.as<GmmFactor>();
    thread_local std::vector<double> w;
    const std::size_t d = p.weights.size();
    w.resize(d);
    double top = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < d; ++j) {
      const double r = projection - p.means[j];
      w[j] = p.log_norm[j] - r * r / (2.0 * p.variances[j]);
      top = std::max(top, w[j]);
    }
    for (double &v : w)
      v = std::exp(v - top);
    return sample_categorical(w, rng);
  }
  }
  fail(ErrorCode::invalid_argument, "sample_conditional_latent: unknown factor");
}

namespace {

double gig_psi(double x, double alpha, double lambda) {
  return -alpha * (std::cosh(x) - 1.0) - lambda * (std::expm1(x) - x);
}

double gig_dpsi(double x, double alpha, double lambda) {
  return -alpha * std::sinh(x) - lambda * std::expm1(x);
}

} // namespace

// Devroye's (2014) rejection sampler on the log scale for the two-parameter
// family x^(lambda-1) exp(-omega (x + 1/x) / 2), lambda >= 0, followed by
// reflection and rescaling.
double sample_gig(double a, double b, double p, Rng &rng) {
  require(a > 0.0 && b > 0.0 && std::isfinite(p), "sample_gig: need a, b > 0");
  double lambda = p;
  const double omega = std::sqrt(a * b);
  const bool swap = lambda < 0.0;
  if (swap)
    lambda = -lambda;
  const double alpha = std::sqrt(omega * omega + lambda * lambda) - lambda;

  double t, s;
  const double xt = -gig_psi(1.0, alpha, lambda);
  if (xt >= 0.5 && xt <= 2.0)
    t = 1.0;
  else if (xt > 2.0)
    t = (alpha == 0.0 && lambda == 0.0) ? 1.0 : std::sqrt(2.0 / (alpha + lambda));
  else
    t = (alpha == 0.0 && lambda == 0.0) ? 1.0 : std::log(4.0 / (alpha + 2.0 * lambda));

  const double xs = -gig_psi(-1.0, alpha, lambda);
  if (xs >= 0.5 && xs <= 2.0) {
    s = 1.0;
  } else if (xs > 2.0) {
    s = (alpha == 0.0 && lambda == 0.0)
            ? 1.0
            : std::sqrt(4.0 / (alpha * std::cosh(1.0) + lambda));
  } else if (alpha == 0.0 && lambda == 0.0) {
    s = 1.0;
  } else if (alpha == 0.0) {
    s = 1.0 / lambda;
  } else {
    const double v = std::log1p(1.0 / alpha + std::sqrt(1.0 / (alpha * alpha) + 2.0 / alpha));
    s = lambda == 0.0 ? v : std::min(1.0 / lambda, v);
  }

  const double eta = -gig_psi(t, alpha, lambda);
  const double zeta = -gig_dpsi(t, alpha, lambda);
  const double theta = -gig_psi(-s, alpha, lambda);
  const double xi = gig_dpsi(-s, alpha, lambda);
  const double pp = 1.0 / xi;
  const double r = 1.0 / zeta;
  const double td = t - r * eta;
  const double sd = s - pp * theta;
  const double q = td + sd;
  const double total = pp + q + r;

  double x;
  for (;;) {
    const double u = uniform01(rng);
    const double v = uniform_open(rng);
    const double w = uniform01(rng);
    if (u < q / total)
      x = -sd + q * v;
    else if (u < (q + r) / total)
      x = td - r * std::log(v);
    else
      x = -sd + pp * std::log(v);
    double envelope = 1.0;
    if (x > td)
      envelope = std::exp(-eta - zeta * (x - t));
    else if (x < -sd)
      envelope = std::exp(-theta + xi * (x + s));
    if (w * envelope <= std::exp(gig_psi(x, alpha, lambda)))
      break;
  }
  const double ratio = lambda / omega;
  double y = std::exp(x) * (ratio + std::sqrt(1.0 + ratio * ratio));
  if (swap)
    y = 1.0 / y;
  return y * std::sqrt(b / a);
}

double sample_gamma(double alpha, double beta, Rng &rng) {
  require(alpha > 0.0 && beta > 0.0, "sample_gamma: need alpha, beta > 0");
  std::gamma_distribution<double> dist(alpha, 1.0 / beta);
  double g = dist(rng);
  // guard the measure-zero event that would make a latent variance vanish
  while (g <= 0.0)
    g = dist(rng);
  return g;
}

std::size_t sample_categorical(std::span<const double> weights, Rng &rng) {
  double total = 0.0;
  for (double w : weights) {
    require(std::isfinite(w) && w >= 0.0, "sample_categorical: invalid weight");
    total += w;
  }
  require(total > 0.0, "sample_categorical: all weights are zero");
  const double u = uniform01(rng) * total;
  double acc = 0.0;
  std::size_t last = 0;
  for (std::size_t j = 0; j < weights.size(); ++j) {
    if (weights[j] == 0.0)
      continue;
    acc += weights[j];
    last = j;
    if (u < acc)
      return j;
  }
  return last;
}

double sample_factor(const Factor &f, Rng &rng) {
  return std::visit(
      overloaded{
          [&](const NormalFactor &p) {
            return p.mean + std::sqrt(p.variance) * standard_normal(rng);
          },
          [&](const LaplaceFactor &p) {
            return p.b * (std::log(uniform_open(rng)) - std::log(uniform_open(rng)));
          },
          [&](const StudentTFactor &p) {
            const double g = sample_gamma(0.5 * p.nu, 0.5 * p.nu, rng);
            return standard_normal(rng) / std::sqrt(g);
          },
          [&](const SymGammaFactor &p) {
            const double v = sample_gamma(p.alpha, p.beta, rng);
            return std::sqrt(v) * standard_normal(rng);
          },
          [&](const GmmFactor &p) {
            const std::size_t j = sample_categorical(p.weights, rng);
            return p.means[j] + std::sqrt(p.variances[j]) * standard_normal(rng);
          },
      },
      f.params());
}

Factor gsm_discretize_laplace(double b, std::size_t components) {
  require_positive(b, "gsm_discretize_laplace: b");
  require(components >= 2, "gsm_discretize_laplace: need at least 2 components");
  // Mixing law Exp(rate) with rate = 1 / (2 b^2), split into equal-mass
  // intervals. Each representative variance v_k satisfies
  // v_k^(-1/2) = E[V^(-1/2) | V in interval k], which keeps the density at the
  // origin exact despite the integrable singularity of N(0; 0, v) at v = 0.
  const double rate = 1.0 / (2.0 * b * b);
  const double l = static_cast<double>(components);
  std::vector<double> weights(components, 1.0 / l);
  std::vector<double> means(components, 0.0);
  std::vector<double> variances(components);
  double lower_p = 0.0;
  for (std::size_t k = 0; k < components; ++k) {
    const double hi_q = static_cast<double>(k + 1) / l;
    const double upper_p =
        k + 1 == components ? 1.0 : boost::math::gamma_p(0.5, -std::log1p(-hi_q));
    // E[V^(-1/2); interval] = sqrt(rate) * Gamma(1/2) * (P(1/2, rate v_hi) - P(1/2, rate v_lo))
    const double inv_sqrt =
        std::sqrt(rate) * std::sqrt(kPi) * (upper_p - lower_p) * l;
    variances[k] = 1.0 / (inv_sqrt * inv_sqrt);
    lower_p = upper_p;
  }
  return Factor::gmm(std::move(weights), std::move(means), std::move(variances));
}

Factor uniform_means_laplace_gmm(double b, std::size_t components) {
  require_positive(b, "uniform_means_laplace_gmm: b");
  require(components >= 2, "uniform_means_laplace_gmm: need at least 2 components");
  const double l = static_cast<double>(components);
  std::vector<double> weights(components), means(components),
      variances(components, 1.0 / (l - 1.0));
  double total = 0.0;
  for (std::size_t k = 0; k < components; ++k) {
    means[k] = -0.5 + static_cast<double>(k) / (l - 1.0);
    weights[k] = std::exp(-std::abs(means[k]) / b);
    total += weights[k];
  }
  for (double &w : weights)
    w /= total;
  // renormalize once more so the sum is 1 to machine precision
  const double check = std::accumulate(weights.begin(), weights.end(), 0.0);
  for (double &w : weights)
    w /= check;
  return Factor::gmm(std::move(weights), std::move(means), std::move(variances));
}

} // namespace latentgibbs
