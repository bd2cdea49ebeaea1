#pragma once

#include "latentgibbs/rng.hpp"

#include <cstddef>
#include <span>
#include <string>
#include <utility>
#include <variant>
#include <vector>

namespace latentgibbs {

struct NormalFactor {
  double mean;
  double variance;
};

struct LaplaceFactor {
  double b;
};

struct StudentTFactor {
  double nu;
};

struct SymGammaFactor {
  double alpha;
  double beta;
};

struct GmmFactor {
  std::vector<double> weights;
  std::vector<double> means;
  std::vector<double> variances;
  // log w_j - log(2 pi s2_j) / 2, cached for responsibilities
  std::vector<double> log_norm;
};

enum class Family { normal, laplace, student_t, sym_gamma, gmm };

/// A univariate factor phi of the product-of-experts model. Build through
/// the validated factories below.
class Factor {
public:
  using Params = std::variant<NormalFactor, LaplaceFactor, StudentTFactor,
                              SymGammaFactor, GmmFactor>;

  static Factor normal(double mean, double variance);
  static Factor laplace(double b);
  static Factor student_t(double nu);
  static Factor sym_gamma(double alpha, double beta);
  /// Weights must be nonnegative and sum to 1 within 1e-12; they are
  /// renormalized exactly afterwards.
  static Factor gmm(std::vector<double> weights, std::vector<double> means,
                    std::vector<double> variances);

  Family family() const { return static_cast<Family>(params_.index()); }
  const Params &params() const { return params_; }
  template <class T> const T &as() const { return std::get<T>(params_); }

  /// Zero-mean Gaussian scale mixture; the only factors allowed on
  /// isotropic groups.
  bool is_gsm() const;
  std::string describe() const;

private:
  explicit Factor(Params p) : params_(std::move(p)) {}
  Params params_;
};

/// Per-group latent. monostate for Normal rows, a positive real for the scale
/// mixtures (variance for Laplace/SymGamma, precision for Student-t) and a
/// 0-based component index for GMM rows.
using LatentValue = std::variant<std::monostate, double, std::size_t>;

double logpdf(const Factor &f, double t);
double pdf(const Factor &f, double t);
double dlogpdf(const Factor &f, double t);
double cdf(const Factor &f, double t);
/// Standard deviation; +inf for Student-t with nu <= 2.
double std_dev(const Factor &f);
/// Smallest q > 0 with P(|T| > q) <= tail for the factor law (symmetric
/// factors) or max over both tails (GMM/Normal with offsets).
double tail_quantile(const Factor &f, double tail);

std::pair<double, double> latent_mean_var(const Factor &f, const LatentValue &z);

inline constexpr double kSafeSquare = 1e-7;

/// Draw Z_i given the projection. `projection` is the signed (Kx)_i for
/// linear rows or the group norm for isotropic groups.
LatentValue sample_conditional_latent(const Factor &f, double projection,
                                      Rng &rng);

/// GIG(a, b, p) with density proportional to x^(p-1) exp(-(a x + b / x) / 2).
double sample_gig(double a, double b, double p, Rng &rng);
/// Gamma with shape alpha and rate beta.
double sample_gamma(double alpha, double beta, Rng &rng);
/// Index j (0-based) with probability weights[j] / sum(weights).
std::size_t sample_categorical(std::span<const double> weights, Rng &rng);
double sample_factor(const Factor &f, Rng &rng);

/// Zero-mean GMM obtained by splitting the exponential mixing law of
/// Laplace(b) into L equal-mass intervals.
Factor gsm_discretize_laplace(double b, std::size_t components);
/// GMM with means equispaced on [-0.5, 0.5], common variance 1 / (L - 1)
/// and weights proportional to exp(-|mu| / b).
Factor uniform_means_laplace_gmm(double b, std::size_t components);

} // namespace latentgibbs
