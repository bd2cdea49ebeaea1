#pragma once

#include "latentgibbs/factors.hpp"
#include "latentgibbs/rng.hpp"
#include "latentgibbs/topologies.hpp"

#include <cstddef>
#include <iosfwd>
#include <span>
#include <vector>

namespace latentgibbs {

/// Density tabulated on a uniform grid, normalized by the trapezoid rule.
/// The CDF is the running trapezoid integral, linear between grid points.
class GridDensity {
public:
  GridDensity(double lo, double hi, std::vector<double> values);

  double lo() const { return lo_; }
  double hi() const { return hi_; }
  double step() const { return step_; }
  std::size_t size() const { return values_.size(); }
  double x(std::size_t i) const { return lo_ + step_ * static_cast<double>(i); }
  const std::vector<double> &values() const { return values_; }
  const std::vector<double> &cdf_values() const { return cdf_; }

  double cdf(double t) const;
  double quantile(double u) const;
  double sample(Rng &rng) const { return quantile(uniform01(rng)); }
  std::vector<double> sample(std::size_t count, Rng &rng) const;
  double mean() const;
  double variance() const;
  /// max_i |p(x_i) - p(-x_i)| for grids symmetric about 0.
  double asymmetry() const;

private:
  double lo_, hi_, step_;
  std::vector<double> values_;
  std::vector<double> cdf_;
};

/// W1 between two empirical distributions.
double wasserstein1(std::span<const double> a, std::span<const double> b);
/// W1 between an empirical distribution and a tabulated density.
double wasserstein1(std::span<const double> a, const GridDensity &g);

/// Biased autocorrelation rho_1 .. rho_max_lag. Throws undefined-variance
/// on constant input.
std::vector<double> acf(std::span<const double> chain, std::size_t max_lag);

/// 1 / (1 + 2 sum_{k < K} rho_k) with K the first lag whose rho drops below
/// `threshold`, clamped to (0, 1].
double sampling_efficiency(std::span<const double> acf_values, double threshold = 0.05);

struct GridSpec {
  std::size_t points = (1u << 14) + 1;
  /// 0 selects max(12 sigma, two-sided 1e-9 quantile of phi).
  double half_width = 0.0;
};

/// Marginal law of the recorded projections of a baseline topology, built
/// from pointwise products and trapezoid convolutions of the factor.
GridDensity ground_truth_marginal(MarginalClass cls, const Factor &phi,
                                  const GridSpec &spec = {});

/// 10 log10(peak^2 / MSE); identical inputs give kPsnrIdentical.
inline constexpr double kPsnrIdentical = 999.0;
double psnr(std::span<const double> x, std::span<const double> ref, double peak = 1.0);

/// Mean W1 between pairs of independent size-`count` samples from g.
double noise_floor(const GridDensity &g, std::size_t count, std::size_t replicates,
                   Rng &rng);

/// First iteration (1-based) whose value is <= target, or 0 if none.
std::size_t first_below(std::span<const double> curve, double target);

struct MeanStd {
  double mean;
  double std;
};
MeanStd mean_std(std::span<const double> values);

/// Per-lag mean with mean -/+ one standard deviation across chains.
struct AcfTable {
  std::vector<double> mean, lower, upper;
};
AcfTable acf_table(const std::vector<std::vector<double>> &per_chain);

void write_w1_csv(std::ostream &os, std::span<const double> curve);
void write_acf_csv(std::ostream &os, const AcfTable &table);

} // namespace latentgibbs
