#include "latentgibbs/analysis.hpp"

#include "latentgibbs/error.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <numeric>
#include <ostream>

namespace latentgibbs {

GridDensity::GridDensity(double lo, double hi, std::vector<double> values)
    : lo_(lo), hi_(hi), values_(std::move(values)) {
  require(values_.size() >= 2 && hi > lo, "grid density: need at least two points");
  step_ = (hi_ - lo_) / static_cast<double>(values_.size() - 1);
  cdf_.assign(values_.size(), 0.0);
  for (double v : values_)
    require(std::isfinite(v) && v >= 0.0, "grid density: values must be nonnegative");
  for (std::size_t i = 1; i < values_.size(); ++i)
    cdf_[i] = cdf_[i - 1] + 0.5 * step_ * (values_[i - 1] + values_[i]);
  const double total = cdf_.back();
  require(total > 0.0, "grid density: zero mass");
  for (double &v : values_)
    v /= total;
  for (double &c : cdf_)
    c /= total;
  cdf_.back() = 1.0;
}

double GridDensity::cdf(double t) const {
  if (t <= lo_)
    return 0.0;
  if (t >= hi_)
    return 1.0;
  const double pos = (t - lo_) / step_;
  const auto i = std::min(static_cast<std::size_t>(pos), values_.size() - 2);
  const double frac = pos - static_cast<double>(i);
  return cdf_[i] + frac * (cdf_[i + 1] - cdf_[i]);
}

double GridDensity::quantile(double u) const {
  if (u <= 0.0)
    return lo_;
  if (u >= 1.0)
    return hi_;
  const auto it = std::upper_bound(cdf_.begin(), cdf_.end(), u);
  const auto i = static_cast<std::size_t>(it - cdf_.begin());
  if (i == 0)
    return lo_;
  if (i >= cdf_.size())
    return hi_;
  const double span = cdf_[i] - cdf_[i - 1];
  const double frac = span > 0.0 ? (u - cdf_[i - 1]) / span : 0.0;
  return x(i - 1) + frac * step_;
}

std::vector<double> GridDensity::sample(std::size_t count, Rng &rng) const {
  std::vector<double> out(count);
  for (double &v : out)
    v = sample(rng);
  return out;
}

double GridDensity::mean() const {
  double m = 0.0;
  for (std::size_t i = 0; i < values_.size(); ++i) {
    const double w = (i == 0 || i + 1 == values_.size()) ? 0.5 : 1.0;
    m += w * x(i) * values_[i];
  }
  return m * step_;
}

double GridDensity::variance() const {
  const double mu = mean();
  double v = 0.0;
  for (std::size_t i = 0; i < values_.size(); ++i) {
    const double w = (i == 0 || i + 1 == values_.size()) ? 0.5 : 1.0;
    v += w * (x(i) - mu) * (x(i) - mu) * values_[i];
  }
  return v * step_;
}

double GridDensity::asymmetry() const {
  double worst = 0.0;
  const std::size_t n = values_.size();
  for (std::size_t i = 0; i < n; ++i)
    worst = std::max(worst, std::abs(values_[i] - values_[n - 1 - i]));
  return worst;
}

double wasserstein1(std::span<const double> a, std::span<const double> b) {
  require(!a.empty() && !b.empty(), "wasserstein1: empty sample set");
  std::vector<double> sa(a.begin(), a.end()), sb(b.begin(), b.end());
  std::sort(sa.begin(), sa.end());
  std::sort(sb.begin(), sb.end());
  const double na = static_cast<double>(sa.size());
  const double nb = static_cast<double>(sb.size());
  std::size_t i = 0, j = 0;
  double prev = std::min(sa.front(), sb.front());
  double total = 0.0;
  while (i < sa.size() || j < sb.size()) {
    double next;
    if (j == sb.size() || (i < sa.size() && sa[i] <= sb[j]))
      next = sa[i];
    else
      next = sb[j];
    total += std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb) *
             (next - prev);
    while (i < sa.size() && sa[i] == next)
      ++i;
    while (j < sb.size() && sb[j] == next)
      ++j;
    prev = next;
  }
  return total;
}

namespace {

// Integral over an interval of length len of |c - g(t)| for g linear from
// g0 to g1.
double abs_linear_integral(double c, double g0, double g1, double len) {
  const double a = c - g0;
  const double b = c - g1;
  if ((a >= 0.0) == (b >= 0.0))
    return 0.5 * std::abs(a + b) * len;
  return len * (a * a + b * b) / (2.0 * (std::abs(a) + std::abs(b)));
}

} // namespace

double wasserstein1(std::span<const double> a, const GridDensity &g) {
  require(!a.empty(), "wasserstein1: empty sample set");
  std::vector<double> s(a.begin(), a.end());
  std::sort(s.begin(), s.end());
  const double n = static_cast<double>(s.size());

  std::size_t i = 0; // samples consumed (<= current point)
  std::size_t k = 0; // next grid point
  double prev = std::min(s.front(), g.lo());
  double prev_cdf = g.cdf(prev);
  while (i < s.size() && s[i] <= prev)
    ++i;
  double total = 0.0;
  for (;;) {
    while (k < g.size() && g.x(k) <= prev)
      ++k;
    const bool have_grid = k < g.size();
    const bool have_sample = i < s.size();
    if (!have_grid && !have_sample)
      break;
    double next;
    double next_cdf;
    if (have_grid && (!have_sample || g.x(k) <= s[i])) {
      next = g.x(k);
      next_cdf = g.cdf_values()[k];
    } else {
      next = s[i];
      next_cdf = g.cdf(next);
    }
    total += abs_linear_integral(static_cast<double>(i) / n, prev_cdf, next_cdf, next - prev);
    while (i < s.size() && s[i] <= next)
      ++i;
    prev = next;
    prev_cdf = next_cdf;
  }
  return total;
}

std::vector<double> acf(std::span<const double> chain, std::size_t max_lag) {
  require(chain.size() > 2 * max_lag, "acf: chain shorter than twice the maximal lag");
  const double n = static_cast<double>(chain.size());
  const double mean = std::accumulate(chain.begin(), chain.end(), 0.0) / n;
  double denom = 0.0;
  for (double v : chain)
    denom += (v - mean) * (v - mean);
  if (!(denom > 0.0))
    fail(ErrorCode::undefined_variance, "acf: chain has zero variance");
  std::vector<double> rho(max_lag);
  for (std::size_t k = 1; k <= max_lag; ++k) {
    double s = 0.0;
    for (std::size_t t = 0; t + k < chain.size(); ++t)
      s += (chain[t] - mean) * (chain[t + k] - mean);
    rho[k - 1] = s / denom;
  }
  return rho;
}

double sampling_efficiency(std::span<const double> acf_values, double threshold) {
  double sum = 0.0;
  for (double rho : acf_values) {
    if (rho < threshold)
      break;
    sum += rho;
  }
  const double gamma = 1.0 / (1.0 + 2.0 * sum);
  return std::clamp(gamma, std::numeric_limits<double>::min(), 1.0);
}

namespace {

// Trapezoid convolution of two densities tabulated on the same symmetric
// grid with an odd number of points (x_c = 0 at the centre index c).
std::vector<double> convolve(const std::vector<double> &f, const std::vector<double> &g,
                             double h) {
  const std::size_t n = f.size();
  const auto c = static_cast<std::ptrdiff_t>(n / 2);
  const auto sn = static_cast<std::ptrdiff_t>(n);
  std::vector<double> out(n, 0.0);
  double peak = 0.0;
  for (double v : f)
    peak = std::max(peak, v);
  for (std::ptrdiff_t j = 0; j < sn; ++j) {
    const double fj = f[static_cast<std::size_t>(j)];
    if (fj <= peak * 1e-25)
      continue;
    const double w = (j == 0 || j == sn - 1) ? 0.5 * fj : fj;
    // x_i - x_j lands on index i - j + c
    const std::ptrdiff_t lo = std::max<std::ptrdiff_t>(0, j - c);
    const std::ptrdiff_t hi = std::min<std::ptrdiff_t>(sn - 1, j - c + sn - 1);
    for (std::ptrdiff_t i = lo; i <= hi; ++i)
      out[static_cast<std::size_t>(i)] += w * g[static_cast<std::size_t>(i - j + c)];
  }
  for (double &v : out)
    v *= h;
  return out;
}

std::vector<double> multiply(std::vector<double> a, const std::vector<double> &b) {
  double peak = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    a[i] *= b[i];
    peak = std::max(peak, a[i]);
  }
  // rescale to keep repeated products away from underflow
  if (peak > 0.0)
    for (double &v : a)
      v /= peak;
  return a;
}

} // namespace

GridDensity ground_truth_marginal(MarginalClass cls, const Factor &phi,
                                  const GridSpec &spec) {
  require(spec.points >= 3 && spec.points % 2 == 1,
          "ground truth: grid needs an odd number of points (>= 3)");
  double half = spec.half_width;
  if (half <= 0.0) {
    const double sd = std_dev(phi);
    half = tail_quantile(phi, 1e-9);
    if (std::isfinite(sd))
      half = std::max(half, 12.0 * sd);
  }
  const double outside = cdf(phi, -half) + (1.0 - cdf(phi, half));
  if (outside >= 1e-8)
    fail(ErrorCode::grid_too_narrow,
         "ground truth: factor mass outside the grid is " + std::to_string(outside));

  const std::size_t n = spec.points;
  const double h = 2.0 * half / static_cast<double>(n - 1);
  std::vector<double> p(n);
  double peak = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < n; ++i) {
    p[i] = logpdf(phi, -half + h * static_cast<double>(i));
    peak = std::max(peak, p[i]);
  }
  for (double &v : p)
    v = std::exp(v - peak);

  auto conv3 = [&](const std::vector<double> &f) { return convolve(convolve(f, p, h), p, h); };

  std::vector<double> out;
  switch (cls) {
  case MarginalClass::factor:
    out = p;
    break;
  case MarginalClass::product:
    out = p;
    for (int k = 0; k < 4; ++k)
      out = multiply(std::move(out), p);
    break;
  case MarginalClass::loop:
    out = multiply(conv3(p), p);
    break;
  case MarginalClass::grid_inner: {
    const auto c3 = conv3(p);
    out = multiply(multiply(c3, p), c3);
    break;
  }
  case MarginalClass::grid_outer:
    out = multiply(conv3(multiply(conv3(p), p)), p);
    break;
  }
  return GridDensity(-half, half, std::move(out));
}

double psnr(std::span<const double> x, std::span<const double> ref, double peak) {
  require(x.size() == ref.size() && !x.empty(), "psnr: images differ in size");
  double mse = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i)
    mse += (x[i] - ref[i]) * (x[i] - ref[i]);
  mse /= static_cast<double>(x.size());
  if (mse == 0.0)
    return kPsnrIdentical;
  return 10.0 * std::log10(peak * peak / mse);
}

double noise_floor(const GridDensity &g, std::size_t count, std::size_t replicates,
                   Rng &rng) {
  require(count >= 1 && replicates >= 1, "noise_floor: need samples");
  double total = 0.0;
  for (std::size_t r = 0; r < replicates; ++r) {
    const auto a = g.sample(count, rng);
    const auto b = g.sample(count, rng);
    total += wasserstein1(a, b);
  }
  return total / static_cast<double>(replicates);
}

std::size_t first_below(std::span<const double> curve, double target) {
  for (std::size_t i = 0; i < curve.size(); ++i)
    if (curve[i] <= target)
      return i + 1;
  return 0;
}

MeanStd mean_std(std::span<const double> values) {
  require(!values.empty(), "mean_std: empty input");
  const double n = static_cast<double>(values.size());
  const double mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
  double ss = 0.0;
  for (double v : values)
    ss += (v - mean) * (v - mean);
  return {mean, values.size() > 1 ? std::sqrt(ss / (n - 1.0)) : 0.0};
}

AcfTable acf_table(const std::vector<std::vector<double>> &per_chain) {
  require(!per_chain.empty(), "acf_table: no chains");
  const std::size_t lags = per_chain.front().size();
  AcfTable t;
  std::vector<double> column(per_chain.size());
  for (std::size_t k = 0; k < lags; ++k) {
    for (std::size_t c = 0; c < per_chain.size(); ++c)
      column[c] = per_chain[c][k];
    const auto ms = mean_std(column);
    t.mean.push_back(ms.mean);
    t.lower.push_back(ms.mean - ms.std);
    t.upper.push_back(ms.mean + ms.std);
  }
  return t;
}

void write_w1_csv(std::ostream &os, std::span<const double> curve) {
  os << "iteration,value\n" << std::setprecision(17);
  for (std::size_t i = 0; i < curve.size(); ++i)
    os << i + 1 << ',' << curve[i] << '\n';
}

void write_acf_csv(std::ostream &os, const AcfTable &table) {
  os << "lag,mean,lower,upper\n" << std::setprecision(17);
  for (std::size_t k = 0; k < table.mean.size(); ++k)
    os << k + 1 << ',' << table.mean[k] << ',' << table.lower[k] << ','
       << table.upper[k] << '\n';
}

} // namespace latentgibbs
