#include "stochlab/stats.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <limits>
#include <stdexcept>

#include <boost/math/distributions/chi_squared.hpp>
#include <nlohmann/json.hpp>

namespace stochlab {

void CompensatedSum::add(double x) noexcept {
  const double t = sum_ + x;
  if (std::abs(sum_) >= std::abs(x)) {
    compensation_ += (sum_ - t) + x;
  } else {
    compensation_ += (x - t) + sum_;
  }
  sum_ = t;
}

Estimate mean_ci(std::span<const double> xs) {
  Estimate e;
  e.count = xs.size();
  if (xs.empty()) return e;
  CompensatedSum sum;
  for (double x : xs) sum.add(x);
  e.mean = sum.value() / static_cast<double>(xs.size());
  if (xs.size() > 1) {
    e.ci = kCiZ * std::sqrt(sample_variance(xs) / static_cast<double>(xs.size()));
  }
  return e;
}

BinomialEstimate binomial_estimate(std::size_t successes, std::size_t trials) {
  BinomialEstimate b;
  b.successes = successes;
  b.trials = trials;
  if (trials == 0) return b;
  const double n = static_cast<double>(trials);
  b.fraction = static_cast<double>(successes) / n;
  b.ci = kCiZ * std::sqrt(b.fraction * (1.0 - b.fraction) / n);
  return b;
}

double sample_variance(std::span<const double> xs) {
  if (xs.size() < 2) return 0.0;
  CompensatedSum sum;
  for (double x : xs) sum.add(x);
  const double mean = sum.value() / static_cast<double>(xs.size());
  CompensatedSum squares;
  for (double x : xs) squares.add((x - mean) * (x - mean));
  return squares.value() / static_cast<double>(xs.size() - 1);
}

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

double chi_square_sf(double statistic, double dof) {
  if (statistic <= 0.0) return 1.0;
  boost::math::chi_squared dist(dof);
  return boost::math::cdf(boost::math::complement(dist, statistic));
}

ChiSquare chi_square_test(std::span<const double> observed, std::span<const double> expected,
                          int fitted_parameters) {
  if (observed.size() != expected.size() || observed.size() < 2) {
    throw std::invalid_argument("chi_square_test: need matching bins, at least two");
  }
  ChiSquare c;
  for (std::size_t i = 0; i < observed.size(); ++i) {
    if (expected[i] <= 0.0) throw std::invalid_argument("chi_square_test: empty expected bin");
    const double diff = observed[i] - expected[i];
    c.statistic += diff * diff / expected[i];
  }
  c.dof = static_cast<double>(observed.size()) - 1.0 - fitted_parameters;
  c.p_value = chi_square_sf(c.statistic, c.dof);
  return c;
}

double ks_statistic(std::vector<double> samples, const std::function<double(double)>& cdf) {
  return ks_statistic_truncated(std::move(samples), cdf, std::numeric_limits<double>::infinity());
}

double ks_statistic_truncated(std::vector<double> samples,
                              const std::function<double(double)>& cdf, double upper) {
  if (samples.empty()) throw std::invalid_argument("ks_statistic: empty sample");
  std::sort(samples.begin(), samples.end());
  const double n = static_cast<double>(samples.size());
  double d = 0.0;
  std::size_t i = 0;
  while (i < samples.size() && samples[i] <= upper) {
    // Group ties so the empirical CDF jumps once per distinct value.
    std::size_t j = i;
    while (j < samples.size() && samples[j] == samples[i]) ++j;
    const double f = cdf(samples[i]);
    d = std::max(d, std::abs(static_cast<double>(j) / n - f));
    d = std::max(d, std::abs(f - static_cast<double>(i) / n));
    i = j;
  }
  if (std::isfinite(upper)) {
    d = std::max(d, std::abs(static_cast<double>(i) / n - cdf(upper)));
  }
  return d;
}

double ks_two_sample(std::vector<double> a, std::vector<double> b) {
  if (a.empty() || b.empty()) throw std::invalid_argument("ks_two_sample: empty sample");
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  const double na = static_cast<double>(a.size());
  const double nb = static_cast<double>(b.size());
  std::size_t i = 0;
  std::size_t j = 0;
  double d = 0.0;
  while (i < a.size() && j < b.size()) {
    const double x = std::min(a[i], b[j]);
    while (i < a.size() && a[i] == x) ++i;
    while (j < b.size() && b[j] == x) ++j;
    d = std::max(d, std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
  }
  return d;
}

double quantile(std::vector<double> xs, double q) {
  if (xs.empty()) throw std::invalid_argument("quantile: empty sample");
  std::sort(xs.begin(), xs.end());
  const double pos = q * static_cast<double>(xs.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, xs.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return xs[lo] + frac * (xs[hi] - xs[lo]);
}

LinearFit fit_line(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2) {
    throw std::invalid_argument("fit_line: need at least two paired points");
  }
  const double n = static_cast<double>(x.size());
  double mx = 0.0;
  double my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0.0;
  double sxy = 0.0;
  double syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx == 0.0) throw std::invalid_argument("fit_line: degenerate abscissae");
  LinearFit fit;
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  double ss_res = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double r = y[i] - (fit.intercept + fit.slope * x[i]);
    fit.residuals.push_back(r);
    ss_res += r * r;
  }
  fit.r_squared = syy > 0.0 ? 1.0 - ss_res / syy : 1.0;
  return fit;
}

std::string to_json(const LawComparison& report) {
  nlohmann::ordered_json j;
  j["name"] = report.name;
  j["statistic"] = report.statistic;
  j["threshold"] = report.threshold;
  j["pass"] = report.pass;
  return j.dump();
}

std::string format_double(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, ptr);
}

}  // namespace stochlab
