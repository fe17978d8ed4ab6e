#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <vector>

namespace stochlab {

// Neumaier-compensated running sum.
class CompensatedSum {
 public:
  void add(double x) noexcept;
  double value() const noexcept { return sum_ + compensation_; }

 private:
  double sum_ = 0.0;
  double compensation_ = 0.0;
};

// Two-sided 95% normal quantile used for every reported CI half-width.
inline constexpr double kCiZ = 1.96;

struct Estimate {
  double mean = 0.0;
  double ci = 0.0;  // half-width
  std::size_t count = 0;
};

struct BinomialEstimate {
  double fraction = 0.0;
  double ci = 0.0;  // Wald half-width
  std::size_t successes = 0;
  std::size_t trials = 0;
};

Estimate mean_ci(std::span<const double> xs);
BinomialEstimate binomial_estimate(std::size_t successes, std::size_t trials);

double sample_variance(std::span<const double> xs);

// Standard normal CDF.
double normal_cdf(double x);

// Survival function of the chi-square distribution.
double chi_square_sf(double statistic, double dof);

// Pearson statistic and p-value against expected counts.
struct ChiSquare {
  double statistic = 0.0;
  double dof = 0.0;
  double p_value = 1.0;
};
ChiSquare chi_square_test(std::span<const double> observed, std::span<const double> expected,
                          int fitted_parameters = 0);

// sup |F_n - F| for a one-sample empirical law. Samples need not be sorted.
double ks_statistic(std::vector<double> samples, const std::function<double(double)>& cdf);

// As above, restricted to t <= upper. Samples above `upper` (including
// +infinity for censored trials) still count in the denominator.
double ks_statistic_truncated(std::vector<double> samples,
                              const std::function<double(double)>& cdf, double upper);

// Two-sample Kolmogorov-Smirnov distance.
double ks_two_sample(std::vector<double> a, std::vector<double> b);

double quantile(std::vector<double> xs, double q);

struct LinearFit {
  double intercept = 0.0;
  double slope = 0.0;
  double r_squared = 0.0;
  std::vector<double> residuals;
};
LinearFit fit_line(std::span<const double> x, std::span<const double> y);

// Serialized as {"statistic", "threshold", "pass"} (plus a name).
struct LawComparison {
  std::string name;
  double statistic = 0.0;
  double threshold = 0.0;
  bool pass = false;
};
std::string to_json(const LawComparison& report);

// Shortest round-trip decimal form of a double ("inf", "nan" for non-finite).
std::string format_double(double x);

}  // namespace stochlab
