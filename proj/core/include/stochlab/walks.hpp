#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

#include "stochlab/errors.hpp"
#include "stochlab/stats.hpp"

namespace stochlab {

// Simple random walk on Z (steps +-1) or Z^2 (unit steps in 4 directions).
// Every walk in this module reads one bit per 1D step (1 = +1) and two bits
// per 2D step from the same BitStream order, so walks sharing a seed share a
// path.
struct WalkPath {
  int dimension = 1;
  std::uint64_t seed = 0;
  std::vector<std::array<int, 2>> positions;  // positions[0] is the origin

  std::size_t length() const noexcept { return positions.empty() ? 0 : positions.size() - 1; }
};

WalkPath generate_walk(int dimension, std::size_t steps, std::uint64_t seed);

struct ExitRecord {
  double threshold = 0.0;  // half-width n, level n, or radius r
  std::uint64_t time = 0;  // steps until exit (or until the cap when censored)
  std::array<int, 2> position{};
  // Largest |S| (1D) or Euclidean norm (2D) strictly before the exit step.
  double running_max = 0.0;
  double angle = 0.0;  // planar exits, in [0, 2*pi)
  bool censored = false;
};

// First time |S_t| = n. Throws ConfigError for n < 1.
ExitRecord interval_exit(int n, std::uint64_t seed);

// 10^4 * n^2: the one-sided first passage has infinite mean.
std::uint64_t default_passage_cap(int n);

// First time S_t = +n, censored at `cap` steps.
ExitRecord first_passage(int n, std::uint64_t seed, std::uint64_t cap);
ExitRecord first_passage(int n, std::uint64_t seed);

enum class PlanarNorm : std::uint8_t { euclidean, sup };

// First time the norm of S_t reaches r.
ExitRecord planar_disk_exit(double r, std::uint64_t seed, PlanarNorm norm = PlanarNorm::euclidean);

// max_{t <= steps} |S_t| of a 1D walk.
int partial_maximum(std::size_t steps, std::uint64_t seed);

// Limit law of T_n / n^2 for the symmetric interval exit: the Brownian exit
// time of [-1, 1]. Theta series for t >= 0.5, image series below; both are
// summed until the term magnitude drops under 1e-12. Throws DomainError for
// t < 0.
double limit_exit_cdf(double t);

// E[exp(-s tau)] of the same law: 1 / cosh(sqrt(2 s)).
double exit_time_laplace(double s);

// Stable law of order 1/2 limiting T_n / n^2 for one-sided first passage:
// 2 (1 - Phi(1 / sqrt(t))).
double levy_cdf(double t);

enum class LawKind : std::uint8_t { interval_exit_theta, levy_half, planar_disk };

struct LimitLawOracle {
  LawKind kind = LawKind::interval_exit_theta;
  double tolerance = 1e-12;

  // planar_disk has no closed form here; cdf() throws DomainError for it.
  double cdf(double t) const;
};

struct LaplaceEstimate {
  double mean = 0.0;
  double variance = 0.0;  // sample variance of exp(-s x)
  double standard_error = 0.0;
  std::size_t count = 0;
};

// Mean of exp(-s x). Throws DomainError for an empty sample, s < 0, or a
// negative or non-finite sample.
LaplaceEstimate empirical_laplace(std::span<const double> samples, double s);

// Piecewise-linear interpolation of k/n -> S_k / sqrt(n), k = 0..n.
class RescaledPath {
 public:
  RescaledPath(const WalkPath& path, std::size_t n);

  double operator()(double u) const;
  double endpoint() const noexcept { return knots_.back(); }
  double maximum_abs() const noexcept;
  std::span<const double> knots() const noexcept { return knots_; }

 private:
  std::vector<double> knots_;
};

RescaledPath rescale_path(const WalkPath& path, std::size_t n);

// One value per line.
void write_samples_csv(std::ostream& out, std::span<const double> samples);

}  // namespace stochlab
