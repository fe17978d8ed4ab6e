#include "stochlab/walks.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <ostream>
#include <string>

#include "stochlab/rng.hpp"

namespace stochlab {

namespace {

constexpr double kSeriesCutoff = 1e-12;

BitStream walk_bits(std::uint64_t seed) { return BitStream(stream_seed(seed, StreamKind::walk)); }

constexpr std::array<std::array<int, 2>, 4> kPlanarSteps{{{1, 0}, {-1, 0}, {0, 1}, {0, -1}}};

}  // namespace

WalkPath generate_walk(int dimension, std::size_t steps, std::uint64_t seed) {
  if (dimension != 1 && dimension != 2) throw ConfigError("walk dimension must be 1 or 2");
  WalkPath path;
  path.dimension = dimension;
  path.seed = seed;
  path.positions.reserve(steps + 1);
  path.positions.push_back({0, 0});
  auto bits = walk_bits(seed);
  std::array<int, 2> at{0, 0};
  for (std::size_t i = 0; i < steps; ++i) {
    if (dimension == 1) {
      at[0] += bits.bit() ? 1 : -1;
    } else {
      const auto& step = kPlanarSteps[static_cast<std::size_t>(bits.direction())];
      at[0] += step[0];
      at[1] += step[1];
    }
    path.positions.push_back(at);
  }
  return path;
}

ExitRecord interval_exit(int n, std::uint64_t seed) {
  if (n < 1) throw ConfigError("interval half-width n must be >= 1");
  auto bits = walk_bits(seed);
  std::int64_t s = 0;
  std::uint64_t t = 0;
  for (;;) {
    const std::int64_t gap = n - (s < 0 ? -s : s);
    if (gap <= 0) break;
    if (gap == 1) {
      s += bits.bit() ? 1 : -1;
      ++t;
      continue;
    }
    // |S| moves by at most one per step, so gap - 1 steps cannot exit.
    const int k = static_cast<int>(std::min<std::int64_t>(64, gap - 1));
    s += 2 * bits.count_ones(k) - k;
    t += static_cast<std::uint64_t>(k);
  }
  ExitRecord rec;
  rec.threshold = n;
  rec.time = t;
  rec.position = {static_cast<int>(s), 0};
  rec.running_max = n - 1;  // the exit step leaves from |S| = n - 1
  return rec;
}

std::uint64_t default_passage_cap(int n) {
  return 10000ULL * static_cast<std::uint64_t>(n) * static_cast<std::uint64_t>(n);
}

ExitRecord first_passage(int n, std::uint64_t seed) {
  return first_passage(n, seed, default_passage_cap(n));
}

ExitRecord first_passage(int n, std::uint64_t seed, std::uint64_t cap) {
  if (n < 1) throw ConfigError("passage level n must be >= 1");
  auto bits = walk_bits(seed);
  std::int64_t s = 0;
  std::uint64_t t = 0;
  while (s < n && t < cap) {
    const std::int64_t gap = n - s;
    if (gap == 1) {
      s += bits.bit() ? 1 : -1;
      ++t;
      continue;
    }
    const int k = static_cast<int>(
        std::min<std::uint64_t>({64U, static_cast<std::uint64_t>(gap - 1), cap - t}));
    s += 2 * bits.count_ones(k) - k;
    t += static_cast<std::uint64_t>(k);
  }
  ExitRecord rec;
  rec.threshold = n;
  rec.time = t;
  rec.position = {static_cast<int>(s), 0};
  rec.censored = s < n;
  rec.running_max = rec.censored ? std::numeric_limits<double>::quiet_NaN() : n - 1;
  return rec;
}

ExitRecord planar_disk_exit(double r, std::uint64_t seed, PlanarNorm norm) {
  if (!(r >= 1.0) || !std::isfinite(r)) throw ConfigError("disk radius r must be >= 1");
  auto bits = walk_bits(seed);
  std::int64_t x = 0;
  std::int64_t y = 0;
  std::uint64_t t = 0;
  double best = 0.0;
  auto size = [&] {
    return norm == PlanarNorm::euclidean
               ? std::sqrt(static_cast<double>(x * x + y * y))
               : static_cast<double>(std::max(x < 0 ? -x : x, y < 0 ? -y : y));
  };
  auto step = [&] {
    const auto& d = kPlanarSteps[static_cast<std::size_t>(bits.direction())];
    x += d[0];
    y += d[1];
    ++t;
  };
  for (;;) {
    const double current = size();
    if (current >= r) break;
    best = std::max(best, current);
    const double gap = r - current;
    if (gap <= 1.0) {
      step();
      continue;
    }
    // Either norm changes by at most one per step: fewer than `gap` steps stay inside.
    const auto k = static_cast<std::uint64_t>(std::ceil(gap)) - 1;
    for (std::uint64_t i = 0; i < k; ++i) {
      step();
      best = std::max(best, size());
    }
  }
  ExitRecord rec;
  rec.threshold = r;
  rec.time = t;
  rec.position = {static_cast<int>(x), static_cast<int>(y)};
  rec.running_max = best;
  double angle = std::atan2(static_cast<double>(y), static_cast<double>(x));
  if (angle < 0.0) angle += 2.0 * std::numbers::pi;
  rec.angle = angle;
  return rec;
}

int partial_maximum(std::size_t steps, std::uint64_t seed) {
  if (steps < 1) throw ConfigError("partial_maximum needs steps >= 1");
  auto bits = walk_bits(seed);
  int s = 0;
  int best = 0;
  for (std::size_t i = 0; i < steps; ++i) {
    s += bits.bit() ? 1 : -1;
    best = std::max(best, s < 0 ? -s : s);
  }
  return best;
}

// ---------------------------------------------------------------------------

double limit_exit_cdf(double t) {
  if (std::isnan(t) || t < 0.0) throw DomainError("limit_exit_cdf: t must be >= 0");
  if (t == 0.0) return 0.0;
  if (std::isinf(t)) return 1.0;
  double f = 0.0;
  if (t >= 0.5) {
    constexpr double pi = std::numbers::pi;
    double sum = 0.0;
    for (int k = 0;; ++k) {
      const double m = 2.0 * k + 1.0;
      const double term = std::exp(-m * m * pi * pi * t / 8.0) / m;
      sum += (k % 2 == 0) ? term : -term;
      if (term < kSeriesCutoff) break;
    }
    f = 1.0 - 4.0 / pi * sum;
  } else {
    // Reflection (image) form: 4 * sum_k (-1)^k Q((2k+1)/sqrt(t)).
    const double root = std::sqrt(t);
    double sum = 0.0;
    for (int k = 0;; ++k) {
      const double term = 0.5 * std::erfc((2.0 * k + 1.0) / root / std::numbers::sqrt2);
      sum += (k % 2 == 0) ? term : -term;
      if (term < kSeriesCutoff) break;
    }
    f = 4.0 * sum;
  }
  return std::clamp(f, 0.0, 1.0);
}

double exit_time_laplace(double s) {
  if (std::isnan(s) || s < 0.0) throw DomainError("exit_time_laplace: s must be >= 0");
  return 1.0 / std::cosh(std::sqrt(2.0 * s));
}

double levy_cdf(double t) {
  if (std::isnan(t) || t < 0.0) throw DomainError("levy_cdf: t must be >= 0");
  if (t == 0.0) return 0.0;
  return std::erfc(1.0 / std::sqrt(2.0 * t));
}

double LimitLawOracle::cdf(double t) const {
  switch (kind) {
    case LawKind::interval_exit_theta:
      return limit_exit_cdf(t);
    case LawKind::levy_half:
      return levy_cdf(t);
    case LawKind::planar_disk:
      break;
  }
  throw DomainError("no closed-form CDF for the planar disk exit law");
}

LaplaceEstimate empirical_laplace(std::span<const double> samples, double s) {
  if (samples.empty()) throw DomainError("empirical_laplace: empty sample");
  if (std::isnan(s) || s < 0.0) throw DomainError("empirical_laplace: s must be >= 0");
  std::vector<double> values;
  values.reserve(samples.size());
  for (double x : samples) {
    if (!std::isfinite(x) || x < 0.0) {
      throw DomainError("empirical_laplace: samples must be finite and non-negative");
    }
    values.push_back(std::exp(-s * x));
  }
  LaplaceEstimate est;
  est.count = values.size();
  CompensatedSum sum;
  for (double v : values) sum.add(v);
  est.mean = sum.value() / static_cast<double>(values.size());
  est.variance = sample_variance(values);
  est.standard_error = std::sqrt(est.variance / static_cast<double>(values.size()));
  return est;
}

// ---------------------------------------------------------------------------

RescaledPath::RescaledPath(const WalkPath& path, std::size_t n) {
  if (path.dimension != 1) throw ConfigError("rescale_path expects a one-dimensional walk");
  if (n < 1 || path.length() < n) throw ConfigError("rescale_path needs 1 <= n <= path length");
  const double scale = 1.0 / std::sqrt(static_cast<double>(n));
  knots_.reserve(n + 1);
  for (std::size_t k = 0; k <= n; ++k) knots_.push_back(path.positions[k][0] * scale);
}

double RescaledPath::operator()(double u) const {
  if (!(u >= 0.0 && u <= 1.0)) throw DomainError("rescaled path is defined on [0, 1]");
  const double x = u * static_cast<double>(knots_.size() - 1);
  const auto k = std::min(static_cast<std::size_t>(x), knots_.size() - 2);
  const double frac = x - static_cast<double>(k);
  return knots_[k] + frac * (knots_[k + 1] - knots_[k]);
}

double RescaledPath::maximum_abs() const noexcept {
  double best = 0.0;
  for (double v : knots_) best = std::max(best, std::abs(v));
  return best;
}

RescaledPath rescale_path(const WalkPath& path, std::size_t n) { return RescaledPath(path, n); }

void write_samples_csv(std::ostream& out, std::span<const double> samples) {
  for (double x : samples) out << format_double(x) << '\n';
}

}  // namespace stochlab
