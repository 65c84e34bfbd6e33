#include "hetlogit/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <boost/math/distributions/normal.hpp>

#include "hetlogit/errors.hpp"

namespace hetlogit::stats {

double mean(std::span<const double> v) {
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

double variance(std::span<const double> v) {
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  const double m = mean(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return s / static_cast<double>(v.size());
}

double sample_sd(std::span<const double> v) {
  if (v.size() < 2) return 0.0;
  const double m = mean(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return std::sqrt(s / static_cast<double>(v.size() - 1));
}

double lower_median(std::span<const double> v) {
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::vector<double> copy(v.begin(), v.end());
  const std::size_t k = (copy.size() + 1) / 2 - 1;
  std::nth_element(copy.begin(), copy.begin() + static_cast<std::ptrdiff_t>(k), copy.end());
  return copy[k];
}

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

double normal_critical(double level) {
  if (!(level > 0.0 && level < 1.0)) throw ConfigError("confidence level must lie in (0, 1)");
  // Exact constant for the default level so reports match the documented value.
  if (level == 0.95) return 1.959964;
  const boost::math::normal_distribution<double> z;
  return boost::math::quantile(z, 0.5 + 0.5 * level);
}

namespace {

// Kolmogorov limiting survival function Q(t) = 2 sum (-1)^{k-1} exp(-2 k^2 t^2).
double kolmogorov_survival(double t) {
  if (t < 1e-3) return 1.0;
  if (t < 1.18) {
    // Small-t form converges faster: P(K <= t) = sqrt(2 pi)/t sum exp(-(2k-1)^2 pi^2 / (8 t^2)).
    double s = 0.0;
    const double pi2 = M_PI * M_PI;
    for (int k = 1; k <= 20; ++k) {
      const double m = 2.0 * k - 1.0;
      s += std::exp(-m * m * pi2 / (8.0 * t * t));
    }
    return 1.0 - std::sqrt(2.0 * M_PI) / t * s;
  }
  double s = 0.0;
  for (int k = 1; k <= 100; ++k) {
    const double term = std::exp(-2.0 * k * k * t * t);
    s += (k % 2 == 1 ? term : -term);
    if (term < 1e-17) break;
  }
  return std::clamp(2.0 * s, 0.0, 1.0);
}

}  // namespace

KsResult ks_test_standard_normal(std::vector<double> sample) {
  KsResult r;
  r.n = sample.size();
  if (sample.empty()) return r;
  std::sort(sample.begin(), sample.end());
  const double n = static_cast<double>(sample.size());
  double d = 0.0;
  for (std::size_t i = 0; i < sample.size(); ++i) {
    const double f = normal_cdf(sample[i]);
    d = std::max(d, std::max(static_cast<double>(i + 1) / n - f, f - static_cast<double>(i) / n));
  }
  r.statistic = d;
  // Stephens' finite-sample adjustment of the asymptotic distribution.
  const double sq = std::sqrt(n);
  r.p_value = kolmogorov_survival((sq + 0.12 + 0.11 / sq) * d);
  return r;
}

}  // namespace hetlogit::stats
