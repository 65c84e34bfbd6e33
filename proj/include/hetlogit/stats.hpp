#ifndef HETLOGIT_STATS_HPP
#define HETLOGIT_STATS_HPP

#include <cstddef>
#include <span>
#include <vector>

namespace hetlogit::stats {

double mean(std::span<const double> v);

// Population variance (divisor n).
double variance(std::span<const double> v);

// Sample standard deviation (divisor n - 1); 0 for fewer than two values.
double sample_sd(std::span<const double> v);

// Order statistic ceil(n/2) (1-based). For odd n this is the ordinary median;
// for even n it is the lower of the two middle values.
double lower_median(std::span<const double> v);

double normal_cdf(double x);

// Two-sided critical value: z such that P(|Z| <= z) = level.
double normal_critical(double level);

struct KsResult {
  double statistic = 0.0;
  double p_value = 1.0;
  std::size_t n = 0;
};

// One-sample Kolmogorov-Smirnov test against N(0, 1).
KsResult ks_test_standard_normal(std::vector<double> sample);

}  // namespace hetlogit::stats

#endif  // HETLOGIT_STATS_HPP
