#ifndef HETLOGIT_TESTS_HELPERS_HPP
#define HETLOGIT_TESTS_HELPERS_HPP

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "hetlogit/dataset.hpp"
#include "hetlogit/random.hpp"

namespace test {

inline Eigen::MatrixXd random_matrix(hetlogit::Rng& rng, std::size_t r, std::size_t c, double scale) {
  Eigen::MatrixXd m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
  for (Eigen::Index j = 0; j < m.cols(); ++j)
    for (Eigen::Index i = 0; i < m.rows(); ++i) m(i, j) = rng.uniform(-scale, scale);
  return m;
}

inline Eigen::VectorXd random_vector(hetlogit::Rng& rng, std::size_t n, double scale) {
  return random_matrix(rng, n, 1, scale).col(0);
}

// Relative error with an absolute floor so that values near zero compare sensibly.
inline double rel_err(double a, double b) { return std::abs(a - b) / std::max(1.0, std::max(std::abs(a), std::abs(b))); }

// Random dataset with J alternatives, K attributes and D features; choices uniform.
inline hetlogit::ChoiceDataset random_dataset(std::size_t n, std::size_t J, std::size_t K, std::size_t D,
                                              std::uint64_t seed) {
  hetlogit::Rng rng(seed);
  hetlogit::ChoiceDataset d;
  for (std::size_t j = 0; j < J; ++j) d.alternatives.push_back("a" + std::to_string(j));
  for (std::size_t k = 0; k < K; ++k) d.attributes.push_back("x" + std::to_string(k));
  for (std::size_t f = 0; f < D; ++f) d.features.push_back("w" + std::to_string(f));
  d.reference = J - 1;
  d.w = random_matrix(rng, n, D, 1.0);
  for (std::size_t i = 0; i < n; ++i) {
    d.x.push_back(random_matrix(rng, J, K, 1.0));
    d.choice.push_back(static_cast<int>(rng.index(J)));
  }
  return d;
}

}  // namespace test

#endif
