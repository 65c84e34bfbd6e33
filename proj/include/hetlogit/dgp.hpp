#ifndef HETLOGIT_DGP_HPP
#define HETLOGIT_DGP_HPP

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "hetlogit/choice.hpp"
#include "hetlogit/dataset.hpp"
#include "hetlogit/influence.hpp"

// Semi-synthetic data generation: known coefficient functions, Gumbel shocks,
// population / estimation splits and independent resampling.
namespace hetlogit {

class CoefficientFunction {
 public:
  virtual ~CoefficientFunction() = default;
  virtual CoefficientBundle operator()(const Eigen::VectorXd& w) const = 0;
};

// The Swissmetro simulation truth, over alternatives (train, sm, car), car the reference:
//   alpha_train = -1 + income            alpha_sm = -3 + age
//   beta_cost   = -6 + income - 0.8 who1 - who2 - 1.2 who3
//   beta_freq   = -5 + income + 0.9 male
//   beta_time   = -6 + age
// Feature positions are resolved by name from `features`.
class SwissmetroTruth final : public CoefficientFunction {
 public:
  explicit SwissmetroTruth(const std::vector<std::string>& features);
  CoefficientBundle operator()(const Eigen::VectorXd& w) const override;

 private:
  std::size_t age_, income_, male_, who1_, who2_, who3_;
};

// free(w) = intercept + slope * w, where slope is L x D.
class LinearCoefficients final : public CoefficientFunction {
 public:
  LinearCoefficients(Eigen::VectorXd intercept, Eigen::MatrixXd slope, std::size_t J, std::size_t reference);
  CoefficientBundle operator()(const Eigen::VectorXd& w) const override;
  const Eigen::VectorXd& intercept() const { return intercept_; }
  const Eigen::MatrixXd& slope() const { return slope_; }

 private:
  Eigen::VectorXd intercept_;
  Eigen::MatrixXd slope_;
  std::size_t J_;
  std::size_t reference_;
};

// Choice indices maximising alpha_j + x_j' beta + omega_j with iid standard
// Gumbel omega drawn as -log(-log U).
std::vector<int> simulate_choices(const std::vector<Eigen::MatrixXd>& x, const std::vector<CoefficientBundle>& deltas,
                                  std::uint64_t seed);

// Convenience: replaces data.choice by draws under `truth`.
void simulate_choices(ChoiceDataset& data, const CoefficientFunction& truth, std::uint64_t seed);

std::vector<CoefficientBundle> true_deltas(const ChoiceDataset& data, const CoefficientFunction& truth);

// Mean of each target's H under the true coefficients over every row of `population`.
std::vector<double> true_theta(const ChoiceDataset& population, const CoefficientFunction& truth,
                               const std::vector<TargetFunctional>& targets);

struct PopulationFrame {
  ChoiceDataset population;
  std::vector<std::size_t> estimation_ids;  // sorted, round(0.75 n) of them

  ChoiceDataset estimation_sample() const { return population.subset(estimation_ids); }
};

// Uniformly drawn subset of round(fraction * n) ids, sorted.
std::vector<std::size_t> draw_subset(std::size_t n, double fraction, std::uint64_t seed);

PopulationFrame make_frame(ChoiceDataset population, std::uint64_t seed, double fraction = 0.75);

// Draws n synthetic travellers. Each socio-demographic group is sampled with
// replacement independently of the others (a group is a set of columns drawn
// jointly from one source row, used for dummy-coded categories). Every
// (alternative, attribute) entry is drawn independently from that entry's
// observed values. Features not named in any group form singleton groups.
ChoiceDataset resample_large(const ChoiceDataset& population, std::size_t n, std::uint64_t seed,
                             const std::vector<std::vector<std::string>>& groups = {{"who1", "who2", "who3"}});

// Small synthetic DGP with J = 3 alternatives (reference last), K = 2
// attributes and D = 2 features: w1 ~ U(0, 2), w2 ~ Bernoulli(1/2),
// attributes ~ U(0, 2). Coefficients are linear in w.
struct LinearDgp {
  std::size_t n = 4000;

  static std::vector<std::string> feature_names() { return {"w1", "w2"}; }
  LinearCoefficients truth() const;
  // Exact E[beta_k(w)] for each slope k.
  Eigen::VectorXd theta() const;
  // Features, attributes and simulated choices.
  ChoiceDataset draw(std::uint64_t seed) const;
};

}  // namespace hetlogit

#endif  // HETLOGIT_DGP_HPP
