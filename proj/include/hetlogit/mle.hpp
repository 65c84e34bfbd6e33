#ifndef HETLOGIT_MLE_HPP
#define HETLOGIT_MLE_HPP

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "hetlogit/choice.hpp"
#include "hetlogit/dataset.hpp"
#include "hetlogit/influence.hpp"
#include "hetlogit/nn.hpp"
#include "hetlogit/structured.hpp"

namespace hetlogit {

// Linear-in-parameters coefficient functions for benchmark logits. Each free
// slot (non-reference intercepts, then slopes) is a constant plus one
// coefficient per interacted feature:  free_s(w) = g_s0 + sum_f g_sf w_f.
struct DesignSpec {
  std::vector<std::vector<std::string>> interactions;  // one list per free slot

  // Constants and slopes only.
  static DesignSpec basic(std::size_t free_length);
  // Every free slot interacted with the same features.
  static DesignSpec uniform(std::size_t free_length, const std::vector<std::string>& features);
  // The simulation truth: alpha_train:[income], alpha_sm:[age], cost:[income, who1..3],
  // freq:[income, male], time:[age].
  static DesignSpec swissmetro_oracle();
  // Intercepts interacted with age, income, who1..3, male, luggage; constant slopes.
  static DesignSpec swissmetro_appendix();

  std::size_t parameter_count() const;
};

// Design bound to a dataset's feature layout.
class BoundDesign {
 public:
  BoundDesign(const DesignSpec& spec, const ChoiceDataset& like);

  std::size_t parameter_count() const { return offsets_.back(); }
  std::size_t free_length() const { return columns_.size(); }
  // L x P matrix mapping parameters to the free coefficients at w.
  Eigen::MatrixXd map(const Eigen::VectorXd& w) const;
  Eigen::VectorXd free(const Eigen::VectorXd& gamma, const Eigen::VectorXd& w) const;
  // Parameter names: slot name, or slot*feature for interactions.
  std::vector<std::string> names(const ChoiceDataset& like) const;

 private:
  std::vector<std::vector<std::size_t>> columns_;  // per slot, feature columns
  std::vector<std::size_t> offsets_;                // first parameter of each slot, then P
};

// Names of the free slots: asc_<alternative> for the non-reference
// alternatives, then the attribute names.
std::vector<std::string> free_slot_names(const ChoiceDataset& like);

struct MleOptions {
  double gradient_tolerance = 1e-8;  // on max |sum of scores|
  std::size_t max_iterations = 100;
  std::size_t max_halvings = 30;
};

struct MleFit {
  std::vector<std::string> names;
  Eigen::VectorXd gamma;
  double log_likelihood = 0.0;  // summed
  std::size_t n = 0;
  std::size_t iterations = 0;
  double gradient_norm = 0.0;  // max |sum of scores| at the solution
  Eigen::MatrixXd hessian_mean;       // A
  Eigen::MatrixXd score_outer_mean;   // B
  Eigen::MatrixXd covariance;         // A^-1 B A^-1 / n
  Eigen::MatrixXd information_covariance;  // A^-1 / n

  Eigen::VectorXd standard_errors() const { return covariance.diagonal().cwiseSqrt(); }
};

// Newton-Raphson on the summed negative log-likelihood with step halving.
// Throws DesignError on a rank-deficient design, EstimationError if the
// gradient tolerance is not met within the iteration limit.
MleFit fit_logit_mle(const ChoiceDataset& data, const DesignSpec& design, const MleOptions& options = {});

// Population averages of target functionals under the fitted design, with
// delta-method standard errors from the sandwich covariance.
std::vector<ThetaEstimate> design_functionals(const MleFit& fit, const DesignSpec& design,
                                              const ChoiceDataset& population,
                                              const std::vector<TargetFunctional>& targets, double level = 0.95);

// Average slopes beta_k(w) over `population`, one estimate per attribute.
std::vector<ThetaEstimate> average_coefficients_from_design(const MleFit& fit, const DesignSpec& design,
                                                            const ChoiceDataset& population, double level = 0.95);

// Sandwich inference treating per-observation coefficients as known plug-ins:
// A = mean T G T', B = mean of score outer products, V = A^-1 B A^-1 / n, and
// each target's standard error is sqrt(g' V g) with g the mean H_delta.
std::vector<ThetaEstimate> plugin_sandwich(const ChoiceDataset& data, const std::vector<CoefficientBundle>& deltas,
                                           const std::vector<TargetFunctional>& targets, double level = 0.95);

struct NaiveNnResult {
  std::vector<ThetaEstimate> estimates;
  DeltaModel model;
};

// Fits the coefficient network on all of `data` (no splitting) and applies plugin_sandwich.
NaiveNnResult naive_nn_inference(const ChoiceDataset& data, const nn::NetworkSpec& spec,
                                 const std::vector<TargetFunctional>& targets, double level = 0.95,
                                 const DeltaFitOptions& options = {});

struct BootstrapResult {
  std::vector<double> se;                   // per statistic
  std::vector<std::vector<double>> draws;   // successful draws
  std::size_t failures = 0;
};

// Nonparametric bootstrap over observation indices. `statistic` receives the
// resampled ids (n of them, drawn with replacement). Failed draws are skipped
// and counted; more than 5% failures throws EstimationError.
using BootstrapStatistic = std::function<std::vector<double>(std::span<const std::size_t>)>;
BootstrapResult efron_bootstrap(std::size_t n, const BootstrapStatistic& statistic, std::size_t draws,
                                std::uint64_t seed);

// Significance stars from two-sided normal p-values: *** < 0.01, ** < 0.05, * < 0.1.
std::string significance_stars(double estimate, double se);

// CSV: term,estimate,se,stars
void write_mle_report(std::ostream& out, const MleFit& fit);

}  // namespace hetlogit

#endif  // HETLOGIT_MLE_HPP
