#ifndef HETLOGIT_INFLUENCE_HPP
#define HETLOGIT_INFLUENCE_HPP

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <tuple>
#include <vector>

#include <Eigen/Dense>

#include "hetlogit/choice.hpp"
#include "hetlogit/dataset.hpp"
#include "hetlogit/nn.hpp"
#include "hetlogit/nuisance.hpp"
#include "hetlogit/structured.hpp"

// Orthogonal-score inference on averages of functionals of delta(w).
//
// For each observation the influence value is
//   psi = H(delta) - H_delta' Lambda^{-1} score,
// with score and Lambda taken from the negative log-likelihood, so Lambda is
// positive semidefinite in population. delta and Lambda come from models fitted
// on the two halves of the complement of the observation's fold.
namespace hetlogit {

class TargetFunctional {
 public:
  enum class Kind { average_coefficient, elasticity };

  // H = beta_k(w).
  static TargetFunctional average_coefficient(std::size_t slope, std::string label);

  // H = beta_t(w) * x*_{m,t} * (1{l=m} - p_m(delta, x*)): elasticity of the
  // probability of alternative `row` with respect to attribute t of
  // alternative `column`, evaluated at the attribute matrix x*.
  static TargetFunctional elasticity(std::size_t row, std::size_t column, Eigen::MatrixXd x_star,
                                     std::size_t attribute, std::string label);

  Kind kind() const { return kind_; }
  const std::string& label() const { return label_; }
  std::size_t slope() const { return slope_; }
  std::size_t row() const { return row_; }
  std::size_t column() const { return column_; }
  const Eigen::MatrixXd& x_star() const { return x_star_; }

  double value(const CoefficientBundle& delta) const;
  // Gradient w.r.t. the free coefficient vector.
  Eigen::VectorXd gradient(const CoefficientBundle& delta) const;

 private:
  Kind kind_ = Kind::average_coefficient;
  std::string label_;
  std::size_t slope_ = 0;
  std::size_t row_ = 0;
  std::size_t column_ = 0;
  Eigen::MatrixXd x_star_;
};

// Column means of each alternative's attributes over `data`.
Eigen::MatrixXd mean_attributes(const ChoiceDataset& data);

// S folds of near-equal size; each fold's complement halved into a piece for
// delta and a piece for Lambda.
struct SplitPlan {
  std::size_t n = 0;
  std::size_t folds = 0;
  std::uint64_t seed = 0;
  std::vector<std::size_t> fold_of;                  // observation -> fold
  std::vector<std::vector<std::size_t>> fold_ids;    // held-out fold members
  std::vector<std::vector<std::size_t>> delta_ids;   // complement piece fitting delta
  std::vector<std::vector<std::size_t>> lambda_ids;  // complement piece fitting Lambda
};

// Throws ConfigError unless S >= 1 and n >= 2S.
SplitPlan make_split_plan(std::size_t n, std::size_t folds, std::uint64_t seed);

double psi_value(const Observation& obs, const CoefficientBundle& delta, const Eigen::MatrixXd& lambda_inverse,
                 const TargetFunctional& target);

// Nuisance functions fitted for one fold.
class FoldModel {
 public:
  virtual ~FoldModel() = default;
  virtual CoefficientBundle delta(const Eigen::VectorXd& w) const = 0;
  virtual LambdaInverse lambda_inverse(const Eigen::VectorXd& w) const = 0;
  // Lambda-network MSE on its own training piece and on the held-out fold.
  virtual double mse_train() const;
  virtual double mse_test() const;
};

class NuisanceFitter {
 public:
  virtual ~NuisanceFitter() = default;
  virtual std::unique_ptr<FoldModel> fit(const ChoiceDataset& data, const SplitPlan& plan, std::size_t fold,
                                         std::uint64_t seed) const = 0;
};

// Fitted delta networks keyed by (data identity, split seed, fold, fit seed), so
// fitters that differ only in their Lambda settings can share delta fits. All
// fitters sharing one cache must use the same delta spec and options.
class DeltaCache {
 public:
  using Key = std::tuple<const void*, std::size_t, std::uint64_t, std::size_t, std::uint64_t>;
  std::shared_ptr<const DeltaModel> find(const Key& key) const;
  void store(const Key& key, std::shared_ptr<const DeltaModel> model);
  std::size_t size() const;
  // Every stored model, in key order.
  std::vector<std::shared_ptr<const DeltaModel>> models() const;

 private:
  mutable std::mutex mutex_;
  std::map<Key, std::shared_ptr<const DeltaModel>> models_;
};

// delta network on the first complement piece, Lambda network on the second.
class NetworkNuisanceFitter final : public NuisanceFitter {
 public:
  NetworkNuisanceFitter(nn::NetworkSpec delta_spec, nn::NetworkSpec lambda_spec, double lambda_l2,
                        double diag_ridge = 0.0, DeltaFitOptions delta_options = {},
                        std::shared_ptr<DeltaCache> cache = nullptr);
  std::unique_ptr<FoldModel> fit(const ChoiceDataset& data, const SplitPlan& plan, std::size_t fold,
                                 std::uint64_t seed) const override;

 private:
  nn::NetworkSpec delta_spec_;
  nn::NetworkSpec lambda_spec_;
  double lambda_l2_;
  double diag_ridge_;
  DeltaFitOptions delta_options_;
  std::shared_ptr<DeltaCache> cache_;
};

// Fitted networks for one fold; exposed so results can be audited.
class NetworkFoldModel final : public FoldModel {
 public:
  NetworkFoldModel(DeltaModel delta, LambdaModel lambda, double mse_train, double mse_test);
  CoefficientBundle delta(const Eigen::VectorXd& w) const override;
  LambdaInverse lambda_inverse(const Eigen::VectorXd& w) const override;
  double mse_train() const override { return mse_train_; }
  double mse_test() const override { return mse_test_; }
  const DeltaModel& delta_model() const { return delta_; }
  const LambdaModel& lambda_model() const { return lambda_; }

 private:
  DeltaModel delta_;
  LambdaModel lambda_;
  double mse_train_;
  double mse_test_;
};

enum class FoldAggregation { mean, median };

struct EstimateConfig {
  std::size_t folds = 5;
  double level = 0.95;
  FoldAggregation aggregation = FoldAggregation::mean;
  std::uint64_t seed = 0;
};

struct ThetaEstimate {
  std::string label;
  double theta = 0.0;
  double psi_variance = 0.0;  // Psi-hat
  std::size_t n = 0;
  double se = 0.0;  // sqrt(Psi-hat / n)
  double ci_low = 0.0;
  double ci_high = 0.0;
  double level = 0.95;
  std::vector<double> fold_theta;
  std::vector<double> fold_psi;
  bool outlier = false;  // se > 5
  std::vector<double> repetition_theta;
  std::vector<double> repetition_psi;
};

// Standard errors above this mark a replicate as an outlier.
inline constexpr double kOutlierStandardError = 5.0;

// Evaluated influence values of one fold.
struct FoldResult {
  std::vector<std::size_t> ids;
  Eigen::MatrixXd plug_in;     // |fold| x targets: H(delta-hat)
  Eigen::MatrixXd correction;  // |fold| x targets: H_delta' Lambda^{-1} score
  Eigen::MatrixXd psi;         // plug_in - correction
  double mse_train = 0.0;
  double mse_test = 0.0;
  std::size_t rescued = 0;  // observations whose Lambda inverse used the pseudo-inverse
};

struct EstimateResult {
  std::vector<ThetaEstimate> estimates;
  SplitPlan plan;
  std::vector<FoldResult> folds;
  std::size_t rescued = 0;
  double mse_train = 0.0;  // mean over folds
  double mse_test = 0.0;
};

// Influence values for the observations of one fold given its fitted model.
FoldResult evaluate_fold(const ChoiceDataset& data, std::span<const std::size_t> ids, const FoldModel& model,
                         const std::vector<TargetFunctional>& targets);

// Combines fold results into one estimate per target. Mean mode averages fold
// means and fold variances (each centred at the overall estimate); median mode
// takes lower medians over folds instead.
std::vector<ThetaEstimate> aggregate_folds(const std::vector<FoldResult>& folds, std::size_t n,
                                           const std::vector<std::string>& labels, FoldAggregation aggregation,
                                           double level);

// Fills se, CI and outlier flag from theta, psi_variance and n.
void finalize_estimate(ThetaEstimate& e, double level);

EstimateResult estimate(const ChoiceDataset& data, const std::vector<TargetFunctional>& targets,
                        const NuisanceFitter& fitter, const EstimateConfig& config);

// Median over repetitions: theta = med{theta_r}, Psi = med{Psi_r + (theta_r - theta)^2},
// both lower medians. Every repetition must list the targets in the same order.
std::vector<ThetaEstimate> combine_repetitions(const std::vector<std::vector<ThetaEstimate>>& repetitions,
                                               double level);

struct RepeatedEstimateResult {
  std::vector<ThetaEstimate> estimates;
  std::vector<EstimateResult> repetitions;
};

// R independent split seeds; repetition 0 uses config.seed itself so R = 1
// reproduces estimate().
RepeatedEstimateResult estimate_repeated(const ChoiceDataset& data, const std::vector<TargetFunctional>& targets,
                                         const NuisanceFitter& fitter, const EstimateConfig& config,
                                         std::size_t repetitions);

// Seed of repetition r.
std::uint64_t repetition_seed(std::uint64_t seed, std::size_t r);

// CSV: target,theta,se,ci_low,ci_high,outlier,R,S,lambda
void write_estimates_csv(std::ostream& out, const std::vector<ThetaEstimate>& estimates, std::size_t repetitions,
                         std::size_t folds, double lambda_l2, bool header = true);

}  // namespace hetlogit

#endif  // HETLOGIT_INFLUENCE_HPP
