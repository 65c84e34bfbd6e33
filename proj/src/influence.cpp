#include "hetlogit/influence.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <ostream>
#include <string>

#include "hetlogit/errors.hpp"
#include "hetlogit/parallel.hpp"
#include "hetlogit/random.hpp"
#include "hetlogit/stats.hpp"

namespace hetlogit {

TargetFunctional TargetFunctional::average_coefficient(std::size_t slope, std::string label) {
  TargetFunctional t;
  t.kind_ = Kind::average_coefficient;
  t.slope_ = slope;
  t.label_ = std::move(label);
  return t;
}

TargetFunctional TargetFunctional::elasticity(std::size_t row, std::size_t column, Eigen::MatrixXd x_star,
                                              std::size_t attribute, std::string label) {
  if (row >= static_cast<std::size_t>(x_star.rows()) || column >= static_cast<std::size_t>(x_star.rows()))
    throw ConfigError("elasticity alternative index out of range");
  if (attribute >= static_cast<std::size_t>(x_star.cols())) throw ConfigError("elasticity attribute out of range");
  TargetFunctional t;
  t.kind_ = Kind::elasticity;
  t.row_ = row;
  t.column_ = column;
  t.slope_ = attribute;
  t.x_star_ = std::move(x_star);
  t.label_ = std::move(label);
  return t;
}

double TargetFunctional::value(const CoefficientBundle& delta) const {
  const double beta = delta.betas[static_cast<Eigen::Index>(slope_)];
  if (kind_ == Kind::average_coefficient) return beta;
  const Eigen::VectorXd p = choice_probabilities(delta, x_star_);
  const auto m = static_cast<Eigen::Index>(column_);
  const double indicator = row_ == column_ ? 1.0 : 0.0;
  return beta * x_star_(m, static_cast<Eigen::Index>(slope_)) * (indicator - p[m]);
}

Eigen::VectorXd TargetFunctional::gradient(const CoefficientBundle& delta) const {
  const auto slot = static_cast<Eigen::Index>(delta.beta_slot(slope_));
  Eigen::VectorXd g = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(delta.free_length()));
  if (kind_ == Kind::average_coefficient) {
    g[slot] = 1.0;
    return g;
  }
  const auto m = static_cast<Eigen::Index>(column_);
  const double beta = delta.betas[static_cast<Eigen::Index>(slope_)];
  const double xm = x_star_(m, static_cast<Eigen::Index>(slope_));
  const Eigen::VectorXd p = choice_probabilities(delta, x_star_);
  const Eigen::MatrixXd T = utility_jacobian(x_star_, delta.reference);
  const double indicator = row_ == column_ ? 1.0 : 0.0;
  // d p_m / d free = p_m (T_m - T p)
  g = -beta * xm * p[m] * (T.col(m) - T * p);
  g[slot] += xm * (indicator - p[m]);
  return g;
}

Eigen::MatrixXd mean_attributes(const ChoiceDataset& data) {
  if (data.empty()) throw InputError("cannot average attributes of an empty sample");
  Eigen::MatrixXd acc = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(data.num_alternatives()),
                                              static_cast<Eigen::Index>(data.num_attributes()));
  for (const auto& x : data.x) acc += x;
  return acc / static_cast<double>(data.size());
}

SplitPlan make_split_plan(std::size_t n, std::size_t folds, std::uint64_t seed) {
  if (folds < 1) throw ConfigError("fold count must be at least 1");
  if (n < 2 * folds) throw ConfigError("need at least 2S observations to split into " + std::to_string(folds) + " folds");
  SplitPlan plan;
  plan.n = n;
  plan.folds = folds;
  plan.seed = seed;
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  Rng rng(seed);
  rng.shuffle(perm);
  plan.fold_of.assign(n, 0);
  plan.fold_ids.assign(folds, {});
  for (std::size_t i = 0; i < n; ++i) {
    plan.fold_of[perm[i]] = i % folds;
    plan.fold_ids[i % folds].push_back(perm[i]);
  }
  plan.delta_ids.assign(folds, {});
  plan.lambda_ids.assign(folds, {});
  for (std::size_t s = 0; s < folds; ++s) {
    std::sort(plan.fold_ids[s].begin(), plan.fold_ids[s].end());
    std::vector<std::size_t> rest;
    rest.reserve(n - plan.fold_ids[s].size());
    for (std::size_t i = 0; i < n; ++i)
      if (plan.fold_of[i] != s) rest.push_back(i);
    Rng piece_rng(derive_seed(seed, s + 1));
    piece_rng.shuffle(rest);
    const std::size_t half = (rest.size() + 1) / 2;
    plan.delta_ids[s].assign(rest.begin(), rest.begin() + static_cast<std::ptrdiff_t>(half));
    plan.lambda_ids[s].assign(rest.begin() + static_cast<std::ptrdiff_t>(half), rest.end());
    std::sort(plan.delta_ids[s].begin(), plan.delta_ids[s].end());
    std::sort(plan.lambda_ids[s].begin(), plan.lambda_ids[s].end());
  }
  return plan;
}

double psi_value(const Observation& obs, const CoefficientBundle& delta, const Eigen::MatrixXd& lambda_inverse,
                 const TargetFunctional& target) {
  const Eigen::VectorXd s = score(obs, delta);
  return target.value(delta) - target.gradient(delta).dot(lambda_inverse * s);
}

double FoldModel::mse_train() const { return std::numeric_limits<double>::quiet_NaN(); }
double FoldModel::mse_test() const { return std::numeric_limits<double>::quiet_NaN(); }

std::shared_ptr<const DeltaModel> DeltaCache::find(const Key& key) const {
  const std::lock_guard<std::mutex> lock(mutex_);
  const auto it = models_.find(key);
  return it == models_.end() ? nullptr : it->second;
}

void DeltaCache::store(const Key& key, std::shared_ptr<const DeltaModel> model) {
  const std::lock_guard<std::mutex> lock(mutex_);
  models_.emplace(key, std::move(model));
}

std::size_t DeltaCache::size() const {
  const std::lock_guard<std::mutex> lock(mutex_);
  return models_.size();
}

std::vector<std::shared_ptr<const DeltaModel>> DeltaCache::models() const {
  const std::lock_guard<std::mutex> lock(mutex_);
  std::vector<std::shared_ptr<const DeltaModel>> out;
  for (const auto& [key, model] : models_) out.push_back(model);
  return out;
}

NetworkNuisanceFitter::NetworkNuisanceFitter(nn::NetworkSpec delta_spec, nn::NetworkSpec lambda_spec,
                                             double lambda_l2, double diag_ridge, DeltaFitOptions delta_options,
                                             std::shared_ptr<DeltaCache> cache)
    : delta_spec_(std::move(delta_spec)),
      lambda_spec_(std::move(lambda_spec)),
      lambda_l2_(lambda_l2),
      diag_ridge_(diag_ridge),
      delta_options_(delta_options),
      cache_(std::move(cache)) {
  if (!(lambda_l2 >= 0.0)) throw ConfigError("Hessian network l2 penalty must be >= 0");
  if (!(diag_ridge >= 0.0)) throw ConfigError("diagonal ridge must be >= 0");
}

std::unique_ptr<FoldModel> NetworkNuisanceFitter::fit(const ChoiceDataset& data, const SplitPlan& plan,
                                                      std::size_t fold, std::uint64_t seed) const {
  const std::size_t L = data.free_length();
  nn::NetworkSpec dspec = delta_spec_;
  dspec.input_dim = data.num_features();
  dspec.output_dim = L;
  dspec.seed = derive_seed(seed, 0);
  nn::NetworkSpec lspec = lambda_spec_;
  lspec.input_dim = data.num_features();
  lspec.output_dim = packed_length(L);
  lspec.seed = derive_seed(seed, 1);

  const ChoiceDataset delta_piece = data.subset(plan.delta_ids[fold]);
  const ChoiceDataset lambda_piece = data.subset(plan.lambda_ids[fold]);
  const ChoiceDataset held_out = data.subset(plan.fold_ids[fold]);
  const DeltaCache::Key key{&data, data.size(), plan.seed, fold, seed};
  std::shared_ptr<const DeltaModel> cached = cache_ ? cache_->find(key) : nullptr;
  if (!cached) {
    cached = std::make_shared<const DeltaModel>(fit_delta(delta_piece, dspec, delta_options_));
    if (cache_) cache_->store(key, cached);
  }
  DeltaModel delta = *cached;
  LambdaModel lambda = fit_lambda(lambda_piece, delta, lspec, lambda_l2_, diag_ridge_);
  const double mse_train = mse_lambda(lambda, lambda_piece, delta);
  const double mse_test = mse_lambda(lambda, held_out, delta);
  return std::make_unique<NetworkFoldModel>(std::move(delta), std::move(lambda), mse_train, mse_test);
}

NetworkFoldModel::NetworkFoldModel(DeltaModel delta, LambdaModel lambda, double mse_train, double mse_test)
    : delta_(std::move(delta)), lambda_(std::move(lambda)), mse_train_(mse_train), mse_test_(mse_test) {}

CoefficientBundle NetworkFoldModel::delta(const Eigen::VectorXd& w) const { return predict_delta(delta_, w); }

LambdaInverse NetworkFoldModel::lambda_inverse(const Eigen::VectorXd& w) const {
  return predict_lambda_inverse(lambda_, w);
}

FoldResult evaluate_fold(const ChoiceDataset& data, std::span<const std::size_t> ids, const FoldModel& model,
                         const std::vector<TargetFunctional>& targets) {
  FoldResult out;
  out.ids.assign(ids.begin(), ids.end());
  const auto rows = static_cast<Eigen::Index>(ids.size());
  const auto cols = static_cast<Eigen::Index>(targets.size());
  out.plug_in.resize(rows, cols);
  out.correction.resize(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    const std::size_t i = ids[static_cast<std::size_t>(r)];
    const Eigen::VectorXd w = data.w_row(i);
    const CoefficientBundle delta = model.delta(w);
    const LambdaInverse inv = model.lambda_inverse(w);
    if (inv.rescued) ++out.rescued;
    const Eigen::VectorXd adjusted = inv.inverse * score(data.choice[i], data.x[i], delta);
    for (Eigen::Index t = 0; t < cols; ++t) {
      const TargetFunctional& target = targets[static_cast<std::size_t>(t)];
      out.plug_in(r, t) = target.value(delta);
      out.correction(r, t) = target.gradient(delta).dot(adjusted);
    }
  }
  out.psi = out.plug_in - out.correction;
  out.mse_train = model.mse_train();
  out.mse_test = model.mse_test();
  return out;
}

void finalize_estimate(ThetaEstimate& e, double level) {
  e.level = level;
  e.se = std::sqrt(std::max(e.psi_variance, 0.0) / static_cast<double>(e.n));
  const double half = stats::normal_critical(level) * e.se;
  e.ci_low = e.theta - half;
  e.ci_high = e.theta + half;
  e.outlier = !(e.se <= kOutlierStandardError);
}

std::vector<ThetaEstimate> aggregate_folds(const std::vector<FoldResult>& folds, std::size_t n,
                                           const std::vector<std::string>& labels, FoldAggregation aggregation,
                                           double level) {
  if (folds.empty()) throw EstimationError("no folds to aggregate");
  std::vector<ThetaEstimate> out(labels.size());
  for (std::size_t t = 0; t < labels.size(); ++t) {
    ThetaEstimate& e = out[t];
    e.label = labels[t];
    e.n = n;
    const auto col = static_cast<Eigen::Index>(t);
    // Copies keep the reductions independent of the column's alignment, so a
    // target gives the same bits whether estimated alone or with others.
    std::vector<Eigen::VectorXd> columns;
    for (const FoldResult& f : folds) columns.emplace_back(f.psi.col(col));
    for (const auto& c : columns) e.fold_theta.push_back(c.mean());
    e.theta = aggregation == FoldAggregation::mean ? stats::mean(e.fold_theta) : stats::lower_median(e.fold_theta);
    for (const auto& c : columns) e.fold_psi.push_back((c.array() - e.theta).square().mean());
    e.psi_variance =
        aggregation == FoldAggregation::mean ? stats::mean(e.fold_psi) : stats::lower_median(e.fold_psi);
    finalize_estimate(e, level);
  }
  return out;
}

EstimateResult estimate(const ChoiceDataset& data, const std::vector<TargetFunctional>& targets,
                        const NuisanceFitter& fitter, const EstimateConfig& config) {
  if (targets.empty()) throw ConfigError("no target functionals given");
  if (!(config.level > 0.0 && config.level < 1.0)) throw ConfigError("confidence level must lie in (0, 1)");
  data.validate();
  EstimateResult result;
  result.plan = make_split_plan(data.size(), config.folds, config.seed);
  result.folds.resize(config.folds);
  parallel_for(config.folds, [&](std::size_t s) {
    try {
      const auto model = fitter.fit(data, result.plan, s, derive_seed(config.seed, 1000 + s));
      result.folds[s] = evaluate_fold(data, result.plan.fold_ids[s], *model, targets);
    } catch (const ConfigError&) {
      throw;
    } catch (const std::exception& e) {
      throw EstimationError("fold " + std::to_string(s) + " (split seed " + std::to_string(config.seed) +
                            "): " + e.what());
    }
  });
  std::vector<std::string> labels;
  for (const auto& t : targets) labels.push_back(t.label());
  result.estimates = aggregate_folds(result.folds, data.size(), labels, config.aggregation, config.level);
  for (const FoldResult& f : result.folds) {
    result.rescued += f.rescued;
    result.mse_train += f.mse_train / static_cast<double>(config.folds);
    result.mse_test += f.mse_test / static_cast<double>(config.folds);
  }
  return result;
}

std::vector<ThetaEstimate> combine_repetitions(const std::vector<std::vector<ThetaEstimate>>& repetitions,
                                               double level) {
  if (repetitions.empty()) throw ConfigError("need at least one repetition");
  const std::size_t targets = repetitions.front().size();
  for (const auto& r : repetitions)
    if (r.size() != targets) throw EstimationError("repetitions disagree on the number of targets");
  std::vector<ThetaEstimate> out(targets);
  for (std::size_t t = 0; t < targets; ++t) {
    ThetaEstimate& e = out[t];
    const ThetaEstimate& first = repetitions.front()[t];
    e.label = first.label;
    e.n = first.n;
    for (const auto& r : repetitions) {
      e.repetition_theta.push_back(r[t].theta);
      e.repetition_psi.push_back(r[t].psi_variance);
    }
    e.theta = stats::lower_median(e.repetition_theta);
    std::vector<double> spread(repetitions.size());
    for (std::size_t r = 0; r < repetitions.size(); ++r) {
      const double d = e.repetition_theta[r] - e.theta;
      spread[r] = e.repetition_psi[r] + d * d;
    }
    e.psi_variance = stats::lower_median(spread);
    if (repetitions.size() == 1) {
      e.fold_theta = first.fold_theta;
      e.fold_psi = first.fold_psi;
    }
    finalize_estimate(e, level);
  }
  return out;
}

std::uint64_t repetition_seed(std::uint64_t seed, std::size_t r) {
  if (r == 0) return seed;
  return derive_seed(seed ^ 0x9e3779b97f4a7c15ULL, r);
}

RepeatedEstimateResult estimate_repeated(const ChoiceDataset& data, const std::vector<TargetFunctional>& targets,
                                         const NuisanceFitter& fitter, const EstimateConfig& config,
                                         std::size_t repetitions) {
  if (repetitions < 1) throw ConfigError("repetition count must be at least 1");
  RepeatedEstimateResult out;
  out.repetitions.resize(repetitions);
  parallel_for(repetitions, [&](std::size_t r) {
    EstimateConfig c = config;
    c.seed = repetition_seed(config.seed, r);
    try {
      out.repetitions[r] = estimate(data, targets, fitter, c);
    } catch (const EstimationError& e) {
      throw EstimationError("repetition " + std::to_string(r) + ", " + e.what());
    }
  });
  std::vector<std::vector<ThetaEstimate>> per_rep;
  per_rep.reserve(repetitions);
  for (const auto& r : out.repetitions) per_rep.push_back(r.estimates);
  out.estimates = combine_repetitions(per_rep, config.level);
  return out;
}

void write_estimates_csv(std::ostream& out, const std::vector<ThetaEstimate>& estimates, std::size_t repetitions,
                         std::size_t folds, double lambda_l2, bool header) {
  const auto old_precision = out.precision(17);
  if (header) out << "target,theta,se,ci_low,ci_high,outlier,R,S,lambda\n";
  for (const auto& e : estimates) {
    out << e.label << ',' << e.theta << ',' << e.se << ',' << e.ci_low << ',' << e.ci_high << ','
        << (e.outlier ? 1 : 0) << ',' << repetitions << ',' << folds << ',' << lambda_l2 << '\n';
  }
  out.precision(old_precision);
}

}  // namespace hetlogit
