#include "hetlogit/mle.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>

#include "hetlogit/errors.hpp"
#include "hetlogit/parallel.hpp"
#include "hetlogit/random.hpp"
#include "hetlogit/stats.hpp"

namespace hetlogit {

DesignSpec DesignSpec::basic(std::size_t free_length) {
  DesignSpec d;
  d.interactions.assign(free_length, {});
  return d;
}

DesignSpec DesignSpec::uniform(std::size_t free_length, const std::vector<std::string>& features) {
  DesignSpec d;
  d.interactions.assign(free_length, features);
  return d;
}

DesignSpec DesignSpec::swissmetro_oracle() {
  DesignSpec d;
  d.interactions = {{"income"}, {"age"}, {"income", "who1", "who2", "who3"}, {"income", "male"}, {"age"}};
  return d;
}

DesignSpec DesignSpec::swissmetro_appendix() {
  const std::vector<std::string> w{"age", "income", "who1", "who2", "who3", "male", "luggage"};
  DesignSpec d;
  d.interactions = {w, w, {}, {}, {}};
  return d;
}

std::size_t DesignSpec::parameter_count() const {
  std::size_t p = 0;
  for (const auto& s : interactions) p += 1 + s.size();
  return p;
}

BoundDesign::BoundDesign(const DesignSpec& spec, const ChoiceDataset& like) {
  if (spec.interactions.size() != like.free_length())
    throw DesignError("design has " + std::to_string(spec.interactions.size()) + " slots but the model has " +
                      std::to_string(like.free_length()) + " free coefficients");
  offsets_.push_back(0);
  for (const auto& slot : spec.interactions) {
    std::vector<std::size_t> cols;
    for (const auto& f : slot) {
      const auto it = std::find(like.features.begin(), like.features.end(), f);
      if (it == like.features.end()) throw DesignError("design refers to unknown feature '" + f + "'");
      cols.push_back(static_cast<std::size_t>(it - like.features.begin()));
    }
    offsets_.push_back(offsets_.back() + 1 + cols.size());
    columns_.push_back(std::move(cols));
  }
}

Eigen::MatrixXd BoundDesign::map(const Eigen::VectorXd& w) const {
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(free_length()),
                                            static_cast<Eigen::Index>(parameter_count()));
  for (std::size_t s = 0; s < columns_.size(); ++s) {
    const auto r = static_cast<Eigen::Index>(s);
    auto c = static_cast<Eigen::Index>(offsets_[s]);
    a(r, c++) = 1.0;
    for (auto f : columns_[s]) a(r, c++) = w[static_cast<Eigen::Index>(f)];
  }
  return a;
}

Eigen::VectorXd BoundDesign::free(const Eigen::VectorXd& gamma, const Eigen::VectorXd& w) const {
  Eigen::VectorXd out(static_cast<Eigen::Index>(free_length()));
  for (std::size_t s = 0; s < columns_.size(); ++s) {
    std::size_t c = offsets_[s];
    double v = gamma[static_cast<Eigen::Index>(c++)];
    for (auto f : columns_[s]) v += gamma[static_cast<Eigen::Index>(c++)] * w[static_cast<Eigen::Index>(f)];
    out[static_cast<Eigen::Index>(s)] = v;
  }
  return out;
}

std::vector<std::string> free_slot_names(const ChoiceDataset& like) {
  std::vector<std::string> out;
  for (std::size_t j = 0; j < like.num_alternatives(); ++j)
    if (j != like.reference) out.push_back("asc_" + like.alternatives[j]);
  for (const auto& a : like.attributes) out.push_back(a);
  return out;
}

std::vector<std::string> BoundDesign::names(const ChoiceDataset& like) const {
  const auto slots = free_slot_names(like);
  std::vector<std::string> out;
  for (std::size_t s = 0; s < columns_.size(); ++s) {
    out.push_back(slots[s]);
    for (auto f : columns_[s]) out.push_back(slots[s] + "*" + like.features[f]);
  }
  return out;
}

namespace {

struct Accumulated {
  double nll = 0.0;
  Eigen::VectorXd gradient;
  Eigen::MatrixXd hessian;
  Eigen::MatrixXd outer;
};

Accumulated accumulate(const ChoiceDataset& data, const BoundDesign& design, const Eigen::VectorXd& gamma,
                       bool derivatives) {
  const auto P = static_cast<Eigen::Index>(design.parameter_count());
  Accumulated acc;
  if (derivatives) {
    acc.gradient = Eigen::VectorXd::Zero(P);
    acc.hessian = Eigen::MatrixXd::Zero(P, P);
    acc.outer = Eigen::MatrixXd::Zero(P, P);
  }
  const std::size_t J = data.num_alternatives();
  for (std::size_t i = 0; i < data.size(); ++i) {
    const Eigen::VectorXd w = data.w_row(i);
    const Eigen::MatrixXd a = design.map(w);
    const Eigen::VectorXd f = a * gamma;
    const auto delta = CoefficientBundle::from_free(f, J, data.reference);
    acc.nll -= log_likelihood(data.choice[i], data.x[i], delta);
    if (!derivatives) continue;
    const Eigen::VectorXd s = a.transpose() * score(data.choice[i], data.x[i], delta);
    acc.gradient += s;
    acc.hessian.noalias() += a.transpose() * hessian_target(data.x[i], delta) * a;
    acc.outer.noalias() += s * s.transpose();
  }
  return acc;
}

Eigen::MatrixXd symmetric_inverse(const Eigen::MatrixXd& m, const char* what) {
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(m);
  const Eigen::VectorXd& v = eig.eigenvalues();
  if (v.size() == 0) return m;
  const double top = v.cwiseAbs().maxCoeff();
  if (!(v.minCoeff() > 1e-12 * top)) throw DesignError(std::string(what) + " is singular or indefinite");
  Eigen::MatrixXd inv = eig.eigenvectors() * v.cwiseInverse().asDiagonal() * eig.eigenvectors().transpose();
  return 0.5 * (inv + inv.transpose());
}

}  // namespace

MleFit fit_logit_mle(const ChoiceDataset& data, const DesignSpec& spec, const MleOptions& options) {
  data.validate();
  if (data.empty()) throw InputError("cannot fit a logit on an empty sample");
  const BoundDesign design(spec, data);
  const auto P = static_cast<Eigen::Index>(design.parameter_count());
  MleFit fit;
  fit.names = design.names(data);
  fit.n = data.size();
  Eigen::VectorXd gamma = Eigen::VectorXd::Zero(P);

  Accumulated acc = accumulate(data, design, gamma, true);
  {
    // At equal utilities the Hessian is positive definite iff the design has full column rank.
    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(acc.hessian, Eigen::EigenvaluesOnly);
    const double top = eig.eigenvalues().cwiseAbs().maxCoeff();
    if (!(eig.eigenvalues().minCoeff() > 1e-10 * top))
      throw DesignError("design matrix is rank deficient on this sample");
  }
  bool converged = false;
  for (std::size_t it = 0; it <= options.max_iterations; ++it) {
    fit.iterations = it;
    fit.gradient_norm = acc.gradient.cwiseAbs().maxCoeff();
    if (fit.gradient_norm < options.gradient_tolerance) {
      converged = true;
      break;
    }
    if (it == options.max_iterations) break;
    const Eigen::LDLT<Eigen::MatrixXd> ldlt(acc.hessian);
    Eigen::VectorXd step = ldlt.solve(acc.gradient);
    if (ldlt.info() != Eigen::Success || !step.allFinite()) step = acc.gradient;
    // Near the optimum the decrease falls below the rounding error of the summed
    // objective, so ties within a few ulps of it count as no increase.
    const double bound = acc.nll + 1e-13 * std::abs(acc.nll);
    double t = 1.0;
    Eigen::VectorXd trial = gamma - step;
    double trial_nll = accumulate(data, design, trial, false).nll;
    for (std::size_t h = 0; h < options.max_halvings && !(trial_nll <= bound); ++h) {
      t *= 0.5;
      trial = gamma - t * step;
      trial_nll = accumulate(data, design, trial, false).nll;
    }
    if (!(trial_nll <= bound)) break;
    gamma = trial;
    acc = accumulate(data, design, gamma, true);
  }
  if (!converged)
    throw EstimationError("Newton iterations did not converge; max |gradient| = " +
                          std::to_string(fit.gradient_norm));
  const double n = static_cast<double>(fit.n);
  fit.gamma = gamma;
  fit.log_likelihood = -acc.nll;
  fit.hessian_mean = acc.hessian / n;
  fit.score_outer_mean = acc.outer / n;
  const Eigen::MatrixXd a_inv = symmetric_inverse(fit.hessian_mean, "mean Hessian");
  fit.covariance = a_inv * fit.score_outer_mean * a_inv / n;
  fit.covariance = 0.5 * (fit.covariance + fit.covariance.transpose());
  fit.information_covariance = a_inv / n;
  return fit;
}

namespace {

ThetaEstimate make_estimate(const std::string& label, double theta, double se, std::size_t n, double level) {
  ThetaEstimate e;
  e.label = label;
  e.theta = theta;
  e.n = n;
  e.psi_variance = se * se * static_cast<double>(n);
  finalize_estimate(e, level);
  return e;
}

}  // namespace

std::vector<ThetaEstimate> design_functionals(const MleFit& fit, const DesignSpec& spec,
                                              const ChoiceDataset& population,
                                              const std::vector<TargetFunctional>& targets, double level) {
  if (population.empty()) throw InputError("population is empty");
  const BoundDesign design(spec, population);
  const auto P = static_cast<Eigen::Index>(design.parameter_count());
  if (fit.gamma.size() != P) throw DesignError("fitted parameters do not match the design");
  std::vector<double> theta(targets.size(), 0.0);
  std::vector<Eigen::VectorXd> grad(targets.size(), Eigen::VectorXd::Zero(P));
  for (std::size_t i = 0; i < population.size(); ++i) {
    const Eigen::VectorXd w = population.w_row(i);
    const Eigen::MatrixXd a = design.map(w);
    const auto delta = CoefficientBundle::from_free(Eigen::VectorXd(a * fit.gamma), population.num_alternatives(),
                                                    population.reference);
    for (std::size_t t = 0; t < targets.size(); ++t) {
      theta[t] += targets[t].value(delta);
      grad[t].noalias() += a.transpose() * targets[t].gradient(delta);
    }
  }
  const double m = static_cast<double>(population.size());
  std::vector<ThetaEstimate> out;
  for (std::size_t t = 0; t < targets.size(); ++t) {
    const Eigen::VectorXd g = grad[t] / m;
    const double var = g.dot(fit.covariance * g);
    out.push_back(make_estimate(targets[t].label(), theta[t] / m, std::sqrt(std::max(var, 0.0)), fit.n, level));
  }
  return out;
}

std::vector<ThetaEstimate> average_coefficients_from_design(const MleFit& fit, const DesignSpec& design,
                                                            const ChoiceDataset& population, double level) {
  std::vector<TargetFunctional> targets;
  for (std::size_t k = 0; k < population.num_attributes(); ++k)
    targets.push_back(TargetFunctional::average_coefficient(k, population.attributes[k]));
  return design_functionals(fit, design, population, targets, level);
}

std::vector<ThetaEstimate> plugin_sandwich(const ChoiceDataset& data, const std::vector<CoefficientBundle>& deltas,
                                           const std::vector<TargetFunctional>& targets, double level) {
  if (data.empty()) throw InputError("sample is empty");
  if (deltas.size() != data.size()) throw InputError("one coefficient bundle per observation is required");
  const auto L = static_cast<Eigen::Index>(data.free_length());
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(L, L);
  Eigen::MatrixXd b = Eigen::MatrixXd::Zero(L, L);
  std::vector<double> theta(targets.size(), 0.0);
  std::vector<Eigen::VectorXd> grad(targets.size(), Eigen::VectorXd::Zero(L));
  for (std::size_t i = 0; i < data.size(); ++i) {
    a += hessian_target(data.x[i], deltas[i]);
    const Eigen::VectorXd s = score(data.choice[i], data.x[i], deltas[i]);
    b.noalias() += s * s.transpose();
    for (std::size_t t = 0; t < targets.size(); ++t) {
      theta[t] += targets[t].value(deltas[i]);
      grad[t] += targets[t].gradient(deltas[i]);
    }
  }
  const double n = static_cast<double>(data.size());
  a /= n;
  b /= n;
  const Eigen::MatrixXd a_inv = symmetric_inverse(a, "plug-in mean Hessian");
  const Eigen::MatrixXd v = a_inv * b * a_inv / n;
  std::vector<ThetaEstimate> out;
  for (std::size_t t = 0; t < targets.size(); ++t) {
    const Eigen::VectorXd g = grad[t] / n;
    const double var = g.dot(v * g);
    out.push_back(make_estimate(targets[t].label(), theta[t] / n, std::sqrt(std::max(var, 0.0)), data.size(), level));
  }
  return out;
}

NaiveNnResult naive_nn_inference(const ChoiceDataset& data, const nn::NetworkSpec& spec,
                                 const std::vector<TargetFunctional>& targets, double level,
                                 const DeltaFitOptions& options) {
  NaiveNnResult out;
  out.model = fit_delta(data, spec, options);
  std::vector<CoefficientBundle> deltas;
  deltas.reserve(data.size());
  const Eigen::MatrixXd free = predict_delta_free(out.model, data.w);
  for (std::size_t i = 0; i < data.size(); ++i)
    deltas.push_back(CoefficientBundle::from_free(Eigen::VectorXd(free.row(static_cast<Eigen::Index>(i)).transpose()),
                                                  data.num_alternatives(), data.reference));
  out.estimates = plugin_sandwich(data, deltas, targets, level);
  return out;
}

BootstrapResult efron_bootstrap(std::size_t n, const BootstrapStatistic& statistic, std::size_t draws,
                                std::uint64_t seed) {
  if (draws < 1) throw ConfigError("bootstrap needs at least one draw");
  if (n < 1) throw InputError("bootstrap needs a nonempty sample");
  std::vector<std::vector<double>> values(draws);
  std::vector<char> ok(draws, 0);
  parallel_for(draws, [&](std::size_t b) {
    Rng rng(derive_seed(seed, b));
    std::vector<std::size_t> ids(n);
    for (auto& id : ids) id = static_cast<std::size_t>(rng.index(n));
    try {
      values[b] = statistic(ids);
      ok[b] = 1;
    } catch (const std::exception&) {
    }
  });
  BootstrapResult out;
  for (std::size_t b = 0; b < draws; ++b) {
    if (ok[b])
      out.draws.push_back(std::move(values[b]));
    else
      ++out.failures;
  }
  if (static_cast<double>(out.failures) > 0.05 * static_cast<double>(draws))
    throw EstimationError("bootstrap: " + std::to_string(out.failures) + " of " + std::to_string(draws) +
                          " refits failed");
  if (out.draws.empty()) return out;
  const std::size_t m = out.draws.front().size();
  for (std::size_t k = 0; k < m; ++k) {
    std::vector<double> col;
    col.reserve(out.draws.size());
    for (const auto& d : out.draws) {
      if (d.size() != m) throw EstimationError("bootstrap statistic changed length between draws");
      col.push_back(d[k]);
    }
    out.se.push_back(stats::sample_sd(col));
  }
  return out;
}

std::string significance_stars(double estimate, double se) {
  if (!(se > 0.0)) return "";
  const double p = 2.0 * (1.0 - stats::normal_cdf(std::abs(estimate / se)));
  if (p < 0.01) return "***";
  if (p < 0.05) return "**";
  if (p < 0.1) return "*";
  return "";
}

void write_mle_report(std::ostream& out, const MleFit& fit) {
  const auto old_precision = out.precision(10);
  out << "term,estimate,se,stars\n";
  const Eigen::VectorXd se = fit.standard_errors();
  for (std::size_t p = 0; p < fit.names.size(); ++p) {
    const auto i = static_cast<Eigen::Index>(p);
    out << fit.names[p] << ',' << fit.gamma[i] << ',' << se[i] << ',' << significance_stars(fit.gamma[i], se[i])
        << '\n';
  }
  out << "log_likelihood," << fit.log_likelihood << ",,\n";
  out << "observations," << fit.n << ",,\n";
  out.precision(old_precision);
}

}  // namespace hetlogit
