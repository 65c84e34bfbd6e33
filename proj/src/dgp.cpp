#include "hetlogit/dgp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>

#include "hetlogit/errors.hpp"
#include "hetlogit/random.hpp"

namespace hetlogit {

namespace {

std::size_t find_feature(const std::vector<std::string>& features, const std::string& name) {
  const auto it = std::find(features.begin(), features.end(), name);
  if (it == features.end()) throw InputError("true coefficient functions need feature '" + name + "'");
  return static_cast<std::size_t>(it - features.begin());
}

}  // namespace

SwissmetroTruth::SwissmetroTruth(const std::vector<std::string>& features)
    : age_(find_feature(features, "age")),
      income_(find_feature(features, "income")),
      male_(find_feature(features, "male")),
      who1_(find_feature(features, "who1")),
      who2_(find_feature(features, "who2")),
      who3_(find_feature(features, "who3")) {}

CoefficientBundle SwissmetroTruth::operator()(const Eigen::VectorXd& w) const {
  auto at = [&](std::size_t i) { return w[static_cast<Eigen::Index>(i)]; };
  CoefficientBundle d = CoefficientBundle::zeros(3, 3, 2);
  d.alphas << -1.0 + at(income_), -3.0 + at(age_), 0.0;
  d.betas << -6.0 + at(income_) - 0.8 * at(who1_) - 1.0 * at(who2_) - 1.2 * at(who3_),
      -5.0 + at(income_) + 0.9 * at(male_), -6.0 + at(age_);
  return d;
}

LinearCoefficients::LinearCoefficients(Eigen::VectorXd intercept, Eigen::MatrixXd slope, std::size_t J,
                                       std::size_t reference)
    : intercept_(std::move(intercept)), slope_(std::move(slope)), J_(J), reference_(reference) {
  if (slope_.rows() != intercept_.size()) throw ConfigError("linear coefficient shapes disagree");
}

CoefficientBundle LinearCoefficients::operator()(const Eigen::VectorXd& w) const {
  if (w.size() != slope_.cols()) throw InputError("feature vector has wrong length");
  const Eigen::VectorXd free = intercept_ + slope_ * w;
  return CoefficientBundle::from_free(free, J_, reference_);
}

std::vector<int> simulate_choices(const std::vector<Eigen::MatrixXd>& x, const std::vector<CoefficientBundle>& deltas,
                                  std::uint64_t seed) {
  if (x.size() != deltas.size()) throw InputError("attribute and coefficient counts differ");
  Rng rng(seed);
  std::vector<int> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const Eigen::VectorXd v = utilities(deltas[i], x[i]);
    int best = 0;
    double best_u = -std::numeric_limits<double>::infinity();
    for (Eigen::Index j = 0; j < v.size(); ++j) {
      const double u = v[j] + rng.gumbel();
      if (u > best_u) {
        best_u = u;
        best = static_cast<int>(j);
      }
    }
    out[i] = best;
  }
  return out;
}

std::vector<CoefficientBundle> true_deltas(const ChoiceDataset& data, const CoefficientFunction& truth) {
  std::vector<CoefficientBundle> out;
  out.reserve(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) out.push_back(truth(data.w_row(i)));
  return out;
}

void simulate_choices(ChoiceDataset& data, const CoefficientFunction& truth, std::uint64_t seed) {
  data.choice = simulate_choices(data.x, true_deltas(data, truth), seed);
}

std::vector<double> true_theta(const ChoiceDataset& population, const CoefficientFunction& truth,
                               const std::vector<TargetFunctional>& targets) {
  if (population.empty()) throw InputError("population is empty");
  std::vector<double> out(targets.size(), 0.0);
  for (std::size_t i = 0; i < population.size(); ++i) {
    const CoefficientBundle d = truth(population.w_row(i));
    for (std::size_t t = 0; t < targets.size(); ++t) out[t] += targets[t].value(d);
  }
  for (double& v : out) v /= static_cast<double>(population.size());
  return out;
}

std::vector<std::size_t> draw_subset(std::size_t n, double fraction, std::uint64_t seed) {
  if (!(fraction > 0.0 && fraction <= 1.0)) throw ConfigError("subset fraction must lie in (0, 1]");
  std::vector<std::size_t> ids(n);
  std::iota(ids.begin(), ids.end(), std::size_t{0});
  Rng rng(seed);
  rng.shuffle(ids);
  ids.resize(static_cast<std::size_t>(std::llround(fraction * static_cast<double>(n))));
  std::sort(ids.begin(), ids.end());
  return ids;
}

PopulationFrame make_frame(ChoiceDataset population, std::uint64_t seed, double fraction) {
  PopulationFrame frame;
  frame.estimation_ids = draw_subset(population.size(), fraction, seed);
  frame.population = std::move(population);
  return frame;
}

ChoiceDataset resample_large(const ChoiceDataset& population, std::size_t n, std::uint64_t seed,
                             const std::vector<std::vector<std::string>>& groups) {
  if (population.empty()) throw InputError("cannot resample an empty population");
  const std::size_t src = population.size();
  const std::size_t D = population.num_features();
  const auto J = static_cast<Eigen::Index>(population.num_alternatives());
  const auto K = static_cast<Eigen::Index>(population.num_attributes());

  std::vector<std::vector<std::size_t>> column_groups;
  std::set<std::size_t> grouped;
  for (const auto& g : groups) {
    std::vector<std::size_t> cols;
    for (const auto& name : g) {
      const auto it = std::find(population.features.begin(), population.features.end(), name);
      if (it != population.features.end()) cols.push_back(static_cast<std::size_t>(it - population.features.begin()));
    }
    if (cols.empty()) continue;
    for (auto c : cols) grouped.insert(c);
    column_groups.push_back(std::move(cols));
  }
  for (std::size_t c = 0; c < D; ++c)
    if (!grouped.count(c)) column_groups.push_back({c});
  std::sort(column_groups.begin(), column_groups.end());

  ChoiceDataset out = empty_like(population);
  out.w.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(D));
  out.x.assign(n, Eigen::MatrixXd(J, K));
  out.choice.assign(n, 0);
  Rng rng(seed);
  for (std::size_t i = 0; i < n; ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    for (const auto& g : column_groups) {
      const auto from = static_cast<Eigen::Index>(rng.index(src));
      for (auto c : g) out.w(r, static_cast<Eigen::Index>(c)) = population.w(from, static_cast<Eigen::Index>(c));
    }
    for (Eigen::Index j = 0; j < J; ++j)
      for (Eigen::Index k = 0; k < K; ++k) out.x[i](j, k) = population.x[rng.index(src)](j, k);
  }
  return out;
}

LinearCoefficients LinearDgp::truth() const {
  // free order: alpha_1, alpha_2, beta_1, beta_2
  Eigen::VectorXd a(4);
  a << 0.5, -0.5, -1.0, -2.0;
  Eigen::MatrixXd b(4, 2);
  b << 0.5, 0.0,
       0.0, 1.0,
       0.5, -0.5,
       0.8, 0.4;
  return LinearCoefficients(a, b, 3, 2);
}

Eigen::VectorXd LinearDgp::theta() const {
  const LinearCoefficients t = truth();
  Eigen::Vector2d mean_w(1.0, 0.5);
  const Eigen::VectorXd free = t.intercept() + t.slope() * mean_w;
  return free.tail(2);
}

ChoiceDataset LinearDgp::draw(std::uint64_t seed) const {
  ChoiceDataset d;
  d.alternatives = {"a1", "a2", "a3"};
  d.attributes = {"x1", "x2"};
  d.features = feature_names();
  d.reference = 2;
  d.w.resize(static_cast<Eigen::Index>(n), 2);
  d.x.assign(n, Eigen::MatrixXd(3, 2));
  d.choice.assign(n, 0);
  Rng rng(derive_seed(seed, 0));
  for (std::size_t i = 0; i < n; ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    d.w(r, 0) = rng.uniform(0.0, 2.0);
    d.w(r, 1) = rng.uniform() < 0.5 ? 1.0 : 0.0;
    for (Eigen::Index j = 0; j < 3; ++j)
      for (Eigen::Index k = 0; k < 2; ++k) d.x[i](j, k) = rng.uniform(0.0, 2.0);
  }
  simulate_choices(d, truth(), derive_seed(seed, 1));
  return d;
}

}  // namespace hetlogit
