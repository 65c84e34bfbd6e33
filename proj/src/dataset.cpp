#include "hetlogit/dataset.hpp"

#include <algorithm>
#include <cmath>

#include "hetlogit/errors.hpp"

namespace hetlogit {

Observation Observation::from_one_hot(const Eigen::VectorXd& y, Eigen::MatrixXd x, Eigen::VectorXd w) {
  int chosen = -1;
  for (Eigen::Index j = 0; j < y.size(); ++j) {
    if (y[j] == 1.0) {
      if (chosen >= 0) throw InputError("outcome vector has more than one chosen alternative");
      chosen = static_cast<int>(j);
    } else if (y[j] != 0.0) {
      throw InputError("outcome vector entries must be 0 or 1");
    }
  }
  if (chosen < 0) throw InputError("outcome vector has no chosen alternative");
  if (y.size() != x.rows()) throw InputError("outcome length differs from number of alternatives");
  Observation obs{chosen, std::move(x), std::move(w)};
  obs.validate();
  return obs;
}

Eigen::VectorXd Observation::one_hot() const {
  Eigen::VectorXd y = Eigen::VectorXd::Zero(x.rows());
  y[choice] = 1.0;
  return y;
}

void Observation::validate() const {
  if (choice < 0 || choice >= x.rows()) throw InputError("chosen alternative out of range");
  if (!x.allFinite() || !w.allFinite()) throw InputError("observation contains non-finite values");
}

Observation ChoiceDataset::observation(std::size_t i) const {
  return Observation{choice[i], x[i], w_row(i)};
}

ChoiceDataset ChoiceDataset::subset(std::span<const std::size_t> ids) const {
  ChoiceDataset out = empty_like(*this);
  out.choice.reserve(ids.size());
  out.x.reserve(ids.size());
  out.w.resize(static_cast<Eigen::Index>(ids.size()), w.cols());
  for (std::size_t r = 0; r < ids.size(); ++r) {
    const std::size_t i = ids[r];
    if (i >= size()) throw InputError("subset index out of range");
    out.choice.push_back(choice[i]);
    out.x.push_back(x[i]);
    out.w.row(static_cast<Eigen::Index>(r)) = w.row(static_cast<Eigen::Index>(i));
  }
  return out;
}

ChoiceDataset ChoiceDataset::with_features(const std::vector<std::string>& names) const {
  ChoiceDataset out = *this;
  out.features = names;
  out.w.resize(w.rows(), static_cast<Eigen::Index>(names.size()));
  for (std::size_t c = 0; c < names.size(); ++c)
    out.w.col(static_cast<Eigen::Index>(c)) = w.col(static_cast<Eigen::Index>(feature_index(names[c])));
  return out;
}

std::size_t ChoiceDataset::feature_index(const std::string& name) const {
  const auto it = std::find(features.begin(), features.end(), name);
  if (it == features.end()) throw InputError("unknown socio-demographic feature '" + name + "'");
  return static_cast<std::size_t>(it - features.begin());
}

std::size_t ChoiceDataset::attribute_index(const std::string& name) const {
  const auto it = std::find(attributes.begin(), attributes.end(), name);
  if (it == attributes.end()) throw InputError("unknown attribute '" + name + "'");
  return static_cast<std::size_t>(it - attributes.begin());
}

void ChoiceDataset::validate() const {
  const auto J = static_cast<Eigen::Index>(num_alternatives());
  const auto K = static_cast<Eigen::Index>(num_attributes());
  if (J < 2) throw InputError("need at least two alternatives");
  if (reference >= num_alternatives()) throw InputError("reference alternative out of range");
  if (x.size() != size()) throw InputError("attribute matrices and outcomes differ in count");
  if (static_cast<std::size_t>(w.rows()) != size() ||
      static_cast<std::size_t>(w.cols()) != num_features())
    throw InputError("socio-demographic matrix has wrong shape");
  if (!w.allFinite()) throw InputError("socio-demographics contain non-finite values");
  for (std::size_t i = 0; i < size(); ++i) {
    if (x[i].rows() != J || x[i].cols() != K) throw InputError("attribute matrix has wrong shape");
    if (!x[i].allFinite()) throw InputError("attributes contain non-finite values");
    if (choice[i] < 0 || choice[i] >= J) throw InputError("chosen alternative out of range");
  }
}

ChoiceDataset empty_like(const ChoiceDataset& like) {
  ChoiceDataset out;
  out.alternatives = like.alternatives;
  out.attributes = like.attributes;
  out.features = like.features;
  out.reference = like.reference;
  out.w.resize(0, like.w.cols());
  return out;
}

}  // namespace hetlogit
