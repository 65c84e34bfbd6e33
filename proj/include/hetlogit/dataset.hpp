#ifndef HETLOGIT_DATASET_HPP
#define HETLOGIT_DATASET_HPP

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace hetlogit {

// One choice situation: attributes x (J x K), socio-demographics w (D), and the
// chosen alternative. The outcome is stored as an index; one_hot() restores y.
struct Observation {
  int choice = 0;
  Eigen::MatrixXd x;
  Eigen::VectorXd w;

  // Builds an observation from a one-hot outcome vector. Throws InputError
  // unless exactly one entry equals 1 and the rest 0.
  static Observation from_one_hot(const Eigen::VectorXd& y, Eigen::MatrixXd x, Eigen::VectorXd w);

  Eigen::VectorXd one_hot() const;
  void validate() const;
};

// N observations sharing alternative, attribute and feature metadata.
struct ChoiceDataset {
  std::vector<std::string> alternatives;  // J names
  std::vector<std::string> attributes;    // K names
  std::vector<std::string> features;      // D names
  std::size_t reference = 0;              // alternative whose intercept is pinned at 0

  std::vector<int> choice;       // chosen alternative per observation
  std::vector<Eigen::MatrixXd> x;  // J x K per observation
  Eigen::MatrixXd w;             // N x D

  std::size_t size() const { return choice.size(); }
  bool empty() const { return choice.empty(); }
  std::size_t num_alternatives() const { return alternatives.size(); }
  std::size_t num_attributes() const { return attributes.size(); }
  std::size_t num_features() const { return features.size(); }
  // Length of the free coefficient vector: (J - 1) intercepts plus K slopes.
  std::size_t free_length() const { return num_alternatives() - 1 + num_attributes(); }

  Observation observation(std::size_t i) const;
  Eigen::VectorXd w_row(std::size_t i) const { return w.row(static_cast<Eigen::Index>(i)).transpose(); }

  // Copy of the rows named by `ids`, in that order (duplicates allowed).
  ChoiceDataset subset(std::span<const std::size_t> ids) const;

  // Copy keeping only the named socio-demographic columns, in that order.
  ChoiceDataset with_features(const std::vector<std::string>& names) const;

  std::size_t feature_index(const std::string& name) const;
  std::size_t attribute_index(const std::string& name) const;

  // Shape and finiteness checks; throws InputError.
  void validate() const;
};

// Empty dataset sharing `like`'s metadata.
ChoiceDataset empty_like(const ChoiceDataset& like);

}  // namespace hetlogit

#endif  // HETLOGIT_DATASET_HPP
