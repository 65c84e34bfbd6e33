#ifndef HETLOGIT_STRUCTURED_HPP
#define HETLOGIT_STRUCTURED_HPP

#include <cstddef>
#include <iosfwd>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "hetlogit/choice.hpp"
#include "hetlogit/dataset.hpp"
#include "hetlogit/nn.hpp"

namespace hetlogit {

// Network mapping socio-demographics w to the free coefficients delta(w). The
// alternative attributes never enter the network; they only meet its outputs in
// the conditional-logit loss.
struct DeltaModel {
  nn::NetworkSpec spec;
  nn::NetworkParams net;
  std::size_t num_alternatives = 0;
  std::size_t num_attributes = 0;
  std::size_t reference = 0;
  std::vector<std::string> features;
  // Optional affine input transform (w - shift) / scale; identity by default.
  Eigen::VectorXd input_shift;
  Eigen::VectorXd input_scale;

  std::size_t free_length() const { return num_alternatives - 1 + num_attributes; }
  // Applies the input transform to an N x D matrix.
  Eigen::MatrixXd transform_inputs(const Eigen::MatrixXd& w) const;
};

// Loss adapter for the model layer: mean of -log p_choice over the batch, with
// the per-row gradient w.r.t. the network outputs given by choice score().
class LogitModelLayer final : public nn::LossAdapter {
 public:
  explicit LogitModelLayer(const ChoiceDataset& data) : data_(data) {}
  double evaluate(std::span<const std::size_t> rows, const Eigen::MatrixXd& outputs,
                  Eigen::MatrixXd* grad) const override;

 private:
  const ChoiceDataset& data_;
};

struct DeltaFitOptions {
  bool standardize_inputs = false;
};

// The parameter-layer network spec used for delta(w): one hidden layer of 100
// relu units, dropout 0.2, batch 50, up to 20000 epochs.
nn::NetworkSpec default_delta_spec(std::size_t num_features, std::size_t free_length);

DeltaModel fit_delta(const ChoiceDataset& data, const nn::NetworkSpec& spec, const DeltaFitOptions& options = {});

// Wraps already-trained parameters (for tests and model loading).
DeltaModel make_delta_model(const ChoiceDataset& like, const nn::NetworkSpec& spec, nn::NetworkParams net);

CoefficientBundle predict_delta(const DeltaModel& model, const Eigen::VectorXd& w);
// Free coefficient vectors, one row per row of `w`.
Eigen::MatrixXd predict_delta_free(const DeltaModel& model, const Eigen::MatrixXd& w);

// Mean per-observation log-likelihood of the fitted delta(w) on `data`.
double mean_log_likelihood(const DeltaModel& model, const ChoiceDataset& data);

// Text format: header line, metadata, then each layer's weights (row-major) and bias.
void save_delta_model(std::ostream& out, const DeltaModel& model);
DeltaModel load_delta_model(std::istream& in);

}  // namespace hetlogit

#endif  // HETLOGIT_STRUCTURED_HPP
