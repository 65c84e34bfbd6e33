#ifndef HETLOGIT_NUISANCE_HPP
#define HETLOGIT_NUISANCE_HPP

#include <cstddef>
#include <iosfwd>
#include <vector>

#include <Eigen/Dense>

#include "hetlogit/dataset.hpp"
#include "hetlogit/nn.hpp"
#include "hetlogit/structured.hpp"

namespace hetlogit {

// Regularization grid examined for the Hessian network.
inline const std::vector<double> kDefaultLambdaGrid{0.0, 1e-5, 1e-4, 2e-3};

// Network predicting the packed upper triangle of the conditional expected
// Hessian Lambda(w) = E[T G T' | w].
struct LambdaModel {
  nn::NetworkSpec spec;
  nn::NetworkParams net;
  std::size_t free_length = 0;  // L
  double l2_penalty = 0.0;
  double diag_ridge = 0.0;  // constant c added to the diagonal before inversion
  std::vector<std::string> features;
};

struct LambdaInverse {
  Eigen::MatrixXd inverse;
  double min_eigenvalue = 0.0;  // of Lambda(w) + cI
  double condition = 0.0;       // max |eig| / min |eig|
  bool rescued = false;         // pseudo-inverse fallback was used
};

// Same architecture as the delta network but with L(L+1)/2 outputs and no dropout.
nn::NetworkSpec default_lambda_spec(std::size_t num_features, std::size_t free_length);

// Packed Hessian targets z_i built from the fixed coefficient model, one row per observation.
Eigen::MatrixXd hessian_targets(const ChoiceDataset& data, const DeltaModel& delta_model);

// Fits the Hessian network on `data_piece`. The spec's dropout is ignored (no
// dropout) and its l2 penalty is replaced by `l2_penalty`.
LambdaModel fit_lambda(const ChoiceDataset& data_piece, const DeltaModel& delta_model, const nn::NetworkSpec& spec,
                       double l2_penalty, double diag_ridge = 0.0);

Eigen::MatrixXd predict_lambda(const LambdaModel& model, const Eigen::VectorXd& w);

// Inverts a symmetric matrix after adding ridge * I. Eigenvalues with
// |eig| < 1e-12 * max|eig| are treated as zero and trigger a pseudo-inverse,
// flagged through `rescued`. No positive-definiteness is imposed.
LambdaInverse safeguarded_inverse(const Eigen::MatrixXd& lambda, double ridge);

LambdaInverse predict_lambda_inverse(const LambdaModel& model, const Eigen::VectorXd& w);

// Mean squared error over observations and packed entries against freshly
// computed targets.
double mse_lambda(const LambdaModel& model, const ChoiceDataset& data_piece, const DeltaModel& delta_model);

// Per-observation diagnostics CSV: obs_id,min_eig,cond,rescued.
void write_lambda_diagnostics(std::ostream& out, const LambdaModel& model, const ChoiceDataset& data);

}  // namespace hetlogit

#endif  // HETLOGIT_NUISANCE_HPP
