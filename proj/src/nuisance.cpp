#include "hetlogit/nuisance.hpp"

#include <cmath>
#include <limits>
#include <ostream>

#include "hetlogit/choice.hpp"
#include "hetlogit/errors.hpp"

namespace hetlogit {

nn::NetworkSpec default_lambda_spec(std::size_t num_features, std::size_t free_length) {
  nn::NetworkSpec spec;
  spec.input_dim = num_features;
  spec.hidden_widths = {100};
  spec.output_dim = packed_length(free_length);
  spec.dropout_rate = 0.0;
  return spec;
}

Eigen::MatrixXd hessian_targets(const ChoiceDataset& data, const DeltaModel& delta_model) {
  const std::size_t L = delta_model.free_length();
  Eigen::MatrixXd targets(static_cast<Eigen::Index>(data.size()), static_cast<Eigen::Index>(packed_length(L)));
  if (data.empty()) return targets;
  const Eigen::MatrixXd free = predict_delta_free(delta_model, data.w);
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    const Eigen::VectorXd f = free.row(r).transpose();
    const auto delta = CoefficientBundle::from_free(f, data.num_alternatives(), data.reference);
    targets.row(r) = pack_upper(hessian_target(data.x[i], delta)).transpose();
  }
  return targets;
}

LambdaModel fit_lambda(const ChoiceDataset& data_piece, const DeltaModel& delta_model, const nn::NetworkSpec& spec,
                       double l2_penalty, double diag_ridge) {
  if (data_piece.empty()) throw InputError("cannot fit the Hessian network on an empty sample");
  if (!(diag_ridge >= 0.0)) throw ConfigError("diagonal ridge must be >= 0");
  LambdaModel model;
  model.free_length = delta_model.free_length();
  model.spec = spec;
  model.spec.dropout_rate = 0.0;
  model.spec.l2_penalty = l2_penalty;
  model.l2_penalty = l2_penalty;
  model.diag_ridge = diag_ridge;
  model.features = data_piece.features;
  if (model.spec.output_dim != packed_length(model.free_length))
    throw ConfigError("Hessian network output width must equal L(L+1)/2");
  const Eigen::MatrixXd targets = hessian_targets(data_piece, delta_model);
  const nn::SquaredErrorLoss loss(targets);
  model.net = nn::fit(model.spec, data_piece.w, loss);
  return model;
}

Eigen::MatrixXd predict_lambda(const LambdaModel& model, const Eigen::VectorXd& w) {
  const Eigen::MatrixXd out = nn::forward(model.spec, model.net, w.transpose());
  return unpack_upper(out.row(0).transpose());
}

LambdaInverse safeguarded_inverse(const Eigen::MatrixXd& lambda, double ridge) {
  Eigen::MatrixXd m = lambda;
  if (ridge > 0.0) m.diagonal().array() += ridge;
  LambdaInverse out;
  if (!m.allFinite()) {
    out.inverse = Eigen::MatrixXd::Constant(m.rows(), m.cols(), std::numeric_limits<double>::quiet_NaN());
    out.min_eigenvalue = std::numeric_limits<double>::quiet_NaN();
    out.condition = std::numeric_limits<double>::infinity();
    out.rescued = true;
    return out;
  }
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(m);
  const Eigen::VectorXd& values = eig.eigenvalues();
  const Eigen::MatrixXd& vectors = eig.eigenvectors();
  const double largest = values.cwiseAbs().maxCoeff();
  const double smallest = values.cwiseAbs().minCoeff();
  out.min_eigenvalue = values.minCoeff();
  out.condition = smallest > 0.0 ? largest / smallest : std::numeric_limits<double>::infinity();
  const double threshold = 1e-12 * largest;
  Eigen::VectorXd inv_values(values.size());
  for (Eigen::Index i = 0; i < values.size(); ++i) {
    if (std::abs(values[i]) <= threshold || largest == 0.0) {
      inv_values[i] = 0.0;
      out.rescued = true;
    } else {
      inv_values[i] = 1.0 / values[i];
    }
  }
  out.inverse = vectors * inv_values.asDiagonal() * vectors.transpose();
  out.inverse = 0.5 * (out.inverse + out.inverse.transpose());
  return out;
}

LambdaInverse predict_lambda_inverse(const LambdaModel& model, const Eigen::VectorXd& w) {
  return safeguarded_inverse(predict_lambda(model, w), model.diag_ridge);
}

double mse_lambda(const LambdaModel& model, const ChoiceDataset& data_piece, const DeltaModel& delta_model) {
  if (data_piece.empty()) return std::numeric_limits<double>::quiet_NaN();
  const Eigen::MatrixXd targets = hessian_targets(data_piece, delta_model);
  const Eigen::MatrixXd pred = nn::forward(model.spec, model.net, data_piece.w);
  return (pred - targets).array().square().mean();
}

void write_lambda_diagnostics(std::ostream& out, const LambdaModel& model, const ChoiceDataset& data) {
  const auto old_precision = out.precision(17);
  out << "obs_id,min_eig,cond,rescued\n";
  for (std::size_t i = 0; i < data.size(); ++i) {
    const LambdaInverse inv = predict_lambda_inverse(model, data.w_row(i));
    out << i << ',' << inv.min_eigenvalue << ',' << inv.condition << ',' << (inv.rescued ? 1 : 0) << '\n';
  }
  out.precision(old_precision);
}

}  // namespace hetlogit
