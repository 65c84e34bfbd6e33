#ifndef HETLOGIT_CHOICE_HPP
#define HETLOGIT_CHOICE_HPP

#include <cstddef>
#include <span>

#include <Eigen/Dense>

#include "hetlogit/dataset.hpp"

// Closed-form conditional-logit mathematics.
//
// Utilities are v_j = alpha_j + x_j' beta with alpha_reference == 0. The free
// parameter vector stacks the J-1 non-reference intercepts (in alternative
// order) followed by the K slopes, L = (J-1) + K. All derivatives refer to the
// per-observation loss -log p_choice, so score() is the gradient of the
// negative log-likelihood and hessian_target() its (PSD) Hessian.
namespace hetlogit {

struct CoefficientBundle {
  Eigen::VectorXd alphas;  // J entries, alphas[reference] == 0
  Eigen::VectorXd betas;   // K entries
  std::size_t reference = 0;

  static CoefficientBundle zeros(std::size_t J, std::size_t K, std::size_t reference);
  // Unpacks a free vector of length (J-1)+K.
  static CoefficientBundle from_free(std::span<const double> free, std::size_t J, std::size_t reference);
  static CoefficientBundle from_free(const Eigen::VectorXd& free, std::size_t J, std::size_t reference);

  Eigen::VectorXd free() const;
  std::size_t num_alternatives() const { return static_cast<std::size_t>(alphas.size()); }
  std::size_t num_attributes() const { return static_cast<std::size_t>(betas.size()); }
  std::size_t free_length() const { return num_alternatives() - 1 + num_attributes(); }
  // Position of slope k inside the free vector.
  std::size_t beta_slot(std::size_t k) const { return num_alternatives() - 1 + k; }
};

// L x J matrix whose column j holds d v_j / d(free parameters).
Eigen::MatrixXd utility_jacobian(const Eigen::MatrixXd& x, std::size_t reference);

Eigen::VectorXd utilities(const CoefficientBundle& delta, const Eigen::MatrixXd& x);
Eigen::VectorXd log_choice_probabilities(const CoefficientBundle& delta, const Eigen::MatrixXd& x);
Eigen::VectorXd choice_probabilities(const CoefficientBundle& delta, const Eigen::MatrixXd& x);

double log_likelihood(int choice, const Eigen::MatrixXd& x, const CoefficientBundle& delta);
double log_likelihood(const Observation& obs, const CoefficientBundle& delta);

// Gradient of -log p_choice w.r.t. the free parameters: -T (y - p).
Eigen::VectorXd score(int choice, const Eigen::MatrixXd& x, const CoefficientBundle& delta);
Eigen::VectorXd score(const Observation& obs, const CoefficientBundle& delta);

// T (diag(p) - p p') T', the Hessian of -log p_choice. Independent of the outcome.
Eigen::MatrixXd hessian_target(const Eigen::MatrixXd& x, const CoefficientBundle& delta);

// Row-major upper triangle of a symmetric L x L matrix, length L(L+1)/2.
Eigen::VectorXd pack_upper(const Eigen::MatrixXd& z);
Eigen::MatrixXd unpack_upper(const Eigen::VectorXd& packed);
std::size_t packed_length(std::size_t L);

// Allocation-free kernel used inside training loops. Writes the gradient of
// -log p_choice into `score_out` (length L) and returns -log p_choice.
double negative_log_likelihood_and_score(const Eigen::MatrixXd& x, int choice, std::size_t reference,
                                         const double* free, double* score_out);

}  // namespace hetlogit

#endif  // HETLOGIT_CHOICE_HPP
