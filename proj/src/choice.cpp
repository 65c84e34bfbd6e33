#include "hetlogit/choice.hpp"

#include <array>
#include <cmath>
#include <limits>

#include "hetlogit/errors.hpp"

namespace hetlogit {

namespace {

constexpr std::size_t kMaxAlternatives = 64;

// Free-vector slot of alternative j's intercept, or -1 for the reference.
inline long alpha_slot(std::size_t j, std::size_t reference) {
  if (j == reference) return -1;
  return static_cast<long>(j < reference ? j : j - 1);
}

}  // namespace

CoefficientBundle CoefficientBundle::zeros(std::size_t J, std::size_t K, std::size_t reference) {
  if (reference >= J) throw InputError("reference alternative out of range");
  return CoefficientBundle{Eigen::VectorXd::Zero(static_cast<Eigen::Index>(J)),
                           Eigen::VectorXd::Zero(static_cast<Eigen::Index>(K)), reference};
}

CoefficientBundle CoefficientBundle::from_free(std::span<const double> free, std::size_t J,
                                               std::size_t reference) {
  if (J < 1 || reference >= J) throw InputError("reference alternative out of range");
  if (free.size() < J - 1) throw InputError("free coefficient vector too short");
  const std::size_t K = free.size() - (J - 1);
  CoefficientBundle b = zeros(J, K, reference);
  for (std::size_t j = 0; j < J; ++j) {
    const long s = alpha_slot(j, reference);
    if (s >= 0) b.alphas[static_cast<Eigen::Index>(j)] = free[static_cast<std::size_t>(s)];
  }
  for (std::size_t k = 0; k < K; ++k) b.betas[static_cast<Eigen::Index>(k)] = free[J - 1 + k];
  return b;
}

CoefficientBundle CoefficientBundle::from_free(const Eigen::VectorXd& free, std::size_t J,
                                               std::size_t reference) {
  return from_free(std::span<const double>(free.data(), static_cast<std::size_t>(free.size())), J,
                   reference);
}

Eigen::VectorXd CoefficientBundle::free() const {
  const std::size_t J = num_alternatives();
  Eigen::VectorXd out(static_cast<Eigen::Index>(free_length()));
  for (std::size_t j = 0; j < J; ++j) {
    const long s = alpha_slot(j, reference);
    if (s >= 0) out[s] = alphas[static_cast<Eigen::Index>(j)];
  }
  out.tail(betas.size()) = betas;
  return out;
}

Eigen::MatrixXd utility_jacobian(const Eigen::MatrixXd& x, std::size_t reference) {
  const auto J = x.rows();
  const auto K = x.cols();
  Eigen::MatrixXd T = Eigen::MatrixXd::Zero(J - 1 + K, J);
  for (Eigen::Index j = 0; j < J; ++j) {
    const long s = alpha_slot(static_cast<std::size_t>(j), reference);
    if (s >= 0) T(s, j) = 1.0;
    T.col(j).tail(K) = x.row(j).transpose();
  }
  return T;
}

Eigen::VectorXd utilities(const CoefficientBundle& delta, const Eigen::MatrixXd& x) {
  if (x.rows() != delta.alphas.size() || x.cols() != delta.betas.size())
    throw InputError("attribute matrix shape does not match coefficients");
  Eigen::VectorXd v = delta.alphas + x * delta.betas;
  if (!v.allFinite()) throw InputError("non-finite utility");
  return v;
}

Eigen::VectorXd log_choice_probabilities(const CoefficientBundle& delta, const Eigen::MatrixXd& x) {
  const Eigen::VectorXd v = utilities(delta, x);
  const double m = v.maxCoeff();
  const double lse = m + std::log((v.array() - m).exp().sum());
  return v.array() - lse;
}

Eigen::VectorXd choice_probabilities(const CoefficientBundle& delta, const Eigen::MatrixXd& x) {
  const Eigen::VectorXd v = utilities(delta, x);
  Eigen::VectorXd e = (v.array() - v.maxCoeff()).exp();
  return e / e.sum();
}

double log_likelihood(int choice, const Eigen::MatrixXd& x, const CoefficientBundle& delta) {
  if (choice < 0 || choice >= x.rows()) throw InputError("chosen alternative out of range");
  return log_choice_probabilities(delta, x)[choice];
}

double log_likelihood(const Observation& obs, const CoefficientBundle& delta) {
  obs.validate();
  return log_likelihood(obs.choice, obs.x, delta);
}

Eigen::VectorXd score(int choice, const Eigen::MatrixXd& x, const CoefficientBundle& delta) {
  if (choice < 0 || choice >= x.rows()) throw InputError("chosen alternative out of range");
  Eigen::VectorXd residual = -choice_probabilities(delta, x);
  residual[choice] += 1.0;
  return -(utility_jacobian(x, delta.reference) * residual);
}

Eigen::VectorXd score(const Observation& obs, const CoefficientBundle& delta) {
  obs.validate();
  return score(obs.choice, obs.x, delta);
}

Eigen::MatrixXd hessian_target(const Eigen::MatrixXd& x, const CoefficientBundle& delta) {
  const Eigen::VectorXd p = choice_probabilities(delta, x);
  const Eigen::MatrixXd T = utility_jacobian(x, delta.reference);
  Eigen::MatrixXd G = -p * p.transpose();
  G.diagonal() += p;
  Eigen::MatrixXd z = T * G * T.transpose();
  // Exact symmetry regardless of summation order.
  return 0.5 * (z + z.transpose());
}

std::size_t packed_length(std::size_t L) { return L * (L + 1) / 2; }

Eigen::VectorXd pack_upper(const Eigen::MatrixXd& z) {
  if (z.rows() != z.cols()) throw InputError("pack_upper needs a square matrix");
  const auto L = z.rows();
  Eigen::VectorXd out(static_cast<Eigen::Index>(packed_length(static_cast<std::size_t>(L))));
  Eigen::Index k = 0;
  for (Eigen::Index r = 0; r < L; ++r)
    for (Eigen::Index c = r; c < L; ++c) out[k++] = z(r, c);
  return out;
}

Eigen::MatrixXd unpack_upper(const Eigen::VectorXd& packed) {
  const auto n = static_cast<std::size_t>(packed.size());
  std::size_t L = 0;
  while (packed_length(L) < n) ++L;
  if (packed_length(L) != n) throw InputError("packed length is not a triangular number");
  Eigen::MatrixXd z(static_cast<Eigen::Index>(L), static_cast<Eigen::Index>(L));
  Eigen::Index k = 0;
  for (Eigen::Index r = 0; r < z.rows(); ++r)
    for (Eigen::Index c = r; c < z.cols(); ++c) {
      z(r, c) = packed[k];
      z(c, r) = packed[k];
      ++k;
    }
  return z;
}

double negative_log_likelihood_and_score(const Eigen::MatrixXd& x, int choice, std::size_t reference,
                                         const double* free, double* score_out) {
  const auto J = static_cast<std::size_t>(x.rows());
  const auto K = static_cast<std::size_t>(x.cols());
  if (J > kMaxAlternatives) throw InputError("too many alternatives");
  const double* beta = free + (J - 1);
  std::array<double, kMaxAlternatives> v{};
  double vmax = -std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < J; ++j) {
    const long s = alpha_slot(j, reference);
    double u = s >= 0 ? free[s] : 0.0;
    for (std::size_t k = 0; k < K; ++k) u += x(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(k)) * beta[k];
    v[j] = u;
    if (u > vmax) vmax = u;
  }
  const double chosen_shifted = v[static_cast<std::size_t>(choice)] - vmax;
  double denom = 0.0;
  for (std::size_t j = 0; j < J; ++j) {
    v[j] = std::exp(v[j] - vmax);
    denom += v[j];
  }
  // v now holds unnormalized probabilities.
  const std::size_t L = J - 1 + K;
  for (std::size_t l = 0; l < L; ++l) score_out[l] = 0.0;
  for (std::size_t j = 0; j < J; ++j) {
    const double p = v[j] / denom;
    const double r = p - (static_cast<int>(j) == choice ? 1.0 : 0.0);  // -(y - p)
    const long s = alpha_slot(j, reference);
    if (s >= 0) score_out[s] += r;
    for (std::size_t k = 0; k < K; ++k)
      score_out[J - 1 + k] += r * x(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(k));
  }
  return std::log(denom) - chosen_shifted;
}

}  // namespace hetlogit
