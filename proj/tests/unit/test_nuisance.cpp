#include <doctest.h>

#include <cmath>
#include <sstream>

#include "hetlogit/choice.hpp"
#include "hetlogit/errors.hpp"
#include "hetlogit/nuisance.hpp"
#include "hetlogit/structured.hpp"
#include "helpers.hpp"

using namespace hetlogit;

namespace {

// Delta model whose prediction is the constant `free` for every w.
DeltaModel constant_delta(const ChoiceDataset& like, const Eigen::VectorXd& free) {
  auto spec = default_delta_spec(like.num_features(), like.free_length());
  spec.hidden_widths = {4};
  auto net = nn::init_network(spec);
  for (auto& layer : net.layers) layer.weights.setZero();
  net.layers.back().bias = free;
  return make_delta_model(like, spec, net);
}

nn::NetworkSpec small_lambda_spec(std::size_t D, std::size_t L, std::size_t epochs) {
  auto s = default_lambda_spec(D, L);
  s.hidden_widths = {8};
  s.max_epochs = epochs;
  s.learning_rate = 0.01;
  s.seed = 5;
  return s;
}

}  // namespace

TEST_CASE("default Hessian-network spec") {
  const auto s = default_lambda_spec(6, 5);
  CHECK(s.output_dim == 15);
  CHECK(s.dropout_rate == 0.0);
  CHECK(s.hidden_widths == std::vector<std::size_t>{100});
}

TEST_CASE("Hessian targets come from the fixed coefficient model") {
  const auto data = test::random_dataset(20, 3, 2, 2, 1);
  const Eigen::Vector4d free(0.2, -0.3, 0.5, -1.0);
  const auto delta = constant_delta(data, free);
  const Eigen::MatrixXd z = hessian_targets(data, delta);
  REQUIRE(z.rows() == 20);
  REQUIRE(z.cols() == 10);
  for (std::size_t i = 0; i < data.size(); ++i) {
    const Eigen::VectorXd expected = pack_upper(hessian_target(data.x[i], CoefficientBundle::from_free(free, 3, 2)));
    CHECK((z.row(static_cast<Eigen::Index>(i)).transpose() - expected).cwiseAbs().maxCoeff() < 1e-15);
  }
}

TEST_CASE("a constant target is learnt by the Hessian network") {
  auto data = test::random_dataset(400, 3, 2, 2, 2);
  for (auto& x : data.x) x = data.x[0];
  const auto delta = constant_delta(data, Eigen::Vector4d(0.1, 0.2, -0.4, 0.3));
  const auto model = fit_lambda(data, delta, small_lambda_spec(2, 4, 400), 0.0);
  const Eigen::MatrixXd z = hessian_target(data.x[0], predict_delta(delta, data.w_row(0)));
  CHECK(mse_lambda(model, data, delta) < 1e-6);
  CHECK((predict_lambda(model, data.w_row(3)) - z).cwiseAbs().maxCoeff() < 3e-3);
}

TEST_CASE("the spec's dropout and penalty are replaced") {
  auto data = test::random_dataset(60, 3, 2, 2, 3);
  const auto delta = constant_delta(data, Eigen::Vector4d::Zero());
  auto spec = small_lambda_spec(2, 4, 3);
  spec.dropout_rate = 0.5;
  spec.l2_penalty = 7.0;
  const auto model = fit_lambda(data, delta, spec, 1e-4, 0.25);
  CHECK(model.spec.dropout_rate == 0.0);
  CHECK(model.spec.l2_penalty == 1e-4);
  CHECK(model.l2_penalty == 1e-4);
  CHECK(model.diag_ridge == 0.25);
  CHECK(model.free_length == 4);
  CHECK_THROWS_AS(fit_lambda(data, delta, spec, 0.0, -1.0), ConfigError);
  CHECK_THROWS_AS(fit_lambda(empty_like(data), delta, spec, 0.0), InputError);
}

TEST_CASE("a heavy penalty collapses the Hessian network towards a constant") {
  auto data = test::random_dataset(300, 3, 2, 2, 4);
  // Make the targets depend on w so an unpenalised fit has to use it.
  for (std::size_t i = 0; i < data.size(); ++i) data.x[i] *= 1.0 + data.w(static_cast<Eigen::Index>(i), 0);
  const auto delta = constant_delta(data, Eigen::Vector4d(0.0, 0.0, 1.0, -1.0));
  const auto free_fit = fit_lambda(data, delta, small_lambda_spec(2, 4, 300), 0.0);
  const auto heavy_fit = fit_lambda(data, delta, small_lambda_spec(2, 4, 300), 10.0);
  CHECK(heavy_fit.net.weight_squared_norm() < 0.01 * free_fit.net.weight_squared_norm());
  const Eigen::MatrixXd a = nn::forward(heavy_fit.spec, heavy_fit.net, data.w);
  const Eigen::RowVectorXd mean = a.colwise().mean();
  const double spread = (a.rowwise() - mean).cwiseAbs().maxCoeff();
  CHECK(spread < 0.01);
}

TEST_CASE("safeguarded inverse of well-conditioned matrices") {
  const auto eye = safeguarded_inverse(Eigen::MatrixXd::Identity(4, 4), 0.0);
  CHECK((eye.inverse - Eigen::MatrixXd::Identity(4, 4)).cwiseAbs().maxCoeff() < 1e-15);
  CHECK_FALSE(eye.rescued);
  CHECK(eye.condition == doctest::Approx(1.0));

  const Eigen::MatrixXd d = Eigen::Vector3d(1.0, 2.0, 4.0).asDiagonal();
  const auto inv = safeguarded_inverse(d, 0.0);
  CHECK((inv.inverse - Eigen::MatrixXd(Eigen::Vector3d(1.0, 0.5, 0.25).asDiagonal())).cwiseAbs().maxCoeff() < 1e-15);
  CHECK(inv.min_eigenvalue == doctest::Approx(1.0));
  CHECK(inv.condition == doctest::Approx(4.0));

  const auto ridged = safeguarded_inverse(d, 1.0);
  CHECK((ridged.inverse - Eigen::MatrixXd(Eigen::Vector3d(0.5, 1.0 / 3.0, 0.2).asDiagonal())).cwiseAbs().maxCoeff() <
        1e-15);
}

TEST_CASE("safeguarded inverse does not impose positive definiteness") {
  const Eigen::MatrixXd d = Eigen::Vector2d(1.0, -2.0).asDiagonal();
  const auto inv = safeguarded_inverse(d, 0.0);
  CHECK_FALSE(inv.rescued);
  CHECK(inv.min_eigenvalue == doctest::Approx(-2.0));
  CHECK(inv.inverse(1, 1) == doctest::Approx(-0.5));
}

TEST_CASE("singular matrices fall back to the pseudo-inverse unless ridged") {
  const Eigen::Matrix2d a = (Eigen::Matrix2d() << 1.0, 1.0, 1.0, 1.0).finished();
  const auto pinv = safeguarded_inverse(a, 0.0);
  CHECK(pinv.rescued);
  CHECK((pinv.inverse - a / 4.0).cwiseAbs().maxCoeff() < 1e-14);

  const auto ridged = safeguarded_inverse(a, 0.5);
  CHECK_FALSE(ridged.rescued);
  const Eigen::Matrix2d expected = (a + 0.5 * Eigen::Matrix2d::Identity()).inverse();
  CHECK((ridged.inverse - expected).cwiseAbs().maxCoeff() < 1e-13);

  Eigen::Matrix2d bad = Eigen::Matrix2d::Identity();
  bad(0, 1) = bad(1, 0) = std::nan("");
  const auto nan_inv = safeguarded_inverse(bad, 0.0);
  CHECK(nan_inv.rescued);
  CHECK_FALSE(nan_inv.inverse.allFinite());
}

TEST_CASE("a near-singular matrix is inverted exactly when above the threshold") {
  const Eigen::MatrixXd d = Eigen::Vector2d(1.0, 1e-9).asDiagonal();
  const auto inv = safeguarded_inverse(d, 0.0);
  CHECK_FALSE(inv.rescued);
  CHECK(inv.inverse(1, 1) == doctest::Approx(1e9));
  CHECK(inv.condition == doctest::Approx(1e9));
  const Eigen::MatrixXd e = Eigen::Vector2d(1.0, 1e-13).asDiagonal();
  CHECK(safeguarded_inverse(e, 0.0).rescued);
}

TEST_CASE("MSE of a constant predictor equals the target variance") {
  const auto data = test::random_dataset(50, 3, 2, 2, 6);
  const auto delta = constant_delta(data, Eigen::Vector4d(0.3, -0.1, 0.7, -0.6));
  const Eigen::MatrixXd z = hessian_targets(data, delta);
  LambdaModel model;
  model.free_length = 4;
  model.spec = small_lambda_spec(2, 4, 1);
  model.net = nn::init_network(model.spec);
  for (auto& layer : model.net.layers) layer.weights.setZero();
  model.net.layers.back().bias = z.colwise().mean().transpose();
  const double variance = (z.rowwise() - z.colwise().mean()).array().square().mean();
  CHECK(mse_lambda(model, data, delta) == doctest::Approx(variance).epsilon(1e-12));

  const auto inv = predict_lambda_inverse(model, data.w_row(0));
  const Eigen::MatrixXd lam = unpack_upper(model.net.layers.back().bias);
  CHECK((inv.inverse * lam - Eigen::MatrixXd::Identity(4, 4)).cwiseAbs().maxCoeff() < 1e-8);

  std::ostringstream csv;
  write_lambda_diagnostics(csv, model, data.subset(std::vector<std::size_t>{0, 1}));
  CHECK(csv.str().rfind("obs_id,min_eig,cond,rescued\n0,", 0) == 0);
}
