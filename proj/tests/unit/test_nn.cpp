#include <doctest.h>

#include <cmath>
#include <sstream>
#include <vector>

#include "hetlogit/errors.hpp"
#include "hetlogit/nn.hpp"
#include "hetlogit/random.hpp"
#include "helpers.hpp"

using namespace hetlogit;

namespace {

nn::NetworkSpec small_spec(std::size_t in, std::vector<std::size_t> hidden, std::size_t out) {
  nn::NetworkSpec s;
  s.input_dim = in;
  s.hidden_widths = std::move(hidden);
  s.output_dim = out;
  s.seed = 7;
  return s;
}

std::vector<std::size_t> all_rows(std::size_t n) {
  std::vector<std::size_t> r(n);
  for (std::size_t i = 0; i < n; ++i) r[i] = i;
  return r;
}

}  // namespace

TEST_CASE("defaults follow the standard architecture") {
  const nn::NetworkSpec s;
  CHECK(s.hidden_widths == std::vector<std::size_t>{100});
  CHECK(s.max_epochs == 20000);
  CHECK(s.batch_size == 50);
  CHECK(s.loss_tolerance == 1e-8);
  CHECK(s.patience == 100);
  CHECK(s.learning_rate == 1e-3);
}

TEST_CASE("invalid specs are configuration errors") {
  auto s = small_spec(2, {4}, 1);
  s.dropout_rate = 1.0;
  CHECK_THROWS_AS(s.validate(), ConfigError);
  s = small_spec(0, {4}, 1);
  CHECK_THROWS_AS(init_network(s), ConfigError);
  s = small_spec(2, {0}, 1);
  CHECK_THROWS_AS(s.validate(), ConfigError);
  s = small_spec(2, {4}, 1);
  s.batch_size = 0;
  CHECK_THROWS_AS(s.validate(), ConfigError);
  s = small_spec(2, {4}, 1);
  s.l2_penalty = -1.0;
  CHECK_THROWS_AS(s.validate(), ConfigError);
}

TEST_CASE("initialisation is seeded and shaped by the spec") {
  const auto s = small_spec(6, {100}, 5);
  const auto a = nn::init_network(s);
  const auto b = nn::init_network(s);
  REQUIRE(a.layers.size() == 2);
  CHECK(a.layers[0].weights.rows() == 6);
  CHECK(a.layers[0].weights.cols() == 100);
  CHECK(a.layers[1].weights.rows() == 100);
  CHECK(a.layers[1].weights.cols() == 5);
  CHECK(a.layers[0].bias.isZero());
  CHECK(a.layers[0].weights == b.layers[0].weights);
  CHECK(a.layers[1].weights == b.layers[1].weights);
  CHECK(a.layers[0].weights.cwiseAbs().maxCoeff() <= std::sqrt(6.0 / 6.0));
  CHECK(a.layers[1].weights.cwiseAbs().maxCoeff() <= std::sqrt(3.0 / 100.0));
}

TEST_CASE("no hidden layers gives an affine map") {
  const auto s = small_spec(3, {}, 2);
  auto p = nn::init_network(s);
  p.layers[0].bias = Eigen::Vector2d(0.5, -1.0);
  Rng rng(1);
  const Eigen::MatrixXd in = test::random_matrix(rng, 4, 3, 1.0);
  const Eigen::MatrixXd expected = (in * p.layers[0].weights).rowwise() + p.layers[0].bias.transpose();
  CHECK((nn::forward(s, p, in) - expected).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("zero parameters output zeros and the identity layer passes inputs through") {
  auto s = small_spec(3, {5}, 2);
  auto p = nn::init_network(s);
  for (auto& l : p.layers) l.weights.setZero();
  Rng rng(1);
  const Eigen::MatrixXd in = test::random_matrix(rng, 4, 3, 1.0);
  CHECK(nn::forward(s, p, in).isZero());

  s = small_spec(3, {}, 3);
  p = nn::init_network(s);
  p.layers[0].weights = Eigen::MatrixXd::Identity(3, 3);
  CHECK(nn::forward(s, p, in) == in);
}

TEST_CASE("input width mismatch is an input error") {
  const auto s = small_spec(3, {4}, 1);
  const auto p = nn::init_network(s);
  CHECK_THROWS_AS(nn::forward(s, p, Eigen::MatrixXd::Zero(2, 2)), InputError);
}

TEST_CASE("train and eval mode agree without dropout") {
  const auto s = small_spec(3, {8}, 2);
  const auto p = nn::init_network(s);
  Rng rng(4), drop(9);
  const Eigen::MatrixXd in = test::random_matrix(rng, 5, 3, 1.0);
  CHECK(nn::forward(s, p, in, true, drop) == nn::forward(s, p, in));
}

TEST_CASE("inverted dropout is unbiased") {
  auto s = small_spec(2, {20}, 1);
  s.dropout_rate = 0.3;
  const auto p = nn::init_network(s);
  const Eigen::MatrixXd in = (Eigen::MatrixXd(1, 2) << 0.7, -0.4).finished();
  const double eval = nn::forward(s, p, in)(0, 0);
  Rng drop(17);
  double sum = 0.0;
  const int draws = 20000;
  for (int i = 0; i < draws; ++i) sum += nn::forward(s, p, in, true, drop)(0, 0);
  CHECK(std::abs(sum / draws - eval) < 0.02 * std::abs(eval));
}

TEST_CASE("analytic gradients match finite differences") {
  Rng rng(12);
  double worst = 0.0;
  for (int rep = 0; rep < 10; ++rep) {
    const auto in_dim = 1 + rng.index(4);
    const auto out_dim = 1 + rng.index(3);
    auto s = small_spec(in_dim, {1 + rng.index(8)}, out_dim);
    s.l2_penalty = 0.01;
    s.seed = rep;
    auto p = nn::init_network(s);
    for (auto& l : p.layers) l.bias = test::random_vector(rng, static_cast<std::size_t>(l.bias.size()), 0.5);
    const std::size_t n = 1 + rng.index(4);
    const Eigen::MatrixXd in = test::random_matrix(rng, n, in_dim, 1.0);
    const Eigen::MatrixXd target = test::random_matrix(rng, n, out_dim, 1.0);
    const nn::SquaredErrorLoss loss(target);
    const auto rows = all_rows(n);
    nn::Gradients g;
    nn::loss_and_gradient(s, p, in, rows, loss, &g);
    const double h = 1e-6;
    for (std::size_t l = 0; l < p.layers.size(); ++l) {
      auto& w = p.layers[l].weights;
      for (Eigen::Index i = 0; i < w.size(); ++i) {
        const double keep = w.data()[i];
        w.data()[i] = keep + h;
        const double up = nn::loss_and_gradient(s, p, in, rows, loss, nullptr);
        w.data()[i] = keep - h;
        const double dn = nn::loss_and_gradient(s, p, in, rows, loss, nullptr);
        w.data()[i] = keep;
        worst = std::max(worst, test::rel_err(g.weights[l].data()[i], (up - dn) / (2 * h)));
      }
      auto& b = p.layers[l].bias;
      for (Eigen::Index i = 0; i < b.size(); ++i) {
        const double keep = b(i);
        b(i) = keep + h;
        const double up = nn::loss_and_gradient(s, p, in, rows, loss, nullptr);
        b(i) = keep - h;
        const double dn = nn::loss_and_gradient(s, p, in, rows, loss, nullptr);
        b(i) = keep;
        worst = std::max(worst, test::rel_err(g.bias[l](i), (up - dn) / (2 * h)));
      }
    }
  }
  CHECK(worst < 1e-5);
}

TEST_CASE("reported loss is data loss plus the weight penalty") {
  auto s = small_spec(2, {5}, 1);
  s.l2_penalty = 0.37;
  const auto p = nn::init_network(s);
  Rng rng(3);
  const Eigen::MatrixXd in = test::random_matrix(rng, 6, 2, 1.0);
  const Eigen::MatrixXd target = test::random_matrix(rng, 6, 1, 1.0);
  const nn::SquaredErrorLoss loss(target);
  const Eigen::MatrixXd out = nn::forward(s, p, in);
  const auto rows = all_rows(6);
  const double data_loss = loss.evaluate(rows, out, nullptr);
  CHECK(std::abs(nn::evaluate_loss(s, p, in, loss) - (data_loss + 0.37 * p.weight_squared_norm())) < 1e-12);
}

TEST_CASE("linear network recovers a least-squares slope") {
  auto s = small_spec(1, {}, 1);
  s.max_epochs = 3000;
  s.batch_size = 20;
  s.learning_rate = 0.01;
  Rng rng(5);
  const Eigen::MatrixXd x = test::random_matrix(rng, 200, 1, 1.0);
  const Eigen::MatrixXd y = 2.0 * x;
  const nn::SquaredErrorLoss loss(y);
  const auto p = nn::fit(s, x, loss);
  CHECK(std::abs(p.layers[0].weights(0, 0) - 2.0) < 1e-3);
}

TEST_CASE("weight norm shrinks as the penalty grows") {
  Rng rng(6);
  const Eigen::MatrixXd x = test::random_matrix(rng, 100, 2, 1.0);
  Eigen::MatrixXd y(100, 1);
  y.col(0) = 1.5 * x.col(0) - 0.5 * x.col(1);
  const nn::SquaredErrorLoss loss(y);
  double previous = std::numeric_limits<double>::infinity();
  for (double l2 : {0.0, 1e-2, 1e-1, 1.0, 10.0}) {
    auto s = small_spec(2, {}, 1);
    s.l2_penalty = l2;
    s.max_epochs = 4000;
    s.batch_size = 100;
    s.learning_rate = 0.005;
    const auto p = nn::fit(s, x, loss);
    const double norm = p.weight_squared_norm();
    CHECK(norm < previous);
    previous = norm;
  }
}

TEST_CASE("early stopping on a flat loss keeps the first epoch") {
  // Zero targets and zero weights: the loss is exactly zero from the start.
  auto s = small_spec(2, {3}, 1);
  s.patience = 5;
  s.max_epochs = 1000;
  auto p0 = nn::init_network(s);
  for (auto& l : p0.layers) l.weights.setZero();
  const Eigen::MatrixXd x = Eigen::MatrixXd::Ones(10, 2);
  const Eigen::MatrixXd y = Eigen::MatrixXd::Zero(10, 1);
  const nn::SquaredErrorLoss loss(y);
  const auto p = nn::fit(s, x, loss, p0);
  CHECK(p.trace.size() == 6);
  CHECK(p.best_epoch == 1);
}

TEST_CASE("returned parameters are the best epoch of the trace") {
  auto s = small_spec(2, {6}, 1);
  s.max_epochs = 60;
  s.learning_rate = 0.05;
  s.dropout_rate = 0.2;
  Rng rng(8);
  const Eigen::MatrixXd x = test::random_matrix(rng, 80, 2, 1.0);
  const Eigen::MatrixXd y = test::random_matrix(rng, 80, 1, 1.0);
  const nn::SquaredErrorLoss loss(y);
  const auto p = nn::fit(s, x, loss);
  REQUIRE(p.best_epoch >= 1);
  const double best = p.trace[p.best_epoch - 1];
  for (double v : p.trace) CHECK(best <= v);
}

TEST_CASE("fitting is deterministic for a fixed seed") {
  auto s = small_spec(2, {6}, 2);
  s.max_epochs = 30;
  s.dropout_rate = 0.2;
  Rng rng(8);
  const Eigen::MatrixXd x = test::random_matrix(rng, 64, 2, 1.0);
  const Eigen::MatrixXd y = test::random_matrix(rng, 64, 2, 1.0);
  const nn::SquaredErrorLoss loss(y);
  const auto a = nn::fit(s, x, loss);
  const auto b = nn::fit(s, x, loss);
  for (std::size_t l = 0; l < a.layers.size(); ++l) {
    CHECK(a.layers[l].weights == b.layers[l].weights);
    CHECK(a.layers[l].bias == b.layers[l].bias);
  }
  CHECK(a.trace == b.trace);
}

TEST_CASE("divergence reports the epoch") {
  auto s = small_spec(1, {}, 1);
  s.learning_rate = 1e300;
  s.max_epochs = 50;
  const Eigen::MatrixXd x = Eigen::MatrixXd::Constant(10, 1, 1e200);
  const Eigen::MatrixXd y = Eigen::MatrixXd::Constant(10, 1, 1e200);
  const nn::SquaredErrorLoss loss(y);
  CHECK_THROWS_AS(nn::fit(s, x, loss), TrainingDivergedError);
}

TEST_CASE("trace CSV has one line per epoch") {
  nn::NetworkParams p;
  p.trace = {0.5, 0.25};
  std::ostringstream out;
  nn::write_trace_csv(out, p);
  CHECK(out.str() == "epoch,loss\n1,0.5\n2,0.25\n");
}
