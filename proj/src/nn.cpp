#include "hetlogit/nn.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <ostream>

#include "hetlogit/errors.hpp"

namespace hetlogit::nn {

void NetworkSpec::validate() const {
  if (input_dim < 1 || output_dim < 1) throw ConfigError("network input and output dimensions must be >= 1");
  for (std::size_t w : hidden_widths)
    if (w < 1) throw ConfigError("hidden layer widths must be >= 1");
  if (batch_size < 1) throw ConfigError("batch size must be >= 1");
  if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) throw ConfigError("dropout rate must lie in [0, 1)");
  if (!(l2_penalty >= 0.0) || !std::isfinite(l2_penalty)) throw ConfigError("l2 penalty must be finite and >= 0");
  if (!(loss_tolerance >= 0.0)) throw ConfigError("loss tolerance must be >= 0");
  if (!(learning_rate > 0.0)) throw ConfigError("learning rate must be > 0");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0))
    throw ConfigError("Adam decay rates must lie in [0, 1)");
  if (!(epsilon > 0.0)) throw ConfigError("Adam epsilon must be > 0");
}

double NetworkParams::weight_squared_norm() const {
  double s = 0.0;
  for (const auto& l : layers) s += l.weights.squaredNorm();
  return s;
}

std::size_t NetworkParams::parameter_count() const {
  std::size_t n = 0;
  for (const auto& l : layers) n += static_cast<std::size_t>(l.weights.size() + l.bias.size());
  return n;
}

double SquaredErrorLoss::evaluate(std::span<const std::size_t> rows, const Eigen::MatrixXd& outputs,
                                  Eigen::MatrixXd* grad) const {
  const auto B = static_cast<Eigen::Index>(rows.size());
  const auto m = outputs.cols();
  if (targets_.cols() != m) throw InputError("target width differs from network output width");
  if (grad) grad->resize(B, m);
  double total = 0.0;
  const double scale = 1.0 / static_cast<double>(B * m);
  for (Eigen::Index b = 0; b < B; ++b) {
    const auto r = static_cast<Eigen::Index>(rows[static_cast<std::size_t>(b)]);
    for (Eigen::Index c = 0; c < m; ++c) {
      const double e = outputs(b, c) - targets_(r, c);
      total += e * e;
      if (grad) (*grad)(b, c) = 2.0 * e * scale;
    }
  }
  return total * scale;
}

namespace {

std::vector<std::size_t> layer_dims(const NetworkSpec& spec) {
  std::vector<std::size_t> d{spec.input_dim};
  d.insert(d.end(), spec.hidden_widths.begin(), spec.hidden_widths.end());
  d.push_back(spec.output_dim);
  return d;
}

void check_shapes(const NetworkSpec& spec, const NetworkParams& params) {
  const auto dims = layer_dims(spec);
  if (params.layers.size() + 1 != dims.size()) throw InputError("network parameters do not match spec depth");
  for (std::size_t l = 0; l < params.layers.size(); ++l) {
    const auto& L = params.layers[l];
    if (static_cast<std::size_t>(L.weights.rows()) != dims[l] ||
        static_cast<std::size_t>(L.weights.cols()) != dims[l + 1] ||
        static_cast<std::size_t>(L.bias.size()) != dims[l + 1])
      throw InputError("network layer shape does not match spec");
  }
}

struct Workspace {
  Eigen::MatrixXd inputs;
  std::vector<Eigen::MatrixXd> pre;   // pre-activations
  std::vector<Eigen::MatrixXd> act;   // activations after dropout
  std::vector<Eigen::MatrixXd> mask;  // inverted-dropout multipliers
  std::vector<bool> masked;
  Eigen::MatrixXd grad_out;
  Eigen::MatrixXd g;
  Eigen::MatrixXd g_prev;
};

inline void apply_activation(Activation a, const Eigen::MatrixXd& pre, Eigen::MatrixXd& out) {
  if (a == Activation::relu)
    out = pre.cwiseMax(0.0);
  else
    out = pre;
}

void forward_impl(const NetworkSpec& spec, const NetworkParams& p, const Eigen::MatrixXd& x, Workspace& ws,
                  Rng* rng) {
  const std::size_t nl = p.layers.size();
  ws.pre.resize(nl);
  ws.act.resize(nl);
  ws.mask.resize(nl);
  ws.masked.assign(nl, false);
  const Eigen::MatrixXd* in = &x;
  const double rate = spec.dropout_rate;
  for (std::size_t l = 0; l < nl; ++l) {
    const auto& L = p.layers[l];
    ws.pre[l].noalias() = (*in) * L.weights;
    ws.pre[l].rowwise() += L.bias.transpose();
    const bool hidden = l + 1 < nl;
    apply_activation(hidden ? spec.hidden_activation : spec.output_activation, ws.pre[l], ws.act[l]);
    if (hidden && rng != nullptr && rate > 0.0) {
      auto& m = ws.mask[l];
      m.resize(ws.act[l].rows(), ws.act[l].cols());
      const double keep_scale = 1.0 / (1.0 - rate);
      // Two 32-bit Bernoulli draws per engine call; a unit is dropped when its
      // half-word falls below rate * 2^32.
      const auto threshold = static_cast<std::uint64_t>(std::ldexp(rate, 32));
      double* out = m.data();
      const Eigen::Index total = m.size();
      Eigen::Index e = 0;
      for (; e + 1 < total; e += 2) {
        const std::uint64_t b = rng->bits();
        out[e] = keep_scale * static_cast<double>((b & 0xffffffffULL) >= threshold);
        out[e + 1] = keep_scale * static_cast<double>((b >> 32) >= threshold);
      }
      if (e < total) out[e] = keep_scale * static_cast<double>((rng->bits() & 0xffffffffULL) >= threshold);
      ws.act[l].array() *= m.array();
      ws.masked[l] = true;
    }
    in = &ws.act[l];
  }
}

void gather_rows(const Eigen::MatrixXd& inputs, std::span<const std::size_t> rows, Eigen::MatrixXd& out) {
  out.resize(static_cast<Eigen::Index>(rows.size()), inputs.cols());
  for (std::size_t b = 0; b < rows.size(); ++b) {
    if (rows[b] >= static_cast<std::size_t>(inputs.rows())) throw InputError("row index out of range");
    out.row(static_cast<Eigen::Index>(b)) = inputs.row(static_cast<Eigen::Index>(rows[b]));
  }
}

double loss_and_gradient_ws(const NetworkSpec& spec, const NetworkParams& params, const Eigen::MatrixXd& inputs,
                            std::span<const std::size_t> rows, const LossAdapter& loss, Gradients* grad,
                            Rng* dropout_rng, Workspace& ws) {
  gather_rows(inputs, rows, ws.inputs);
  forward_impl(spec, params, ws.inputs, ws, dropout_rng);
  const std::size_t nl = params.layers.size();
  const double data_loss = loss.evaluate(rows, ws.act.back(), grad ? &ws.grad_out : nullptr);
  const double penalty = spec.l2_penalty * params.weight_squared_norm();
  if (grad == nullptr) return data_loss + penalty;

  if (ws.grad_out.rows() != ws.act.back().rows() || ws.grad_out.cols() != ws.act.back().cols())
    throw InputError("loss adapter returned a gradient of the wrong shape");
  grad->weights.resize(nl);
  grad->bias.resize(nl);
  ws.g = ws.grad_out;
  if (spec.output_activation == Activation::relu)
    ws.g.array() *= (ws.pre.back().array() > 0.0).cast<double>();
  for (std::size_t l = nl; l-- > 0;) {
    const Eigen::MatrixXd& in = l == 0 ? ws.inputs : ws.act[l - 1];
    grad->weights[l].noalias() = in.transpose() * ws.g;
    if (spec.l2_penalty > 0.0) grad->weights[l] += 2.0 * spec.l2_penalty * params.layers[l].weights;
    grad->bias[l] = ws.g.colwise().sum().transpose();
    if (l > 0) {
      ws.g_prev.noalias() = ws.g * params.layers[l].weights.transpose();
      if (ws.masked[l - 1]) ws.g_prev.array() *= ws.mask[l - 1].array();
      if (spec.hidden_activation == Activation::relu)
        ws.g_prev.array() *= (ws.pre[l - 1].array() > 0.0).cast<double>();
      ws.g.swap(ws.g_prev);
    }
  }
  return data_loss + penalty;
}

bool gradients_finite(const Gradients& g) {
  for (std::size_t l = 0; l < g.weights.size(); ++l)
    if (!g.weights[l].allFinite() || !g.bias[l].allFinite()) return false;
  return true;
}

}  // namespace

NetworkParams init_network(const NetworkSpec& spec) {
  spec.validate();
  const auto dims = layer_dims(spec);
  Rng rng(derive_seed(spec.seed, 0));
  NetworkParams p;
  for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
    const bool hidden = l + 2 < dims.size();
    const bool relu = (hidden ? spec.hidden_activation : spec.output_activation) == Activation::relu;
    const double limit = std::sqrt((relu ? 6.0 : 3.0) / static_cast<double>(dims[l]));
    DenseLayer layer;
    layer.weights.resize(static_cast<Eigen::Index>(dims[l]), static_cast<Eigen::Index>(dims[l + 1]));
    for (Eigen::Index c = 0; c < layer.weights.cols(); ++c)
      for (Eigen::Index r = 0; r < layer.weights.rows(); ++r) layer.weights(r, c) = rng.uniform(-limit, limit);
    layer.bias = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(dims[l + 1]));
    p.layers.push_back(std::move(layer));
  }
  return p;
}

Eigen::MatrixXd forward(const NetworkSpec& spec, const NetworkParams& params, const Eigen::MatrixXd& inputs) {
  check_shapes(spec, params);
  if (static_cast<std::size_t>(inputs.cols()) != spec.input_dim) throw InputError("input width does not match network");
  Workspace ws;
  forward_impl(spec, params, inputs, ws, nullptr);
  return ws.act.back();
}

Eigen::MatrixXd forward(const NetworkSpec& spec, const NetworkParams& params, const Eigen::MatrixXd& inputs,
                        bool train_mode, Rng& rng) {
  check_shapes(spec, params);
  if (static_cast<std::size_t>(inputs.cols()) != spec.input_dim) throw InputError("input width does not match network");
  Workspace ws;
  forward_impl(spec, params, inputs, ws, train_mode ? &rng : nullptr);
  return ws.act.back();
}

double loss_and_gradient(const NetworkSpec& spec, const NetworkParams& params, const Eigen::MatrixXd& inputs,
                         std::span<const std::size_t> rows, const LossAdapter& loss, Gradients* grad,
                         Rng* dropout_rng) {
  check_shapes(spec, params);
  if (static_cast<std::size_t>(inputs.cols()) != spec.input_dim) throw InputError("input width does not match network");
  Workspace ws;
  return loss_and_gradient_ws(spec, params, inputs, rows, loss, grad, dropout_rng, ws);
}

double evaluate_loss(const NetworkSpec& spec, const NetworkParams& params, const Eigen::MatrixXd& inputs,
                     const LossAdapter& loss) {
  std::vector<std::size_t> rows(static_cast<std::size_t>(inputs.rows()));
  std::iota(rows.begin(), rows.end(), std::size_t{0});
  return loss_and_gradient(spec, params, inputs, rows, loss, nullptr, nullptr);
}

NetworkParams fit(const NetworkSpec& spec, const Eigen::MatrixXd& inputs, const LossAdapter& loss) {
  return fit(spec, inputs, loss, init_network(spec));
}

NetworkParams fit(const NetworkSpec& spec, const Eigen::MatrixXd& inputs, const LossAdapter& loss,
                  NetworkParams params) {
  spec.validate();
  check_shapes(spec, params);
  if (static_cast<std::size_t>(inputs.cols()) != spec.input_dim) throw InputError("input width does not match network");
  const auto N = static_cast<std::size_t>(inputs.rows());
  if (N == 0) throw InputError("cannot train on an empty sample");

  Rng shuffle_rng(derive_seed(spec.seed, 1));
  Rng dropout_rng(derive_seed(spec.seed, 2));
  std::vector<std::size_t> order(N);
  std::iota(order.begin(), order.end(), std::size_t{0});

  const std::size_t nl = params.layers.size();
  Gradients m, v, g;
  for (const auto& L : params.layers) {
    m.weights.push_back(Eigen::MatrixXd::Zero(L.weights.rows(), L.weights.cols()));
    m.bias.push_back(Eigen::VectorXd::Zero(L.bias.size()));
  }
  v = m;
  params.trace.clear();

  NetworkParams best = params;
  double best_loss = std::numeric_limits<double>::infinity();
  double previous = std::numeric_limits<double>::quiet_NaN();
  std::size_t stalled = 0;
  std::size_t step = 0;
  Workspace ws;

  for (std::size_t epoch = 1; epoch <= spec.max_epochs; ++epoch) {
    shuffle_rng.shuffle(order);
    double epoch_sum = 0.0;
    for (std::size_t start = 0; start < N; start += spec.batch_size) {
      const std::size_t count = std::min(spec.batch_size, N - start);
      const std::span<const std::size_t> rows(order.data() + start, count);
      const double batch_loss = loss_and_gradient_ws(spec, params, inputs, rows, loss, &g,
                                                     spec.dropout_rate > 0.0 ? &dropout_rng : nullptr, ws);
      if (!std::isfinite(batch_loss)) throw TrainingDivergedError(epoch, "non-finite loss");
      if (!gradients_finite(g)) throw TrainingDivergedError(epoch, "non-finite gradient");
      epoch_sum += batch_loss * static_cast<double>(count);

      ++step;
      const double t = static_cast<double>(step);
      const double c1 = 1.0 - std::pow(spec.beta1, t);
      const double c2 = 1.0 - std::pow(spec.beta2, t);
      const double lr = spec.learning_rate;
      auto update = [&](auto& theta, auto& mm, auto& vv, const auto& gg) {
        mm = spec.beta1 * mm + (1.0 - spec.beta1) * gg;
        vv = spec.beta2 * vv + (1.0 - spec.beta2) * gg.cwiseProduct(gg);
        theta.array() -= lr * (mm.array() / c1) / ((vv.array() / c2).sqrt() + spec.epsilon);
      };
      for (std::size_t l = 0; l < nl; ++l) {
        update(params.layers[l].weights, m.weights[l], v.weights[l], g.weights[l]);
        update(params.layers[l].bias, m.bias[l], v.bias[l], g.bias[l]);
      }
    }
    const double epoch_loss = epoch_sum / static_cast<double>(N);
    params.trace.push_back(epoch_loss);
    if (epoch_loss < best_loss) {
      best_loss = epoch_loss;
      best.layers = params.layers;
      best.best_epoch = epoch;
    }
    if (epoch > 1) {
      stalled = std::abs(epoch_loss - previous) < spec.loss_tolerance ? stalled + 1 : 0;
      if (stalled >= std::max<std::size_t>(spec.patience, 1)) break;
    }
    previous = epoch_loss;
  }
  best.trace = std::move(params.trace);
  return best;
}

void write_trace_csv(std::ostream& out, const NetworkParams& params) {
  const auto old_precision = out.precision(17);
  out << "epoch,loss\n";
  for (std::size_t e = 0; e < params.trace.size(); ++e) out << (e + 1) << ',' << params.trace[e] << '\n';
  out.precision(old_precision);
}

}  // namespace hetlogit::nn
