#ifndef HETLOGIT_NN_HPP
#define HETLOGIT_NN_HPP

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "hetlogit/random.hpp"

// Dense feedforward networks with manual backpropagation.
//
// Hidden layers use relu, the output layer is linear. Dropout is applied to
// hidden activations with the inverted convention (kept units are scaled by
// 1/(1-rate) during training), so evaluation needs no rescaling. The loss is
// supplied by the caller through LossAdapter, which lets structured models put
// their own "model layer" on top of the network outputs.
namespace hetlogit::nn {

enum class Activation { relu, linear };

struct NetworkSpec {
  std::size_t input_dim = 1;
  std::vector<std::size_t> hidden_widths{100};
  std::size_t output_dim = 1;
  Activation hidden_activation = Activation::relu;
  Activation output_activation = Activation::linear;
  double dropout_rate = 0.0;
  double l2_penalty = 0.0;  // multiplies the sum of squared weights; biases are not penalized
  std::size_t max_epochs = 20000;
  std::size_t batch_size = 50;
  double loss_tolerance = 1e-8;
  std::size_t patience = 100;
  std::uint64_t seed = 0;

  // Adam settings.
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  // Throws ConfigError.
  void validate() const;
};

struct DenseLayer {
  Eigen::MatrixXd weights;  // fan_in x fan_out
  Eigen::VectorXd bias;     // fan_out
};

struct NetworkParams {
  std::vector<DenseLayer> layers;
  std::vector<double> trace;   // per-epoch in-sample training loss
  std::size_t best_epoch = 0;  // 1-based epoch whose parameters were kept; 0 before training

  double weight_squared_norm() const;
  std::size_t parameter_count() const;
};

// Caller-supplied training objective evaluated on network outputs.
class LossAdapter {
 public:
  virtual ~LossAdapter() = default;

  // Mean loss over `rows`. `outputs` holds the network outputs for those rows
  // (rows.size() x output_dim). When `grad` is non-null it receives the
  // gradient of the returned mean with respect to `outputs`.
  virtual double evaluate(std::span<const std::size_t> rows, const Eigen::MatrixXd& outputs,
                          Eigen::MatrixXd* grad) const = 0;
};

// Mean squared error averaged over rows and output entries.
class SquaredErrorLoss final : public LossAdapter {
 public:
  explicit SquaredErrorLoss(const Eigen::MatrixXd& targets) : targets_(targets) {}
  double evaluate(std::span<const std::size_t> rows, const Eigen::MatrixXd& outputs,
                  Eigen::MatrixXd* grad) const override;

 private:
  const Eigen::MatrixXd& targets_;
};

// He-uniform weights (limit sqrt(6 / fan_in)) for relu layers, LeCun-uniform
// (limit sqrt(3 / fan_in)) for the linear output layer; zero biases.
NetworkParams init_network(const NetworkSpec& spec);

// Evaluation-mode forward pass; deterministic.
Eigen::MatrixXd forward(const NetworkSpec& spec, const NetworkParams& params, const Eigen::MatrixXd& inputs);

// Forward pass with `train_mode`; dropout masks are drawn from `rng` only when
// train_mode is set and the spec has a positive dropout rate.
Eigen::MatrixXd forward(const NetworkSpec& spec, const NetworkParams& params, const Eigen::MatrixXd& inputs,
                        bool train_mode, Rng& rng);

struct Gradients {
  std::vector<Eigen::MatrixXd> weights;
  std::vector<Eigen::VectorXd> bias;
};

// Loss (data loss over `rows` plus l2 penalty) and its gradient w.r.t. every
// parameter. Dropout is applied when `dropout_rng` is non-null.
double loss_and_gradient(const NetworkSpec& spec, const NetworkParams& params, const Eigen::MatrixXd& inputs,
                         std::span<const std::size_t> rows, const LossAdapter& loss, Gradients* grad,
                         Rng* dropout_rng = nullptr);

// Full-sample evaluation-mode loss including the l2 penalty.
double evaluate_loss(const NetworkSpec& spec, const NetworkParams& params, const Eigen::MatrixXd& inputs,
                     const LossAdapter& loss);

// Mini-batch Adam training with early stopping. Stops at max_epochs or once
// the absolute change between consecutive epoch-average losses stays below
// loss_tolerance for `patience` consecutive epochs. Returns the parameters of
// the epoch with the lowest epoch-average loss. Throws TrainingDivergedError
// on non-finite loss or gradient.
NetworkParams fit(const NetworkSpec& spec, const Eigen::MatrixXd& inputs, const LossAdapter& loss);

// Same, starting from given parameters.
NetworkParams fit(const NetworkSpec& spec, const Eigen::MatrixXd& inputs, const LossAdapter& loss,
                  NetworkParams initial);

// `epoch,loss` CSV, one line per trained epoch.
void write_trace_csv(std::ostream& out, const NetworkParams& params);

}  // namespace hetlogit::nn

#endif  // HETLOGIT_NN_HPP
