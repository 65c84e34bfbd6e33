#include "hetlogit/structured.hpp"

#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>

#include "hetlogit/errors.hpp"

namespace hetlogit {

Eigen::MatrixXd DeltaModel::transform_inputs(const Eigen::MatrixXd& w) const {
  if (static_cast<std::size_t>(w.cols()) != spec.input_dim) throw InputError("feature width does not match model");
  if (input_shift.size() == 0) return w;
  Eigen::MatrixXd out = w.rowwise() - input_shift.transpose();
  out.array().rowwise() /= input_scale.transpose().array();
  return out;
}

double LogitModelLayer::evaluate(std::span<const std::size_t> rows, const Eigen::MatrixXd& outputs,
                                 Eigen::MatrixXd* grad) const {
  const auto B = static_cast<Eigen::Index>(rows.size());
  const auto L = outputs.cols();
  if (static_cast<std::size_t>(L) != data_.free_length()) throw InputError("network output width is not (J-1)+K");
  if (grad) grad->resize(B, L);
  Eigen::VectorXd free(L);
  Eigen::VectorXd s(L);
  double total = 0.0;
  const double inv_b = 1.0 / static_cast<double>(B);
  for (Eigen::Index b = 0; b < B; ++b) {
    const std::size_t i = rows[static_cast<std::size_t>(b)];
    free = outputs.row(b).transpose();
    total += negative_log_likelihood_and_score(data_.x[i], data_.choice[i], data_.reference, free.data(), s.data());
    if (grad) grad->row(b) = inv_b * s.transpose();
  }
  return total * inv_b;
}

nn::NetworkSpec default_delta_spec(std::size_t num_features, std::size_t free_length) {
  nn::NetworkSpec spec;
  spec.input_dim = num_features;
  spec.hidden_widths = {100};
  spec.output_dim = free_length;
  spec.dropout_rate = 0.2;
  return spec;
}

DeltaModel make_delta_model(const ChoiceDataset& like, const nn::NetworkSpec& spec, nn::NetworkParams net) {
  if (spec.output_dim != like.free_length()) throw ConfigError("delta network output width must equal (J-1)+K");
  if (spec.input_dim != like.num_features()) throw ConfigError("delta network input width must equal D");
  DeltaModel m;
  m.spec = spec;
  m.net = std::move(net);
  m.num_alternatives = like.num_alternatives();
  m.num_attributes = like.num_attributes();
  m.reference = like.reference;
  m.features = like.features;
  return m;
}

DeltaModel fit_delta(const ChoiceDataset& data, const nn::NetworkSpec& spec, const DeltaFitOptions& options) {
  if (data.empty()) throw InputError("cannot fit coefficient functions on an empty sample");
  data.validate();
  DeltaModel model = make_delta_model(data, spec, {});
  if (options.standardize_inputs) {
    model.input_shift = data.w.colwise().mean().transpose();
    model.input_scale.resize(data.w.cols());
    for (Eigen::Index c = 0; c < data.w.cols(); ++c) {
      const double sd = std::sqrt((data.w.col(c).array() - model.input_shift[c]).square().mean());
      model.input_scale[c] = sd > 0.0 ? sd : 1.0;
    }
  }
  const LogitModelLayer layer(data);
  model.net = nn::fit(spec, model.transform_inputs(data.w), layer);
  return model;
}

Eigen::MatrixXd predict_delta_free(const DeltaModel& model, const Eigen::MatrixXd& w) {
  return nn::forward(model.spec, model.net, model.transform_inputs(w));
}

CoefficientBundle predict_delta(const DeltaModel& model, const Eigen::VectorXd& w) {
  if (static_cast<std::size_t>(w.size()) != model.spec.input_dim) throw InputError("feature width does not match model");
  const Eigen::MatrixXd out = predict_delta_free(model, w.transpose());
  const Eigen::VectorXd free = out.row(0).transpose();
  return CoefficientBundle::from_free(free, model.num_alternatives, model.reference);
}

double mean_log_likelihood(const DeltaModel& model, const ChoiceDataset& data) {
  if (data.empty()) return 0.0;
  const Eigen::MatrixXd free = predict_delta_free(model, data.w);
  Eigen::VectorXd s(free.cols());
  double total = 0.0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const Eigen::VectorXd f = free.row(static_cast<Eigen::Index>(i)).transpose();
    total -= negative_log_likelihood_and_score(data.x[i], data.choice[i], data.reference, f.data(), s.data());
  }
  return total / static_cast<double>(data.size());
}

namespace {

constexpr const char* kHeader = "hetlogit-delta-model 1";

void write_vector(std::ostream& out, const Eigen::VectorXd& v) {
  for (Eigen::Index i = 0; i < v.size(); ++i) out << (i ? " " : "") << v[i];
  out << '\n';
}

Eigen::VectorXd read_vector(std::istream& in, Eigen::Index n) {
  Eigen::VectorXd v(n);
  for (Eigen::Index i = 0; i < n; ++i)
    if (!(in >> v[i])) throw DataError("truncated delta model file");
  return v;
}

}  // namespace

void save_delta_model(std::ostream& out, const DeltaModel& model) {
  const auto old_precision = out.precision(17);
  out << kHeader << '\n';
  out << "alternatives " << model.num_alternatives << " attributes " << model.num_attributes << " reference "
      << model.reference << '\n';
  out << "features " << model.features.size();
  for (const auto& f : model.features) out << ' ' << f;
  out << '\n';
  const auto& s = model.spec;
  out << "input " << s.input_dim << " output " << s.output_dim << " hidden " << s.hidden_widths.size();
  for (std::size_t w : s.hidden_widths) out << ' ' << w;
  out << '\n';
  out << "dropout " << s.dropout_rate << " l2 " << s.l2_penalty << " epochs " << s.max_epochs << " batch "
      << s.batch_size << " tolerance " << s.loss_tolerance << " patience " << s.patience << " seed " << s.seed
      << '\n';
  out << "transform " << (model.input_shift.size() > 0 ? 1 : 0) << '\n';
  if (model.input_shift.size() > 0) {
    write_vector(out, model.input_shift);
    write_vector(out, model.input_scale);
  }
  for (const auto& layer : model.net.layers) {
    out << "layer " << layer.weights.rows() << ' ' << layer.weights.cols() << '\n';
    for (Eigen::Index r = 0; r < layer.weights.rows(); ++r) write_vector(out, layer.weights.row(r).transpose());
    write_vector(out, layer.bias);
  }
  out.precision(old_precision);
}

DeltaModel load_delta_model(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != kHeader) throw DataError("not a delta model file (bad header)");
  DeltaModel m;
  std::string tag;
  auto expect = [&](const char* want) {
    if (!(in >> tag) || tag != want) throw DataError(std::string("delta model file: expected '") + want + "'");
  };
  expect("alternatives");
  in >> m.num_alternatives;
  expect("attributes");
  in >> m.num_attributes;
  expect("reference");
  in >> m.reference;
  std::size_t nf = 0;
  expect("features");
  in >> nf;
  m.features.resize(nf);
  for (auto& f : m.features) in >> f;
  auto& s = m.spec;
  std::size_t nh = 0;
  expect("input");
  in >> s.input_dim;
  expect("output");
  in >> s.output_dim;
  expect("hidden");
  in >> nh;
  s.hidden_widths.resize(nh);
  for (auto& w : s.hidden_widths) in >> w;
  expect("dropout");
  in >> s.dropout_rate;
  expect("l2");
  in >> s.l2_penalty;
  expect("epochs");
  in >> s.max_epochs;
  expect("batch");
  in >> s.batch_size;
  expect("tolerance");
  in >> s.loss_tolerance;
  expect("patience");
  in >> s.patience;
  expect("seed");
  in >> s.seed;
  int has_transform = 0;
  expect("transform");
  in >> has_transform;
  if (!in) throw DataError("malformed delta model header");
  if (has_transform) {
    m.input_shift = read_vector(in, static_cast<Eigen::Index>(s.input_dim));
    m.input_scale = read_vector(in, static_cast<Eigen::Index>(s.input_dim));
  }
  for (std::size_t l = 0; l <= nh; ++l) {
    Eigen::Index rows = 0, cols = 0;
    expect("layer");
    in >> rows >> cols;
    nn::DenseLayer layer;
    layer.weights.resize(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r) layer.weights.row(r) = read_vector(in, cols).transpose();
    layer.bias = read_vector(in, cols);
    m.net.layers.push_back(std::move(layer));
  }
  s.validate();
  // Shape check through a dry forward pass.
  (void)nn::forward(s, m.net, Eigen::MatrixXd::Zero(1, static_cast<Eigen::Index>(s.input_dim)));
  return m;
}

}  // namespace hetlogit
