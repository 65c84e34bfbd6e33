#include "hetlogit/config.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <iomanip>
#include <iterator>
#include <ostream>
#include <sstream>

#include <boost/algorithm/string.hpp>
#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "hetlogit/errors.hpp"

namespace hetlogit {

const std::vector<ConfigKey>& config_keys() {
  static const std::vector<ConfigKey> keys{
      {"run.seed", "1", "master seed; every random stream derives from it"},
      {"run.output", "run", "run directory receiving all outputs"},
      {"run.data", "data/swissmetro.dat", "Swissmetro input, raw survey file or cleaned frame"},
      {"run.level", "0.95", "confidence level of the intervals"},

      {"delta.hidden", "100", "hidden layer widths of the coefficient network, comma separated"},
      {"delta.activation", "relu", "hidden activation: relu or linear"},
      {"delta.dropout", "0.2", "dropout rate on hidden units"},
      {"delta.l2", "0", "weight penalty of the coefficient network"},
      {"delta.epochs", "20000", "maximum training epochs"},
      {"delta.batch", "50", "minibatch size"},
      {"delta.learning_rate", "0.001", "Adam step size"},
      {"delta.patience", "100", "epochs without improvement before stopping; 0 disables"},
      {"delta.tolerance", "1e-8", "minimum loss decrease that counts as improvement"},
      {"delta.standardize", "false", "standardise network inputs with training means and deviations"},

      {"lambda.hidden", "100", "hidden layer widths of the Hessian network"},
      {"lambda.activation", "relu", "hidden activation: relu or linear"},
      {"lambda.epochs", "20000", "maximum training epochs"},
      {"lambda.batch", "50", "minibatch size"},
      {"lambda.learning_rate", "0.001", "Adam step size"},
      {"lambda.patience", "100", "epochs without improvement before stopping; 0 disables"},
      {"lambda.tolerance", "1e-8", "minimum loss decrease that counts as improvement"},
      {"lambda.l2", "0", "weight penalty of the Hessian network (the regularisation lambda)"},
      {"lambda.ridge", "0", "constant added to the diagonal of Lambda(w) before inversion"},

      {"ifa.folds", "5", "cross-fitting folds S"},
      {"ifa.repetitions", "5", "sample-splitting repetitions R"},
      {"ifa.aggregation", "mean", "combine folds by mean or median"},

      {"mc.replicates", "1000", "Monte Carlo replicates"},
      {"mc.scenario", "swissmetro", "swissmetro (observed covariates), large (resampled) or linear"},
      {"mc.size", "0", "population size (large) or sample size (linear); 0 means 50000 and 4000"},
      {"mc.fraction", "0.75", "share of the population used for estimation"},
      {"mc.fixed_subset", "false", "keep one estimation subset across replicates"},
      {"mc.estimators", "oracle,basic,ifa,nn_naive", "roster; ifa expands to one estimator per grid value"},
      {"mc.lambda_grid", "0,1e-5,1e-4,2e-3", "Hessian-network penalties for the ifa estimators"},
      {"mc.repeat_mode", "outlier_triggered", "outlier_triggered or always"},

      {"estimate.train_fraction", "0.75", "training share of the row split"},
      {"estimate.bootstrap", "1000", "bootstrap draws for the logit elasticity standard errors"},
      {"estimate.nn_bootstrap", "0", "bootstrap draws for the naive network elasticities; 0 uses the sandwich"},
  };
  return keys;
}

namespace {

const ConfigKey* find_key(const std::string& key) {
  for (const auto& k : config_keys())
    if (k.key == key) return &k;
  return nullptr;
}

std::string section_of(const std::string& key) { return key.substr(0, key.find('.')); }
std::string name_of(const std::string& key) { return key.substr(key.find('.') + 1); }

[[noreturn]] void bad_value(const std::string& key, const std::string& value, const std::string& expected) {
  throw ConfigError(key + " = '" + value + "': expected " + expected);
}

double to_double(const std::string& key, const std::string& v) {
  double out = 0.0;
  const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size() || !std::isfinite(out)) bad_value(key, v, "a number");
  return out;
}

std::uint64_t to_unsigned(const std::string& key, const std::string& v) {
  std::uint64_t out = 0;
  const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size()) bad_value(key, v, "a non-negative integer");
  return out;
}

bool to_bool(const std::string& key, const std::string& v) {
  const std::string s = boost::algorithm::to_lower_copy(v);
  if (s == "true" || s == "1" || s == "yes" || s == "on") return true;
  if (s == "false" || s == "0" || s == "no" || s == "off") return false;
  bad_value(key, v, "true or false");
}

std::vector<std::string> to_list(const std::string& v) {
  std::vector<std::string> parts;
  boost::algorithm::split(parts, v, boost::is_any_of(","));
  std::vector<std::string> out;
  for (auto& p : parts) {
    boost::algorithm::trim(p);
    if (!p.empty()) out.push_back(p);
  }
  return out;
}

nn::Activation to_activation(const std::string& key, const std::string& v) {
  if (v == "relu") return nn::Activation::relu;
  if (v == "linear") return nn::Activation::linear;
  bad_value(key, v, "relu or linear");
}

nn::NetworkSpec network(const ConfigValues& c, const std::string& s) {
  nn::NetworkSpec spec;
  spec.hidden_widths.clear();
  for (const auto& w : to_list(c.get(s + ".hidden"))) {
    const auto width = to_unsigned(s + ".hidden", w);
    if (width == 0) bad_value(s + ".hidden", c.get(s + ".hidden"), "positive widths");
    spec.hidden_widths.push_back(width);
  }
  spec.hidden_activation = to_activation(s + ".activation", c.get(s + ".activation"));
  spec.max_epochs = to_unsigned(s + ".epochs", c.get(s + ".epochs"));
  spec.batch_size = to_unsigned(s + ".batch", c.get(s + ".batch"));
  spec.learning_rate = to_double(s + ".learning_rate", c.get(s + ".learning_rate"));
  spec.patience = to_unsigned(s + ".patience", c.get(s + ".patience"));
  spec.loss_tolerance = to_double(s + ".tolerance", c.get(s + ".tolerance"));
  spec.l2_penalty = to_double(s + ".l2", c.get(s + ".l2"));
  if (s == "delta") spec.dropout_rate = to_double("delta.dropout", c.get("delta.dropout"));
  spec.validate();
  return spec;
}

}  // namespace

ConfigValues::ConfigValues() {
  for (const auto& k : config_keys()) values_[k.key] = k.default_value;
}

void ConfigValues::set(const std::string& key, const std::string& value) {
  if (!find_key(key)) throw ConfigError("unknown configuration key '" + key + "'");
  values_[key] = boost::algorithm::trim_copy(value);
}

const std::string& ConfigValues::get(const std::string& key) const {
  const auto it = values_.find(key);
  if (it == values_.end()) throw ConfigError("unknown configuration key '" + key + "'");
  return it->second;
}

namespace {

// 1-based line holding `name` inside `[section]`, or 0 when not found.
std::size_t line_of(const std::string& text, const std::string& section, const std::string& name) {
  std::istringstream in(text);
  std::string line, current;
  for (std::size_t no = 1; std::getline(in, line); ++no) {
    boost::algorithm::trim(line);
    if (line.size() > 1 && line.front() == '[' && line.back() == ']') {
      current = boost::algorithm::trim_copy(line.substr(1, line.size() - 2));
    } else if (current == section) {
      const auto eq = line.find('=');
      if (eq != std::string::npos && boost::algorithm::trim_copy(line.substr(0, eq)) == name) return no;
    }
  }
  return 0;
}

}  // namespace

void ConfigValues::load(std::istream& in, const std::string& source_name) {
  const std::string text(std::istreambuf_iterator<char>(in), {});
  std::istringstream parse(text);
  boost::property_tree::ptree tree;
  try {
    boost::property_tree::ini_parser::read_ini(parse, tree);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw ConfigError(source_name + ":" + std::to_string(e.line()) + ": " + e.message());
  }
  for (const auto& [section, body] : tree) {
    if (body.empty() && !body.data().empty())
      throw ConfigError(source_name + ": key '" + section + "' outside a section");
    for (const auto& [name, value] : body) {
      const std::string key = section + "." + name;
      if (!find_key(key))
        throw ConfigError(source_name + ":" + std::to_string(line_of(text, section, name)) + ": unknown key '" + key +
                          "'");
      try {
        set(key, value.data());
      } catch (const ConfigError& e) {
        throw ConfigError(source_name + ":" + std::to_string(line_of(text, section, name)) + ": " + e.what());
      }
    }
  }
}

void ConfigValues::load_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path);
  load(in, path);
}

void ConfigValues::apply_override(const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) throw ConfigError("override '" + assignment + "' is not section.key=value");
  set(boost::algorithm::trim_copy(assignment.substr(0, eq)), assignment.substr(eq + 1));
}

void ConfigValues::write(std::ostream& out) const {
  std::string current;
  for (const auto& k : config_keys()) {
    const std::string section = section_of(k.key);
    if (section != current) {
      if (!current.empty()) out << '\n';
      out << '[' << section << "]\n";
      current = section;
    }
    out << name_of(k.key) << " = " << values_.at(k.key) << '\n';
  }
}

RunConfig resolve_config(const ConfigValues& c) {
  RunConfig r;
  r.seed = to_unsigned("run.seed", c.get("run.seed"));
  r.output = c.get("run.output");
  r.data = c.get("run.data");
  r.level = to_double("run.level", c.get("run.level"));
  if (!(r.level > 0.0 && r.level < 1.0)) bad_value("run.level", c.get("run.level"), "a value in (0, 1)");

  r.delta_spec = network(c, "delta");
  r.lambda_spec = network(c, "lambda");
  r.lambda_spec.dropout_rate = 0.0;
  r.standardize = to_bool("delta.standardize", c.get("delta.standardize"));
  r.lambda_l2 = r.lambda_spec.l2_penalty;
  r.diag_ridge = to_double("lambda.ridge", c.get("lambda.ridge"));
  if (r.lambda_l2 < 0.0) bad_value("lambda.l2", c.get("lambda.l2"), "a non-negative number");
  if (r.diag_ridge < 0.0) bad_value("lambda.ridge", c.get("lambda.ridge"), "a non-negative number");

  r.folds = to_unsigned("ifa.folds", c.get("ifa.folds"));
  r.repetitions = to_unsigned("ifa.repetitions", c.get("ifa.repetitions"));
  if (r.folds < 1) bad_value("ifa.folds", c.get("ifa.folds"), "at least 1");
  if (r.repetitions < 1) bad_value("ifa.repetitions", c.get("ifa.repetitions"), "at least 1");
  const std::string agg = c.get("ifa.aggregation");
  if (agg == "mean") r.aggregation = FoldAggregation::mean;
  else if (agg == "median") r.aggregation = FoldAggregation::median;
  else bad_value("ifa.aggregation", agg, "mean or median");

  r.replicates = to_unsigned("mc.replicates", c.get("mc.replicates"));
  if (r.replicates < 1) bad_value("mc.replicates", c.get("mc.replicates"), "at least 1");
  const std::string scenario = c.get("mc.scenario");
  if (scenario == "swissmetro") r.scenario = ScenarioKind::swissmetro;
  else if (scenario == "large") r.scenario = ScenarioKind::large;
  else if (scenario == "linear") r.scenario = ScenarioKind::linear;
  else bad_value("mc.scenario", scenario, "swissmetro, large or linear");
  r.size = to_unsigned("mc.size", c.get("mc.size"));
  r.fraction = to_double("mc.fraction", c.get("mc.fraction"));
  if (!(r.fraction > 0.0 && r.fraction <= 1.0)) bad_value("mc.fraction", c.get("mc.fraction"), "a value in (0, 1]");
  r.fixed_subset = to_bool("mc.fixed_subset", c.get("mc.fixed_subset"));
  r.estimators = to_list(c.get("mc.estimators"));
  if (r.estimators.empty()) bad_value("mc.estimators", c.get("mc.estimators"), "at least one estimator");
  for (const auto& e : r.estimators)
    if (e != "oracle" && e != "basic" && e != "ifa" && e != "nn_naive")
      bad_value("mc.estimators", c.get("mc.estimators"), "names from oracle, basic, ifa, nn_naive");
  for (const auto& v : to_list(c.get("mc.lambda_grid"))) {
    const double l = to_double("mc.lambda_grid", v);
    if (l < 0.0) bad_value("mc.lambda_grid", c.get("mc.lambda_grid"), "non-negative penalties");
    r.lambda_grid.push_back(l);
  }
  if (r.lambda_grid.empty()) bad_value("mc.lambda_grid", c.get("mc.lambda_grid"), "at least one value");
  const std::string mode = c.get("mc.repeat_mode");
  if (mode == "outlier_triggered") r.repeat_mode = mc::RepeatMode::outlier_triggered;
  else if (mode == "always") r.repeat_mode = mc::RepeatMode::always;
  else bad_value("mc.repeat_mode", mode, "outlier_triggered or always");

  r.train_fraction = to_double("estimate.train_fraction", c.get("estimate.train_fraction"));
  if (!(r.train_fraction > 0.0 && r.train_fraction < 1.0))
    bad_value("estimate.train_fraction", c.get("estimate.train_fraction"), "a value in (0, 1)");
  r.bootstrap = to_unsigned("estimate.bootstrap", c.get("estimate.bootstrap"));
  if (r.bootstrap < 1) bad_value("estimate.bootstrap", c.get("estimate.bootstrap"), "at least 1");
  r.nn_bootstrap = to_unsigned("estimate.nn_bootstrap", c.get("estimate.nn_bootstrap"));
  return r;
}

void write_config_reference(std::ostream& out) {
  std::size_t width = 0;
  for (const auto& k : config_keys()) width = std::max(width, k.key.size() + k.default_value.size() + 3);
  for (const auto& k : config_keys()) {
    const std::string head = k.key + " = " + k.default_value;
    out << "  " << std::left << std::setw(static_cast<int>(width) + 2) << head << k.description << '\n';
  }
}

}  // namespace hetlogit
