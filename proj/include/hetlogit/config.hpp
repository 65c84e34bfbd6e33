#ifndef HETLOGIT_CONFIG_HPP
#define HETLOGIT_CONFIG_HPP

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "hetlogit/influence.hpp"
#include "hetlogit/mc.hpp"
#include "hetlogit/nn.hpp"

// Run configuration: an INI file with sections, overridden by section.key=value
// pairs from the command line. Every key has a default; unknown keys are errors.
namespace hetlogit {

struct ConfigKey {
  std::string key;  // section.name
  std::string default_value;
  std::string description;
};

// All recognised keys in documentation order.
const std::vector<ConfigKey>& config_keys();

// Resolved string values for every key in config_keys().
class ConfigValues {
 public:
  ConfigValues();  // defaults

  // Throws ConfigError on unknown keys or malformed files.
  void load_file(const std::string& path);
  void load(std::istream& in, const std::string& source_name);
  // "section.key=value".
  void apply_override(const std::string& assignment);
  void set(const std::string& key, const std::string& value);

  const std::string& get(const std::string& key) const;
  const std::map<std::string, std::string>& values() const { return values_; }

  // INI rendering of every resolved value, grouped by section.
  void write(std::ostream& out) const;

 private:
  std::map<std::string, std::string> values_;
};

enum class ScenarioKind { swissmetro, large, linear };

struct RunConfig {
  std::uint64_t seed = 1;
  std::string output = "run";
  std::string data = "data/swissmetro.dat";
  double level = 0.95;

  // Input and output widths are filled in from the data.
  nn::NetworkSpec delta_spec;
  nn::NetworkSpec lambda_spec;
  bool standardize = false;
  double lambda_l2 = 0.0;
  double diag_ridge = 0.0;

  std::size_t folds = 5;
  std::size_t repetitions = 5;
  FoldAggregation aggregation = FoldAggregation::mean;

  std::size_t replicates = 1000;
  ScenarioKind scenario = ScenarioKind::swissmetro;
  std::size_t size = 0;  // population size for large, sample size for linear; 0 = scenario default
  double fraction = 0.75;
  bool fixed_subset = false;
  std::vector<std::string> estimators;
  std::vector<double> lambda_grid;
  mc::RepeatMode repeat_mode = mc::RepeatMode::outlier_triggered;

  double train_fraction = 0.75;
  std::size_t bootstrap = 1000;
  std::size_t nn_bootstrap = 0;
};

// Typed view; throws ConfigError on values that do not parse or validate.
RunConfig resolve_config(const ConfigValues& values);

// Plain-text key reference for --help and the docs.
void write_config_reference(std::ostream& out);

}  // namespace hetlogit

#endif  // HETLOGIT_CONFIG_HPP
