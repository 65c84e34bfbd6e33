// hetlogit: batch driver for data preparation, Monte Carlo runs and the
// Swissmetro application.
//
// Exit codes: 0 success, 2 usage or configuration, 3 data, 4 estimation.

#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "hetlogit/app.hpp"
#include "hetlogit/config.hpp"
#include "hetlogit/errors.hpp"

namespace {

constexpr int kUsage = 2;
constexpr int kData = 3;
constexpr int kEstimation = 4;

std::string config_help() {
  std::ostringstream s;
  s << "\nConfiguration keys (INI sections; override with --set section.key=value):\n";
  hetlogit::write_config_reference(s);
  s << "\nEnvironment: HETLOGIT_WORKERS sets the worker thread count (default: all cores).\n";
  return s.str();
}

hetlogit::ConfigValues load_config(const std::string& path, const std::vector<std::string>& overrides) {
  hetlogit::ConfigValues values;
  values.load_file(path);
  for (const auto& o : overrides) values.apply_override(o);
  return values;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Heterogeneous-coefficient conditional logit: estimation and Monte Carlo toolkit"};
  app.require_subcommand(1);
  app.footer(config_help());

  std::string raw, out;
  auto* prepare = app.add_subcommand("prepare", "clean the raw Swissmetro file into a CSV frame");
  prepare->add_option("raw", raw, "raw survey file (or an already cleaned frame)")->required();
  prepare->add_option("out", out, "output CSV path")->required();

  std::string config;
  std::vector<std::string> overrides;
  auto add_configured = [&](const std::string& name, const std::string& description) {
    auto* sub = app.add_subcommand(name, description);
    sub->add_option("config", config, "INI configuration file")->required()->check(CLI::ExistingFile);
    sub->add_option("--set", overrides, "override a key, section.key=value (repeatable)");
    return sub;
  };
  auto* mc_run = add_configured("mc-run", "Monte Carlo coverage experiment");
  auto* estimate = add_configured("estimate", "average coefficients on the Swissmetro data");
  auto* elasticities = add_configured("elasticities", "own and cross travel-time elasticities");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kUsage;
  }

  try {
    if (*prepare) {
      hetlogit::app::prepare(raw, out, std::cerr);
    } else {
      const auto values = load_config(config, overrides);
      if (*mc_run) hetlogit::app::mc_run(values, std::cerr);
      if (*estimate) hetlogit::app::estimate(values, std::cerr);
      if (*elasticities) hetlogit::app::elasticities(values, std::cerr);
    }
  } catch (const hetlogit::ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << '\n';
    return kUsage;
  } catch (const hetlogit::DataError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kData;
  } catch (const hetlogit::InputError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kData;
  } catch (const std::exception& e) {
    std::cerr << "estimation error: " << e.what() << '\n';
    return kEstimation;
  }
  return 0;
}
