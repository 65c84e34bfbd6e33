#include <doctest.h>

#include <filesystem>
#include <functional>
#include <fstream>
#include <set>
#include <sstream>

#include "hetlogit/app.hpp"
#include "hetlogit/config.hpp"
#include "hetlogit/errors.hpp"

using namespace hetlogit;

namespace {

ConfigValues parse(const std::string& text) {
  ConfigValues v;
  std::istringstream in(text);
  v.load(in, "cfg.ini");
  return v;
}

std::string error_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST_CASE("defaults resolve to the standard settings") {
  const auto r = resolve_config(ConfigValues{});
  CHECK(r.seed == 1);
  CHECK(r.level == 0.95);
  CHECK(r.delta_spec.hidden_widths == std::vector<std::size_t>{100});
  CHECK(r.delta_spec.dropout_rate == 0.2);
  CHECK(r.delta_spec.max_epochs == 20000);
  CHECK(r.delta_spec.batch_size == 50);
  CHECK(r.delta_spec.patience == 100);
  CHECK(r.lambda_spec.dropout_rate == 0.0);
  CHECK(r.folds == 5);
  CHECK(r.repetitions == 5);
  CHECK(r.replicates == 1000);
  CHECK(r.lambda_grid == std::vector<double>{0.0, 1e-5, 1e-4, 2e-3});
  CHECK(r.estimators == std::vector<std::string>{"oracle", "basic", "ifa", "nn_naive"});
  CHECK(r.scenario == ScenarioKind::swissmetro);
  CHECK(r.fraction == 0.75);
  CHECK(r.train_fraction == 0.75);
}

TEST_CASE("keys are unique and sectioned") {
  std::set<std::string> seen;
  for (const auto& k : config_keys()) {
    CHECK(seen.insert(k.key).second);
    CHECK(k.key.find('.') != std::string::npos);
    CHECK_FALSE(k.description.empty());
  }
}

TEST_CASE("INI sections set values") {
  const auto v = parse("[run]\nseed = 42\n\n[delta]\nhidden = 20, 10\nactivation = linear\n[mc]\nscenario = linear\n"
                       "lambda_grid = 0, 0.1\n");
  const auto r = resolve_config(v);
  CHECK(r.seed == 42);
  CHECK(r.delta_spec.hidden_widths == std::vector<std::size_t>{20, 10});
  CHECK(r.delta_spec.hidden_activation == nn::Activation::linear);
  CHECK(r.scenario == ScenarioKind::linear);
  CHECK(r.lambda_grid == std::vector<double>{0.0, 0.1});
}

TEST_CASE("unknown keys and bad syntax name the line") {
  const auto unknown = error_of([] { parse("[run]\nseed = 1\n\n[delta]\nhiden = 3\n"); });
  CHECK(unknown.find("cfg.ini:5") != std::string::npos);
  CHECK(unknown.find("delta.hiden") != std::string::npos);
  CHECK(error_of([] { parse("[run]\nseed = 1\nthis is not ini\n"); }).find("cfg.ini:3") != std::string::npos);
  CHECK_THROWS_AS(parse("seed = 1\n"), ConfigError);
  CHECK_THROWS_AS(ConfigValues{}.load_file("/nonexistent.ini"), ConfigError);
}

TEST_CASE("invalid values are rejected when resolving") {
  for (const char* o : {"run.seed=-1", "run.level=1.5", "delta.dropout=1", "delta.hidden=0", "ifa.folds=0",
                        "ifa.aggregation=mode", "mc.scenario=moon", "mc.estimators=", "mc.estimators=oracle,magic",
                        "mc.lambda_grid=-1", "mc.fraction=0", "mc.repeat_mode=never", "estimate.train_fraction=1",
                        "delta.standardize=maybe", "lambda.ridge=-0.1", "run.seed=1.5"}) {
    ConfigValues v;
    v.apply_override(o);
    CHECK_THROWS_AS(resolve_config(v), ConfigError);
  }
}

TEST_CASE("overrides take precedence over the file") {
  auto v = parse("[ifa]\nfolds = 3\n");
  v.apply_override("ifa.folds=7");
  v.apply_override(" mc.replicates = 12");
  CHECK(resolve_config(v).folds == 7);
  CHECK(resolve_config(v).replicates == 12);
  CHECK_THROWS_AS(v.apply_override("nonsense"), ConfigError);
  CHECK_THROWS_AS(v.apply_override("run.colour=red"), ConfigError);
}

TEST_CASE("written configuration parses back to the same values") {
  auto v = parse("[run]\nseed = 9\n[lambda]\nl2 = 1e-4\n");
  std::stringstream out;
  v.write(out);
  ConfigValues back;
  back.load(out, "written");
  CHECK(back.values() == v.values());
  std::ostringstream ref;
  write_config_reference(ref);
  CHECK(ref.str().find("mc.lambda_grid") != std::string::npos);
}

TEST_CASE("sha256 of a file") {
  const auto path = std::filesystem::temp_directory_path() / "hetlogit_sha_test.txt";
  {
    std::ofstream f(path, std::ios::binary);
    f << "abc";
  }
  CHECK(app::sha256_file(path) == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  std::filesystem::remove(path);
}

TEST_CASE("prepare is idempotent on its own output") {
  const std::string path = HETLOGIT_DATA_FILE;
  if (!std::filesystem::exists(path)) return;
  const auto dir = std::filesystem::temp_directory_path() / "hetlogit_prepare_test";
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  std::ostringstream log;
  const auto first = app::prepare(path, (dir / "clean.csv").string(), log);
  CHECK(first.raw_rows == 10728);
  CHECK(std::filesystem::exists(dir / "clean_dictionary.md"));
  const auto second = app::prepare((dir / "clean.csv").string(), (dir / "again.csv").string(), log);
  CHECK(second.cleaned_input);
  CHECK(app::sha256_file(dir / "clean.csv") == app::sha256_file(dir / "again.csv"));
  std::filesystem::remove_all(dir);
}
