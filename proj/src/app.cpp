#include "hetlogit/app.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <memory>
#include <optional>
#include <ostream>
#include <sstream>

#include <openssl/evp.h>

#include "hetlogit/choice.hpp"
#include "hetlogit/dgp.hpp"
#include "hetlogit/errors.hpp"
#include "hetlogit/influence.hpp"
#include "hetlogit/mc.hpp"
#include "hetlogit/mle.hpp"
#include "hetlogit/random.hpp"
#include "hetlogit/stats.hpp"
#include "hetlogit/structured.hpp"

namespace hetlogit::app {

namespace fs = std::filesystem;

namespace {

// Sub-streams of the master seed.
constexpr std::uint64_t kIfaStream = 1;
constexpr std::uint64_t kNetworkStream = 2;
constexpr std::uint64_t kBootstrapStream = 3;
constexpr std::uint64_t kNetworkBootstrapStream = 4;
constexpr std::uint64_t kLargePopulationStream = 5;
constexpr std::uint64_t kFixedSubsetStream = 6;

std::string num(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  if (ec != std::errc()) return "nan";
  return std::string(buf, ptr);
}

std::string fixed(double v, int digits = 3) {
  std::ostringstream s;
  s.setf(std::ios::fixed);
  s.precision(digits);
  s << v;
  return s.str();
}

std::ofstream open_out(const fs::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  return out;
}

struct RunDirectory {
  fs::path dir;
  fs::path file(const std::string& name) const { return dir / name; }
};

RunDirectory open_run(const ConfigValues& values, const RunConfig& cfg, const std::string& command,
                      const std::string& input, const std::string& input_hash) {
  RunDirectory run{cfg.output};
  std::error_code ec;
  fs::create_directories(run.dir, ec);
  if (ec) throw DataError("cannot create run directory " + run.dir.string() + ": " + ec.message());
  {
    auto out = open_out(run.file("config.ini"));
    values.write(out);
  }
  auto out = open_out(run.file("manifest.txt"));
  out << "command = " << command << '\n'
      << "seed = " << cfg.seed << '\n'
      << "input = " << input << '\n'
      << "input_sha256 = " << input_hash << '\n';
  return run;
}

ChoiceDataset load_swissmetro(const RunConfig& cfg, std::ostream& log) {
  auto result = ingest_swissmetro(cfg.data);
  for (const auto& w : result.report.warnings) log << "warning: " << w << '\n';
  log << "loaded " << result.data.size() << " observations from " << cfg.data << '\n';
  return std::move(result.data);
}

std::vector<TargetFunctional> slope_targets(const ChoiceDataset& data) {
  std::vector<TargetFunctional> out;
  for (std::size_t k = 0; k < data.num_attributes(); ++k)
    out.push_back(TargetFunctional::average_coefficient(k, data.attributes[k]));
  return out;
}

struct Split {
  ChoiceDataset train;
  ChoiceDataset test;
  std::vector<std::size_t> train_ids;
};

Split row_split(const ChoiceDataset& data, double fraction, std::uint64_t seed) {
  Split s;
  s.train_ids = draw_subset(data.size(), fraction, seed);
  std::vector<char> in_train(data.size(), 0);
  for (auto i : s.train_ids) in_train[i] = 1;
  std::vector<std::size_t> test_ids;
  for (std::size_t i = 0; i < data.size(); ++i)
    if (!in_train[i]) test_ids.push_back(i);
  s.train = data.subset(s.train_ids);
  s.test = data.subset(test_ids);
  return s;
}

nn::NetworkSpec delta_spec_for(const RunConfig& cfg, const ChoiceDataset& data) {
  nn::NetworkSpec spec = cfg.delta_spec;
  spec.input_dim = data.num_features();
  spec.output_dim = data.free_length();
  spec.seed = derive_seed(cfg.seed, kNetworkStream);
  return spec;
}

DeltaFitOptions delta_options(const RunConfig& cfg) {
  DeltaFitOptions o;
  o.standardize_inputs = cfg.standardize;
  return o;
}

// Mean per-observation log-likelihood given free coefficient rows.
double mean_ll(const ChoiceDataset& data, const Eigen::MatrixXd& free) {
  if (data.empty()) return std::numeric_limits<double>::quiet_NaN();
  double sum = 0.0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const Eigen::VectorXd f = free.row(static_cast<Eigen::Index>(i)).transpose();
    sum += log_likelihood(data.choice[i], data.x[i], CoefficientBundle::from_free(f, data.num_alternatives(),
                                                                                  data.reference));
  }
  return sum / static_cast<double>(data.size());
}

Eigen::MatrixXd design_free(const MleFit& fit, const BoundDesign& design, const ChoiceDataset& data) {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(data.size()), static_cast<Eigen::Index>(design.free_length()));
  for (std::size_t i = 0; i < data.size(); ++i)
    out.row(static_cast<Eigen::Index>(i)) = design.free(fit.gamma, data.w_row(i)).transpose();
  return out;
}

// Average prediction of the cross-fitted coefficient networks.
Eigen::MatrixXd ensemble_free(const std::vector<std::shared_ptr<const DeltaModel>>& models, const Eigen::MatrixXd& w) {
  if (models.empty()) throw EstimationError("no fitted coefficient networks");
  Eigen::MatrixXd sum = predict_delta_free(*models.front(), w);
  for (std::size_t m = 1; m < models.size(); ++m) sum += predict_delta_free(*models[m], w);
  return sum / static_cast<double>(models.size());
}

struct Column {
  std::string name;
  std::vector<ThetaEstimate> estimates;
  double ll_train = std::numeric_limits<double>::quiet_NaN();
  double ll_test = std::numeric_limits<double>::quiet_NaN();
};

void write_coefficients(std::ostream& out, const std::string& estimator, const ChoiceDataset& like,
                        const Eigen::MatrixXd& free, bool header) {
  if (header) {
    out << "estimator,obs";
    for (const auto& n : free_slot_names(like)) out << ',' << n;
    out << '\n';
  }
  for (Eigen::Index i = 0; i < free.rows(); ++i) {
    out << estimator << ',' << i;
    for (Eigen::Index j = 0; j < free.cols(); ++j) out << ',' << num(free(i, j));
    out << '\n';
  }
}

EstimateConfig ifa_config(const RunConfig& cfg) {
  EstimateConfig c;
  c.folds = cfg.folds;
  c.level = cfg.level;
  c.aggregation = cfg.aggregation;
  c.seed = derive_seed(cfg.seed, kIfaStream);
  return c;
}

NetworkNuisanceFitter ifa_fitter(const RunConfig& cfg, std::shared_ptr<DeltaCache> cache) {
  return NetworkNuisanceFitter(cfg.delta_spec, cfg.lambda_spec, cfg.lambda_l2, cfg.diag_ridge, delta_options(cfg),
                               std::move(cache));
}

void replace_se(ThetaEstimate& e, double se) {
  const double z = stats::normal_critical(e.level);
  e.se = se;
  e.psi_variance = se * se * static_cast<double>(e.n);
  e.ci_low = e.theta - z * se;
  e.ci_high = e.theta + z * se;
  e.outlier = !(se <= kOutlierStandardError);
}

void log_estimates(std::ostream& log, const std::string& name, const std::vector<ThetaEstimate>& estimates) {
  log << name << ":";
  for (const auto& e : estimates) log << ' ' << e.label << ' ' << fixed(e.theta) << " (" << fixed(e.se) << ')';
  log << '\n';
}

}  // namespace

std::string sha256_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read " + path.string());
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), &EVP_MD_CTX_free);
  if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1) throw DataError("sha256 unavailable");
  std::vector<char> buf(1 << 16);
  while (in) {
    in.read(buf.data(), static_cast<std::streamsize>(buf.size()));
    if (in.gcount() > 0) EVP_DigestUpdate(ctx.get(), buf.data(), static_cast<std::size_t>(in.gcount()));
  }
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_DigestFinal_ex(ctx.get(), digest, &len);
  std::ostringstream hex;
  for (unsigned int i = 0; i < len; ++i) hex << std::hex << std::setw(2) << std::setfill('0') << int(digest[i]);
  return hex.str();
}

IngestReport prepare(const std::string& raw, const std::string& out_path, std::ostream& log) {
  auto result = ingest_swissmetro(raw);
  for (const auto& w : result.report.warnings) log << "warning: " << w << '\n';
  const fs::path out(out_path);
  if (out.has_parent_path()) fs::create_directories(out.parent_path());
  {
    auto f = open_out(out);
    write_cleaned_csv(f, result.data);
  }
  auto dict = open_out(out.parent_path() / (out.stem().string() + "_dictionary.md"));
  write_data_dictionary(dict, result.data);
  const auto& r = result.report;
  if (r.cleaned_input)
    log << "input is already a cleaned frame; " << result.data.size() << " rows rewritten\n";
  else
    log << r.raw_rows << " raw rows, " << r.dropped_unavailable << " dropped for unavailable alternatives, "
        << r.dropped_no_choice << " without a recorded choice, " << result.data.size() << " kept\n";
  return result.report;
}

void mc_run(const ConfigValues& values, std::ostream& log) {
  const RunConfig cfg = resolve_config(values);
  std::unique_ptr<mc::Scenario> scenario;
  std::string input = "none";
  std::string hash = "none";
  std::size_t free_length = 4;
  if (cfg.scenario == ScenarioKind::linear) {
    scenario = std::make_unique<mc::LinearScenario>(cfg.size ? cfg.size : 4000);
  } else {
    input = cfg.data;
    hash = sha256_file(cfg.data);
    ChoiceDataset population = load_swissmetro(cfg, log);
    if (cfg.scenario == ScenarioKind::large) {
      const std::size_t n = cfg.size ? cfg.size : 50000;
      population = resample_large(population, n, derive_seed(cfg.seed, kLargePopulationStream));
      log << "resampled a population of " << n << " travellers\n";
    }
    free_length = population.free_length();
    std::optional<std::uint64_t> fixed_seed;
    if (cfg.fixed_subset) fixed_seed = derive_seed(cfg.seed, kFixedSubsetStream);
    scenario = std::make_unique<mc::SwissmetroScenario>(std::move(population), kSimulationFeatures, cfg.fraction,
                                                        fixed_seed);
  }
  const RunDirectory run = open_run(values, cfg, "mc-run", input, hash);

  std::vector<std::shared_ptr<const mc::Estimator>> roster;
  for (const auto& name : cfg.estimators) {
    if (name == "oracle") {
      roster.push_back(std::make_shared<mc::DesignEstimator>("oracle", scenario->oracle_design()));
    } else if (name == "basic") {
      roster.push_back(std::make_shared<mc::DesignEstimator>("basic", DesignSpec::basic(free_length)));
    } else if (name == "ifa") {
      for (double l2 : cfg.lambda_grid) {
        mc::IfaSettings s;
        s.delta_spec = cfg.delta_spec;
        s.lambda_spec = cfg.lambda_spec;
        s.lambda_l2 = l2;
        s.diag_ridge = cfg.diag_ridge;
        s.folds = cfg.folds;
        s.repetitions = cfg.repetitions;
        s.repeat_mode = cfg.repeat_mode;
        s.aggregation = cfg.aggregation;
        s.delta_options = delta_options(cfg);
        roster.push_back(std::make_shared<mc::IfaEstimator>(s));
      }
    } else if (name == "nn_naive") {
      roster.push_back(std::make_shared<mc::NaiveNnEstimator>(cfg.delta_spec, delta_options(cfg)));
    }
  }

  mc::McConfig mcc;
  mcc.replicates = cfg.replicates;
  mcc.seed = cfg.seed;
  mcc.level = cfg.level;
  const auto records = mc::run(mcc, *scenario, roster, [&](std::size_t done) {
    log << "replicate " << done << "/" << cfg.replicates << " done\n" << std::flush;
  });
  mc::write_outputs(run.dir, records);
  std::size_t failures = 0;
  for (const auto& r : records) failures += r.ok() ? 0 : 1;
  log << records.size() << " records (" << failures << " failed cells) written to " << run.dir.string() << '\n';
}

void estimate(const ConfigValues& values, std::ostream& log) {
  const RunConfig cfg = resolve_config(values);
  const std::string hash = sha256_file(cfg.data);
  const ChoiceDataset data = load_swissmetro(cfg, log);
  const RunDirectory run = open_run(values, cfg, "estimate", cfg.data, hash);
  const Split split = row_split(data, cfg.train_fraction, cfg.seed);
  log << "training rows " << split.train.size() << ", test rows " << split.test.size() << '\n';
  {
    auto f = open_out(run.file("split.csv"));
    f << "row\n";
    for (auto i : split.train_ids) f << i << '\n';
  }
  const auto targets = slope_targets(data);
  std::vector<Column> columns;

  const std::vector<std::pair<std::string, DesignSpec>> logits{
      {"cl", DesignSpec::uniform(data.free_length(), kApplicationFeatures)},
      {"cl_spec1", DesignSpec::swissmetro_appendix()}};
  for (const auto& [name, design] : logits) {
    const MleFit fit = fit_logit_mle(split.train, design);
    const BoundDesign bound(design, split.train);
    {
      auto f = open_out(run.file(name + "_report.csv"));
      write_mle_report(f, fit);
    }
    Column c{name, average_coefficients_from_design(fit, design, split.train, cfg.level)};
    c.ll_train = mean_ll(split.train, design_free(fit, bound, split.train));
    c.ll_test = mean_ll(split.test, design_free(fit, bound, split.test));
    log << name << ": log-likelihood " << fixed(fit.log_likelihood, 2) << " after " << fit.iterations
        << " iterations\n";
    log_estimates(log, name, c.estimates);
    columns.push_back(std::move(c));
  }

  const ChoiceDataset net_train = split.train.with_features(kApplicationFeatures);
  const ChoiceDataset net_test = split.test.with_features(kApplicationFeatures);

  auto cache = std::make_shared<DeltaCache>();
  const auto fitter = ifa_fitter(cfg, cache);
  const auto ifa = estimate_repeated(net_train, targets, fitter, ifa_config(cfg), cfg.repetitions);
  {
    auto f = open_out(run.file("ifa_estimates.csv"));
    write_estimates_csv(f, ifa.estimates, cfg.repetitions, cfg.folds, cfg.lambda_l2);
  }
  const auto ensemble = cache->models();
  const Eigen::MatrixXd ifa_train_free = ensemble_free(ensemble, net_train.w);
  const Eigen::MatrixXd ifa_test_free = ensemble_free(ensemble, net_test.w);
  Column ifa_col{"ifa", ifa.estimates, mean_ll(net_train, ifa_train_free), mean_ll(net_test, ifa_test_free)};
  log_estimates(log, "ifa", ifa_col.estimates);
  columns.push_back(ifa_col);

  const auto nn = naive_nn_inference(net_train, delta_spec_for(cfg, net_train), targets, cfg.level,
                                     delta_options(cfg));
  const Eigen::MatrixXd nn_test_free = predict_delta_free(nn.model, net_test.w);
  Column nn_col{"nn_naive", nn.estimates, mean_log_likelihood(nn.model, net_train), mean_ll(net_test, nn_test_free)};
  log_estimates(log, "nn_naive", nn_col.estimates);
  columns.push_back(nn_col);

  {
    auto f = open_out(run.file("estimates.csv"));
    f << "estimator,target,theta,se,ci_low,ci_high,stars\n";
    for (const auto& c : columns)
      for (const auto& e : c.estimates)
        f << c.name << ',' << e.label << ',' << num(e.theta) << ',' << num(e.se) << ',' << num(e.ci_low) << ','
          << num(e.ci_high) << ',' << significance_stars(e.theta, e.se) << '\n';
  }
  {
    auto f = open_out(run.file("log_likelihood.csv"));
    f << "estimator,ll_train,ll_test\n";
    for (const auto& c : columns) f << c.name << ',' << num(c.ll_train) << ',' << num(c.ll_test) << '\n';
  }
  {
    auto f = open_out(run.file("coefficients_test.csv"));
    write_coefficients(f, "ifa", net_test, ifa_test_free, true);
    write_coefficients(f, "nn_naive", net_test, nn_test_free, false);
  }
  auto md = open_out(run.file("report.md"));
  md << "# Average coefficients\n\n"
     << "training rows " << split.train.size() << ", test rows " << split.test.size() << ", seed " << cfg.seed
     << "\n\n|";
  for (const auto& c : columns) md << " | " << c.name;
  md << " |\n|---";
  for (std::size_t i = 0; i < columns.size(); ++i) md << "|---:";
  md << "|\n";
  for (std::size_t k = 0; k < targets.size(); ++k) {
    md << "| theta " << targets[k].label();
    for (const auto& c : columns) md << " | " << fixed(c.estimates[k].theta) << significance_stars(c.estimates[k].theta, c.estimates[k].se);
    md << " |\n";
  }
  for (std::size_t k = 0; k < targets.size(); ++k) {
    md << "| se " << targets[k].label();
    for (const auto& c : columns) md << " | " << fixed(c.estimates[k].se);
    md << " |\n";
  }
  md << "| LL train";
  for (const auto& c : columns) md << " | " << fixed(c.ll_train);
  md << " |\n| LL test";
  for (const auto& c : columns) md << " | " << fixed(c.ll_test);
  md << " |\n\nLog-likelihoods are per observation. ifa uses R = " << cfg.repetitions << ", S = " << cfg.folds
     << ", lambda = " << num(cfg.lambda_l2) << "; its log-likelihoods use the average of the " << ensemble.size()
     << " cross-fitted coefficient networks.\n";
  log << "outputs written to " << run.dir.string() << '\n';
}

void elasticities(const ConfigValues& values, std::ostream& log) {
  const RunConfig cfg = resolve_config(values);
  const std::string hash = sha256_file(cfg.data);
  const ChoiceDataset data = load_swissmetro(cfg, log);
  const RunDirectory run = open_run(values, cfg, "elasticities", cfg.data, hash);
  const Split split = row_split(data, cfg.train_fraction, cfg.seed);
  const std::size_t J = data.num_alternatives();
  const std::size_t time = data.attribute_index("time");
  const Eigen::MatrixXd x_star = mean_attributes(split.train);
  std::vector<TargetFunctional> targets;
  for (std::size_t l = 0; l < J; ++l)
    for (std::size_t m = 0; m < J; ++m)
      targets.push_back(TargetFunctional::elasticity(l, m, x_star, time, data.alternatives[l] + "~" + data.alternatives[m]));
  log << "training rows " << split.train.size() << ", " << targets.size() << " elasticities\n";

  std::vector<Column> columns;

  const ChoiceDataset net_train = split.train.with_features(kApplicationFeatures);
  const auto fitter = ifa_fitter(cfg, nullptr);
  columns.push_back({"ifa", estimate_repeated(net_train, targets, fitter, ifa_config(cfg), cfg.repetitions).estimates});
  log_estimates(log, "ifa", columns.back().estimates);

  const nn::NetworkSpec nn_spec = delta_spec_for(cfg, net_train);
  Column nn_col{"nn_naive", naive_nn_inference(net_train, nn_spec, targets, cfg.level, delta_options(cfg)).estimates};
  if (cfg.nn_bootstrap > 0) {
    const auto boot = efron_bootstrap(
        net_train.size(),
        [&](std::span<const std::size_t> ids) {
          const ChoiceDataset sample = net_train.subset(ids);
          const DeltaModel model = fit_delta(sample, nn_spec, delta_options(cfg));
          std::vector<double> out;
          for (const auto& t : targets) {
            double sum = 0.0;
            for (std::size_t i = 0; i < sample.size(); ++i) sum += t.value(predict_delta(model, sample.w_row(i)));
            out.push_back(sum / static_cast<double>(sample.size()));
          }
          return out;
        },
        cfg.nn_bootstrap, derive_seed(cfg.seed, kNetworkBootstrapStream));
    for (std::size_t k = 0; k < targets.size(); ++k) {
      replace_se(nn_col.estimates[k], boot.se[k]);
    }
  }
  log_estimates(log, "nn_naive", nn_col.estimates);
  columns.push_back(std::move(nn_col));

  const DesignSpec design = DesignSpec::uniform(data.free_length(), kApplicationFeatures);
  const MleFit fit = fit_logit_mle(split.train, design);
  Column cl{"cl", design_functionals(fit, design, split.train, targets, cfg.level)};
  const auto boot = efron_bootstrap(
      split.train.size(),
      [&](std::span<const std::size_t> ids) {
        const ChoiceDataset sample = split.train.subset(ids);
        const auto est = design_functionals(fit_logit_mle(sample, design), design, sample, targets, cfg.level);
        std::vector<double> out;
        for (const auto& e : est) out.push_back(e.theta);
        return out;
      },
      cfg.bootstrap, derive_seed(cfg.seed, kBootstrapStream));
  for (std::size_t k = 0; k < targets.size(); ++k) {
    replace_se(cl.estimates[k], boot.se[k]);
  }
  if (boot.failures > 0) log << "cl bootstrap: " << boot.failures << " failed refits skipped\n";
  log_estimates(log, "cl", cl.estimates);
  columns.push_back(std::move(cl));

  {
    auto f = open_out(run.file("elasticities.csv"));
    f << "estimator,row,column,elasticity,se\n";
    for (const auto& c : columns)
      for (std::size_t k = 0; k < targets.size(); ++k)
        f << c.name << ',' << data.alternatives[targets[k].row()] << ',' << data.alternatives[targets[k].column()]
          << ',' << num(c.estimates[k].theta) << ',' << num(c.estimates[k].se) << '\n';
  }
  auto md = open_out(run.file("elasticities.md"));
  md << "# Travel-time elasticities at the mean attributes\n\n"
     << "Entry (row l, column m): percentage change in the probability of l after a one percent increase in the "
        "travel time of m. Standard errors in brackets.\n";
  for (const auto& c : columns) {
    md << "\n## " << c.name << "\n\n|";
    for (const auto& a : data.alternatives) md << " | " << a;
    md << " |\n|---";
    for (std::size_t m = 0; m < J; ++m) md << "|---:";
    md << "|\n";
    for (std::size_t l = 0; l < J; ++l) {
      md << "| " << data.alternatives[l];
      for (std::size_t m = 0; m < J; ++m) {
        const auto& e = c.estimates[l * J + m];
        md << " | " << fixed(e.theta) << " (" << fixed(e.se) << ")";
      }
      md << " |\n";
    }
  }
  log << "outputs written to " << run.dir.string() << '\n';
}

}  // namespace hetlogit::app
