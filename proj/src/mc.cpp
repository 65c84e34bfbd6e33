#include "hetlogit/mc.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <mutex>
#include <ostream>
#include <sstream>

#include "hetlogit/errors.hpp"
#include "hetlogit/parallel.hpp"
#include "hetlogit/random.hpp"
#include "hetlogit/stats.hpp"
#include "hetlogit/structured.hpp"

namespace hetlogit::mc {

namespace {

std::vector<TargetFunctional> slope_targets(const std::vector<std::string>& attributes) {
  std::vector<TargetFunctional> out;
  for (std::size_t k = 0; k < attributes.size(); ++k)
    out.push_back(TargetFunctional::average_coefficient(k, attributes[k]));
  return out;
}

std::string fmt(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  if (ec != std::errc()) return "nan";
  return std::string(buf, ptr);
}

double parse_double(const std::string& s) {
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) throw DataError("cannot parse number '" + s + "'");
  return v;
}

std::string sanitize(std::string s) {
  for (auto& c : s)
    if (c == ',' || c == '\n' || c == '\r') c = ';';
  return s;
}

}  // namespace

SwissmetroScenario::SwissmetroScenario(ChoiceDataset population, std::vector<std::string> network_features,
                                       double fraction, std::optional<std::uint64_t> fixed_subset_seed)
    : population_(std::move(population)),
      network_features_(std::move(network_features)),
      fraction_(fraction),
      fixed_subset_seed_(fixed_subset_seed) {
  population_.validate();
  theta_true_ = true_theta(population_, SwissmetroTruth(population_.features), targets());
}

std::vector<TargetFunctional> SwissmetroScenario::targets() const { return slope_targets(population_.attributes); }

ReplicateData SwissmetroScenario::draw(std::uint64_t replicate_seed) const {
  ChoiceDataset pop = population_;
  simulate_choices(pop, SwissmetroTruth(pop.features), derive_seed(replicate_seed, 0));
  const auto ids =
      draw_subset(pop.size(), fraction_, fixed_subset_seed_ ? *fixed_subset_seed_ : derive_seed(replicate_seed, 1));
  ReplicateData out;
  out.estimation = pop.subset(ids).with_features(network_features_);
  out.population = pop.with_features(network_features_);
  out.theta_true = theta_true_;
  return out;
}

LinearScenario::LinearScenario(std::size_t n) { dgp_.n = n; }

std::vector<TargetFunctional> LinearScenario::targets() const { return slope_targets({"x1", "x2"}); }

ReplicateData LinearScenario::draw(std::uint64_t replicate_seed) const {
  ReplicateData out;
  out.estimation = dgp_.draw(replicate_seed);
  out.population = out.estimation;
  const Eigen::VectorXd theta = dgp_.theta();
  out.theta_true.assign(theta.data(), theta.data() + theta.size());
  return out;
}

DesignSpec LinearScenario::oracle_design() const { return DesignSpec::uniform(4, LinearDgp::feature_names()); }

EstimatorOutput DesignEstimator::run(const Context& ctx) const {
  const MleFit fit = fit_logit_mle(ctx.data.estimation, design_);
  EstimatorOutput out;
  out.estimates = design_functionals(fit, design_, ctx.data.population, ctx.targets, ctx.level);
  return out;
}

IfaEstimator::IfaEstimator(IfaSettings settings) : settings_(std::move(settings)) {
  if (settings_.repetitions < 1) throw ConfigError("repetition count must be at least 1");
}

std::string IfaEstimator::name() const { return "ifa_lambda_" + fmt(settings_.lambda_l2); }

EstimatorOutput IfaEstimator::run(const Context& ctx) const {
  const NetworkNuisanceFitter fitter(settings_.delta_spec, settings_.lambda_spec, settings_.lambda_l2,
                                     settings_.diag_ridge, settings_.delta_options, ctx.delta_cache);
  EstimateConfig config;
  config.folds = settings_.folds;
  config.level = ctx.level;
  config.aggregation = settings_.aggregation;
  config.seed = ctx.seed;
  std::vector<EstimateResult> runs;
  runs.push_back(estimate(ctx.data.estimation, ctx.targets, fitter, config));
  bool repeat = settings_.repetitions > 1;
  if (repeat && settings_.repeat_mode == RepeatMode::outlier_triggered) {
    repeat = false;
    for (const auto& e : runs.front().estimates) repeat = repeat || e.outlier;
  }
  EstimatorOutput out;
  if (repeat) {
    for (std::size_t r = 1; r < settings_.repetitions; ++r) {
      EstimateConfig c = config;
      c.seed = repetition_seed(ctx.seed, r);
      runs.push_back(estimate(ctx.data.estimation, ctx.targets, fitter, c));
    }
    std::vector<std::vector<ThetaEstimate>> per_rep;
    for (const auto& r : runs) per_rep.push_back(r.estimates);
    out.estimates = combine_repetitions(per_rep, ctx.level);
  } else {
    out.estimates = runs.front().estimates;
  }
  out.repetitions = runs.size();
  out.mse_train = 0.0;
  out.mse_test = 0.0;
  for (const auto& r : runs) {
    out.mse_train += r.mse_train / static_cast<double>(runs.size());
    out.mse_test += r.mse_test / static_cast<double>(runs.size());
  }
  return out;
}

EstimatorOutput NaiveNnEstimator::run(const Context& ctx) const {
  nn::NetworkSpec spec = spec_;
  spec.input_dim = ctx.data.estimation.num_features();
  spec.output_dim = ctx.data.estimation.free_length();
  spec.seed = ctx.seed;
  EstimatorOutput out;
  out.estimates = naive_nn_inference(ctx.data.estimation, spec, ctx.targets, ctx.level, options_).estimates;
  return out;
}

double Record::ci_low() const { return theta_hat - stats::normal_critical(level) * se; }
double Record::ci_high() const { return theta_hat + stats::normal_critical(level) * se; }
bool Record::covered() const { return ci_low() <= theta_true && theta_true <= ci_high(); }
bool Record::rejected() const { return std::abs(theta_hat / se) > stats::normal_critical(level); }
bool Record::outlier() const { return !(se <= kOutlierStandardError); }

std::vector<Record> run_replicate(std::size_t replicate, const McConfig& config, const Scenario& scenario,
                                  const std::vector<std::shared_ptr<const Estimator>>& roster) {
  const std::uint64_t seed = derive_seed(config.seed, replicate);
  const ReplicateData data = scenario.draw(seed);
  const auto targets = scenario.targets();
  Context ctx{data, targets, derive_seed(seed, 2), config.level, std::make_shared<DeltaCache>()};
  std::vector<Record> out;
  for (const auto& est : roster) {
    std::vector<Record> rows(targets.size());
    for (std::size_t t = 0; t < targets.size(); ++t) {
      rows[t].replicate = replicate;
      rows[t].estimator = est->name();
      rows[t].target = targets[t].label();
      rows[t].theta_true = data.theta_true[t];
      rows[t].level = config.level;
    }
    try {
      const EstimatorOutput res = est->run(ctx);
      if (res.estimates.size() != targets.size()) throw EstimationError("estimator returned the wrong number of targets");
      for (std::size_t t = 0; t < targets.size(); ++t) {
        rows[t].theta_hat = res.estimates[t].theta;
        rows[t].se = res.estimates[t].se;
        rows[t].mse_train = res.mse_train;
        rows[t].mse_test = res.mse_test;
        rows[t].repetitions = res.repetitions;
      }
    } catch (const std::exception& e) {
      for (auto& r : rows) r.error = sanitize(e.what()).empty() ? "failed" : sanitize(e.what());
    }
    out.insert(out.end(), rows.begin(), rows.end());
  }
  return out;
}

std::vector<Record> run(const McConfig& config, const Scenario& scenario,
                        const std::vector<std::shared_ptr<const Estimator>>& roster,
                        const std::function<void(std::size_t)>& progress) {
  std::vector<std::vector<Record>> per(config.replicates);
  std::mutex mutex;
  std::size_t done = 0;
  parallel_for(config.replicates, [&](std::size_t r) {
    per[r] = run_replicate(r, config, scenario, roster);
    if (progress) {
      const std::lock_guard<std::mutex> lock(mutex);
      progress(++done);
    }
  });
  std::vector<Record> out;
  for (auto& p : per) out.insert(out.end(), p.begin(), p.end());
  return out;
}

Report summarize(const std::vector<Record>& records) {
  std::vector<std::pair<std::string, std::string>> cells;
  for (const auto& r : records) {
    const std::pair<std::string, std::string> key{r.estimator, r.target};
    if (std::find(cells.begin(), cells.end(), key) == cells.end()) cells.push_back(key);
  }
  const double nan = std::numeric_limits<double>::quiet_NaN();
  Report report;
  for (const auto& [estimator, target] : cells) {
    std::vector<double> bias, se, cov, rej, out, mtr, mte;
    std::size_t failures = 0;
    for (const auto& r : records) {
      if (r.estimator != estimator || r.target != target) continue;
      if (!r.ok()) {
        ++failures;
        continue;
      }
      bias.push_back(r.theta_hat - r.theta_true);
      se.push_back(r.se);
      cov.push_back(r.covered() ? 1.0 : 0.0);
      rej.push_back(r.rejected() ? 1.0 : 0.0);
      out.push_back(r.outlier() ? 1.0 : 0.0);
      if (std::isfinite(r.mse_train)) mtr.push_back(r.mse_train);
      if (std::isfinite(r.mse_test)) mte.push_back(r.mse_test);
    }
    auto mean_or_nan = [&](const std::vector<double>& v) { return v.empty() ? nan : stats::mean(v); };
    auto median_or_nan = [&](const std::vector<double>& v) { return v.empty() ? nan : stats::lower_median(v); };
    SummaryRow m{estimator, target, bias.size(), failures, mean_or_nan(bias), mean_or_nan(se), mean_or_nan(cov),
                 mean_or_nan(rej), mean_or_nan(out), mean_or_nan(mtr), mean_or_nan(mte)};
    SummaryRow d = m;
    d.bias = median_or_nan(bias);
    d.se = median_or_nan(se);
    d.mse_train = median_or_nan(mtr);
    d.mse_test = median_or_nan(mte);
    report.mean_table.push_back(m);
    report.median_table.push_back(d);
  }
  return report;
}

TStatExport export_tstats(const std::vector<Record>& records) {
  TStatExport out;
  for (const auto& r : records) {
    if (!r.ok() || !(r.se > 0.0) || !std::isfinite(r.se) || !std::isfinite(r.theta_hat)) {
      ++out.skipped;
      continue;
    }
    out.rows.push_back({r.replicate, r.estimator, r.target, (r.theta_hat - r.theta_true) / r.se});
  }
  return out;
}

void write_records_csv(std::ostream& out, const std::vector<Record>& records) {
  out << "replicate,estimator,target,theta_true,theta_hat,se,level,mse_train,mse_test,repetitions,error\n";
  for (const auto& r : records) {
    out << r.replicate << ',' << r.estimator << ',' << r.target << ',' << fmt(r.theta_true) << ','
        << fmt(r.theta_hat) << ',' << fmt(r.se) << ',' << fmt(r.level) << ',' << fmt(r.mse_train) << ','
        << fmt(r.mse_test) << ',' << r.repetitions << ',' << sanitize(r.error) << '\n';
  }
}

std::vector<Record> read_records_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw DataError("record file is empty");
  std::vector<Record> out;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<std::string> tok;
    std::string cur;
    std::istringstream ss(line);
    while (std::getline(ss, cur, ',')) tok.push_back(cur);
    if (!line.empty() && line.back() == ',') tok.emplace_back();
    if (tok.size() != 11) throw DataError("record line " + std::to_string(line_no) + " has the wrong field count");
    Record r;
    r.replicate = static_cast<std::size_t>(std::stoull(tok[0]));
    r.estimator = tok[1];
    r.target = tok[2];
    r.theta_true = parse_double(tok[3]);
    r.theta_hat = parse_double(tok[4]);
    r.se = parse_double(tok[5]);
    r.level = parse_double(tok[6]);
    r.mse_train = parse_double(tok[7]);
    r.mse_test = parse_double(tok[8]);
    r.repetitions = static_cast<std::size_t>(std::stoull(tok[9]));
    r.error = tok[10];
    out.push_back(std::move(r));
  }
  return out;
}

void write_table_csv(std::ostream& out, const std::vector<SummaryRow>& rows) {
  out << "estimator,target,replicates,failures,bias,se,coverage,rejection,outlier,mse_train,mse_test\n";
  for (const auto& r : rows) {
    out << r.estimator << ',' << r.target << ',' << r.replicates << ',' << r.failures << ',' << fmt(r.bias) << ','
        << fmt(r.se) << ',' << fmt(r.coverage) << ',' << fmt(r.rejection) << ',' << fmt(r.outlier) << ','
        << fmt(r.mse_train) << ',' << fmt(r.mse_test) << '\n';
  }
}

void write_tstats_csv(std::ostream& out, const TStatExport& t) {
  out << "replicate,estimator,target,t\n";
  for (const auto& r : t.rows) out << r.replicate << ',' << r.estimator << ',' << r.target << ',' << fmt(r.t) << '\n';
}

namespace {

void markdown_table(std::ostream& out, const std::vector<SummaryRow>& rows) {
  out << "| Estimator | Target | Bias | SE | Coverage | Rej. theta=0 | Outliers | MSE(Lambda) train | "
         "MSE(Lambda) test | n | failed |\n";
  out << "|---|---|---|---|---|---|---|---|---|---|---|\n";
  auto cell = [](double v) {
    if (!std::isfinite(v)) return std::string("-");
    std::ostringstream s;
    s.setf(std::ios::fixed);
    s.precision(3);
    s << v;
    return s.str();
  };
  for (const auto& r : rows) {
    out << "| " << r.estimator << " | " << r.target << " | " << cell(r.bias) << " | " << cell(r.se) << " | "
        << cell(r.coverage) << " | " << cell(r.rejection) << " | " << cell(r.outlier) << " | " << cell(r.mse_train)
        << " | " << cell(r.mse_test) << " | " << r.replicates << " | " << r.failures << " |\n";
  }
}

}  // namespace

void write_report_markdown(std::ostream& out, const Report& report, const TStatExport& t) {
  out << "# Monte Carlo summary\n\n## Means over replicates\n\n";
  markdown_table(out, report.mean_table);
  out << "\n## Medians over replicates\n\nBias, SE and MSE are lower medians; coverage, rejection and outlier "
         "columns are shares.\n\n";
  markdown_table(out, report.median_table);
  out << "\n" << t.rows.size() << " t-statistics exported, " << t.skipped << " skipped (failed or SE = 0).\n";
}

void write_outputs(const std::filesystem::path& dir, const std::vector<Record>& records) {
  std::filesystem::create_directories(dir);
  const Report report = summarize(records);
  const TStatExport t = export_tstats(records);
  auto open = [&](const char* name) {
    std::ofstream f(dir / name);
    if (!f) throw DataError("cannot write " + (dir / name).string());
    return f;
  };
  {
    auto f = open("mean_table.csv");
    write_table_csv(f, report.mean_table);
  }
  {
    auto f = open("median_table.csv");
    write_table_csv(f, report.median_table);
  }
  {
    auto f = open("tstats.csv");
    write_tstats_csv(f, t);
  }
  {
    auto f = open("raw_records.csv");
    write_records_csv(f, records);
  }
  {
    auto f = open("report.md");
    write_report_markdown(f, report, t);
  }
}

}  // namespace hetlogit::mc
