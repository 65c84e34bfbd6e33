#ifndef HETLOGIT_MC_HPP
#define HETLOGIT_MC_HPP

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <limits>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "hetlogit/dataset.hpp"
#include "hetlogit/dgp.hpp"
#include "hetlogit/influence.hpp"
#include "hetlogit/mle.hpp"
#include "hetlogit/nn.hpp"

// Monte Carlo replicates over a roster of estimators, summary tables and
// t-statistic exports.
namespace hetlogit::mc {

// One replicate's data: what the estimators see and what they are scored against.
struct ReplicateData {
  ChoiceDataset estimation;
  ChoiceDataset population;  // averaging frame for design-based benchmarks
  std::vector<double> theta_true;
};

class Scenario {
 public:
  virtual ~Scenario() = default;
  virtual std::vector<TargetFunctional> targets() const = 0;
  virtual ReplicateData draw(std::uint64_t replicate_seed) const = 0;
  // Design of the correctly specified logit benchmark.
  virtual DesignSpec oracle_design() const = 0;
};

// Fixed covariates, fresh Gumbel draws per replicate under the Swissmetro truth.
// theta_true is the mean of beta(w) over the whole population; estimators see
// a fraction of it, redrawn per replicate unless fixed_subset_seed is set.
class SwissmetroScenario final : public Scenario {
 public:
  SwissmetroScenario(ChoiceDataset population, std::vector<std::string> network_features, double fraction = 0.75,
                     std::optional<std::uint64_t> fixed_subset_seed = std::nullopt);
  std::vector<TargetFunctional> targets() const override;
  ReplicateData draw(std::uint64_t replicate_seed) const override;
  DesignSpec oracle_design() const override { return DesignSpec::swissmetro_oracle(); }
  const ChoiceDataset& population() const { return population_; }

 private:
  ChoiceDataset population_;
  std::vector<std::string> network_features_;
  double fraction_;
  std::optional<std::uint64_t> fixed_subset_seed_;
  std::vector<double> theta_true_;
};

// Fresh covariates and choices from LinearDgp each replicate; theta_true exact.
class LinearScenario final : public Scenario {
 public:
  explicit LinearScenario(std::size_t n);
  std::vector<TargetFunctional> targets() const override;
  ReplicateData draw(std::uint64_t replicate_seed) const override;
  DesignSpec oracle_design() const override;

 private:
  LinearDgp dgp_;
};

struct Context {
  const ReplicateData& data;
  const std::vector<TargetFunctional>& targets;
  std::uint64_t seed;  // estimator stream, shared so IFA variants reuse splits
  double level;
  std::shared_ptr<DeltaCache> delta_cache;  // shared by IFA estimators within one replicate
};

struct EstimatorOutput {
  std::vector<ThetaEstimate> estimates;
  double mse_train = std::numeric_limits<double>::quiet_NaN();
  double mse_test = std::numeric_limits<double>::quiet_NaN();
  std::size_t repetitions = 1;
};

class Estimator {
 public:
  virtual ~Estimator() = default;
  virtual std::string name() const = 0;
  virtual EstimatorOutput run(const Context& ctx) const = 0;
};

// Logit MLE with a fixed design; theta averaged over the population frame.
class DesignEstimator final : public Estimator {
 public:
  DesignEstimator(std::string name, DesignSpec design) : name_(std::move(name)), design_(std::move(design)) {}
  std::string name() const override { return name_; }
  EstimatorOutput run(const Context& ctx) const override;

 private:
  std::string name_;
  DesignSpec design_;
};

enum class RepeatMode { outlier_triggered, always };

struct IfaSettings {
  nn::NetworkSpec delta_spec;
  nn::NetworkSpec lambda_spec;
  double lambda_l2 = 0.0;
  double diag_ridge = 0.0;
  std::size_t folds = 5;
  std::size_t repetitions = 5;
  RepeatMode repeat_mode = RepeatMode::outlier_triggered;
  FoldAggregation aggregation = FoldAggregation::mean;
  DeltaFitOptions delta_options;
};

// Influence-function estimator. In outlier-triggered mode a single split is
// used unless one of its standard errors exceeds the outlier threshold, in
// which case R - 1 further splits are added and the medians combined.
class IfaEstimator final : public Estimator {
 public:
  explicit IfaEstimator(IfaSettings settings);
  std::string name() const override;
  EstimatorOutput run(const Context& ctx) const override;
  const IfaSettings& settings() const { return settings_; }

 private:
  IfaSettings settings_;
};

// Network fitted on the full estimation sample with plug-in sandwich standard errors.
class NaiveNnEstimator final : public Estimator {
 public:
  explicit NaiveNnEstimator(nn::NetworkSpec spec, DeltaFitOptions options = {})
      : spec_(std::move(spec)), options_(options) {}
  std::string name() const override { return "nn_naive"; }
  EstimatorOutput run(const Context& ctx) const override;

 private:
  nn::NetworkSpec spec_;
  DeltaFitOptions options_;
};

// Wraps a callable, for tests and ad-hoc estimators.
class FunctionEstimator final : public Estimator {
 public:
  using Fn = std::function<EstimatorOutput(const Context&)>;
  FunctionEstimator(std::string name, Fn fn) : name_(std::move(name)), fn_(std::move(fn)) {}
  std::string name() const override { return name_; }
  EstimatorOutput run(const Context& ctx) const override { return fn_(ctx); }

 private:
  std::string name_;
  Fn fn_;
};

struct Record {
  std::size_t replicate = 0;
  std::string estimator;
  std::string target;
  double theta_true = 0.0;
  double theta_hat = std::numeric_limits<double>::quiet_NaN();
  double se = std::numeric_limits<double>::quiet_NaN();
  double level = 0.95;
  double mse_train = std::numeric_limits<double>::quiet_NaN();
  double mse_test = std::numeric_limits<double>::quiet_NaN();
  std::size_t repetitions = 0;
  std::string error;  // nonempty when the estimator failed

  bool ok() const { return error.empty(); }
  // Derived from the stored primitives only.
  double ci_low() const;
  double ci_high() const;
  bool covered() const;
  bool rejected() const;  // |theta_hat / se| > z
  bool outlier() const;   // se > 5
};

struct McConfig {
  std::size_t replicates = 1000;
  std::uint64_t seed = 1;
  double level = 0.95;
};

// Runs every estimator on one replicate. Estimator failures become records
// carrying the error; the replicate continues.
std::vector<Record> run_replicate(std::size_t replicate, const McConfig& config, const Scenario& scenario,
                                  const std::vector<std::shared_ptr<const Estimator>>& roster);

// Runs replicates 0..replicates-1 in parallel; records ordered by replicate,
// roster position and target. `progress` is called after each finished replicate.
std::vector<Record> run(const McConfig& config, const Scenario& scenario,
                        const std::vector<std::shared_ptr<const Estimator>>& roster,
                        const std::function<void(std::size_t)>& progress = {});

struct SummaryRow {
  std::string estimator;
  std::string target;
  std::size_t replicates = 0;  // successful records
  std::size_t failures = 0;
  double bias = 0.0;
  double se = 0.0;
  double coverage = 0.0;
  double rejection = 0.0;
  double outlier = 0.0;
  double mse_train = 0.0;
  double mse_test = 0.0;
};

struct Report {
  std::vector<SummaryRow> mean_table;
  std::vector<SummaryRow> median_table;  // lower medians of bias, se and MSE; shares as means
};

// Cells are ordered by first appearance. Cells without successful records
// report NaN for every statistic.
Report summarize(const std::vector<Record>& records);

struct TStat {
  std::size_t replicate;
  std::string estimator;
  std::string target;
  double t;
};

struct TStatExport {
  std::vector<TStat> rows;
  std::size_t skipped = 0;  // failed records or SE = 0
};

TStatExport export_tstats(const std::vector<Record>& records);

void write_records_csv(std::ostream& out, const std::vector<Record>& records);
std::vector<Record> read_records_csv(std::istream& in);
void write_table_csv(std::ostream& out, const std::vector<SummaryRow>& rows);
void write_tstats_csv(std::ostream& out, const TStatExport& t);
void write_report_markdown(std::ostream& out, const Report& report, const TStatExport& t);

// Writes mean_table.csv, median_table.csv, tstats.csv, raw_records.csv and report.md.
void write_outputs(const std::filesystem::path& dir, const std::vector<Record>& records);

}  // namespace hetlogit::mc

#endif  // HETLOGIT_MC_HPP
