#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <sstream>

#include "criteria.hpp"
#include "hetlogit/app.hpp"
#include "hetlogit/choice.hpp"
#include "hetlogit/dgp.hpp"
#include "hetlogit/influence.hpp"
#include "hetlogit/mc.hpp"
#include "hetlogit/mle.hpp"
#include "hetlogit/random.hpp"
#include "hetlogit/stats.hpp"
#include "hetlogit/swissmetro.hpp"

using namespace hetlogit;
namespace fs = std::filesystem;

namespace acceptance {

namespace {

std::string fmt(double v, const char* f = "%.3g") {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

double rel(double a, double b) { return std::abs(a - b) / std::max(1.0, std::max(std::abs(a), std::abs(b))); }

Eigen::MatrixXd random_matrix(Rng& rng, Eigen::Index r, Eigen::Index c, double scale) {
  Eigen::MatrixXd m(r, c);
  for (Eigen::Index j = 0; j < c; ++j)
    for (Eigen::Index i = 0; i < r; ++i) m(i, j) = rng.uniform(-scale, scale);
  return m;
}

double nll(const Eigen::MatrixXd& x, int y, const Eigen::VectorXd& free, std::size_t J, std::size_t ref) {
  return -log_likelihood(y, x, CoefficientBundle::from_free(free, J, ref));
}

Outcome criterion1(const fs::path&) {
  Rng rng(101);
  double worst_score = 0.0, worst_hessian = 0.0;
  for (int rep = 0; rep < 200; ++rep) {
    const std::size_t J = 2 + rng.index(3);
    const std::size_t K = 1 + rng.index(3);
    const std::size_t ref = rng.index(J);
    const auto L = static_cast<Eigen::Index>(J - 1 + K);
    const Eigen::MatrixXd x = random_matrix(rng, static_cast<Eigen::Index>(J), static_cast<Eigen::Index>(K), 2.0);
    const Eigen::VectorXd free = random_matrix(rng, L, 1, 1.5).col(0);
    const int y = static_cast<int>(rng.index(J));
    const auto delta = CoefficientBundle::from_free(free, J, ref);
    const Eigen::VectorXd s = score(y, x, delta);
    const Eigen::MatrixXd z = hessian_target(x, delta);
    const double h = 1e-5;
    for (Eigen::Index a = 0; a < L; ++a) {
      Eigen::VectorXd up = free, dn = free;
      up(a) += h;
      dn(a) -= h;
      worst_score = std::max(worst_score, rel(s(a), (nll(x, y, up, J, ref) - nll(x, y, dn, J, ref)) / (2 * h)));
      const Eigen::VectorXd fd = (score(y, x, CoefficientBundle::from_free(up, J, ref)) -
                                  score(y, x, CoefficientBundle::from_free(dn, J, ref))) /
                                 (2 * h);
      for (Eigen::Index b = 0; b < L; ++b) worst_hessian = std::max(worst_hessian, rel(z(a, b), fd(b)));
    }
  }
  const bool pass = worst_score < 1e-5 && worst_hessian < 1e-5;
  return {pass, "200 instances, max rel error score " + fmt(worst_score) + ", Hessian target " + fmt(worst_hessian) +
                    " (< 1e-5)"};
}

Outcome criterion2(const fs::path&) {
  Rng rng(202);
  double worst = 0.0;
  for (int rep = 0; rep < 100; ++rep) {
    const std::size_t J = 3, K = 3, ref = 2;
    Eigen::MatrixXd xs = random_matrix(rng, 3, 3, 1.0).cwiseAbs();
    xs.array() += 0.1;
    const auto delta = CoefficientBundle::from_free(random_matrix(rng, 5, 1, 1.5).col(0), J, ref);
    const std::size_t l = rng.index(J), m = rng.index(J), t = rng.index(K);
    const double value = TargetFunctional::elasticity(l, m, xs, t, "e").value(delta);
    // d log p_l / d log x_{m,t} by central differences in log x.
    const double h = 1e-5;
    Eigen::MatrixXd up = xs, dn = xs;
    up(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(t)) *= std::exp(h);
    dn(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(t)) *= std::exp(-h);
    const auto li = static_cast<Eigen::Index>(l);
    const double fd = (std::log(choice_probabilities(delta, up)(li)) - std::log(choice_probabilities(delta, dn)(li))) /
                      (2 * h);
    worst = std::max(worst, rel(value, fd));
  }
  return {worst < 1e-5, "100 instances, max rel error " + fmt(worst) + " (< 1e-5)"};
}

// Straight-line evaluation of the fitted fold networks, the orthogonal score
// and the fold aggregation, sharing nothing with the library beyond the
// fitted parameters.
namespace oracle {

std::vector<double> forward(const nn::NetworkSpec& spec, const nn::NetworkParams& p, const std::vector<double>& in) {
  std::vector<double> a = in;
  for (std::size_t layer = 0; layer < p.layers.size(); ++layer) {
    const auto& W = p.layers[layer].weights;
    const auto& b = p.layers[layer].bias;
    std::vector<double> out(static_cast<std::size_t>(W.cols()));
    for (Eigen::Index o = 0; o < W.cols(); ++o) {
      double s = b(o);
      for (Eigen::Index i = 0; i < W.rows(); ++i) s += a[static_cast<std::size_t>(i)] * W(i, o);
      const bool last = layer + 1 == p.layers.size();
      const auto act = last ? spec.output_activation : spec.hidden_activation;
      out[static_cast<std::size_t>(o)] = act == nn::Activation::relu ? std::max(0.0, s) : s;
    }
    a = std::move(out);
  }
  return a;
}

// Gauss-Jordan inverse with partial pivoting.
std::vector<std::vector<double>> invert(std::vector<std::vector<double>> m) {
  const std::size_t n = m.size();
  std::vector<std::vector<double>> inv(n, std::vector<double>(n, 0.0));
  for (std::size_t i = 0; i < n; ++i) inv[i][i] = 1.0;
  for (std::size_t c = 0; c < n; ++c) {
    std::size_t piv = c;
    for (std::size_t r = c + 1; r < n; ++r)
      if (std::abs(m[r][c]) > std::abs(m[piv][c])) piv = r;
    std::swap(m[c], m[piv]);
    std::swap(inv[c], inv[piv]);
    const double d = m[c][c];
    for (std::size_t k = 0; k < n; ++k) {
      m[c][k] /= d;
      inv[c][k] /= d;
    }
    for (std::size_t r = 0; r < n; ++r) {
      if (r == c) continue;
      const double f = m[r][c];
      for (std::size_t k = 0; k < n; ++k) {
        m[r][k] -= f * m[c][k];
        inv[r][k] -= f * inv[c][k];
      }
    }
  }
  return inv;
}

}  // namespace oracle

Outcome criterion3(const fs::path&) {
  const ChoiceDataset data = LinearDgp{60}.draw(303);
  const std::size_t J = 3, K = 2, L = 4, S = 3;
  auto dspec = default_delta_spec(2, L);
  dspec.hidden_widths = {3};
  dspec.max_epochs = 5;
  dspec.batch_size = 10;
  auto lspec = default_lambda_spec(2, L);
  lspec.hidden_widths = {3};
  lspec.max_epochs = 5;
  lspec.batch_size = 10;
  const double ridge = 0.5;
  const NetworkNuisanceFitter fitter(dspec, lspec, 0.0, ridge);
  EstimateConfig cfg;
  cfg.folds = S;
  cfg.seed = 17;
  const std::vector<TargetFunctional> targets{TargetFunctional::average_coefficient(0, "x1"),
                                              TargetFunctional::average_coefficient(1, "x2")};
  const EstimateResult result = estimate(data, targets, fitter, cfg);

  std::vector<std::vector<std::vector<double>>> per_fold(2, std::vector<std::vector<double>>(S));
  for (std::size_t s = 0; s < S; ++s) {
    const auto model = fitter.fit(data, result.plan, s, derive_seed(cfg.seed, 1000 + s));
    const auto& nets = dynamic_cast<const NetworkFoldModel&>(*model);
    for (std::size_t i : result.plan.fold_ids[s]) {
      const std::vector<double> w{data.w(static_cast<Eigen::Index>(i), 0), data.w(static_cast<Eigen::Index>(i), 1)};
      std::vector<double> wd = w;
      const auto& dm = nets.delta_model();
      if (dm.input_shift.size() > 0)
        for (std::size_t d = 0; d < wd.size(); ++d)
          wd[d] = (wd[d] - dm.input_shift(static_cast<Eigen::Index>(d))) / dm.input_scale(static_cast<Eigen::Index>(d));
      const auto free = oracle::forward(dm.spec, dm.net, wd);
      const auto packed = oracle::forward(nets.lambda_model().spec, nets.lambda_model().net, w);
      // Utilities with the last alternative as reference: v_j = alpha_j + x_j' beta.
      double v[3], p[3];
      const auto& x = data.x[i];
      for (std::size_t j = 0; j < J; ++j) {
        v[j] = j < J - 1 ? free[j] : 0.0;
        for (std::size_t k = 0; k < K; ++k) v[j] += x(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(k)) * free[J - 1 + k];
      }
      const double vmax = std::max({v[0], v[1], v[2]});
      const double denom = std::exp(v[0] - vmax) + std::exp(v[1] - vmax) + std::exp(v[2] - vmax);
      for (std::size_t j = 0; j < J; ++j) p[j] = std::exp(v[j] - vmax) / denom;
      // Negative log-likelihood score: -sum_j dv_j/dfree (y_j - p_j).
      std::vector<double> sc(L, 0.0);
      for (std::size_t j = 0; j < J; ++j) {
        const double r = (data.choice[i] == static_cast<int>(j) ? 1.0 : 0.0) - p[j];
        if (j < J - 1) sc[j] -= r;
        for (std::size_t k = 0; k < K; ++k) sc[J - 1 + k] -= x(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(k)) * r;
      }
      std::vector<std::vector<double>> lam(L, std::vector<double>(L));
      std::size_t idx = 0;
      for (std::size_t r = 0; r < L; ++r)
        for (std::size_t c = r; c < L; ++c) lam[r][c] = lam[c][r] = packed[idx++];
      for (std::size_t r = 0; r < L; ++r) lam[r][r] += ridge;
      const auto inv = oracle::invert(lam);
      for (std::size_t t = 0; t < 2; ++t) {
        // H = beta_t, gradient e_{J-1+t}.
        double corr = 0.0;
        for (std::size_t c = 0; c < L; ++c) corr += inv[J - 1 + t][c] * sc[c];
        per_fold[t][s].push_back(free[J - 1 + t] - corr);
      }
    }
  }
  double worst = 0.0;
  std::string detail;
  for (std::size_t t = 0; t < 2; ++t) {
    double theta = 0.0;
    for (std::size_t s = 0; s < S; ++s) {
      double m = 0.0;
      for (double v : per_fold[t][s]) m += v;
      theta += m / static_cast<double>(per_fold[t][s].size()) / static_cast<double>(S);
    }
    double psi = 0.0;
    for (std::size_t s = 0; s < S; ++s) {
      double m = 0.0;
      for (double v : per_fold[t][s]) m += (v - theta) * (v - theta);
      psi += m / static_cast<double>(per_fold[t][s].size()) / static_cast<double>(S);
    }
    const auto& e = result.estimates[t];
    worst = std::max({worst, rel(e.theta, theta), rel(e.psi_variance, psi)});
    detail += e.label + ": theta " + fmt(e.theta, "%.12g") + " vs " + fmt(theta, "%.12g") + ", Psi " +
              fmt(e.psi_variance, "%.12g") + " vs " + fmt(psi, "%.12g") + "; ";
  }
  return {worst < 1e-10 && result.rescued == 0, detail + "max rel diff " + fmt(worst) + " (< 1e-10)"};
}

// Fold models returning fixed coefficients; repetition r uses beta = r + 1 so
// the three repetitions give theta_r = 1, 2, 3 with Psi_r = 0.
class FixedFold final : public FoldModel {
 public:
  explicit FixedFold(double beta) : beta_(beta) {}
  CoefficientBundle delta(const Eigen::VectorXd&) const override {
    return CoefficientBundle::from_free(Eigen::Vector3d(0.0, 0.0, beta_), 3, 2);
  }
  LambdaInverse lambda_inverse(const Eigen::VectorXd&) const override { return {Eigen::Matrix3d::Zero(), 1, 1, false}; }

 private:
  double beta_;
};

class RepetitionFitter final : public NuisanceFitter {
 public:
  explicit RepetitionFitter(std::uint64_t base) : base_(base) {}
  std::unique_ptr<FoldModel> fit(const ChoiceDataset&, const SplitPlan& plan, std::size_t,
                                 std::uint64_t) const override {
    for (std::size_t r = 0; r < 3; ++r)
      if (plan.seed == repetition_seed(base_, r)) return std::make_unique<FixedFold>(static_cast<double>(r + 1));
    throw std::runtime_error("unexpected split seed");
  }

 private:
  std::uint64_t base_;
};

Outcome criterion4(const fs::path&) {
  ChoiceDataset data = LinearDgp{20}.draw(1);
  data.attributes = {"x1"};
  for (auto& x : data.x) x = x.col(0).eval();
  EstimateConfig cfg;
  cfg.seed = 404;
  const auto r = estimate_repeated(data, {TargetFunctional::average_coefficient(0, "b")}, RepetitionFitter(cfg.seed),
                                   cfg, 3);
  const auto& e = r.estimates[0];
  const bool pass = e.theta == 2.0 && e.psi_variance == 1.0;
  return {pass, "theta_r " + fmt(e.repetition_theta[0]) + "," + fmt(e.repetition_theta[1]) + "," +
                    fmt(e.repetition_theta[2]) + " -> theta_med " + fmt(e.theta, "%.17g") + " (2), Psi_med " +
                    fmt(e.psi_variance, "%.17g") + " (1)"};
}

// Oracle and basic logits on the Swissmetro population, shared by criteria 5-7.
const std::vector<mc::Record>& benchmark_records(const fs::path& dir) {
  static std::vector<mc::Record> records;
  static bool done = false;
  if (done) return records;
  const ChoiceDataset pop = ingest_swissmetro(data_file().string()).data;
  const mc::SwissmetroScenario scenario(pop, kSimulationFeatures);
  const std::vector<std::shared_ptr<const mc::Estimator>> roster{
      std::make_shared<mc::DesignEstimator>("oracle", scenario.oracle_design()),
      std::make_shared<mc::DesignEstimator>("basic", DesignSpec::basic(pop.free_length()))};
  mc::McConfig cfg;
  cfg.replicates = 200;
  cfg.seed = 505;
  records = mc::run(cfg, scenario, roster);
  mc::write_outputs(dir, records);
  done = true;
  return records;
}

fs::path benchmark_dir(const fs::path& dir) { return dir.parent_path() / "criterion_5"; }

Outcome criterion5(const fs::path& dir) {
  const auto report = mc::summarize(benchmark_records(benchmark_dir(dir)));
  Outcome o{true, ""};
  int rows = 0;
  for (const auto& row : report.mean_table) {
    if (row.estimator != "oracle") continue;
    ++rows;
    const bool ok = std::abs(row.bias) < 0.05 && row.coverage >= 0.90 && row.coverage <= 0.98 && row.failures == 0;
    o.pass = o.pass && ok;
    o.detail += row.target + ": bias " + fmt(row.bias, "%.4f") + ", coverage " + fmt(row.coverage, "%.3f") + " (" +
                std::to_string(row.replicates) + " ok); ";
  }
  if (rows != 3) o = {false, "expected three oracle targets"};
  return o;
}

Outcome criterion6(const fs::path& dir) {
  const auto report = mc::summarize(benchmark_records(benchmark_dir(dir)));
  Outcome o{true, ""};
  int rows = 0;
  for (const auto& row : report.mean_table) {
    if (row.estimator != "basic") continue;
    ++rows;
    o.pass = o.pass && row.coverage < 0.05 && row.failures == 0;
    o.detail += row.target + ": coverage " + fmt(row.coverage, "%.3f") + ", bias " + fmt(row.bias, "%.3f") + "; ";
  }
  if (rows != 3) o = {false, "expected three basic targets"};
  return o;
}

Outcome criterion7(const fs::path& dir) {
  const auto t = mc::export_tstats(benchmark_records(benchmark_dir(dir)));
  std::map<std::string, std::vector<double>> by_target;
  for (const auto& row : t.rows)
    if (row.estimator == "oracle") by_target[row.target].push_back(row.t);
  Outcome o{by_target.size() == 3, ""};
  for (auto& [target, values] : by_target) {
    const auto ks = stats::ks_test_standard_normal(values);
    o.pass = o.pass && ks.p_value > 0.01;
    o.detail += target + ": KS D " + fmt(ks.statistic, "%.4f") + ", p " + fmt(ks.p_value, "%.3f") + " (n " +
                std::to_string(ks.n) + "); ";
  }
  return o;
}

Outcome criterion10(const fs::path& dir) {
  const auto ingest = ingest_swissmetro(data_file().string());
  const ChoiceDataset& data = ingest.data;
  const auto ids = draw_subset(data.size(), 0.75, 1);
  const ChoiceDataset train = data.subset(ids);
  const auto fit = fit_logit_mle(train, DesignSpec::swissmetro_appendix());
  {
    std::ofstream out(dir / "spec1_report.csv");
    write_mle_report(out, fit);
  }
  std::map<std::string, double> est;
  for (std::size_t p = 0; p < fit.names.size(); ++p) est[fit.names[p]] = fit.gamma(static_cast<Eigen::Index>(p));
  const std::map<std::string, double> reference{{"cost", -0.878}, {"freq", -0.735}, {"time", -1.216}};
  const double reference_ll = -5683.25;
  const bool strict = train.size() == 7234;
  bool pass = data.size() == 9036 && fit.gradient_norm < 1e-8;
  std::string detail = std::to_string(data.size()) + " rows (9036); split " + std::to_string(train.size()) +
                       " rows, " + (strict ? "strict" : "degraded (reference fit used 7234)") + " check; ";
  for (const auto& [name, target] : reference) {
    const double v = est.at(name);
    if (strict) {
      pass = pass && std::abs(v - target) <= 0.05;
    } else {
      pass = pass && (v < 0) == (target < 0) && std::abs(v - target) / std::abs(target) < 0.15;
    }
    detail += name + " " + fmt(v, "%.3f") + " vs " + fmt(target, "%.3f") + " (" +
              fmt(100 * std::abs(v - target) / std::abs(target), "%.1f") + "%); ";
  }
  if (strict) pass = pass && std::abs(fit.log_likelihood - reference_ll) <= 10.0;
  detail += "LL " + fmt(fit.log_likelihood, "%.2f") + " vs " + fmt(reference_ll, "%.2f") + "; max|sum score| " +
            fmt(fit.gradient_norm) + " (< 1e-8)";
  return {pass, detail};
}

// Criterion 11 helpers: run the CLI binary and hash every file it produced.
int run_cli(const std::string& args, const fs::path& log) {
  const std::string cmd = "\"" + cli_binary().string() + "\" " + args + " > \"" + log.string() + "\" 2>&1";
  return std::system(cmd.c_str());
}

std::map<std::string, std::string> hash_tree(const fs::path& root) {
  std::map<std::string, std::string> out;
  if (!fs::exists(root)) return out;
  for (const auto& e : fs::recursive_directory_iterator(root))
    if (e.is_regular_file()) out[fs::relative(e.path(), root).string()] = app::sha256_file(e.path());
  return out;
}

Outcome criterion11(const fs::path& dir) {
  const fs::path data = data_file();
  const fs::path cfg = dir / "tiny.ini";
  {
    std::ofstream out(cfg);
    out << "[run]\nseed = 11\ndata = " << (dir / "clean.csv").string() << "\n\n"
        << "[delta]\nhidden = 4\nepochs = 5\nbatch = 500\n\n"
        << "[lambda]\nhidden = 4\nepochs = 5\nbatch = 500\n\n"
        << "[ifa]\nfolds = 2\nrepetitions = 2\n\n"
        << "[mc]\nreplicates = 2\nscenario = linear\nsize = 400\nestimators = oracle,basic,ifa,nn_naive\n"
        << "lambda_grid = 0,1e-4\n\n"
        << "[estimate]\nbootstrap = 3\nnn_bootstrap = 2\n";
  }
  struct Step {
    std::string name, args;
    fs::path output;
  };
  const std::vector<Step> steps{
      {"prepare", "prepare \"" + data.string() + "\" \"" + (dir / "clean.csv").string() + "\"", dir / "clean.csv"},
      {"mc-run", "mc-run \"" + cfg.string() + "\" --set run.output=" + (dir / "mc").string(), dir / "mc"},
      {"estimate", "estimate \"" + cfg.string() + "\" --set run.output=" + (dir / "est").string(), dir / "est"},
      {"elasticities", "elasticities \"" + cfg.string() + "\" --set run.output=" + (dir / "ela").string(),
       dir / "ela"},
  };
  Outcome o{true, ""};
  for (const auto& step : steps) {
    std::map<std::string, std::string> first;
    bool ok = true;
    std::size_t files = 0;
    for (int pass = 0; pass < 2 && ok; ++pass) {
      const int rc = run_cli(step.args, dir / (step.name + ".log"));
      if (rc != 0) {
        ok = false;
        o.detail += step.name + ": exit status " + std::to_string(rc) + "; ";
        break;
      }
      std::map<std::string, std::string> hashes;
      if (fs::is_directory(step.output)) hashes = hash_tree(step.output);
      else hashes[step.output.filename().string()] = app::sha256_file(step.output);
      if (step.name == "prepare") {
        const fs::path dict = dir / "clean_dictionary.md";
        hashes["clean_dictionary.md"] = app::sha256_file(dict);
      }
      if (pass == 0) {
        first = hashes;
        files = hashes.size();
      } else if (hashes != first) {
        ok = false;
        for (const auto& [f, h] : hashes)
          if (first[f] != h) o.detail += step.name + ": " + f + " differs; ";
      }
    }
    o.pass = o.pass && ok && files > 0;
    if (ok) o.detail += step.name + ": " + std::to_string(files) + " files identical; ";
  }
  return o;
}

}  // namespace

std::vector<Criterion> fast_criteria() {
  return {
      {1, "fast", "analytic score and Hessian target vs finite differences", criterion1},
      {2, "fast", "elasticity identity vs numerical log-derivative", criterion2},
      {3, "fast", "influence estimate vs straight-line reimplementation", criterion3},
      {4, "fast", "repetition-median arithmetic", criterion4},
      {5, "fast", "oracle logit bias and coverage (200 replicates)", criterion5},
      {6, "fast", "basic logit under-coverage (same run)", criterion6},
      {7, "fast", "oracle t-statistics vs standard normal (KS)", criterion7},
      {10, "fast", "Swissmetro ingestion and interacted-intercept logit", criterion10},
      {11, "fast", "CLI determinism (each subcommand run twice)", criterion11},
  };
}

}  // namespace acceptance
