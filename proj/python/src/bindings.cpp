#include <sstream>
#include <string>
#include <vector>

#include <pybind11/eigen.h>
#include <pybind11/iostream.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "hetlogit/app.hpp"
#include "hetlogit/choice.hpp"
#include "hetlogit/config.hpp"
#include "hetlogit/dgp.hpp"
#include "hetlogit/errors.hpp"
#include "hetlogit/mle.hpp"
#include "hetlogit/swissmetro.hpp"

namespace py = pybind11;
using namespace hetlogit;

namespace {

py::dict to_dict(const ChoiceDataset& d) {
  const auto n = static_cast<py::ssize_t>(d.size());
  const auto J = static_cast<py::ssize_t>(d.num_alternatives());
  const auto K = static_cast<py::ssize_t>(d.num_attributes());
  py::array_t<double> x({n, J, K});
  auto xv = x.mutable_unchecked<3>();
  for (py::ssize_t i = 0; i < n; ++i)
    for (py::ssize_t j = 0; j < J; ++j)
      for (py::ssize_t k = 0; k < K; ++k) xv(i, j, k) = d.x[static_cast<std::size_t>(i)](j, k);
  py::dict out;
  out["choice"] = py::array_t<int>(n, d.choice.data());
  out["x"] = x;
  out["w"] = Eigen::MatrixXd(d.w);
  out["alternatives"] = d.alternatives;
  out["attributes"] = d.attributes;
  out["features"] = d.features;
  out["reference"] = d.reference;
  return out;
}

DesignSpec design_by_name(const std::string& name, const ChoiceDataset& data) {
  if (name == "basic") return DesignSpec::basic(data.free_length());
  if (name == "appendix") return DesignSpec::swissmetro_appendix();
  if (name == "oracle") return DesignSpec::swissmetro_oracle();
  if (name == "interacted") return DesignSpec::uniform(data.free_length(), kApplicationFeatures);
  throw ConfigError("unknown design '" + name + "' (basic, appendix, oracle, interacted)");
}

}  // namespace

PYBIND11_MODULE(_hetlogit, m) {
  m.doc() = "Heterogeneous-coefficient conditional logit toolkit";

  static py::exception<ConfigError> config_error(m, "ConfigError", PyExc_ValueError);
  static py::exception<DataError> data_error(m, "DataError", PyExc_OSError);
  static py::exception<EstimationError> estimation_error(m, "EstimationError", PyExc_RuntimeError);
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const ConfigError& e) {
      PyErr_SetString(config_error.ptr(), e.what());
    } catch (const DataError& e) {
      PyErr_SetString(data_error.ptr(), e.what());
    } catch (const InputError& e) {
      PyErr_SetString(data_error.ptr(), e.what());
    } catch (const EstimationError& e) {
      PyErr_SetString(estimation_error.ptr(), e.what());
    } catch (const DesignError& e) {
      PyErr_SetString(estimation_error.ptr(), e.what());
    }
  });

  m.def(
      "choice_probabilities",
      [](const Eigen::VectorXd& free, const Eigen::MatrixXd& x, std::size_t reference) {
        const auto J = static_cast<std::size_t>(x.rows());
        if (reference >= J) throw InputError("reference alternative out of range");
        return choice_probabilities(CoefficientBundle::from_free(free, J, reference), x);
      },
      py::arg("free"), py::arg("x"), py::arg("reference"),
      "Logit probabilities for one choice situation; free = (J-1) intercepts then K slopes.");

  m.def(
      "ingest_swissmetro",
      [](const std::string& path) {
        auto r = ingest_swissmetro(path);
        py::dict out = to_dict(r.data);
        py::dict report;
        report["raw_rows"] = r.report.raw_rows;
        report["dropped_unavailable"] = r.report.dropped_unavailable;
        report["dropped_no_choice"] = r.report.dropped_no_choice;
        report["warnings"] = r.report.warnings;
        report["cleaned_input"] = r.report.cleaned_input;
        out["report"] = report;
        return out;
      },
      py::arg("path"), "Cleaned Swissmetro frame as numpy arrays plus the ingestion report.");

  m.def(
      "fit_logit",
      [](const std::string& path, const std::string& design, double train_fraction, std::uint64_t seed) {
        ChoiceDataset data = ingest_swissmetro(path).data;
        if (train_fraction < 1.0) data = data.subset(draw_subset(data.size(), train_fraction, seed));
        const DesignSpec spec = design_by_name(design, data);
        const MleFit fit = fit_logit_mle(data, spec);
        py::dict out;
        out["names"] = fit.names;
        out["estimates"] = Eigen::VectorXd(fit.gamma);
        out["se"] = Eigen::VectorXd(fit.standard_errors());
        out["log_likelihood"] = fit.log_likelihood;
        out["gradient_norm"] = fit.gradient_norm;
        out["iterations"] = fit.iterations;
        out["n"] = fit.n;
        return out;
      },
      py::arg("path"), py::arg("design") = "appendix", py::arg("train_fraction") = 0.75, py::arg("seed") = 1,
      "Newton MLE of a conditional logit on the (optionally split) Swissmetro data.");

  m.def(
      "simulate_linear",
      [](std::size_t n, std::uint64_t seed) {
        LinearDgp dgp;
        dgp.n = n;
        py::dict out = to_dict(dgp.draw(seed));
        out["theta"] = Eigen::VectorXd(dgp.theta());
        return out;
      },
      py::arg("n") = 4000, py::arg("seed") = 0, "One draw of the linear synthetic DGP with its true averages.");

  m.def("sha256_file", [](const std::string& path) { return app::sha256_file(path); }, py::arg("path"));

  m.def("config_defaults", [] {
    std::vector<std::tuple<std::string, std::string, std::string>> out;
    for (const auto& k : config_keys()) out.emplace_back(k.key, k.default_value, k.description);
    return out;
  });

  m.def(
      "run",
      [](const std::string& command, const std::string& config, const std::vector<std::string>& overrides) {
        ConfigValues values;
        values.load_file(config);
        for (const auto& o : overrides) values.apply_override(o);
        std::ostringstream log;
        {
          py::gil_scoped_release release;
          if (command == "mc-run") app::mc_run(values, log);
          else if (command == "estimate") app::estimate(values, log);
          else if (command == "elasticities") app::elasticities(values, log);
          else throw ConfigError("unknown command '" + command + "'");
        }
        return log.str();
      },
      py::arg("command"), py::arg("config"), py::arg("overrides") = std::vector<std::string>{},
      "Runs mc-run, estimate or elasticities; returns the progress log.");

  m.def(
      "prepare",
      [](const std::string& raw, const std::string& out) {
        std::ostringstream log;
        app::prepare(raw, out, log);
        return log.str();
      },
      py::arg("raw"), py::arg("out"));
}
