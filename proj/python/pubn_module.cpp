#include <pybind11/functional.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "pubn/checks.hpp"
#include "pubn/cli.hpp"
#include "pubn/experiment.hpp"

namespace py = pybind11;
using namespace pubn;

namespace {

Loss loss_named(const std::string& name) { return Loss{loss_kind_from_string(name)}; }

SampleList rows_to_samples(const py::array_t<double, py::array::c_style | py::array::forcecast>& a) {
  if (a.ndim() != 2) throw Error(ErrorKind::InvalidInput, "expected a 2-D array of shape (n, d)");
  const auto r = a.unchecked<2>();
  SampleList out(static_cast<std::size_t>(r.shape(0)));
  for (py::ssize_t i = 0; i < r.shape(0); ++i) {
    out[i].features.resize(static_cast<std::size_t>(r.shape(1)));
    for (py::ssize_t j = 0; j < r.shape(1); ++j) out[i].features[j] = r(i, j);
  }
  return out;
}

py::array_t<double> samples_to_rows(const SampleList& s, std::size_t dim) {
  py::array_t<double> out({static_cast<py::ssize_t>(s.size()), static_cast<py::ssize_t>(dim)});
  auto w = out.mutable_unchecked<2>();
  for (std::size_t i = 0; i < s.size(); ++i) {
    for (std::size_t j = 0; j < dim; ++j) w(i, j) = s[i].features[j];
  }
  return out;
}

ExperimentConfig config_from_text(const std::string& text) {
  std::istringstream in(text);
  ExperimentConfig cfg = load_config(in);
  cfg.validate();
  return cfg;
}

}  // namespace

PYBIND11_MODULE(_pubn, m) {
  m.doc() = "PU learning with biased negative data";

  py::register_exception<Error>(m, "PubnError", PyExc_RuntimeError);

  m.def("sigmoid", &sigmoid);
  m.def(
      "loss", [](const std::string& name, double z) { return loss_value(loss_named(name), z); }, py::arg("name"),
      py::arg("z"));
  m.def(
      "loss_derivative", [](const std::string& name, double z) { return loss_derivative(loss_named(name), z); },
      py::arg("name"), py::arg("z"));

  m.def(
      "metrics",
      [](const std::vector<int>& pred, const std::vector<int>& truth) {
        const Metrics r = evaluate_metrics(pred, truth);
        return py::dict(py::arg("fpr") = r.fpr, py::arg("fnr") = r.fnr, py::arg("error") = r.error);
      },
      py::arg("predictions"), py::arg("truths"));

  m.def(
      "select_eta",
      [](const std::vector<double>& sigma, double pi, double rho, double tau) {
        const EtaSelection s = select_eta(sigma, Priors(pi, rho), tau);
        return py::dict(py::arg("eta") = s.eta, py::arg("target") = s.target, py::arg("included") = s.included);
      },
      py::arg("sigma"), py::arg("pi"), py::arg("rho"), py::arg("tau"));

  // Empirical risks of a linear scorer w.x + b over numpy pools.
  m.def(
      "risk",
      [](const std::string& estimator, py::array_t<double> p, py::array_t<double> bn, py::array_t<double> u,
         double pi, double rho, std::vector<double> weights, double bias, const std::string& loss,
         std::optional<double> gamma, std::optional<double> eta,
         std::optional<std::function<double(std::vector<double>)>> sigma) {
        Scorer g = Scorer::linear(weights.size());
        weights.push_back(bias);
        g.set_parameters(weights);
        const Partition data{rows_to_samples(p), rows_to_samples(bn), rows_to_samples(u)};
        RiskSpec spec;
        spec.estimator = estimator_from_string(estimator);
        spec.loss = loss_named(loss);
        spec.gamma = gamma;
        spec.eta = eta;
        if (spec.eta) spec.tau = 1.0;  // marks the estimator as configured
        SigmaEstimate s;
        if (sigma) {
          auto fn = *sigma;
          s = SigmaEstimate([fn](std::span<const double> x) { return fn(std::vector<double>(x.begin(), x.end())); });
        }
        const RiskBreakdown r = evaluate_risk(spec, data, Priors(pi, rho), g, sigma ? &s : nullptr);
        return py::dict(py::arg("total") = r.total, py::arg("positive_part") = r.positive_part,
                        py::arg("negative_part") = r.negative_part, py::arg("remainder") = r.remainder,
                        py::arg("corrected") = r.corrected);
      },
      py::arg("estimator"), py::arg("p"), py::arg("bn"), py::arg("u"), py::arg("pi"), py::arg("rho"),
      py::arg("weights"), py::arg("bias") = 0.0, py::arg("loss") = "logistic", py::arg("gamma") = py::none(),
      py::arg("eta") = py::none(), py::arg("sigma") = py::none());

  m.def(
      "generate",
      [](const std::string& config_json, std::size_t trial) {
        const ExperimentConfig cfg = config_from_text(config_json);
        const Dataset d = trial_dataset(cfg, trial);
        std::vector<int> labels;
        for (const Sample& s : d.test) labels.push_back(s.label.value_or(-1));
        py::dict out;
        out["P"] = samples_to_rows(d.train.p, d.dim);
        out["bN"] = samples_to_rows(d.train.bn, d.dim);
        out["U"] = samples_to_rows(d.train.u, d.dim);
        out["P_val"] = samples_to_rows(d.valid.p, d.dim);
        out["bN_val"] = samples_to_rows(d.valid.bn, d.dim);
        out["U_val"] = samples_to_rows(d.valid.u, d.dim);
        out["test"] = samples_to_rows(d.test, d.dim);
        out["test_labels"] = py::array_t<int>(static_cast<py::ssize_t>(labels.size()), labels.data());
        out["hash"] = dataset_hash(d);
        return out;
      },
      py::arg("config_json"), py::arg("trial") = 0);

  m.def(
      "run_experiment",
      [](const std::string& config_json) {
        const ExperimentConfig cfg = config_from_text(config_json);
        ExperimentResult r;
        {
          py::gil_scoped_release release;
          r = run_experiment(cfg);
        }
        return summary_json(cfg, r);
      },
      py::arg("config_json"), "Runs the experiment and returns the summary document as a JSON string.");

  m.def(
      "check",
      [](std::uint64_t seed, std::size_t cases) {
        py::list out;
        for (const CheckResult& r :
             {check_decomposition(seed, cases), check_nnpu_ordering(seed + 1, cases), check_endpoints(seed + 2, cases),
              check_eta_rule(seed + 3, cases)}) {
          out.append(py::dict(py::arg("name") = r.name, py::arg("passed") = r.passed, py::arg("detail") = r.detail));
        }
        return out;
      },
      py::arg("seed") = 0, py::arg("cases") = 200);

  m.def(
      "cli",
      [](const std::vector<std::string>& args) {
        std::ostringstream out, err;
        int code = 0;
        {
          py::gil_scoped_release release;
          code = run_cli(args, out, err);
        }
        return py::make_tuple(code, out.str(), err.str());
      },
      py::arg("args"), "Runs a command-line verb in process; returns (exit code, stdout, stderr).");
}
