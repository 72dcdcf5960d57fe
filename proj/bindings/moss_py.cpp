#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "moss/basis.hpp"
#include "moss/dataset.hpp"
#include "moss/eif.hpp"
#include "moss/estimators.hpp"
#include "moss/inference.hpp"
#include "moss/nuisance.hpp"
#include "moss/sim.hpp"
#include "moss/version.hpp"

namespace py = pybind11;
using namespace moss;

namespace {

SurvivalDataset make_dataset(const std::vector<int>& time, const std::vector<int>& event,
                             const std::vector<int>& treatment,
                             const std::vector<std::vector<double>>& covariates,
                             const std::vector<std::string>& covariate_names) {
  SurvivalDataset ds;
  ds.covariate_names = covariate_names;
  const std::size_t n = time.size();
  if (event.size() != n || treatment.size() != n || covariates.size() != n)
    throw data_error("dataset arrays must share their length");
  for (std::size_t i = 0; i < n; ++i) {
    Observation o;
    o.id = static_cast<int>(i + 1);
    o.t_tilde = time[i];
    o.delta = event[i];
    o.a = treatment[i];
    o.w = covariates[i];
    ds.observations.push_back(std::move(o));
    ds.t_max = std::max(ds.t_max, time[i]);
  }
  ds.validate();
  return ds;
}

BasisSpec basis_from(const std::string& json_terms, const SurvivalDataset& ds, bool propensity) {
  if (json_terms.empty())
    return propensity ? BasisSpec::default_propensity(ds.covariate_names)
                      : BasisSpec::default_hazard(ds.covariate_names);
  return BasisSpec::from_json(json_terms);
}

}  // namespace

PYBIND11_MODULE(_moss, m) {
  m.doc() = "counterfactual survival curve estimation: IPCW, EE, iterative and one-step TMLE";
  m.attr("__version__") = kVersion;

  py::register_exception<config_error>(m, "ConfigError");
  py::register_exception<data_error>(m, "DataError");
  py::register_exception<numeric_error>(m, "NumericError");

  py::class_<Observation>(m, "Observation")
      .def_readonly("id", &Observation::id)
      .def_readonly("time", &Observation::t_tilde)
      .def_readonly("event", &Observation::delta)
      .def_readonly("treatment", &Observation::a)
      .def_readonly("covariates", &Observation::w);

  py::class_<SurvivalDataset>(m, "SurvivalDataset")
      .def(py::init(&make_dataset), py::arg("time"), py::arg("event"), py::arg("treatment"),
           py::arg("covariates"), py::arg("covariate_names"))
      .def_property_readonly("n", &SurvivalDataset::n)
      .def_readonly("t_max", &SurvivalDataset::t_max)
      .def_readonly("covariate_names", &SurvivalDataset::covariate_names)
      .def_readonly("dropped_rows", &SurvivalDataset::dropped_rows)
      .def_readonly("observations", &SurvivalDataset::observations);

  m.def(
      "load_csv",
      [](const std::string& path, const std::string& time_col, const std::string& event_col,
         const std::string& treatment_col, const std::vector<std::string>& covariates,
         const std::string& id_col, bool discretize) {
        CsvSchema schema;
        schema.time_col = time_col;
        schema.event_col = event_col;
        schema.treatment_col = treatment_col;
        schema.covariate_cols = covariates;
        schema.id_col = id_col;
        schema.discretize_ceil = discretize;
        return load_csv(path, schema);
      },
      py::arg("path"), py::arg("time_col") = "time", py::arg("event_col") = "event",
      py::arg("treatment_col") = "a", py::arg("covariates") = std::vector<std::string>{},
      py::arg("id_col") = "", py::arg("discretize") = false);

  m.def(
      "preprocess",
      [](const SurvivalDataset& ds, std::optional<int> truncate_at, int rescale) {
        return preprocess(ds, truncate_at, rescale);
      },
      py::arg("dataset"), py::arg("truncate_at") = std::nullopt, py::arg("rescale") = 1);

  py::class_<NuisanceFit>(m, "NuisanceFit");

  py::class_<NuisancePredictions>(m, "NuisancePredictions")
      .def_readonly("arm", &NuisancePredictions::arm)
      .def_readonly("t_max", &NuisancePredictions::t_max)
      .def_readonly("hazard", &NuisancePredictions::hazard)
      .def_readonly("survival", &NuisancePredictions::survival)
      .def_readonly("censor_survival", &NuisancePredictions::censor_surv)
      .def_readonly("censor_survival_left", &NuisancePredictions::censor_surv_left)
      .def_readonly("propensity", &NuisancePredictions::g);

  m.def(
      "fit_nuisance",
      [](const SurvivalDataset& ds, const std::string& hazard_basis,
         const std::string& censor_basis, const std::string& propensity_basis,
         double hazard_clamp, double g_lo, double g_hi) {
        HazardClamp clamp{hazard_clamp, 1.0 - hazard_clamp};
        PropensityBounds bounds{g_lo, g_hi};
        return fit_nuisance(
            ds, basis_from(hazard_basis, ds, false),
            basis_from(censor_basis.empty() ? hazard_basis : censor_basis, ds, false),
            basis_from(propensity_basis, ds, true), clamp, bounds);
      },
      py::arg("dataset"), py::arg("hazard_basis") = "", py::arg("censor_basis") = "",
      py::arg("propensity_basis") = "", py::arg("hazard_clamp") = 1e-5, py::arg("g_lo") = 0.01,
      py::arg("g_hi") = 0.99);

  m.def("predict_matrices", &predict_matrices, py::arg("fit"), py::arg("dataset"),
        py::arg("arm"));

  py::class_<TargetingTrace>(m, "TargetingTrace")
      .def_readonly("exit_reason", &TargetingTrace::exit_reason)
      .def_property_readonly("iterations",
                             [](const TargetingTrace& t) { return t.iterations.size(); })
      .def_property_readonly("loglik_path", [](const TargetingTrace& t) {
        std::vector<double> ll;
        for (const auto& it : t.iterations) ll.push_back(it.loglik);
        return ll;
      });

  py::class_<CurveEstimate>(m, "CurveEstimate")
      .def_readonly("method", &CurveEstimate::method)
      .def_readonly("arm", &CurveEstimate::arm)
      .def_readonly("psi", &CurveEstimate::psi)
      .def_readonly("converged", &CurveEstimate::converged)
      .def_property_readonly(
          "eif", [](const CurveEstimate& c) { return c.eif ? py::cast(*c.eif) : py::none(); })
      .def_property_readonly(
          "trace",
          [](const CurveEstimate& c) { return c.trace ? py::cast(*c.trace) : py::none(); })
      .def("monotone", &CurveEstimate::monotone, py::arg("tol") = 1e-12);

  m.def("kaplan_meier", &kaplan_meier, py::arg("dataset"), py::arg("arm"));
  m.def("plugin_curve", &plugin_curve, py::arg("predictions"));
  m.def("ipcw", &ipcw, py::arg("predictions"), py::arg("dataset"));
  m.def("ee", &ee, py::arg("predictions"), py::arg("dataset"));

  m.def(
      "tmle_iterative_curve",
      [](const NuisancePredictions& pred, const SurvivalDataset& ds, int max_iter, double tol) {
        return tmle_curve_iterative(pred, ds, IterativeTmleOptions{max_iter, tol});
      },
      py::arg("predictions"), py::arg("dataset"), py::arg("max_iter") = 50,
      py::arg("tol") = 1e-3);

  m.def(
      "tmle_one_step",
      [](const NuisancePredictions& pred, const SurvivalDataset& ds, double step_bound,
         double stop_norm, const std::string& penalty, int max_iter) {
        OneStepOptions opts;
        opts.step_bound = step_bound;
        opts.stop_norm = stop_norm;
        opts.max_iter = max_iter;
        if (penalty == "l2") {
          opts.penalty = Penalty::L2;
        } else if (penalty == "l1") {
          opts.penalty = Penalty::L1;
        } else {
          throw config_error("penalty must be 'l1' or 'l2'");
        }
        return tmle_one_step(pred, ds, opts);
      },
      py::arg("predictions"), py::arg("dataset"), py::arg("step_bound") = 0.01,
      py::arg("stop_norm") = 1e-3, py::arg("penalty") = "l2", py::arg("max_iter") = 500);

  py::class_<BandResult>(m, "BandResult")
      .def_readonly("alpha", &BandResult::alpha)
      .def_readonly("psi", &BandResult::psi)
      .def_readonly("se", &BandResult::se)
      .def_readonly("pointwise_quantile", &BandResult::pointwise_quantile)
      .def_readonly("simultaneous_quantile", &BandResult::simultaneous_quantile)
      .def_readonly("lo_pointwise", &BandResult::lo_pw)
      .def_readonly("hi_pointwise", &BandResult::hi_pw)
      .def_readonly("lo_simultaneous", &BandResult::lo_simul)
      .def_readonly("hi_simultaneous", &BandResult::hi_simul)
      .def_readonly("covariance", &BandResult::sigma);

  m.def("pointwise_ci", &pointwise_ci, py::arg("eif"), py::arg("psi"), py::arg("alpha") = 0.05);
  m.def("simultaneous_band", &simultaneous_band, py::arg("eif"), py::arg("psi"),
        py::arg("alpha") = 0.05, py::arg("mc_draws") = 10000, py::arg("seed") = 1,
        py::arg("threads") = 1);
  m.def("normal_quantile", &normal_quantile, py::arg("p"));

  m.def(
      "inverse_weight_summary",
      [](const NuisancePredictions& pred) {
        py::list rows;
        for (const auto& r : inverse_weight_summary(pred)) {
          py::dict d;
          d["t"] = r.t;
          d["mean"] = r.mean;
          d["sd"] = r.sd;
          d["min"] = r.min;
          d["q25"] = r.q25;
          d["q75"] = r.q75;
          d["max"] = r.max;
          rows.append(d);
        }
        return rows;
      },
      py::arg("predictions"));

  m.def(
      "simulate",
      [](int n, std::uint64_t seed) {
        sim::DgpConfig cfg;
        cfg.n = n;
        cfg.seed = seed;
        return sim::simulate(cfg);
      },
      py::arg("n"), py::arg("seed") = 1);

  m.def(
      "oracle_curve",
      [](int arm, int t_max, int draws) {
        return sim::oracle_curve(sim::DgpConfig{}, arm, t_max, draws);
      },
      py::arg("arm"), py::arg("t_max") = 21, py::arg("draws") = 1000000);

  m.def(
      "run_method",
      [](const std::string& method, const SurvivalDataset& ds, const NuisancePredictions& pred) {
        return sim::run_method(method, ds, pred);
      },
      py::arg("method"), py::arg("dataset"), py::arg("predictions"));
}
