// Python module: pipeline runs, synthetic economies and a few core routines.

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <map>
#include <sstream>

#include "coinvent/errors.hpp"
#include "coinvent/estimator.hpp"
#include "coinvent/geo.hpp"
#include "coinvent/measures.hpp"
#include "coinvent/model_sim.hpp"
#include "coinvent/netcore.hpp"
#include "coinvent/pipeline.hpp"
#include "coinvent/tables.hpp"

namespace py = pybind11;
using namespace coinvent;

namespace {

template <typename Config>
Config configured(const std::map<std::string, std::string>& settings) {
  Config c;
  for (const auto& [k, v] : settings) c.set(k, v);
  c.validate();
  return c;
}

py::dict resultDict(const EstimationResult& r) {
  py::dict out;
  py::dict coef, se;
  for (std::size_t k = 0; k < r.names.size(); ++k) {
    coef[py::str(r.names[k])] = r.coef(static_cast<Eigen::Index>(k));
    se[py::str(r.names[k])] = r.stdError(r.names[k]);
  }
  out["coef"] = coef;
  out["se"] = se;
  out["r2_within"] = r.r2;
  out["n_obs"] = r.nObs;
  out["n_clusters"] = r.nClusters;
  if (r.effectiveF) {
    out["effective_f"] = r.effectiveF->statistic;
    out["effective_f_critical"] = r.effectiveF->critical;
  }
  if (r.hansenJ) {
    out["hansen_j"] = r.hansenJ->statistic;
    out["hansen_j_p"] = r.hansenJ->pValue;
    out["hansen_j_dof"] = r.hansenJ->dof;
  }
  return out;
}

}  // namespace

PYBIND11_MODULE(_coinvent, m) {
  m.doc() = "Collaboration-network measures, instruments and panel IV estimation";

  auto base = py::register_exception<Error>(m, "Error");
  py::register_exception<ConfigError>(m, "ConfigError", base.ptr());
  py::register_exception<DataError>(m, "DataError", base.ptr());
  py::register_exception<DomainError>(m, "DomainError", base.ptr());
  py::register_exception<EstimationError>(m, "EstimationError", base.ptr());
  py::register_exception<LookupError>(m, "LookupError", base.ptr());

  m.def(
      "simulate",
      [](const std::filesystem::path& out, const std::map<std::string, std::string>& settings) {
        const auto cfg = configured<SyntheticEconomyConfig>(settings);
        const auto econ = simulateEconomy(cfg);
        exportTables(econ.corpus, econ.geo, TableFiles::inDirectory(out));
        return py::dict(py::arg("inventors") = econ.corpus.inventorCount(),
                        py::arg("patents") = econ.corpus.patentCount(), py::arg("true_beta") = econ.trueBeta);
      },
      py::arg("out_dir"), py::arg("settings") = std::map<std::string, std::string>{},
      "Write a synthetic economy's input tables into out_dir.");

  m.def(
      "run_pipeline",
      [](const std::map<std::string, std::string>& settings, bool measure, bool estimate, bool counterfactual) {
        const auto cfg = configured<PipelineConfig>(settings);
        std::ostringstream sink;
        const Logger log(&sink);
        PipelineReport report;
        {
          py::gil_scoped_release release;
          report = runPipeline(cfg, PipelineStages{measure, estimate, counterfactual}, log);
        }
        py::dict out;
        out["manifest"] = report.manifest;
        out["outputs"] = report.outputs;
        out["panel_inventors"] = report.panelInventors;
        if (report.ensemble) out["mean_ratio"] = report.ensemble->summary.meanRatio;
        return out;
      },
      py::arg("settings"), py::arg("measure") = true, py::arg("estimate") = true, py::arg("counterfactual") = false,
      "Run the selected stages; settings use the configuration file keys.");

  m.def(
      "frontiers",
      [](const std::vector<std::vector<InventorId>>& teams, std::size_t inventors, InventorId root, int maxOrder) {
        std::vector<PatentRecord> patents(teams.size());
        for (std::size_t k = 0; k < teams.size(); ++k) {
          patents[k].id = std::to_string(k);
          patents[k].inventors = teams[k];
          std::sort(patents[k].inventors.begin(), patents[k].inventors.end());
        }
        const auto g = buildGraph(patents, inventors, 1);
        return hopSets(g, root, maxOrder).orders;
      },
      py::arg("teams"), py::arg("inventors"), py::arg("root"), py::arg("max_order"),
      "Frontiers N^0..N^L of root in the graph of the given inventor teams.");

  m.def(
      "tsls",
      [](const Eigen::VectorXd& endogenous, const Eigen::MatrixXd& exogenous, const Eigen::MatrixXd& excluded,
         const Eigen::VectorXd& y, const std::vector<int>& clusters) {
        std::vector<std::string> names{"endogenous"};
        for (Eigen::Index k = 0; k < exogenous.cols(); ++k) names.push_back("w" + std::to_string(k));
        return resultDict(tslsFit(endogenous, exogenous, excluded, y, clusters, names));
      },
      py::arg("endogenous"), py::arg("exogenous"), py::arg("excluded"), py::arg("y"), py::arg("clusters"),
      "2SLS with cluster-robust errors, effective F and Hansen J.");

  m.def("effective_f_critical", &effectiveFCritical, py::arg("effective_dof"), py::arg("tau") = 0.10,
        py::arg("alpha") = 0.05);

  m.def(
      "great_circle_km",
      [](double lat1, double lon1, double lat2, double lon2) {
        return greatCircle(GeoPoint{lat1, lon1}, GeoPoint{lat2, lon2});
      },
      py::arg("lat1"), py::arg("lon1"), py::arg("lat2"), py::arg("lon2"));

  m.def(
      "novelty",
      [](const std::vector<std::tuple<std::string, std::string, std::string>>& rows) {
        std::vector<PatentRecord> patents(rows.size());
        for (std::size_t k = 0; k < rows.size(); ++k) {
          patents[k].id = std::get<0>(rows[k]);
          patents[k].primaryCategory = std::get<1>(rows[k]);
          patents[k].applicationDate = Date::parse(std::get<2>(rows[k]));
        }
        return noveltyValues(patents);
      },
      py::arg("patents"), "Novelty 1/rank for (id, subgroup, YYYY-MM-DD) rows.");
}
