// Command-line front end. Every subcommand accepts --config FILE followed by
// per-key flags; a flag overrides the file, the file overrides defaults.

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "coinvent/errors.hpp"
#include "coinvent/model_sim.hpp"
#include "coinvent/pipeline.hpp"
#include "coinvent/tables.hpp"

namespace fs = std::filesystem;
using namespace coinvent;

namespace {

struct Overrides {
  std::optional<std::string> configFile;
  std::map<std::string, std::string> values;  // key -> value, from flags
  std::vector<std::string> pairs;             // --set key=value
  std::optional<std::string> inputDir;
};

/// Adds --config, --set and one flag per configuration key.
void addConfigFlags(CLI::App* cmd, Overrides& o, const std::vector<std::pair<std::string, std::string>>& defaults) {
  cmd->add_option("-c,--config", o.configFile, "key=value configuration file");
  cmd->add_option("--set", o.pairs, "override one key: --set key=value (repeatable)");
  if (!defaults.empty() && defaults.front().first == "patents") {
    // Sets every table path to its conventional name inside the directory;
    // applied before the individual path flags.
    cmd->add_option_function<std::string>("--input_dir,--input-dir", [&o](const std::string& v) { o.inputDir = v; },
                                          "directory holding the standard table files");
  }
  for (const auto& [key, value] : defaults) {
    std::string dashed = key;
    std::replace(dashed.begin(), dashed.end(), '_', '-');
    const std::string names = dashed == key ? "--" + key : "--" + key + ",--" + dashed;
    cmd->add_option_function<std::string>(names, [&o, key = key](const std::string& v) { o.values[key] = v; },
                                          "default: " + (value.empty() ? std::string("(empty)") : value));
  }
}

template <typename Config>
void applyOverrides(Config& cfg, const Overrides& o) {
  if (o.inputDir) cfg.set("input_dir", *o.inputDir);
  for (const auto& p : o.pairs) {
    const auto eq = p.find('=');
    if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + p + "'");
    cfg.set(p.substr(0, eq), p.substr(eq + 1));
  }
  for (const auto& [k, v] : o.values) cfg.set(k, v);
}

PipelineConfig pipelineConfig(const Overrides& o) {
  PipelineConfig cfg;
  if (o.configFile) cfg.applyFile(*o.configFile);
  applyOverrides(cfg, o);
  cfg.validate();
  return cfg;
}

int runStages(const Overrides& o, PipelineStages stages, bool counterfactualFromConfig) {
  const PipelineConfig cfg = pipelineConfig(o);
  if (counterfactualFromConfig) stages.counterfactual = cfg.counterfactual;
  fs::create_directories(cfg.outputDir);
  std::ofstream logFile(cfg.outputDir / "run.log");
  Logger log(&std::cerr);
  log.add(&logFile);
  const PipelineReport report = runPipeline(cfg, stages, log);
  std::cout << report.manifest.string() << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Collaboration-network measures, instruments and panel IV estimation"};
  app.require_subcommand(1);
  const auto pipelineKeys = PipelineConfig{}.entries();
  const auto economyKeys = SyntheticEconomyConfig{}.entries();

  Overrides ingestO, measureO, estimateO, counterfactualO, pipelineO, simulateO;
  std::string simulateOut = "synthetic";

  auto* ingestCmd = app.add_subcommand("ingest", "validate the input tables and print a summary");
  addConfigFlags(ingestCmd, ingestO, pipelineKeys);
  auto* measureCmd = app.add_subcommand("measure", "sample selection, measures, panel and Jaccard profiles");
  addConfigFlags(measureCmd, measureO, pipelineKeys);
  auto* estimateCmd = app.add_subcommand("estimate", "OLS and IV tables, first stages, decomposition");
  addConfigFlags(estimateCmd, estimateO, pipelineKeys);
  auto* cfCmd = app.add_subcommand("counterfactual", "random same-firm rewiring ensemble");
  addConfigFlags(cfCmd, counterfactualO, pipelineKeys);
  auto* pipelineCmd = app.add_subcommand("pipeline", "every stage, counterfactual when enabled in the config");
  addConfigFlags(pipelineCmd, pipelineO, pipelineKeys);
  auto* simulateCmd = app.add_subcommand("simulate", "generate a synthetic economy as input tables");
  addConfigFlags(simulateCmd, simulateO, economyKeys);
  simulateCmd->add_option("-o,--out", simulateOut, "output directory for the tables");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : static_cast<int>(ExitCode::config);
  }

  try {
    if (*ingestCmd) {
      const PipelineConfig cfg = pipelineConfig(ingestO);
      const Ingested data = ingest(cfg.inputs, cfg.periods);
      Logger log(&std::cout);
      log("ingest", {{"inventors", std::to_string(data.corpus.inventorCount())},
                     {"patents", std::to_string(data.corpus.patentCount())},
                     {"firms", std::to_string(data.corpus.firmNames.size())},
                     {"establishments", std::to_string(data.corpus.establishmentNames.size())},
                     {"external_citations", std::to_string(data.corpus.externalCitations.size())},
                     {"manufacturing_establishments", std::to_string(data.geo.establishments.size())},
                     {"uas", std::to_string(data.geo.uas.size())}});
      return 0;
    }
    if (*measureCmd) return runStages(measureO, {true, false, false}, false);
    if (*estimateCmd) return runStages(estimateO, {false, true, false}, false);
    if (*cfCmd) return runStages(counterfactualO, {false, false, true}, false);
    if (*pipelineCmd) return runStages(pipelineO, {true, true, false}, true);
    if (*simulateCmd) {
      SyntheticEconomyConfig cfg;
      if (simulateO.configFile) cfg = SyntheticEconomyConfig::load(*simulateO.configFile);
      applyOverrides(cfg, simulateO);
      cfg.validate();
      const SyntheticEconomy economy = simulateEconomy(cfg);
      const fs::path out = simulateOut;
      fs::create_directories(out);
      exportTables(economy.corpus, economy.geo, TableFiles::inDirectory(out));
      {
        std::ofstream conf(out / "economy.txt");
        for (const auto& [k, v] : cfg.entries()) conf << k << '=' << v << '\n';
      }
      {
        std::ofstream truth(out / "truth.tsv");
        truth << "inventor\tperiod\tln_kd\tln_k\tfixed_effect\tu\tln_y\tln_yp\tcollaborators\tsolo_patents\n";
        for (const auto& t : economy.truth) {
          truth << economy.corpus.inventors[t.inventor].id << '\t' << t.period << '\t' << formatNumber(t.lnKD) << '\t'
                << formatNumber(t.lnK) << '\t' << formatNumber(t.fixedEffect) << '\t' << formatNumber(t.u) << '\t'
                << formatNumber(t.lnY) << '\t' << formatNumber(t.lnYp) << '\t' << t.collaborators << '\t'
                << t.soloPatents << '\n';
        }
      }
      Logger log(&std::cerr);
      log("simulate", {{"out", out.string()},
                       {"inventors", std::to_string(economy.corpus.inventorCount())},
                       {"patents", std::to_string(economy.corpus.patentCount())},
                       {"true_beta", formatNumber(economy.trueBeta)},
                       {"planted_movers", std::to_string(economy.plantedMovers)},
                       {"planted_dropouts", std::to_string(economy.plantedDropouts)}});
      return 0;
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return static_cast<int>(e.code());
  } catch (const fs::filesystem_error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return static_cast<int>(ExitCode::data);
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
