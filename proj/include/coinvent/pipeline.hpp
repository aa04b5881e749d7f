#pragma once

// End-to-end orchestration: ingestion, sample selection, measures, panel
// assembly, estimation, diagnostics and report files.

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "coinvent/counterfactual.hpp"
#include "coinvent/estimator.hpp"
#include "coinvent/geo.hpp"
#include "coinvent/measures.hpp"
#include "coinvent/netcore.hpp"
#include "coinvent/records.hpp"
#include "coinvent/tables.hpp"

namespace coinvent {

/// Run settings. The key=value file uses the keys listed by entries().
struct PipelineConfig {
  TableFiles inputs = TableFiles::inDirectory("data");
  std::filesystem::path panelFile;  // `estimate` reads this instead of the tables when set
  PeriodScheme periods;
  ValueMetric metric = ValueMetric::quality;
  QualityOptions quality;
  NeighborhoodRadii radii;
  double uaBufferKm = 10.0;
  int frontierOrder = 5;  // N^l must be non-empty up to this order
  std::vector<int> instrumentOrders{3, 4, 5};
  FeTransform transform = FeTransform::within;
  bool ipcClassEffects = true;
  FirmControls firmControls = FirmControls::none;
  bool smallSample = true;
  double ciLevel = 0.95;
  bool jaccardIncludeSelf = false;
  bool counterfactual = false;
  std::size_t counterfactualDraws = 1000;
  RewireLevel counterfactualLevel = RewireLevel::firm;
  bool counterfactualPerPeriod = true;
  std::uint64_t seed = 1;
  std::filesystem::path outputDir = "coinvent-out";

  /// Throws ConfigError on out-of-range settings.
  void validate() const;
  /// Unknown keys and malformed values raise ConfigError.
  void set(const std::string& key, const std::string& value);
  /// Applies every key=value line ('#' starts a comment).
  void apply(std::istream& in, const std::string& source = "config");
  void applyFile(const std::filesystem::path& path);
  std::vector<std::pair<std::string, std::string>> entries() const;
  /// FNV-1a 64 over the canonical entries, output_dir excluded.
  std::uint64_t hash() const;
};

/// FNV-1a 64-bit hash.
std::uint64_t fnv1a(std::string_view bytes, std::uint64_t state = 0xcbf29ce484222325ULL);
std::string hex64(std::uint64_t v);

/// Key=value log line writer.
class Logger {
 public:
  explicit Logger(std::ostream* sink = nullptr) : sink_(sink) {}
  void add(std::ostream* sink) { extra_ = sink; }
  void operator()(const std::string& event, std::initializer_list<std::pair<std::string, std::string>> fields) const;

 private:
  std::ostream* sink_;
  std::ostream* extra_ = nullptr;
};

/// One panel period: its graph, k^D of every node, current scopes and the
/// membership index.
struct PeriodNetwork {
  int period = 1;
  CollaborationGraph graph;
  std::vector<double> kD;                // NaN for inventors without collaborators
  std::vector<std::vector<int>> scopes;  // S_jt
};

PeriodNetwork buildPeriodNetwork(const Corpus& corpus, std::span<const double> values, int period);

/// Exclusion rules in the order they are checked; an inventor is counted
/// under the first rule it violates.
inline const std::vector<std::string>& exclusionRules() {
  static const std::vector<std::string> rules{"unbalanced",     "establishment_change", "no_collaborator",
                                              "nonpositive_output", "nonpositive_kd",  "empty_frontier",
                                              "nonpositive_instrument"};
  return rules;
}

struct SampleSelection {
  std::vector<InventorId> panel;  // sorted
  std::vector<std::pair<InventorId, std::string>> excluded;
  std::vector<std::size_t> counts;  // per exclusionRules() entry
  /// Frontiers N^0..N^L of each panel inventor in periods 1 and 2, parallel to `panel`.
  std::vector<std::array<HopSets, 2>> hops;
};

/// Applies the panel rules to every inventor of the corpus. Throws DataError
/// with the per-rule breakdown when nobody survives.
SampleSelection selectSample(const Corpus& corpus, std::span<const double> values,
                             const std::array<PeriodNetwork, 2>& networks, int frontierOrder,
                             std::span<const int> instrumentOrders);

struct PanelBuild {
  std::vector<double> values;
  std::array<PeriodNetwork, 2> networks;
  SampleSelection selection;
  std::vector<InventorPeriodMeasures> measures;        // panel inventors, periods 1 and 2
  std::vector<NeighborhoodCovariates> neighborhoods;  // parallel to measures
  Panel panel;
  /// Jaccard profile J^0..J^L per measures row.
  std::vector<std::vector<std::optional<double>>> jaccard;
  std::size_t unlocated = 0;  // panel inventors without a period-1 location
};

/// Per-patent values for the configured metric.
std::vector<double> patentValues(const Corpus& corpus, const PipelineConfig& config);

PanelBuild buildPanel(const Corpus& corpus, const GeoInputs& geo, const PipelineConfig& config);

/// Panel rows as TSV (columns: inventor period ln_y ln_yp ln_yq ln_kd ln_k
/// ln_k2 first_patent <covariates> ipc_class cluster <lnKD_IVl...>
/// [ln_f ln_sf ln_e ln_se]) and back.
void writePanel(std::ostream& out, const Panel& panel);
Panel readPanel(const std::filesystem::path& path);

struct EstimationSuite {
  Design design;
  EstimationResult ols;
  std::vector<EstimationResult> iv;  // all orders first, then each single order
  std::optional<Decomposition> decomposition;
};

EstimationSuite estimateSuite(const Panel& panel, const PipelineConfig& config);

/// Aligned text table: coefficients with standard errors in parentheses,
/// then effective F, its critical value, Hansen J p-value, R^2, N, clusters.
void writeEstimateTable(std::ostream& out, const EstimationSuite& suite);
/// Long form: model term coef se.
void writeEstimateTsv(std::ostream& out, const EstimationSuite& suite);
/// Long form: model row col value.
void writeVcvTsv(std::ostream& out, const EstimationSuite& suite);
/// First-stage coefficients of every IV column (aligned text and long TSV).
void writeFirstStageTable(std::ostream& out, const EstimationSuite& suite);
void writeFirstStageTsv(std::ostream& out, const EstimationSuite& suite);

struct PipelineStages {
  bool measure = true;
  bool estimate = true;
  bool counterfactual = false;
};

struct PipelineReport {
  std::filesystem::path manifest;
  std::vector<std::filesystem::path> outputs;
  std::optional<EstimationSuite> estimates;
  std::optional<EnsembleResult> ensemble;
  std::size_t panelInventors = 0;
};

/// Runs the requested stages and writes their files plus manifest.tsv into
/// the output directory. On failure the manifest is written with
/// status=failed and the error is rethrown.
PipelineReport runPipeline(const PipelineConfig& config, const PipelineStages& stages, const Logger& log);

}  // namespace coinvent
