#pragma once

// Random rewiring of collaborators within firms (or establishments) and the
// ensemble of OLS refits that measures how much of the collaboration effect
// survives when the actual partners are replaced by random colleagues.

#include <cstdint>
#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "coinvent/estimator.hpp"
#include "coinvent/netcore.hpp"
#include "coinvent/records.hpp"

namespace coinvent {

enum class RewireLevel { firm, establishment };

/// Draws required from one group: `count` members of `group` taken from
/// `eligible` (active group members outside the exclusion set, sorted).
struct RewireRequirement {
  int group = kNoLabel;
  std::size_t count = 0;
  std::vector<InventorId> eligible;
};

/// Per-inventor rewiring constraint of one period. Collaborators whose group
/// is unknown form their own group (label kNoLabel) drawn from the active
/// inventors with unknown group.
struct RewireConstraint {
  RewireLevel level = RewireLevel::firm;
  int period = 1;
  std::vector<InventorId> inventors;                      // sorted
  std::vector<std::vector<RewireRequirement>> requirements;  // parallel to inventors
  std::vector<std::vector<InventorId>> exclusion;         // i, N, N^1, N^2 sorted; parallel

  /// n^A_it keyed by (inventor, group).
  std::map<std::pair<InventorId, int>, std::size_t> perGroupCounts() const;
  /// Position of i in `inventors`, or npos.
  std::size_t indexOf(InventorId i) const;
  static constexpr std::size_t npos = static_cast<std::size_t>(-1);
};

/// Builds the constraint for the given inventors, each of which must be a
/// node of g with at least one collaborator.
RewireConstraint makeConstraint(const Corpus& corpus, const CollaborationGraph& g,
                                std::span<const InventorId> inventors, RewireLevel level);

struct RewireDraw {
  std::map<InventorId, std::vector<InventorId>> collaborators;  // each set sorted
  std::vector<InventorId> infeasible;  // inventors whose pool was too small
};

/// One counterfactual assignment: every inventor receives exactly the
/// required number of members of each group, uniformly without replacement
/// from the eligible pool. Inventors are processed in ascending order from a
/// single stream seeded by `seed`.
RewireDraw rewireOnce(const RewireConstraint& constraint, std::uint64_t seed);

/// k^D of inventor i in `period` computed over an arbitrary collaborator set:
/// the mean over the set of Σ g_p / |G_p| for their patents not shared with i.
double counterfactualKd(const Corpus& corpus, std::span<const double> values, InventorId i, int period,
                        std::span<const InventorId> collaborators);

/// OLS coefficient on lnKD after replacing each row's lnKD with ln of the
/// supplied k^D (keyed by inventor id and period). Inventors with a missing
/// or non-positive value in either period are dropped; the count is
/// returned alongside.
std::pair<double, std::size_t> counterfactualBeta(const Panel& panel, const DesignSpec& spec,
                                                  const std::map<std::pair<std::string, int>, double>& kD);

struct EnsembleOptions {
  std::size_t draws = 1000;
  std::uint64_t seed = 1;
  /// Redraw collaborators in each period; otherwise the period-1 draw is
  /// kept and evaluated with the drawn inventors' period-2 output.
  bool resamplePerPeriod = true;
  unsigned threads = 1;
  double maxSkipRate = 0.01;
};

struct EnsembleInputs {
  const Corpus* corpus = nullptr;
  std::span<const double> values;
  Panel panel;
  DesignSpec spec;       // controls of the OLS refit; instrument orders are ignored
  double betaHat = 0.0;  // IV estimate on the actual network
  RewireConstraint periodOne;
  RewireConstraint periodTwo;
};

struct EnsembleDraw {
  std::size_t index = 0;
  double betaTilde = 0.0;
  double ratio = 0.0;
  std::size_t droppedInventors = 0;
  bool skipped = false;
  std::string reason;
};

struct EnsembleSummary {
  std::size_t completed = 0;
  std::size_t skipped = 0;
  double meanBeta = 0.0;
  double meanRatio = 0.0;
  double sdRatio = 0.0;
  double q05 = 0.0, q25 = 0.0, median = 0.0, q75 = 0.0, q95 = 0.0;  // of the ratio
};

struct EnsembleResult {
  double betaHat = 0.0;
  std::vector<EnsembleDraw> draws;
  EnsembleSummary summary;
};

/// Runs the ensemble; draw k uses the stream deriveSeed(seed, k). Throws
/// EstimationError when more than maxSkipRate of the draws fail.
EnsembleResult runEnsemble(const EnsembleInputs& inputs, const EnsembleOptions& options);

/// "draw\tbeta_tilde\tratio" rows for completed draws, then a "mean" row.
void writeEnsemble(std::ostream& out, const EnsembleResult& result);
/// "statistic\tvalue" rows: draws, skipped, beta_hat, mean_beta, mean_ratio,
/// sd_ratio and ratio quantiles.
void writeEnsembleSummary(std::ostream& out, const EnsembleResult& result);

}  // namespace coinvent
