#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "coinvent/netcore.hpp"
#include "coinvent/records.hpp"

namespace coinvent {

/// Which per-patent value g_j feeds the productivity measures.
enum class ValueMetric { quality, novelty, given };

/// Reciprocal application-date rank of each patent within its primary
/// subgroup, ranked over every patent passed in. Ties on the date are broken
/// by patent id so the result does not depend on input order.
std::vector<double> noveltyValues(std::span<const PatentRecord> patents);

struct QualityOptions {
  enum class WindowStart { application, publication };
  double windowYears = 5.0;
  WindowStart start = WindowStart::application;
  /// Publication lag applied when start == publication (18 months).
  double publicationLagDays = 548.0;
};

struct QualityValues {
  std::vector<double> values;
  std::size_t counted = 0;
  std::size_t excludedFirmOverlap = 0;
  std::size_t excludedUnknownCiting = 0;
  std::size_t outsideWindow = 0;
};

using FirmLookup = std::function<int(InventorId, int period)>;
using PeriodLookup = std::function<std::optional<int>(Date)>;

/// Windowed forward-citation counts. A citation from patent k to patent j is
/// dropped when some inventor of k is an inventor of j or shares a firm with
/// an inventor of j in the period of k. Citations whose citing patent is not
/// in `patents` are dropped and counted as unknown.
QualityValues qualityValues(std::span<const PatentRecord> patents, const FirmLookup& firmOf,
                            const PeriodLookup& periodOf, const QualityOptions& options = {});
QualityValues qualityValues(const Corpus& corpus, const QualityOptions& options = {});

/// Given-value table from PatentRecord::value; throws DataError when a patent
/// has no value.
std::vector<double> givenValues(const Corpus& corpus);

struct FirmCovariates {
  std::size_t firmSize = 0;           // f_it
  std::size_t firmScope = 0;          // s^f_it
  std::size_t establishmentSize = 0;  // e_it
  std::size_t establishmentScope = 0; // s^e_it
};

struct ResearchScope {
  std::vector<int> current;  // S_it (interned subgroups, sorted)
  std::size_t cumulative = 0;  // k_it = |∪_{t'<t} S_it'|
};

struct InventorPeriodMeasures {
  InventorId inventor = 0;
  int period = 0;
  double yBar = 0.0;          // Σ g_j / |G_j|
  std::size_t n = 0;          // |N_it|
  double y = 0.0;             // yBar / n
  double yP = 0.0;            // (Σ 1/|G_j|) / n
  double yQ = 0.0;            // y / yP
  double kD = 0.0;            // collaborators' output outside joint patents
  std::size_t k = 0;          // cumulative scope
  std::vector<int> scopeSet;  // S_it
  std::optional<FirmCovariates> firm;
};

/// Per-period lookup of firm and establishment member lists.
class MembershipIndex {
 public:
  using ScopeOf = std::function<std::span<const int>(InventorId)>;

  MembershipIndex(const Corpus& corpus, int period);
  std::span<const InventorId> firmMembers(int firm) const;
  std::span<const InventorId> establishmentMembers(int establishment) const;

  /// Precomputes the scope union of every firm and establishment so that
  /// repeated firmCovariates calls with the same scope skip the member scan.
  void cacheScopes(const ScopeOf& scope);
  bool scopesCached() const { return cached_; }
  std::span<const int> firmScope(int firm) const;
  std::span<const int> establishmentScope(int establishment) const;

 private:
  std::vector<std::vector<InventorId>> firms_;
  std::vector<std::vector<InventorId>> establishments_;
  std::vector<std::vector<int>> firmScopes_;
  std::vector<std::vector<int>> establishmentScopes_;
  bool cached_ = false;
};

ResearchScope researchScope(const Corpus& corpus, InventorId i, int period);

/// Σ_{k ∈ 𝒢_jt \ 𝒢_it} g_k / |G_k| summed over j ∈ N_it, divided by n_it.
/// Requires at least one collaborator.
double differentiatedKnowledge(const Corpus& corpus, const CollaborationGraph& g,
                               std::span<const double> values, InventorId i);

/// k^D for every inventor with at least one collaborator in g; NaN elsewhere.
std::vector<double> differentiatedKnowledgeAll(const Corpus& corpus, const CollaborationGraph& g,
                                               std::span<const double> values);

/// Firm and establishment size/scope controls. Returns nullopt when the
/// inventor's firm or establishment is unknown in that period.
std::optional<FirmCovariates> firmCovariates(const Corpus& corpus, const CollaborationGraph& g,
                                             const MembershipIndex& members,
                                             const std::function<std::span<const int>(InventorId)>& scope,
                                             InventorId i);

/// All measures of one inventor-period. Throws DomainError when the inventor
/// has no patent or no collaborator in the period.
InventorPeriodMeasures inventorMeasures(const Corpus& corpus, const CollaborationGraph& g,
                                        std::span<const double> values, InventorId i);

/// Current-period scope sets S_jt of every inventor (empty when inactive).
std::vector<std::vector<int>> periodScopes(const Corpus& corpus, int period);

}  // namespace coinvent
