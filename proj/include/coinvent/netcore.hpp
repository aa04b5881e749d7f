#pragma once

// Collaboration graphs, indirect-collaborator frontiers and the instruments
// built from them.
//
// Order convention: order 0 is the inventor together with the direct
// collaborators, and order l >= 1 holds the inventors first reached at graph
// distance l + 1.

#include <concepts>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "coinvent/records.hpp"

namespace coinvent {

class CollaborationGraph {
 public:
  CollaborationGraph() = default;

  /// Rebuilds a graph from an undirected edge list plus isolated nodes.
  static CollaborationGraph fromEdges(std::size_t inventorCount, int period,
                                      std::span<const std::pair<InventorId, InventorId>> edges,
                                      std::span<const InventorId> isolated = {});

  int period() const { return period_; }
  std::size_t capacity() const { return present_.size(); }
  bool contains(InventorId i) const { return i < present_.size() && present_[i] != 0; }
  /// N_it as a sorted span.
  std::span<const InventorId> neighbors(InventorId i) const;
  std::size_t degree(InventorId i) const { return neighbors(i).size(); }
  bool adjacent(InventorId i, InventorId j) const;

  /// Active inventors in ascending order.
  const std::vector<InventorId>& nodes() const { return nodes_; }
  std::size_t edgeCount() const { return adjacency_.size() / 2; }
  /// Each undirected edge once as (i, j) with i < j, lexicographically ordered.
  std::vector<std::pair<InventorId, InventorId>> edges() const;

  /// Patents of the period with their inventor sets G_j.
  std::span<const PatentIndex> patents() const { return patents_; }
  std::span<const InventorId> patentMembers(std::size_t k) const;

  /// Firm label per inventor for this period (kNoLabel when unknown).
  int firm(InventorId i) const { return i < firm_.size() ? firm_[i] : kNoLabel; }
  void setFirms(std::vector<int> firms) { firm_ = std::move(firms); }

 private:
  friend CollaborationGraph buildGraph(std::span<const PatentRecord>, std::size_t, int,
                                       std::span<const PatentIndex>);
  friend CollaborationGraph buildGraph(const Corpus&, int);
  void assemble(std::vector<std::pair<InventorId, InventorId>>& directed);

  int period_ = 0;
  std::vector<std::uint8_t> present_;
  std::vector<InventorId> nodes_;
  std::vector<std::uint32_t> offsets_;
  std::vector<InventorId> adjacency_;
  std::vector<PatentIndex> patents_;
  std::vector<std::uint32_t> memberOffsets_;
  std::vector<InventorId> members_;
  std::vector<int> firm_;
};

/// Builds the co-invention graph from the given patents, all of which are
/// taken to belong to `period`. `ids` optionally supplies corpus indices for
/// the patents (defaults to 0..n-1). Throws DataError naming the first patent
/// with an empty inventor set.
CollaborationGraph buildGraph(std::span<const PatentRecord> patents, std::size_t inventorCount,
                              int period, std::span<const PatentIndex> ids = {});

/// Graph of one corpus period, with firm labels attached.
CollaborationGraph buildGraph(const Corpus& corpus, int period);

/// Disjoint frontiers N^0 .. N^L of one inventor; each set is sorted.
struct HopSets {
  InventorId root = 0;
  std::vector<std::vector<InventorId>> orders;

  std::size_t maxOrder() const { return orders.empty() ? 0 : orders.size() - 1; }
  /// True when N^l is non-empty for every l in 0..L.
  bool complete() const;
};

/// Reusable breadth-first explorer. Holds scratch marks sized to the graph so
/// repeated queries avoid per-call allocation. Not thread-safe; use one per
/// thread.
class HopExplorer {
 public:
  explicit HopExplorer(const CollaborationGraph& g);
  /// Throws LookupError when i is not a node of the graph, DomainError when L < 1.
  HopSets run(InventorId i, int maxOrder);

 private:
  const CollaborationGraph* g_;
  std::vector<std::uint32_t> stamp_;
  std::uint32_t epoch_ = 0;
};

HopSets hopSets(const CollaborationGraph& g, InventorId i, int maxOrder);

/// Mean of kD over N^ell. Returns nullopt (missing) when the frontier is empty.
/// Only members of N^ell are passed to `kD`.
template <typename KdAccess>
  requires std::invocable<KdAccess&, InventorId>
std::optional<double> buildInstrument(const HopSets& hops, KdAccess&& kD, int ell) {
  if (ell < 0 || static_cast<std::size_t>(ell) >= hops.orders.size()) return std::nullopt;
  const auto& set = hops.orders[static_cast<std::size_t>(ell)];
  if (set.empty()) return std::nullopt;
  double sum = 0.0;
  for (InventorId j : set) sum += static_cast<double>(kD(j));
  return sum / static_cast<double>(set.size());
}

std::optional<double> buildInstrument(const CollaborationGraph& g, std::span<const double> kD,
                                      InventorId i, int ell);

/// |A ∩ B| / |A ∪ B| for sorted, unique category sets; 0 when both are empty.
double jaccardIndex(std::span<const int> a, std::span<const int> b);

/// Average Jaccard similarity between the inventor's scope and those of each
/// frontier N^0..N^L. At order 0 the inventor itself is left out unless
/// `includeSelfAtOrderZero` is set. Entries are nullopt for empty frontiers.
std::vector<std::optional<double>> jaccardProfile(const HopSets& hops,
                                                  const std::function<std::span<const int>(InventorId)>& scope,
                                                  bool includeSelfAtOrderZero = false);

std::vector<std::optional<double>> jaccardProfile(const CollaborationGraph& g,
                                                  const std::function<std::span<const int>(InventorId)>& scope,
                                                  InventorId i, int maxOrder,
                                                  bool includeSelfAtOrderZero = false);

/// Writes "period\tinventor\tneighbor" rows, one per directed adjacency, in
/// lexicographic order of the external ids.
void writeEdgeDump(std::ostream& out, const CollaborationGraph& g,
                   const std::function<const std::string&(InventorId)>& name);

/// Writes "period\tinventor\torder\tmember" rows sorted lexicographically.
void writeHopDump(std::ostream& out, int period, std::span<const HopSets> hops,
                  const std::function<const std::string&(InventorId)>& name);

}  // namespace coinvent
