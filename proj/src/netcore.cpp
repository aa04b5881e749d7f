#include "coinvent/netcore.hpp"

#include <algorithm>
#include <ostream>
#include <string>
#include <tuple>

#include "coinvent/errors.hpp"

namespace coinvent {

std::span<const InventorId> CollaborationGraph::neighbors(InventorId i) const {
  if (i + 1 >= offsets_.size()) return {};
  return std::span<const InventorId>(adjacency_.data() + offsets_[i], offsets_[i + 1] - offsets_[i]);
}

bool CollaborationGraph::adjacent(InventorId i, InventorId j) const {
  auto nb = neighbors(i);
  return std::binary_search(nb.begin(), nb.end(), j);
}

std::vector<std::pair<InventorId, InventorId>> CollaborationGraph::edges() const {
  std::vector<std::pair<InventorId, InventorId>> out;
  out.reserve(edgeCount());
  for (InventorId i : nodes_) {
    for (InventorId j : neighbors(i)) {
      if (i < j) out.emplace_back(i, j);
    }
  }
  return out;
}

std::span<const InventorId> CollaborationGraph::patentMembers(std::size_t k) const {
  return std::span<const InventorId>(members_.data() + memberOffsets_[k],
                                     memberOffsets_[k + 1] - memberOffsets_[k]);
}

void CollaborationGraph::assemble(std::vector<std::pair<InventorId, InventorId>>& directed) {
  std::sort(directed.begin(), directed.end());
  directed.erase(std::unique(directed.begin(), directed.end()), directed.end());
  const std::size_t n = present_.size();
  offsets_.assign(n + 1, 0);
  for (const auto& e : directed) ++offsets_[e.first + 1];
  for (std::size_t i = 0; i < n; ++i) offsets_[i + 1] += offsets_[i];
  adjacency_.resize(directed.size());
  for (std::size_t k = 0; k < directed.size(); ++k) adjacency_[k] = directed[k].second;
  nodes_.clear();
  for (InventorId i = 0; i < n; ++i) {
    if (present_[i]) nodes_.push_back(i);
  }
}

CollaborationGraph CollaborationGraph::fromEdges(std::size_t inventorCount, int period,
                                                 std::span<const std::pair<InventorId, InventorId>> edges,
                                                 std::span<const InventorId> isolated) {
  CollaborationGraph g;
  g.period_ = period;
  g.present_.assign(inventorCount, 0);
  std::vector<std::pair<InventorId, InventorId>> directed;
  directed.reserve(edges.size() * 2);
  for (auto [a, b] : edges) {
    if (a >= inventorCount || b >= inventorCount) throw DataError("edge references unknown inventor");
    if (a == b) continue;
    g.present_[a] = g.present_[b] = 1;
    directed.emplace_back(a, b);
    directed.emplace_back(b, a);
  }
  for (InventorId i : isolated) {
    if (i >= inventorCount) throw DataError("isolated node references unknown inventor");
    g.present_[i] = 1;
  }
  g.memberOffsets_.assign(1, 0);
  g.assemble(directed);
  return g;
}

CollaborationGraph buildGraph(std::span<const PatentRecord> patents, std::size_t inventorCount,
                              int period, std::span<const PatentIndex> ids) {
  CollaborationGraph g;
  g.period_ = period;
  g.present_.assign(inventorCount, 0);
  g.memberOffsets_.assign(1, 0);
  std::vector<std::pair<InventorId, InventorId>> directed;
  for (std::size_t k = 0; k < patents.size(); ++k) {
    const auto& rec = patents[k];
    if (rec.inventors.empty()) throw DataError("patent " + rec.id + " has an empty inventor set");
    for (InventorId a : rec.inventors) {
      if (a >= inventorCount) throw DataError("patent " + rec.id + " references an unknown inventor");
      g.present_[a] = 1;
      for (InventorId b : rec.inventors) {
        if (a != b) directed.emplace_back(a, b);
      }
    }
    g.patents_.push_back(ids.empty() ? static_cast<PatentIndex>(k) : ids[k]);
    g.members_.insert(g.members_.end(), rec.inventors.begin(), rec.inventors.end());
    g.memberOffsets_.push_back(static_cast<std::uint32_t>(g.members_.size()));
  }
  g.assemble(directed);
  return g;
}

CollaborationGraph buildGraph(const Corpus& corpus, int period) {
  CollaborationGraph g;
  g.period_ = period;
  const std::size_t n = corpus.inventorCount();
  g.present_.assign(n, 0);
  g.memberOffsets_.assign(1, 0);
  std::vector<std::pair<InventorId, InventorId>> directed;
  for (PatentIndex p = 0; p < corpus.patentCount(); ++p) {
    if (corpus.patentPeriod(p) != period) continue;
    const auto& members = corpus.patents[p].inventors;
    for (InventorId a : members) {
      g.present_[a] = 1;
      for (InventorId b : members) {
        if (a != b) directed.emplace_back(a, b);
      }
    }
    g.patents_.push_back(p);
    g.members_.insert(g.members_.end(), members.begin(), members.end());
    g.memberOffsets_.push_back(static_cast<std::uint32_t>(g.members_.size()));
  }
  g.assemble(directed);
  std::vector<int> firms(n, kNoLabel);
  for (InventorId i = 0; i < n; ++i) firms[i] = corpus.firm(i, period);
  g.setFirms(std::move(firms));
  return g;
}

bool HopSets::complete() const {
  return !orders.empty() &&
         std::all_of(orders.begin(), orders.end(), [](const auto& s) { return !s.empty(); });
}

HopExplorer::HopExplorer(const CollaborationGraph& g) : g_(&g), stamp_(g.capacity(), 0) {}

HopSets HopExplorer::run(InventorId i, int maxOrder) {
  if (maxOrder < 1) throw DomainError("hop sets need a maximum order L >= 1");
  if (!g_->contains(i)) throw LookupError("inventor index " + std::to_string(i) + " is not in the graph");
  if (++epoch_ == 0) {
    std::fill(stamp_.begin(), stamp_.end(), 0);
    epoch_ = 1;
  }
  HopSets out;
  out.root = i;
  out.orders.resize(static_cast<std::size_t>(maxOrder) + 1);

  // Order 0 = {i} ∪ N_i; each later order expands the previous frontier.
  auto& zero = out.orders[0];
  stamp_[i] = epoch_;
  zero.push_back(i);
  for (InventorId j : g_->neighbors(i)) {
    stamp_[j] = epoch_;
    zero.push_back(j);
  }
  std::sort(zero.begin(), zero.end());
  std::vector<InventorId> frontier(g_->neighbors(i).begin(), g_->neighbors(i).end());
  for (int ell = 1; ell <= maxOrder; ++ell) {
    auto& next = out.orders[static_cast<std::size_t>(ell)];
    for (InventorId u : frontier) {
      for (InventorId v : g_->neighbors(u)) {
        if (stamp_[v] != epoch_) {
          stamp_[v] = epoch_;
          next.push_back(v);
        }
      }
    }
    std::sort(next.begin(), next.end());
    frontier = next;
  }
  return out;
}

HopSets hopSets(const CollaborationGraph& g, InventorId i, int maxOrder) {
  HopExplorer explorer(g);
  return explorer.run(i, maxOrder);
}

std::optional<double> buildInstrument(const CollaborationGraph& g, std::span<const double> kD,
                                      InventorId i, int ell) {
  if (ell < 1) throw DomainError("instrument order must be >= 1");
  const auto hops = hopSets(g, i, ell);
  return buildInstrument(hops, [&](InventorId j) { return kD[j]; }, ell);
}

double jaccardIndex(std::span<const int> a, std::span<const int> b) {
  std::size_t common = 0;
  auto ia = a.begin();
  auto ib = b.begin();
  while (ia != a.end() && ib != b.end()) {
    if (*ia < *ib) {
      ++ia;
    } else if (*ib < *ia) {
      ++ib;
    } else {
      ++common;
      ++ia;
      ++ib;
    }
  }
  const std::size_t uni = a.size() + b.size() - common;
  return uni == 0 ? 0.0 : static_cast<double>(common) / static_cast<double>(uni);
}

std::vector<std::optional<double>> jaccardProfile(const HopSets& hops,
                                                  const std::function<std::span<const int>(InventorId)>& scope,
                                                  bool includeSelfAtOrderZero) {
  std::vector<std::optional<double>> out(hops.orders.size());
  const auto own = scope(hops.root);
  for (std::size_t ell = 0; ell < hops.orders.size(); ++ell) {
    double sum = 0.0;
    std::size_t n = 0;
    for (InventorId j : hops.orders[ell]) {
      if (ell == 0 && j == hops.root && !includeSelfAtOrderZero) continue;
      sum += jaccardIndex(own, scope(j));
      ++n;
    }
    if (n > 0) out[ell] = sum / static_cast<double>(n);
  }
  return out;
}

std::vector<std::optional<double>> jaccardProfile(const CollaborationGraph& g,
                                                  const std::function<std::span<const int>(InventorId)>& scope,
                                                  InventorId i, int maxOrder, bool includeSelfAtOrderZero) {
  return jaccardProfile(hopSets(g, i, maxOrder), scope, includeSelfAtOrderZero);
}

void writeEdgeDump(std::ostream& out, const CollaborationGraph& g,
                   const std::function<const std::string&(InventorId)>& name) {
  std::vector<std::pair<std::string, std::string>> rows;
  for (InventorId i : g.nodes()) {
    if (g.degree(i) == 0) rows.emplace_back(name(i), std::string());
    for (InventorId j : g.neighbors(i)) rows.emplace_back(name(i), name(j));
  }
  std::sort(rows.begin(), rows.end());
  out << "period\tinventor\tneighbor\n";
  for (const auto& [a, b] : rows) out << g.period() << '\t' << a << '\t' << b << '\n';
}

void writeHopDump(std::ostream& out, int period, std::span<const HopSets> hops,
                  const std::function<const std::string&(InventorId)>& name) {
  std::vector<std::tuple<std::string, std::size_t, std::string>> rows;
  for (const auto& h : hops) {
    for (std::size_t ell = 0; ell < h.orders.size(); ++ell) {
      for (InventorId j : h.orders[ell]) rows.emplace_back(name(h.root), ell, name(j));
    }
  }
  std::sort(rows.begin(), rows.end());
  out << "period\tinventor\torder\tmember\n";
  for (const auto& [a, ell, b] : rows) out << period << '\t' << a << '\t' << ell << '\t' << b << '\n';
}

}  // namespace coinvent
