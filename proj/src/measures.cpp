#include "coinvent/measures.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>
#include <unordered_map>

#include "coinvent/errors.hpp"

namespace coinvent {

std::vector<double> noveltyValues(std::span<const PatentRecord> patents) {
  std::unordered_map<std::string_view, std::vector<std::size_t>> bySubgroup;
  for (std::size_t p = 0; p < patents.size(); ++p) bySubgroup[patents[p].primaryCategory].push_back(p);

  std::vector<double> g(patents.size(), 0.0);
  for (auto& [code, members] : bySubgroup) {
    std::sort(members.begin(), members.end(), [&](std::size_t a, std::size_t b) {
      const auto& pa = patents[a];
      const auto& pb = patents[b];
      if (pa.applicationDate != pb.applicationDate) return pa.applicationDate < pb.applicationDate;
      return pa.id < pb.id;
    });
    for (std::size_t r = 0; r < members.size(); ++r) g[members[r]] = 1.0 / static_cast<double>(r + 1);
  }
  return g;
}

QualityValues qualityValues(std::span<const PatentRecord> patents, const FirmLookup& firmOf,
                            const PeriodLookup& periodOf, const QualityOptions& options) {
  QualityValues out;
  out.values.assign(patents.size(), 0.0);
  const double windowDays = options.windowYears * 365.25;
  const double lag = options.start == QualityOptions::WindowStart::publication ? options.publicationLagDays : 0.0;

  for (std::size_t j = 0; j < patents.size(); ++j) {
    const auto& cited = patents[j];
    const Date from = cited.applicationDate.plusDays(lag);
    const Date to = from.plusDays(windowDays);
    for (const auto& c : cited.citedBy) {
      if (c.date < from || c.date > to) {
        ++out.outsideWindow;
        continue;
      }
      if (!c.citing || *c.citing >= patents.size()) {
        ++out.excludedUnknownCiting;
        continue;
      }
      const auto& citing = patents[*c.citing];
      const auto tk = periodOf(citing.applicationDate);
      bool overlap = false;
      for (InventorId l : citing.inventors) {
        for (InventorId i : cited.inventors) {
          if (l == i) {
            overlap = true;
          } else if (tk) {
            const int fl = firmOf(l, *tk);
            overlap = fl != kNoLabel && fl == firmOf(i, *tk);
          }
          if (overlap) break;
        }
        if (overlap) break;
      }
      if (overlap) {
        ++out.excludedFirmOverlap;
        continue;
      }
      out.values[j] += 1.0;
      ++out.counted;
    }
  }
  return out;
}

QualityValues qualityValues(const Corpus& corpus, const QualityOptions& options) {
  return qualityValues(
      corpus.patents, [&](InventorId i, int t) { return corpus.firm(i, t); },
      [&](Date d) { return corpus.periods.periodOf(d); }, options);
}

std::vector<double> givenValues(const Corpus& corpus) {
  std::vector<double> g(corpus.patentCount());
  for (std::size_t p = 0; p < g.size(); ++p) {
    const auto& v = corpus.patents[p].value;
    if (!v) throw DataError("patent " + corpus.patents[p].id + " has no value for the 'given' metric");
    g[p] = *v;
  }
  return g;
}

MembershipIndex::MembershipIndex(const Corpus& corpus, int period) {
  firms_.resize(corpus.firmNames.size());
  establishments_.resize(corpus.establishmentNames.size());
  for (InventorId i = 0; i < corpus.inventorCount(); ++i) {
    const int f = corpus.firm(i, period);
    const int e = corpus.establishment(i, period);
    if (f != kNoLabel) firms_[static_cast<std::size_t>(f)].push_back(i);
    if (e != kNoLabel) establishments_[static_cast<std::size_t>(e)].push_back(i);
  }
}

std::span<const InventorId> MembershipIndex::firmMembers(int firm) const {
  if (firm < 0 || static_cast<std::size_t>(firm) >= firms_.size()) return {};
  return firms_[static_cast<std::size_t>(firm)];
}

std::span<const InventorId> MembershipIndex::establishmentMembers(int establishment) const {
  if (establishment < 0 || static_cast<std::size_t>(establishment) >= establishments_.size()) return {};
  return establishments_[static_cast<std::size_t>(establishment)];
}

namespace {
std::vector<int> unionOfScopes(std::span<const InventorId> group, const MembershipIndex::ScopeOf& scope) {
  std::vector<int> u;
  for (InventorId j : group) {
    const auto s = scope(j);
    u.insert(u.end(), s.begin(), s.end());
  }
  std::sort(u.begin(), u.end());
  u.erase(std::unique(u.begin(), u.end()), u.end());
  return u;
}
}  // namespace

void MembershipIndex::cacheScopes(const ScopeOf& scope) {
  firmScopes_.clear();
  establishmentScopes_.clear();
  for (const auto& g : firms_) firmScopes_.push_back(unionOfScopes(g, scope));
  for (const auto& g : establishments_) establishmentScopes_.push_back(unionOfScopes(g, scope));
  cached_ = true;
}

std::span<const int> MembershipIndex::firmScope(int firm) const {
  if (!cached_ || firm < 0 || static_cast<std::size_t>(firm) >= firmScopes_.size()) return {};
  return firmScopes_[static_cast<std::size_t>(firm)];
}

std::span<const int> MembershipIndex::establishmentScope(int establishment) const {
  if (!cached_ || establishment < 0 || static_cast<std::size_t>(establishment) >= establishmentScopes_.size()) return {};
  return establishmentScopes_[static_cast<std::size_t>(establishment)];
}

namespace {
std::vector<int> subgroupsOf(const Corpus& corpus, std::span<const PatentIndex> ps) {
  std::vector<int> s;
  s.reserve(ps.size());
  for (PatentIndex p : ps) s.push_back(corpus.subgroupOf(p));
  std::sort(s.begin(), s.end());
  s.erase(std::unique(s.begin(), s.end()), s.end());
  return s;
}

double valueSum(const Corpus& corpus, std::span<const double> values, std::span<const PatentIndex> ps) {
  double s = 0.0;
  for (PatentIndex p : ps) s += values[p] / static_cast<double>(corpus.patents[p].inventors.size());
  return s;
}
}  // namespace

ResearchScope researchScope(const Corpus& corpus, InventorId i, int period) {
  ResearchScope out;
  out.current = subgroupsOf(corpus, corpus.patentsOf(i, period));
  std::vector<int> past;
  for (int t = 0; t < period; ++t) {
    for (PatentIndex p : corpus.patentsOf(i, t)) past.push_back(corpus.subgroupOf(p));
  }
  std::sort(past.begin(), past.end());
  out.cumulative = static_cast<std::size_t>(std::unique(past.begin(), past.end()) - past.begin());
  return out;
}

double differentiatedKnowledge(const Corpus& corpus, const CollaborationGraph& g,
                               std::span<const double> values, InventorId i) {
  const auto nb = g.neighbors(i);
  if (nb.empty()) throw DomainError("k^D needs at least one collaborator");
  const auto own = corpus.patentsOf(i, g.period());
  double total = 0.0;
  for (InventorId j : nb) {
    // Both lists are ascending, so a merge walk skips the joint patents.
    const auto theirs = corpus.patentsOf(j, g.period());
    auto io = own.begin();
    for (PatentIndex p : theirs) {
      while (io != own.end() && *io < p) ++io;
      if (io != own.end() && *io == p) continue;
      total += values[p] / static_cast<double>(corpus.patents[p].inventors.size());
    }
  }
  return total / static_cast<double>(nb.size());
}

std::vector<double> differentiatedKnowledgeAll(const Corpus& corpus, const CollaborationGraph& g,
                                               std::span<const double> values) {
  std::vector<double> kd(corpus.inventorCount(), std::numeric_limits<double>::quiet_NaN());
  for (InventorId i : g.nodes()) {
    if (g.degree(i) > 0) kd[i] = differentiatedKnowledge(corpus, g, values, i);
  }
  return kd;
}

std::optional<FirmCovariates> firmCovariates(const Corpus& corpus, const CollaborationGraph& g,
                                             const MembershipIndex& members,
                                             const std::function<std::span<const int>(InventorId)>& scope,
                                             InventorId i) {
  const int t = g.period();
  const int firm = corpus.firm(i, t);
  const int est = corpus.establishment(i, t);
  if (firm == kNoLabel || est == kNoLabel) return std::nullopt;

  const auto nb = g.neighbors(i);
  auto inCircle = [&](InventorId j) { return j == i || std::binary_search(nb.begin(), nb.end(), j); };

  std::vector<int> circleScope;
  auto addScope = [](std::vector<int>& acc, std::span<const int> s) { acc.insert(acc.end(), s.begin(), s.end()); };
  addScope(circleScope, scope(i));
  for (InventorId u : nb) addScope(circleScope, scope(u));
  std::sort(circleScope.begin(), circleScope.end());
  circleScope.erase(std::unique(circleScope.begin(), circleScope.end()), circleScope.end());

  // Size: members outside the circle. Scope: subgroups of the group's union
  // that nobody in the circle covers.
  auto sizeAndScope = [&](std::span<const InventorId> group, std::span<const int> cached, bool byFirm) {
    std::size_t size = 0;
    std::vector<int> groupScope;
    if (members.scopesCached()) {
      const int label = byFirm ? firm : est;
      std::size_t inside = 1;  // i itself
      for (InventorId u : nb) inside += (byFirm ? corpus.firm(u, t) : corpus.establishment(u, t)) == label;
      size = group.size() - inside;
    } else {
      for (InventorId j : group) {
        if (!inCircle(j)) ++size;
        addScope(groupScope, scope(j));
      }
      std::sort(groupScope.begin(), groupScope.end());
      groupScope.erase(std::unique(groupScope.begin(), groupScope.end()), groupScope.end());
      cached = groupScope;
    }
    std::vector<int> diff;
    std::set_difference(cached.begin(), cached.end(), circleScope.begin(), circleScope.end(),
                        std::back_inserter(diff));
    return std::pair{size, diff.size()};
  };

  FirmCovariates out;
  std::tie(out.firmSize, out.firmScope) = sizeAndScope(members.firmMembers(firm), members.firmScope(firm), true);
  std::tie(out.establishmentSize, out.establishmentScope) =
      sizeAndScope(members.establishmentMembers(est), members.establishmentScope(est), false);
  return out;
}

InventorPeriodMeasures inventorMeasures(const Corpus& corpus, const CollaborationGraph& g,
                                        std::span<const double> values, InventorId i) {
  const int t = g.period();
  const auto own = corpus.patentsOf(i, t);
  if (own.empty()) throw DomainError("inventor " + corpus.inventors[i].id + " has no patent in the period");
  const std::size_t n = g.degree(i);
  if (n == 0) throw DomainError("inventor " + corpus.inventors[i].id + " has no collaborator in the period");

  InventorPeriodMeasures m;
  m.inventor = i;
  m.period = t;
  m.n = n;
  m.yBar = valueSum(corpus, values, own);
  double countShare = 0.0;
  for (PatentIndex p : own) countShare += 1.0 / static_cast<double>(corpus.patents[p].inventors.size());
  const double dn = static_cast<double>(n);
  m.y = m.yBar / dn;
  m.yP = countShare / dn;
  m.yQ = m.y / m.yP;
  m.kD = differentiatedKnowledge(corpus, g, values, i);
  auto scope = researchScope(corpus, i, t);
  m.k = scope.cumulative;
  m.scopeSet = std::move(scope.current);
  return m;
}

std::vector<std::vector<int>> periodScopes(const Corpus& corpus, int period) {
  std::vector<std::vector<int>> out(corpus.inventorCount());
  for (InventorId i = 0; i < out.size(); ++i) out[i] = subgroupsOf(corpus, corpus.patentsOf(i, period));
  return out;
}

}  // namespace coinvent
