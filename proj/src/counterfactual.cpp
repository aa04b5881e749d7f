#include "coinvent/counterfactual.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <random>

#include "coinvent/errors.hpp"
#include "coinvent/parallel.hpp"
#include "coinvent/rng.hpp"
#include "coinvent/tables.hpp"

namespace coinvent {

std::map<std::pair<InventorId, int>, std::size_t> RewireConstraint::perGroupCounts() const {
  std::map<std::pair<InventorId, int>, std::size_t> out;
  for (std::size_t k = 0; k < inventors.size(); ++k) {
    for (const auto& r : requirements[k]) out[{inventors[k], r.group}] = r.count;
  }
  return out;
}

std::size_t RewireConstraint::indexOf(InventorId i) const {
  const auto it = std::lower_bound(inventors.begin(), inventors.end(), i);
  return it != inventors.end() && *it == i ? static_cast<std::size_t>(it - inventors.begin()) : npos;
}

RewireConstraint makeConstraint(const Corpus& corpus, const CollaborationGraph& g,
                                std::span<const InventorId> inventors, RewireLevel level) {
  RewireConstraint c;
  c.level = level;
  c.period = g.period();
  c.inventors.assign(inventors.begin(), inventors.end());
  std::sort(c.inventors.begin(), c.inventors.end());
  c.inventors.erase(std::unique(c.inventors.begin(), c.inventors.end()), c.inventors.end());

  auto groupOf = [&](InventorId j) {
    return level == RewireLevel::firm ? corpus.firm(j, c.period) : corpus.establishment(j, c.period);
  };
  std::map<int, std::vector<InventorId>> pools;  // nodes() is ascending, so pools stay sorted
  for (InventorId j : g.nodes()) pools[groupOf(j)].push_back(j);

  HopExplorer explorer(g);
  c.requirements.resize(c.inventors.size());
  c.exclusion.resize(c.inventors.size());
  for (std::size_t k = 0; k < c.inventors.size(); ++k) {
    const InventorId i = c.inventors[k];
    if (!g.contains(i) || g.degree(i) == 0) {
      throw DomainError("rewire constraint: inventor " + corpus.inventors[i].id + " has no collaborator in period " +
                        std::to_string(c.period));
    }
    const HopSets hops = explorer.run(i, 2);
    auto& excl = c.exclusion[k];
    for (const auto& order : hops.orders) excl.insert(excl.end(), order.begin(), order.end());
    std::sort(excl.begin(), excl.end());

    std::map<int, std::size_t> counts;
    for (InventorId j : g.neighbors(i)) ++counts[groupOf(j)];
    for (const auto& [group, count] : counts) {
      RewireRequirement r{group, count, {}};
      for (InventorId j : pools[group]) {
        if (!std::binary_search(excl.begin(), excl.end(), j)) r.eligible.push_back(j);
      }
      c.requirements[k].push_back(std::move(r));
    }
  }
  return c;
}

RewireDraw rewireOnce(const RewireConstraint& constraint, std::uint64_t seed) {
  RewireDraw draw;
  std::mt19937_64 rng(seed);
  for (std::size_t k = 0; k < constraint.inventors.size(); ++k) {
    const auto& reqs = constraint.requirements[k];
    const bool feasible = std::all_of(reqs.begin(), reqs.end(), [](const RewireRequirement& r) {
      return r.eligible.size() >= r.count;
    });
    if (!feasible) {
      draw.infeasible.push_back(constraint.inventors[k]);
      continue;
    }
    std::vector<InventorId> chosen;
    for (const auto& r : reqs) std::sample(r.eligible.begin(), r.eligible.end(), std::back_inserter(chosen), r.count, rng);
    std::sort(chosen.begin(), chosen.end());
    draw.collaborators.emplace(constraint.inventors[k], std::move(chosen));
  }
  return draw;
}

double counterfactualKd(const Corpus& corpus, std::span<const double> values, InventorId i, int period,
                        std::span<const InventorId> collaborators) {
  if (collaborators.empty()) throw DomainError("counterfactual k^D needs at least one collaborator");
  const auto own = corpus.patentsOf(i, period);
  double total = 0.0;
  for (InventorId j : collaborators) {
    for (PatentIndex p : corpus.patentsOf(j, period)) {
      if (std::binary_search(own.begin(), own.end(), p)) continue;
      total += values[p] / static_cast<double>(corpus.patents[p].inventors.size());
    }
  }
  return total / static_cast<double>(collaborators.size());
}

std::pair<double, std::size_t> counterfactualBeta(const Panel& panel, const DesignSpec& spec,
                                                  const std::map<std::pair<std::string, int>, double>& kD) {
  std::map<std::string, bool> keep;
  for (const auto& row : panel.rows) {
    const auto it = kD.find({row.inventor, row.period});
    const bool ok = it != kD.end() && it->second > 0.0 && std::isfinite(it->second);
    auto [pos, inserted] = keep.try_emplace(row.inventor, ok);
    if (!inserted) pos->second = pos->second && ok;
  }
  Panel rewired;
  rewired.covariateNames = panel.covariateNames;
  std::size_t dropped = 0;
  for (const auto& [id, ok] : keep) dropped += ok ? 0 : 1;
  for (const auto& row : panel.rows) {
    if (!keep[row.inventor]) continue;
    PanelObservation r = row;
    r.lnKD = std::log(kD.at({row.inventor, row.period}));
    r.instruments.clear();
    rewired.rows.push_back(std::move(r));
  }
  DesignSpec olsSpec = spec;
  olsSpec.instrumentOrders.clear();
  const Design design = assembleDesign(rewired, olsSpec);
  return {fitOls(design).coef(0), dropped};
}

namespace {
double quantile(std::vector<double> sorted, double q) {
  if (sorted.empty()) return std::nan("");
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (pos - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}
}  // namespace

EnsembleResult runEnsemble(const EnsembleInputs& in, const EnsembleOptions& options) {
  if (in.corpus == nullptr) throw ConfigError("counterfactual ensemble: no corpus");
  if (options.draws == 0) throw ConfigError("counterfactual ensemble: draws must be positive");
  if (in.betaHat == 0.0) throw EstimationError("counterfactual ensemble: IV estimate is zero, ratio undefined");
  const Corpus& corpus = *in.corpus;

  EnsembleResult result;
  result.betaHat = in.betaHat;
  result.draws.resize(options.draws);
  parallelFor(options.draws, options.threads, [&](std::size_t k) {
    EnsembleDraw& d = result.draws[k];
    d.index = k;
    const std::uint64_t drawSeed = deriveSeed(options.seed, k);
    std::map<std::pair<std::string, int>, double> kD;
    const RewireDraw first = rewireOnce(in.periodOne, deriveSeed(drawSeed, 1));
    for (const auto& [i, set] : first.collaborators) {
      kD[{corpus.inventors[i].id, 1}] = counterfactualKd(corpus, in.values, i, 1, set);
      if (!options.resamplePerPeriod) kD[{corpus.inventors[i].id, 2}] = counterfactualKd(corpus, in.values, i, 2, set);
    }
    if (options.resamplePerPeriod) {
      const RewireDraw second = rewireOnce(in.periodTwo, deriveSeed(drawSeed, 2));
      for (const auto& [i, set] : second.collaborators) {
        kD[{corpus.inventors[i].id, 2}] = counterfactualKd(corpus, in.values, i, 2, set);
      }
    }
    try {
      const auto [beta, dropped] = counterfactualBeta(in.panel, in.spec, kD);
      d.betaTilde = beta;
      d.ratio = beta / in.betaHat;
      d.droppedInventors = dropped;
    } catch (const Error& e) {
      d.skipped = true;
      d.reason = e.what();
    }
  });

  std::vector<double> ratios;
  double sumBeta = 0.0;
  for (const auto& d : result.draws) {
    if (d.skipped) {
      ++result.summary.skipped;
      continue;
    }
    ratios.push_back(d.ratio);
    sumBeta += d.betaTilde;
  }
  const double skipRate = static_cast<double>(result.summary.skipped) / static_cast<double>(options.draws);
  if (skipRate > options.maxSkipRate) {
    std::string first;
    for (const auto& d : result.draws) {
      if (d.skipped) {
        first = d.reason;
        break;
      }
    }
    throw EstimationError("counterfactual ensemble: " + std::to_string(result.summary.skipped) + " of " +
                          std::to_string(options.draws) + " draws failed (first: " + first + ")");
  }
  auto& s = result.summary;
  s.completed = ratios.size();
  const double n = static_cast<double>(ratios.size());
  s.meanBeta = sumBeta / n;
  double sum = 0.0;
  for (double r : ratios) sum += r;
  s.meanRatio = sum / n;
  double ss = 0.0;
  for (double r : ratios) ss += (r - s.meanRatio) * (r - s.meanRatio);
  s.sdRatio = ratios.size() > 1 ? std::sqrt(ss / (n - 1.0)) : 0.0;
  std::sort(ratios.begin(), ratios.end());
  s.q05 = quantile(ratios, 0.05);
  s.q25 = quantile(ratios, 0.25);
  s.median = quantile(ratios, 0.5);
  s.q75 = quantile(ratios, 0.75);
  s.q95 = quantile(ratios, 0.95);
  return result;
}

void writeEnsemble(std::ostream& out, const EnsembleResult& result) {
  out << "draw\tbeta_tilde\tratio\n";
  for (const auto& d : result.draws) {
    if (d.skipped) continue;
    out << d.index << '\t' << formatNumber(d.betaTilde) << '\t' << formatNumber(d.ratio) << '\n';
  }
  out << "mean\t" << formatNumber(result.summary.meanBeta) << '\t' << formatNumber(result.summary.meanRatio) << '\n';
}

void writeEnsembleSummary(std::ostream& out, const EnsembleResult& result) {
  const auto& s = result.summary;
  out << "statistic\tvalue\n"
      << "draws\t" << s.completed << "\n"
      << "skipped\t" << s.skipped << "\n"
      << "beta_hat\t" << formatNumber(result.betaHat) << "\n"
      << "mean_beta\t" << formatNumber(s.meanBeta) << "\n"
      << "mean_ratio\t" << formatNumber(s.meanRatio) << "\n"
      << "sd_ratio\t" << formatNumber(s.sdRatio) << "\n"
      << "q05\t" << formatNumber(s.q05) << "\n"
      << "q25\t" << formatNumber(s.q25) << "\n"
      << "median\t" << formatNumber(s.median) << "\n"
      << "q75\t" << formatNumber(s.q75) << "\n"
      << "q95\t" << formatNumber(s.q95) << "\n";
}

}  // namespace coinvent
