#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <random>

#include "coinvent/counterfactual.hpp"
#include "coinvent/errors.hpp"
#include "coinvent/measures.hpp"
#include "coinvent/model_sim.hpp"
#include "coinvent/pipeline.hpp"
#include "coinvent/rng.hpp"
#include "fixtures.hpp"

using namespace coinvent;
using namespace coinvent::testing;

namespace {

// i works with c1 and c2 (firm F); F also employs `others` active inventors
// with solo patents, and c3 of firm G collaborates with i.
Corpus poolCorpus(int others, bool withG) {
  CorpusBuilder b;
  b.affiliate("i", 1, "F", "E1").affiliate("c1", 1, "F", "E1").affiliate("c2", 1, "F", "E2");
  std::vector<std::string> team{"i", "c1", "c2"};
  if (withG) {
    b.affiliate("c3", 1, "G", "E3").affiliate("g1", 1, "G", "E3");
    team.push_back("c3");
    b.patent("pg", {"g1"}, 1);
  }
  b.patent("joint", team, 1);
  for (int k = 0; k < others; ++k) {
    const std::string id = "o" + std::to_string(k);
    b.affiliate(id, 1, "F", k % 2 ? "E1" : "E2");
    b.patent("p" + id, {id}, 1, "A01B 1/00", 1.0 + k);
  }
  return b.build();
}

struct SmallRun {
  SyntheticEconomy econ;
  PanelBuild build;
};

SmallRun smallRun() {
  SyntheticEconomyConfig c;
  c.seed = 3;
  c.inventors = 400;
  c.firms = 10;
  c.uas = 5;
  c.citationsPerPatent = 0;
  SmallRun r{simulateEconomy(c), {}};
  PipelineConfig pc;
  pc.metric = ValueMetric::given;
  r.build = buildPanel(r.econ.corpus, r.econ.geo, pc);
  return r;
}

}  // namespace

TEST_SUITE("counterfactual") {
  TEST_CASE("constraint: per-group counts and exclusion") {
    const Corpus c = poolCorpus(4, true);
    const auto g = buildGraph(c, 1);
    const InventorId i = *c.findInventor("i");
    const std::vector<InventorId> who{i};
    const auto con = makeConstraint(c, g, who, RewireLevel::firm);
    const auto counts = con.perGroupCounts();
    const int F = c.firm(i, 1), G = c.firm(*c.findInventor("c3"), 1);
    CHECK(counts.at({i, F}) == 2);
    CHECK(counts.at({i, G}) == 1);
    const auto& ex = con.exclusion[con.indexOf(i)];
    for (const char* id : {"i", "c1", "c2", "c3"}) CHECK(std::binary_search(ex.begin(), ex.end(), *c.findInventor(id)));
    for (const auto& req : con.requirements[0]) {
      for (InventorId j : req.eligible) CHECK_FALSE(std::binary_search(ex.begin(), ex.end(), j));
      if (req.group == F) CHECK(req.eligible.size() == 4);
      if (req.group == G) CHECK(req.eligible.size() == 1);
    }
    CHECK(con.indexOf(*c.findInventor("o1")) == RewireConstraint::npos);

    const auto est = makeConstraint(c, g, who, RewireLevel::establishment);
    const auto estCounts = est.perGroupCounts();
    CHECK(estCounts.at({i, c.establishment(*c.findInventor("c1"), 1)}) == 1);
    CHECK(estCounts.at({i, c.establishment(*c.findInventor("c2"), 1)}) == 1);

    const std::vector<InventorId> loner{*c.findInventor("o0")};
    CHECK_THROWS_AS(makeConstraint(c, g, loner, RewireLevel::firm), DomainError);
  }

  TEST_CASE("forced draw and infeasible pools") {
    const Corpus c = poolCorpus(2, true);
    const auto g = buildGraph(c, 1);
    const InventorId i = *c.findInventor("i");
    const std::vector<InventorId> who{i};
    const auto draw = rewireOnce(makeConstraint(c, g, who, RewireLevel::firm), 42);
    CHECK(draw.infeasible.empty());
    const std::vector<InventorId> expect{*c.findInventor("g1"), *c.findInventor("o0"), *c.findInventor("o1")};
    auto got = draw.collaborators.at(i);
    CHECK(got == expect);

    const Corpus small = poolCorpus(1, false);
    const auto gs = buildGraph(small, 1);
    const std::vector<InventorId> si{*small.findInventor("i")};
    const auto bad = rewireOnce(makeConstraint(small, gs, si, RewireLevel::firm), 1);
    CHECK(bad.infeasible == si);
  }

  TEST_CASE("draws are uniform without replacement") {
    const Corpus c = poolCorpus(10, false);
    const auto g = buildGraph(c, 1);
    const InventorId i = *c.findInventor("i");
    const std::vector<InventorId> who{i};
    const auto con = makeConstraint(c, g, who, RewireLevel::firm);
    std::map<InventorId, int> hits;
    const int draws = 10000;
    for (int s = 0; s < draws; ++s) {
      const auto d = rewireOnce(con, deriveSeed(77, static_cast<std::uint64_t>(s)));
      const auto& set = d.collaborators.at(i);
      REQUIRE(set.size() == 2);
      CHECK(set[0] != set[1]);
      for (InventorId j : set) ++hits[j];
    }
    CHECK(hits.size() == 10);
    for (auto [j, n] : hits) CHECK(std::abs(n / double(draws) - 0.2) < 0.02);
  }

  TEST_CASE("identity rewire reproduces the measured k^D and the OLS slope") {
    const auto run = smallRun();
    const auto& corpus = run.econ.corpus;
    std::map<std::pair<std::string, int>, double> kd;
    for (int t = 1; t <= 2; ++t) {
      const auto& net = run.build.networks[static_cast<std::size_t>(t - 1)];
      for (InventorId i : run.build.selection.panel) {
        const auto nb = net.graph.neighbors(i);
        const std::vector<InventorId> actual(nb.begin(), nb.end());
        const double v = counterfactualKd(corpus, run.build.values, i, t, actual);
        CHECK(v == differentiatedKnowledge(corpus, net.graph, run.build.values, i));
        kd[{corpus.inventors[i].id, t}] = v;
      }
    }
    DesignSpec spec;
    spec.instrumentOrders.clear();
    const auto [beta, dropped] = counterfactualBeta(run.build.panel, spec, kd);
    CHECK(dropped == 0);
    CHECK(beta == fitOls(assembleDesign(run.build.panel, spec)).coefficient("lnKD"));
  }

  TEST_CASE("random draws preserve counts, respect exclusion and replay from the seed") {
    const auto run = smallRun();
    const auto& corpus = run.econ.corpus;
    const auto& net = run.build.networks[0];
    for (auto level : {RewireLevel::firm, RewireLevel::establishment}) {
      const auto con = makeConstraint(corpus, net.graph, run.build.selection.panel, level);
      const auto d1 = rewireOnce(con, 5);
      const auto d2 = rewireOnce(con, 5);
      CHECK(d1.collaborators == d2.collaborators);
      CHECK(d1.collaborators != rewireOnce(con, 6).collaborators);
      auto groupOf = [&](InventorId j) {
        return level == RewireLevel::firm ? corpus.firm(j, 1) : corpus.establishment(j, 1);
      };
      for (std::size_t k = 0; k < con.inventors.size(); ++k) {
        const InventorId i = con.inventors[k];
        if (std::find(d1.infeasible.begin(), d1.infeasible.end(), i) != d1.infeasible.end()) continue;
        const auto& set = d1.collaborators.at(i);
        std::map<int, std::size_t> drawn, actual;
        for (InventorId j : set) {
          ++drawn[groupOf(j)];
          CHECK_FALSE(std::binary_search(con.exclusion[k].begin(), con.exclusion[k].end(), j));
        }
        for (InventorId j : net.graph.neighbors(i)) ++actual[groupOf(j)];
        CHECK(drawn == actual);
      }
    }
  }

  TEST_CASE("ensemble is reproducible and independent of the thread count") {
    const auto run = smallRun();
    EnsembleInputs in;
    in.corpus = &run.econ.corpus;
    in.values = run.build.values;
    in.panel = run.build.panel;
    in.betaHat = 0.4;
    in.periodOne = makeConstraint(run.econ.corpus, run.build.networks[0].graph, run.build.selection.panel, RewireLevel::firm);
    in.periodTwo = makeConstraint(run.econ.corpus, run.build.networks[1].graph, run.build.selection.panel, RewireLevel::firm);
    EnsembleOptions opt;
    opt.draws = 12;
    opt.seed = 9;
    opt.maxSkipRate = 1.0;
    const auto one = runEnsemble(in, opt);
    opt.threads = 3;
    const auto three = runEnsemble(in, opt);
    REQUIRE(one.draws.size() == 12);
    for (std::size_t k = 0; k < 12; ++k) {
      CHECK(one.draws[k].betaTilde == three.draws[k].betaTilde);
      CHECK(one.draws[k].ratio == doctest::Approx(one.draws[k].betaTilde / 0.4));
    }
    CHECK(one.summary.completed + one.summary.skipped == 12);
    CHECK(one.summary.q05 <= one.summary.median);
    CHECK(one.summary.median <= one.summary.q95);

    opt.resamplePerPeriod = false;
    const auto fixed = runEnsemble(in, opt);
    CHECK(fixed.draws.size() == 12);
  }
}
