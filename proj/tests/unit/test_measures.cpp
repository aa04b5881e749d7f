#include <doctest.h>

#include <algorithm>
#include <map>
#include <random>

#include "coinvent/errors.hpp"
#include "coinvent/measures.hpp"
#include "fixtures.hpp"
#include "oracles.hpp"

using namespace coinvent;
using namespace coinvent::testing;

namespace {
double rel(double a, double b) { return std::abs(a - b) / std::max(1.0, std::abs(b)); }
}  // namespace

TEST_SUITE("measures") {
  TEST_CASE("novelty ranks within subgroups by date, ties by id") {
    CorpusBuilder b;
    b.patent("P3", {"a"}, 1, "A01B 1/00", 1, 20).patent("P1", {"a"}, 1, "A01B 1/00", 1, 0);
    b.patent("P2", {"a"}, 1, "A01B 1/00", 1, 10).patent("Q1", {"a"}, 1, "H01L 3/00", 1, 50);
    b.patent("T2", {"a"}, 1, "C07 1/00", 1, 5).patent("T1", {"a"}, 1, "C07 1/00", 1, 5);
    const Corpus c = b.build();
    const auto g = noveltyValues(c.patents);
    auto at = [&](const char* id) { return g[*c.findPatent(id)]; };
    CHECK(at("P1") == 1.0);
    CHECK(at("P2") == 0.5);
    CHECK(at("P3") == doctest::Approx(1.0 / 3.0));
    CHECK(at("Q1") == 1.0);
    CHECK(at("T1") == 1.0);
    CHECK(at("T2") == 0.5);

    auto shuffled = c.patents;
    std::mt19937_64 rng(4);
    std::shuffle(shuffled.begin(), shuffled.end(), rng);
    const auto g2 = noveltyValues(shuffled);
    for (std::size_t k = 0; k < shuffled.size(); ++k) CHECK(g2[k] == g[*c.findPatent(shuffled[k].id)]);
  }

  TEST_CASE("quality counts windowed citations outside the firm") {
    CorpusBuilder b;
    b.affiliate("a", 1, "F1", "E1").affiliate("x", 1, "F1", "E1").affiliate("y", 1, "F2", "E2");
    b.affiliate("z", 1, "F3", "E3").affiliate("w", 2, "F1", "E4").affiliate("a", 2, "F2", "E2");
    b.patent("J", {"a"}, 1, "A01B 1/00", 1, 0);
    b.patent("K0", {"z"}, 1, "A01B 1/00", 1, 50).patent("K1", {"x"}, 1, "A01B 1/00", 1, 150);
    b.patent("K2", {"a", "y"}, 1, "A01B 1/00", 1, 250).patent("K3", {"y"}, 1, "A01B 1/00", 1, 350);
    b.patent("K4", {"w"}, 2);
    const Date base = Date::fromYmd(2000, 1, 1);
    b.cite("K0", "J", base.plusDays(100));   // counted
    b.cite("K1", "J", base.plusDays(200));   // same firm in the citing period
    b.cite("K2", "J", base.plusDays(300));   // shared inventor
    b.cite("K3", "J", base.plusDays(400));   // counted
    b.cite("K4", "J", base.plusDays(2000));  // outside five years; firms differ in period 2
    const Corpus c = b.build();
    const auto q = qualityValues(c);
    CHECK(q.values[*c.findPatent("J")] == 2.0);
    CHECK(q.excludedFirmOverlap == 2);
    CHECK(q.outsideWindow == 1);
    CHECK(q.values[*c.findPatent("K0")] == 0.0);

    QualityOptions longer;
    longer.windowYears = 10;
    CHECK(qualityValues(c, longer).values[*c.findPatent("J")] == 3.0);
  }

  TEST_CASE("quality with no firm information equals raw windowed counts") {
    std::mt19937_64 rng(8);
    CorpusBuilder b;
    for (int k = 0; k < 40; ++k) b.patent("P" + std::to_string(k), {"i" + std::to_string(k)}, 1 + k % 2, "A01B 1/00", 1, k * 7);
    std::map<std::string, int> raw;
    for (int e = 0; e < 200; ++e) {
      const int from = std::uniform_int_distribution<int>(0, 39)(rng);
      const int to = std::uniform_int_distribution<int>(0, 39)(rng);
      const Date when = Date::fromYmd(2000, 1, 1).plusDays(std::uniform_int_distribution<int>(0, 4000)(rng));
      b.cite("P" + std::to_string(from), "P" + std::to_string(to), when);
    }
    const Corpus c = b.build();
    const auto q = qualityValues(c);
    for (const auto& p : c.patents) {
      int count = 0;
      for (const auto& ct : p.citedBy) {
        const bool self = ct.citing && c.patents[*ct.citing].inventors == p.inventors;
        const bool inside = ct.date >= p.applicationDate && ct.date <= p.applicationDate.plusDays(5 * 365.25);
        if (!self && inside) ++count;
      }
      CHECK(q.values[*c.findPatent(p.id)] == count);
    }
  }

  TEST_CASE("single joint patent") {
    CorpusBuilder b;
    b.patent("P", {"i", "j"}, 1);
    const Corpus c = b.build();
    const auto g = buildGraph(c, 1);
    const std::vector<double> values(c.patentCount(), 1.0);
    const auto m = inventorMeasures(c, g, values, *c.findInventor("i"));
    CHECK(m.yBar == 0.5);
    CHECK(m.y == 0.5);
    CHECK(m.yP == 0.5);
    CHECK(m.yQ == 1.0);
    CHECK(m.kD == 0.0);
    CHECK(m.k == 0);
  }

  TEST_CASE("research scope is cumulative over earlier periods") {
    CorpusBuilder b;
    b.patent("a", {"i"}, 0, "A 1/00").patent("b", {"i"}, 0, "B 1/00").patent("c", {"i"}, 1, "B 1/00");
    b.patent("d", {"i"}, 1, "C 1/00").patent("e", {"i"}, 2, "D 1/00");
    const Corpus c = b.build();
    const InventorId i = *c.findInventor("i");
    CHECK(researchScope(c, i, 1).cumulative == 2);
    CHECK(researchScope(c, i, 2).cumulative == 3);
    CHECK(researchScope(c, i, 2).current.size() == 1);
    CHECK(researchScope(c, i, 0).cumulative == 0);
  }

  TEST_CASE("firm covariates on small firms") {
    CorpusBuilder b;
    b.affiliate("i", 1, "F", "E").affiliate("x", 1, "F", "E").affiliate("solo", 1, "G", "H");
    b.patent("p", {"i", "c"}, 1, "A 1/00").patent("q", {"x"}, 1, "A 1/00").patent("r", {"solo", "d"}, 1);
    const Corpus c = b.build();
    const auto g = buildGraph(c, 1);
    const MembershipIndex members(c, 1);
    const auto scopes = periodScopes(c, 1);
    auto scope = [&](InventorId j) { return std::span<const int>(scopes[j]); };
    const auto fi = firmCovariates(c, g, members, scope, *c.findInventor("i"));
    REQUIRE(fi.has_value());
    CHECK(fi->firmSize == 1);
    CHECK(fi->firmScope == 0);
    const auto fs = firmCovariates(c, g, members, scope, *c.findInventor("solo"));
    CHECK(fs->firmSize == 0);
    CHECK(fs->firmScope == 0);
    CHECK_FALSE(firmCovariates(c, g, members, scope, *c.findInventor("c")).has_value());
  }

  TEST_CASE("measures match brute force on random economies") {
    std::mt19937_64 rng(21);
    for (int rep = 0; rep < 30; ++rep) {
      const Corpus c = randomCorpus(rng, 20, 25);
      std::vector<double> values;
      for (const auto& p : c.patents) values.push_back(*p.value);
      for (int t = 1; t <= 2; ++t) {
        const auto g = buildGraph(c, t);
        const MembershipIndex members(c, t);
        const auto scopes = periodScopes(c, t);
        auto scope = [&](InventorId j) { return std::span<const int>(scopes[j]); };
        MembershipIndex cachedMembers(c, t);
        cachedMembers.cacheScopes(scope);
        for (InventorId i : g.nodes()) {
          if (g.degree(i) == 0) continue;
          const auto m = inventorMeasures(c, g, values, i);
          const auto o = bruteMeasures(c, values, i, t);
          CHECK(m.n == o.n);
          CHECK(rel(m.yBar, o.yBar) < 1e-12);
          CHECK(rel(m.y, o.y) < 1e-12);
          CHECK(rel(m.yP, o.yP) < 1e-12);
          CHECK(rel(m.yQ, o.yQ) < 1e-12);
          CHECK(rel(m.kD, o.kD) < 1e-12);
          CHECK(m.k == o.k);
          const auto f = firmCovariates(c, g, members, scope, i);
          REQUIRE(f.has_value() == o.hasFirm);
          if (f) {
            CHECK(f->firmSize == o.f);
            CHECK(f->firmScope == o.sf);
            CHECK(f->establishmentSize == o.e);
            CHECK(f->establishmentScope == o.se);
            const auto fc = firmCovariates(c, g, cachedMembers, scope, i);
            CHECK(fc->firmSize == o.f);
            CHECK(fc->firmScope == o.sf);
            CHECK(fc->establishmentSize == o.e);
            CHECK(fc->establishmentScope == o.se);
          }
        }
      }
    }
  }

  TEST_CASE("inventor without collaborators is rejected") {
    CorpusBuilder b;
    b.patent("p", {"i"}, 1);
    const Corpus c = b.build();
    const auto g = buildGraph(c, 1);
    const std::vector<double> values{1.0};
    CHECK_THROWS_AS(inventorMeasures(c, g, values, 0), DomainError);
  }
}
