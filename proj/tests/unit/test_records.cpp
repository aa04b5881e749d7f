#include <doctest.h>

#include "coinvent/errors.hpp"
#include "coinvent/records.hpp"
#include "fixtures.hpp"

using namespace coinvent;
using coinvent::testing::CorpusBuilder;

TEST_SUITE("records") {
  TEST_CASE("dates round-trip and reject impossible days") {
    CHECK(Date::parse("2004-02-29").str() == "2004-02-29");
    CHECK(Date::parse("1970-01-01").days == 0);
    CHECK(Date::parse("2000-03-01").days - Date::parse("2000-02-28").days == 2);
    CHECK_THROWS_AS(Date::parse("2005-02-29"), DataError);
    CHECK_THROWS_AS(Date::parse("2005-13-01"), DataError);
    CHECK_THROWS_AS(Date::parse("20050101"), DataError);
    CHECK(Date::parse("2007-06-30").year() == 2007);
  }

  TEST_CASE("category levels truncate the code") {
    CHECK(categoryAt("H01L 21/02", CategoryLevel::section) == "H");
    CHECK(categoryAt("H01L 21/02", CategoryLevel::cls) == "H01");
    CHECK(categoryAt("H01L 21/02", CategoryLevel::subclass) == "H01L");
    CHECK(categoryAt("H01L 21/02", CategoryLevel::subgroup) == "H01L 21/02");
  }

  TEST_CASE("period scheme maps dates and rejects overlaps") {
    PeriodScheme p;
    CHECK(p.periodOf(Date::fromYmd(1999, 12, 31)) == 0);
    CHECK(p.periodOf(Date::fromYmd(2000, 1, 1)) == 1);
    CHECK(p.periodOf(Date::fromYmd(2009, 12, 31)) == 2);
    CHECK(p.periodOf(Date::fromYmd(2015, 5, 5)) == 3);
    CHECK_FALSE(p.periodOf(Date::fromYmd(1990, 1, 1)).has_value());
    p.ranges = {{2000, 2004}, {2004, 2009}};
    CHECK_THROWS_AS(p.validate(), ConfigError);
    p.ranges = {{2005, 2009}, {2000, 2004}};
    CHECK_THROWS_AS(p.validate(), ConfigError);
  }

  TEST_CASE("finalize indexes patents per inventor and period") {
    CorpusBuilder b;
    b.affiliate("a", 1, "F1", "E1").affiliate("b", 1, "F2", "E2");
    b.patent("P2", {"a", "b"}, 1, "B01 1/00").patent("P1", {"a"}, 1).patent("P0", {"b"}, 0);
    const Corpus c = b.build();
    const InventorId a = *c.findInventor("a"), bb = *c.findInventor("b");
    CHECK(c.patentsOf(a, 1).size() == 2);
    CHECK(std::is_sorted(c.patentsOf(a, 1).begin(), c.patentsOf(a, 1).end()));
    CHECK(c.patentsOf(bb, 0).size() == 1);
    CHECK(c.patentsOf(a, 2).empty());
    CHECK(c.firm(a, 1) != c.firm(bb, 1));
    CHECK(c.firm(a, 2) == kNoLabel);
    CHECK(c.classNames()[static_cast<std::size_t>(c.classOf(*c.findPatent("P2")))] == "B01");
    CHECK(c.patentPeriod(*c.findPatent("P0")) == 0);
  }

  TEST_CASE("finalize rejects broken records") {
    SUBCASE("empty inventor set") {
      CorpusBuilder b;
      b.patent("P1", {}, 1);
      CHECK_THROWS_AS(b.build(), DataError);
    }
    SUBCASE("duplicate patent id") {
      CorpusBuilder b;
      b.patent("P1", {"a"}, 1).patent("P1", {"b"}, 1);
      CHECK_THROWS_AS(b.build(), DataError);
    }
  }

  TEST_CASE("citations resolve or stay unresolved") {
    CorpusBuilder b;
    b.patent("P1", {"a"}, 1).patent("P2", {"b"}, 2);
    b.cite("P2", "P1", Date::fromYmd(2006, 1, 1)).cite("X9", "P1", Date::fromYmd(2006, 1, 1));
    const Corpus c = b.build();
    const auto& cites = c.patents[*c.findPatent("P1")].citedBy;
    REQUIRE(cites.size() == 2);
    CHECK(cites[0].citing == c.findPatent("P2"));
    CHECK_FALSE(cites[1].citing.has_value());
  }
}
