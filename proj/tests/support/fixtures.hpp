#pragma once

// Small hand-built corpora and random generators shared by the unit and
// acceptance tests.

#include <algorithm>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "coinvent/records.hpp"

namespace coinvent::testing {

/// Builds a corpus under the default period scheme. Period t is placed in
/// the first year of its range plus `yearOffset`.
class CorpusBuilder {
 public:
  InventorId inventor(const std::string& id) {
    if (auto i = corpus_.findInventor(id)) return *i;
    return corpus_.addInventor(id);
  }

  CorpusBuilder& affiliate(const std::string& id, int period, const std::string& firm, const std::string& est = {},
                           std::optional<GeoPoint> at = std::nullopt) {
    Affiliation a;
    a.period = period;
    if (!firm.empty()) a.firm = corpus_.internFirm(firm);
    if (!est.empty()) a.establishment = corpus_.internEstablishment(est);
    a.location = at;
    corpus_.inventors[inventor(id)].affiliations.push_back(a);
    return *this;
  }

  CorpusBuilder& patent(const std::string& id, const std::vector<std::string>& inventors, int period,
                        const std::string& category = "A01B 1/00", double value = 1.0, int dayOffset = 0) {
    PatentRecord p;
    p.id = id;
    for (const auto& name : inventors) p.inventors.push_back(inventor(name));
    p.primaryCategory = category;
    p.applicationDate = Date::fromYmd(corpus_.periods.ranges[static_cast<std::size_t>(period)].firstYear, 1, 1)
                            .plusDays(dayOffset);
    p.value = value;
    corpus_.patents.push_back(std::move(p));
    return *this;
  }

  CorpusBuilder& cite(const std::string& citing, const std::string& cited, Date when) {
    for (auto& p : corpus_.patents) {
      if (p.id == cited) p.citedBy.push_back({citing, when, std::nullopt});
    }
    return *this;
  }

  Corpus build() {
    Corpus c = corpus_;
    c.finalize();
    return c;
  }

  Corpus& raw() { return corpus_; }

 private:
  Corpus corpus_;
};

/// Random patents over `inventors` people: each patent lists 1..maxTeam
/// distinct inventors. Used by graph oracles.
inline std::vector<PatentRecord> randomPatents(std::mt19937_64& rng, int inventors, int patents, int maxTeam) {
  std::uniform_int_distribution<int> who(0, inventors - 1), team(1, std::min(maxTeam, inventors));
  std::vector<PatentRecord> out;
  for (int k = 0; k < patents; ++k) {
    PatentRecord p;
    p.id = "P" + std::to_string(k);
    const int size = team(rng);
    while (static_cast<int>(p.inventors.size()) < size) {
      const auto i = static_cast<InventorId>(who(rng));
      if (std::find(p.inventors.begin(), p.inventors.end(), i) == p.inventors.end()) p.inventors.push_back(i);
    }
    std::sort(p.inventors.begin(), p.inventors.end());
    p.primaryCategory = "A01B 1/00";
    p.applicationDate = Date::fromYmd(2001, 1, 1);
    out.push_back(std::move(p));
  }
  return out;
}

/// Random corpus of `inventors` people over periods 0..2, two firms with two
/// establishments each, a small pool of subgroups and random values.
inline Corpus randomCorpus(std::mt19937_64& rng, int inventors, int patentsPerPeriod) {
  CorpusBuilder b;
  std::uniform_int_distribution<int> firmPick(0, 1), estPick(0, 1), team(1, 3), who(0, inventors - 1),
      day(0, 360), cat(0, 5);
  std::uniform_real_distribution<double> value(0.0, 3.0);
  for (int i = 0; i < inventors; ++i) {
    const std::string id = "I" + std::to_string(i);
    b.inventor(id);
    for (int t = 0; t <= 2; ++t) {
      if (std::uniform_int_distribution<int>(0, 9)(rng) == 0) continue;  // unaffiliated in this period
      const int f = firmPick(rng);
      b.affiliate(id, t, "F" + std::to_string(f), "E" + std::to_string(f) + std::to_string(estPick(rng)));
    }
  }
  int serial = 0;
  for (int t = 0; t <= 2; ++t) {
    for (int k = 0; k < patentsPerPeriod; ++k) {
      std::vector<std::string> members;
      const int size = team(rng);
      while (static_cast<int>(members.size()) < size) {
        const std::string id = "I" + std::to_string(who(rng));
        if (std::find(members.begin(), members.end(), id) == members.end()) members.push_back(id);
      }
      const double v = std::uniform_int_distribution<int>(0, 4)(rng) == 0 ? 0.0 : value(rng);
      b.patent("T" + std::to_string(serial++), members, t, "A01B " + std::to_string(cat(rng)) + "/00", v, day(rng));
    }
  }
  return b.build();
}

}  // namespace coinvent::testing
