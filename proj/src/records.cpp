#include "coinvent/records.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdio>

#include "coinvent/errors.hpp"

namespace coinvent {

namespace chr = std::chrono;

Date Date::fromYmd(int year, unsigned month, unsigned day) {
  const chr::year_month_day ymd{chr::year{year}, chr::month{month}, chr::day{day}};
  if (!ymd.ok()) {
    throw DataError("invalid calendar date " + std::to_string(year) + "-" + std::to_string(month) +
                    "-" + std::to_string(day));
  }
  return Date{static_cast<std::int32_t>(chr::sys_days{ymd}.time_since_epoch().count())};
}

Date Date::parse(std::string_view text) {
  auto field = [&](std::size_t pos, std::size_t len) {
    int v = 0;
    const auto* first = text.data() + pos;
    auto [ptr, ec] = std::from_chars(first, first + len, v);
    if (ec != std::errc{} || ptr != first + len) {
      throw DataError("malformed date '" + std::string(text) + "' (expected YYYY-MM-DD)");
    }
    return v;
  };
  if (text.size() != 10 || text[4] != '-' || text[7] != '-') {
    throw DataError("malformed date '" + std::string(text) + "' (expected YYYY-MM-DD)");
  }
  return fromYmd(field(0, 4), static_cast<unsigned>(field(5, 2)), static_cast<unsigned>(field(8, 2)));
}

std::string Date::str() const {
  const chr::year_month_day ymd{chr::sys_days{chr::days{days}}};
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(ymd.year()),
                static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()));
  return buf;
}

int Date::year() const {
  return static_cast<int>(chr::year_month_day{chr::sys_days{chr::days{days}}}.year());
}

Date Date::plusDays(double d) const {
  return Date{static_cast<std::int32_t>(std::floor(days + d))};
}

const Affiliation* InventorRecord::at(int period) const {
  for (const auto& a : affiliations) {
    if (a.period == period) return &a;
  }
  return nullptr;
}

std::string categoryAt(std::string_view code, CategoryLevel level) {
  std::size_t len = code.size();
  switch (level) {
    case CategoryLevel::section: len = 1; break;
    case CategoryLevel::cls: len = 3; break;
    case CategoryLevel::subclass: len = 4; break;
    case CategoryLevel::subgroup: break;
  }
  return std::string(code.substr(0, std::min(len, code.size())));
}

std::optional<int> PeriodScheme::periodOf(Date d) const {
  const int y = d.year();
  for (std::size_t t = 0; t < ranges.size(); ++t) {
    if (y >= ranges[t].firstYear && y <= ranges[t].lastYear) return static_cast<int>(t);
  }
  return std::nullopt;
}

void PeriodScheme::validate() const {
  if (ranges.size() < 3) throw ConfigError("period scheme needs periods 0, 1 and 2");
  for (std::size_t t = 0; t < ranges.size(); ++t) {
    if (ranges[t].firstYear > ranges[t].lastYear) {
      throw ConfigError("period " + std::to_string(t) + " has first year after last year");
    }
    if (t > 0 && ranges[t].firstYear <= ranges[t - 1].lastYear) {
      throw ConfigError("periods " + std::to_string(t - 1) + " and " + std::to_string(t) +
                        " overlap or are out of order");
    }
  }
}

namespace {
int intern(std::unordered_map<std::string, int>& index, std::vector<std::string>& names,
           std::string_view name) {
  auto [it, inserted] = index.try_emplace(std::string(name), static_cast<int>(names.size()));
  if (inserted) names.emplace_back(name);
  return it->second;
}
}  // namespace

int Corpus::internFirm(std::string_view name) { return intern(firmIndex_, firmNames, name); }

int Corpus::internEstablishment(std::string_view name) {
  return intern(establishmentIndex_, establishmentNames, name);
}

InventorId Corpus::addInventor(std::string id) {
  auto [it, inserted] = inventorIndex_.try_emplace(id, static_cast<InventorId>(inventors.size()));
  if (inserted) inventors.push_back(InventorRecord{std::move(id), {}});
  return it->second;
}

std::optional<InventorId> Corpus::findInventor(std::string_view id) const {
  auto it = inventorIndex_.find(std::string(id));
  if (it == inventorIndex_.end()) return std::nullopt;
  return it->second;
}

std::optional<PatentIndex> Corpus::findPatent(std::string_view id) const {
  auto it = patentIndex_.find(std::string(id));
  if (it == patentIndex_.end()) return std::nullopt;
  return it->second;
}

void Corpus::finalize() {
  periods.validate();
  const int nPeriods = periods.count();
  const std::size_t nInv = inventors.size();

  patentIndex_.clear();
  patentIndex_.reserve(patents.size());
  for (PatentIndex p = 0; p < patents.size(); ++p) {
    auto& rec = patents[p];
    if (rec.inventors.empty()) throw DataError("patent " + rec.id + " has an empty inventor set");
    if (rec.primaryCategory.empty()) throw DataError("patent " + rec.id + " has no primary category");
    std::sort(rec.inventors.begin(), rec.inventors.end());
    rec.inventors.erase(std::unique(rec.inventors.begin(), rec.inventors.end()), rec.inventors.end());
    for (InventorId i : rec.inventors) {
      if (i >= nInv) throw DataError("patent " + rec.id + " references an unknown inventor index");
    }
    if (!patentIndex_.try_emplace(rec.id, p).second) throw DataError("duplicate patent id " + rec.id);
  }
  for (auto& rec : patents) {
    for (auto& c : rec.citedBy) {
      auto it = patentIndex_.find(c.citingId);
      c.citing = it == patentIndex_.end() ? std::nullopt : std::optional<PatentIndex>(it->second);
    }
  }

  std::unordered_map<std::string, int> sgIndex, clsIndex;
  subgroupNames_.clear();
  classNames_.clear();
  patentPeriod_.assign(patents.size(), -1);
  subgroup_.assign(patents.size(), 0);
  class_.assign(patents.size(), 0);
  for (PatentIndex p = 0; p < patents.size(); ++p) {
    const auto& rec = patents[p];
    patentPeriod_[p] = periods.periodOf(rec.applicationDate).value_or(-1);
    subgroup_[p] = intern(sgIndex, subgroupNames_, rec.primaryCategory);
    class_[p] = intern(clsIndex, classNames_, categoryAt(rec.primaryCategory, CategoryLevel::cls));
  }

  offsets_.assign(nPeriods, std::vector<std::uint32_t>(nInv + 1, 0));
  byInventor_.assign(nPeriods, {});
  for (PatentIndex p = 0; p < patents.size(); ++p) {
    const int t = patentPeriod_[p];
    if (t < 0) continue;
    for (InventorId i : patents[p].inventors) ++offsets_[t][i + 1];
  }
  for (int t = 0; t < nPeriods; ++t) {
    auto& off = offsets_[t];
    for (std::size_t i = 0; i < nInv; ++i) off[i + 1] += off[i];
    byInventor_[t].resize(off[nInv]);
    std::vector<std::uint32_t> cursor(off.begin(), off.end() - 1);
    for (PatentIndex p = 0; p < patents.size(); ++p) {
      if (patentPeriod_[p] != t) continue;
      for (InventorId i : patents[p].inventors) byInventor_[t][cursor[i]++] = p;
    }
  }

  firmTable_.assign(nPeriods, std::vector<int>(nInv, kNoLabel));
  establishmentTable_.assign(nPeriods, std::vector<int>(nInv, kNoLabel));
  for (InventorId i = 0; i < nInv; ++i) {
    for (const auto& a : inventors[i].affiliations) {
      if (a.period < 0 || a.period >= nPeriods) continue;
      firmTable_[a.period][i] = a.firm;
      establishmentTable_[a.period][i] = a.establishment;
    }
  }
  finalized_ = true;
}

std::span<const PatentIndex> Corpus::patentsOf(InventorId i, int period) const {
  if (period < 0 || period >= static_cast<int>(offsets_.size())) return {};
  const auto& off = offsets_[period];
  return std::span<const PatentIndex>(byInventor_[period].data() + off[i], off[i + 1] - off[i]);
}

int Corpus::firm(InventorId i, int period) const {
  if (period < 0 || period >= static_cast<int>(firmTable_.size())) return kNoLabel;
  return firmTable_[period][i];
}

int Corpus::establishment(InventorId i, int period) const {
  if (period < 0 || period >= static_cast<int>(establishmentTable_.size())) return kNoLabel;
  return establishmentTable_[period][i];
}

std::optional<GeoPoint> Corpus::location(InventorId i, int period) const {
  const auto* a = inventors[i].at(period);
  if (a == nullptr) return std::nullopt;
  return a->location;
}

}  // namespace coinvent
