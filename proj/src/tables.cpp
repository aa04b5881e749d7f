#include "coinvent/tables.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <map>
#include <set>

#include "coinvent/errors.hpp"

namespace coinvent {

namespace fs = std::filesystem;

TableFiles TableFiles::inDirectory(const fs::path& dir) {
  return {dir / "patents.tsv",      dir / "citations.tsv",  dir / "inventors.tsv", dir / "establishments.tsv",
          dir / "industry_rnd.tsv", dir / "population.tsv", dir / "uas.tsv"};
}

std::string formatNumber(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

namespace {
std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = s.find(sep, start);
    out.push_back(s.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}
}  // namespace

TsvReader::TsvReader(const fs::path& path, const std::vector<std::string>& required,
                     const std::vector<std::string>& optional)
    : path_(path), in_(path) {
  if (!in_) throw DataError(path.string() + ": cannot open file");
  std::string header;
  if (!std::getline(in_, header)) throw DataError(path.string() + ":1:1: missing header line");
  if (!header.empty() && header.back() == '\r') header.pop_back();
  const auto names = split(header, '\t');
  for (std::size_t c = 0; c < names.size(); ++c) {
    const std::string name(names[c]);
    if (!columns_.try_emplace(name, c).second) {
      throw DataError(path.string() + ":1:" + std::to_string(c + 1) + ": duplicate column '" + name + "'");
    }
  }
  for (const auto& r : required) {
    if (!columns_.contains(r)) throw DataError(path.string() + ":1:1: missing required column '" + r + "'");
  }
  for (const auto& [name, idx] : columns_) {
    const bool known = std::find(required.begin(), required.end(), name) != required.end() ||
                       std::find(optional.begin(), optional.end(), name) != optional.end();
    if (!known) throw DataError(path.string() + ":1:" + std::to_string(idx + 1) + ": unknown column '" + name + "'");
  }
}

bool TsvReader::next() {
  while (std::getline(in_, row_)) {
    ++line_;
    if (!row_.empty() && row_.back() == '\r') row_.pop_back();
    if (row_.empty()) continue;
    fields_ = split(row_, '\t');
    if (fields_.size() != columns_.size()) {
      throw DataError(path_.string() + ":" + std::to_string(line_) + ":" + std::to_string(std::min(fields_.size(), columns_.size()) + 1) +
                      ": expected " + std::to_string(columns_.size()) + " fields, found " + std::to_string(fields_.size()));
    }
    return true;
  }
  return false;
}

bool TsvReader::has(std::string_view column) const { return columns_.contains(std::string(column)); }

std::string_view TsvReader::field(std::string_view column) const {
  const auto it = columns_.find(std::string(column));
  if (it == columns_.end()) throw DataError(path_.string() + ": no column '" + std::string(column) + "'");
  return fields_[it->second];
}

void TsvReader::fail(std::string_view column, const std::string& message) const {
  const auto it = columns_.find(std::string(column));
  const std::size_t col = it == columns_.end() ? 1 : it->second + 1;
  throw DataError(path_.string() + ":" + std::to_string(line_) + ":" + std::to_string(col) + ": " + message);
}

double TsvReader::number(std::string_view column) const {
  const auto text = field(column);
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (text.empty() || ec != std::errc() || ptr != text.data() + text.size() || !std::isfinite(v)) {
    fail(column, "expected a number in column '" + std::string(column) + "', found '" + std::string(text) + "'");
  }
  return v;
}

long TsvReader::integer(std::string_view column) const {
  const auto text = field(column);
  long v = 0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (text.empty() || ec != std::errc() || ptr != text.data() + text.size()) {
    fail(column, "expected an integer in column '" + std::string(column) + "', found '" + std::string(text) + "'");
  }
  return v;
}

Ingested ingest(const TableFiles& files, const PeriodScheme& periods) {
  periods.validate();
  Ingested out;
  Corpus& corpus = out.corpus;
  corpus.periods = periods;

  {
    TsvReader r(files.inventors, {"inventor_id", "period", "firm_id", "establishment_id", "lat", "lon"});
    while (r.next()) {
      const std::string id(r.field("inventor_id"));
      if (id.empty()) r.fail("inventor_id", "empty inventor id");
      const auto existing = corpus.findInventor(id);
      const InventorId i = existing ? *existing : corpus.addInventor(id);
      Affiliation a;
      a.period = static_cast<int>(r.integer("period"));
      if (a.period < 0 || a.period >= periods.count()) r.fail("period", "period out of range");
      if (corpus.inventors[i].at(a.period) != nullptr) {
        r.fail("period", "inventor " + id + " has two rows for period " + std::to_string(a.period));
      }
      if (!r.field("firm_id").empty()) a.firm = corpus.internFirm(r.field("firm_id"));
      if (!r.field("establishment_id").empty()) a.establishment = corpus.internEstablishment(r.field("establishment_id"));
      const bool hasLat = !r.field("lat").empty(), hasLon = !r.field("lon").empty();
      if (hasLat != hasLon) r.fail(hasLat ? "lon" : "lat", "latitude and longitude must both be given or both empty");
      if (hasLat) {
        GeoPoint p{r.number("lat"), r.number("lon")};
        try {
          validate(p);
        } catch (const DomainError& e) {
          r.fail("lat", e.what());
        }
        a.location = p;
      }
      corpus.inventors[i].affiliations.push_back(a);
    }
  }

  {
    TsvReader r(files.patents, {"patent_id", "application_date", "primary_ipc", "inventors"}, {"value"});
    std::set<std::string> unknown;
    while (r.next()) {
      PatentRecord p;
      p.id = std::string(r.field("patent_id"));
      if (p.id.empty()) r.fail("patent_id", "empty patent id");
      try {
        p.applicationDate = Date::parse(r.field("application_date"));
      } catch (const DataError& e) {
        r.fail("application_date", e.what());
      }
      p.primaryCategory = std::string(r.field("primary_ipc"));
      if (p.primaryCategory.empty()) r.fail("primary_ipc", "empty primary category");
      const auto list = r.field("inventors");
      if (list.empty()) r.fail("inventors", "patent " + p.id + " has an empty inventor set");
      for (auto name : split(list, ';')) {
        if (auto i = corpus.findInventor(name)) {
          p.inventors.push_back(*i);
        } else {
          unknown.insert(std::string(name));
        }
      }
      if (r.has("value") && !r.field("value").empty()) p.value = r.number("value");
      corpus.patents.push_back(std::move(p));
    }
    if (corpus.patents.empty()) throw DataError(files.patents.string() + ": no patents");
    if (!unknown.empty()) {
      std::string msg = "patents reference inventors missing from " + files.inventors.string() + ":";
      std::size_t shown = 0;
      for (const auto& u : unknown) {
        if (shown++ == 10) {
          msg += " ...";
          break;
        }
        msg += " " + u;
      }
      throw DataError(msg);
    }
  }

  {
    std::unordered_map<std::string, PatentIndex> index;
    for (PatentIndex p = 0; p < corpus.patents.size(); ++p) index.emplace(corpus.patents[p].id, p);
    if (fs::exists(files.citations)) {
      TsvReader r(files.citations, {"citing_id", "cited_id", "citation_date"});
      while (r.next()) {
        Date d;
        try {
          d = Date::parse(r.field("citation_date"));
        } catch (const DataError& e) {
          r.fail("citation_date", e.what());
        }
        const std::string citing(r.field("citing_id"));
        const std::string cited(r.field("cited_id"));
        auto it = index.find(cited);
        if (it == index.end()) {
          corpus.externalCitations.push_back(ExternalCitation{citing, cited, d});
        } else {
          corpus.patents[it->second].citedBy.push_back(Citation{citing, d, std::nullopt});
        }
      }
    }
  }
  corpus.finalize();

  auto& geo = out.geo;
  if (fs::exists(files.uas)) {
    TsvReader r(files.uas, {"ua_id", "cell_lat", "cell_lon"});
    std::unordered_map<std::string, std::size_t> idx;
    while (r.next()) {
      const std::string id(r.field("ua_id"));
      auto [it, fresh] = idx.try_emplace(id, geo.uas.size());
      if (fresh) geo.uas.push_back(UrbanAgglomeration{id, {}, 0.0});
      GeoPoint c{r.number("cell_lat"), r.number("cell_lon")};
      try {
        validate(c);
      } catch (const DomainError& e) {
        r.fail("cell_lat", e.what());
      }
      geo.uas[it->second].cells.push_back(c);
    }
  }
  if (fs::exists(files.population)) {
    TsvReader r(files.population, {"cell_lat", "cell_lon", "population"});
    while (r.next()) {
      WeightedPoint w{{r.number("cell_lat"), r.number("cell_lon")}, r.number("population")};
      if (w.weight < 0.0) r.fail("population", "negative population");
      try {
        validate(w.at);
      } catch (const DomainError& e) {
        r.fail("cell_lat", e.what());
      }
      geo.population.push_back(w);
    }
  }
  if (fs::exists(files.establishments)) {
    TsvReader r(files.establishments, {"establishment_id", "period", "industry", "employment", "output", "lat", "lon"});
    while (r.next()) {
      Establishment e;
      e.id = std::string(r.field("establishment_id"));
      e.period = static_cast<int>(r.integer("period"));
      e.industry = std::string(r.field("industry"));
      e.employment = r.number("employment");
      e.output = r.number("output");
      if (e.employment < 0.0) r.fail("employment", "negative employment");
      if (e.output < 0.0) r.fail("output", "negative output");
      e.at = {r.number("lat"), r.number("lon")};
      try {
        validate(e.at);
      } catch (const DomainError& ex) {
        r.fail("lat", ex.what());
      }
      geo.establishments.push_back(std::move(e));
    }
  }
  if (fs::exists(files.industryRnd)) {
    TsvReader r(files.industryRnd, {"period", "industry", "rnd"});
    while (r.next()) {
      const double v = r.number("rnd");
      if (v < 0.0) r.fail("rnd", "negative R&D expenditure");
      geo.industryRnD[static_cast<int>(r.integer("period"))][std::string(r.field("industry"))] = v;
    }
  }
  // UA population from the grid cells that coincide with UA cells.
  if (!geo.population.empty()) {
    std::map<std::pair<double, double>, double> cellPop;
    for (const auto& w : geo.population) cellPop[{w.at.lat, w.at.lon}] += w.weight;
    for (auto& ua : geo.uas) {
      for (const auto& c : ua.cells) {
        auto it = cellPop.find({c.lat, c.lon});
        if (it != cellPop.end()) ua.population += it->second;
      }
    }
  }
  return out;
}

void exportTables(const Corpus& corpus, const GeoInputs& geo, const TableFiles& files) {
  auto open = [](const fs::path& p) {
    if (p.has_parent_path()) fs::create_directories(p.parent_path());
    std::ofstream out(p, std::ios::binary);
    if (!out) throw DataError("cannot write " + p.string());
    return out;
  };
  {
    auto out = open(files.inventors);
    out << "inventor_id\tperiod\tfirm_id\testablishment_id\tlat\tlon\n";
    for (const auto& inv : corpus.inventors) {
      for (const auto& a : inv.affiliations) {
        out << inv.id << '\t' << a.period << '\t'
            << (a.firm == kNoLabel ? "" : corpus.firmNames[static_cast<std::size_t>(a.firm)]) << '\t'
            << (a.establishment == kNoLabel ? "" : corpus.establishmentNames[static_cast<std::size_t>(a.establishment)]) << '\t';
        if (a.location) {
          out << formatNumber(a.location->lat) << '\t' << formatNumber(a.location->lon) << '\n';
        } else {
          out << "\t\n";
        }
      }
    }
  }
  {
    auto out = open(files.patents);
    out << "patent_id\tapplication_date\tprimary_ipc\tinventors\tvalue\n";
    for (const auto& p : corpus.patents) {
      out << p.id << '\t' << p.applicationDate.str() << '\t' << p.primaryCategory << '\t';
      for (std::size_t k = 0; k < p.inventors.size(); ++k) out << (k ? ";" : "") << corpus.inventors[p.inventors[k]].id;
      out << '\t' << (p.value ? formatNumber(*p.value) : "") << '\n';
    }
  }
  {
    auto out = open(files.citations);
    out << "citing_id\tcited_id\tcitation_date\n";
    for (const auto& p : corpus.patents) {
      for (const auto& c : p.citedBy) out << c.citingId << '\t' << p.id << '\t' << c.date.str() << '\n';
    }
    for (const auto& c : corpus.externalCitations) out << c.citingId << '\t' << c.citedId << '\t' << c.date.str() << '\n';
  }
  {
    auto out = open(files.uas);
    out << "ua_id\tcell_lat\tcell_lon\n";
    for (const auto& ua : geo.uas) {
      for (const auto& c : ua.cells) out << ua.id << '\t' << formatNumber(c.lat) << '\t' << formatNumber(c.lon) << '\n';
    }
  }
  {
    auto out = open(files.population);
    out << "cell_lat\tcell_lon\tpopulation\n";
    for (const auto& w : geo.population) {
      out << formatNumber(w.at.lat) << '\t' << formatNumber(w.at.lon) << '\t' << formatNumber(w.weight) << '\n';
    }
  }
  {
    auto out = open(files.establishments);
    out << "establishment_id\tperiod\tindustry\temployment\toutput\tlat\tlon\n";
    for (const auto& e : geo.establishments) {
      out << e.id << '\t' << e.period << '\t' << e.industry << '\t' << formatNumber(e.employment) << '\t'
          << formatNumber(e.output) << '\t' << formatNumber(e.at.lat) << '\t' << formatNumber(e.at.lon) << '\n';
    }
  }
  {
    auto out = open(files.industryRnd);
    out << "period\tindustry\trnd\n";
    for (const auto& [period, byIndustry] : geo.industryRnD) {
      std::vector<std::pair<std::string, double>> rows(byIndustry.begin(), byIndustry.end());
      std::sort(rows.begin(), rows.end());
      for (const auto& [ind, v] : rows) out << period << '\t' << ind << '\t' << formatNumber(v) << '\n';
    }
  }
}

}  // namespace coinvent
