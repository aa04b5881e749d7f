#pragma once

// Delimited-text input tables. Every file is UTF-8, tab-separated, with a
// one-line header naming the columns; column order in the header is free.
//
//   patents.tsv         patent_id application_date primary_ipc inventors [value]
//                       (inventors: ';'-separated ids, value may be empty)
//   citations.tsv       citing_id cited_id citation_date
//   inventors.tsv       inventor_id period firm_id establishment_id lat lon
//                       (one row per inventor-period; firm, establishment and
//                       coordinates may be empty)
//   establishments.tsv  establishment_id period industry employment output lat lon
//   industry_rnd.tsv    period industry rnd
//   population.tsv      cell_lat cell_lon population
//   uas.tsv             ua_id cell_lat cell_lon

#include <filesystem>
#include <fstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "coinvent/geo.hpp"
#include "coinvent/records.hpp"

namespace coinvent {

struct TableFiles {
  std::filesystem::path patents;
  std::filesystem::path citations;
  std::filesystem::path inventors;
  std::filesystem::path establishments;
  std::filesystem::path industryRnd;
  std::filesystem::path population;
  std::filesystem::path uas;

  /// The conventional file names inside one directory.
  static TableFiles inDirectory(const std::filesystem::path& dir);
};

/// Header-aware reader of one tab-separated file. Errors carry file, line
/// and column.
class TsvReader {
 public:
  TsvReader(const std::filesystem::path& path, const std::vector<std::string>& required,
            const std::vector<std::string>& optional = {});

  bool next();
  bool has(std::string_view column) const;
  std::string_view field(std::string_view column) const;
  double number(std::string_view column) const;
  long integer(std::string_view column) const;
  int line() const { return line_; }

  [[noreturn]] void fail(std::string_view column, const std::string& message) const;

 private:
  std::filesystem::path path_;
  std::ifstream in_;
  std::unordered_map<std::string, std::size_t> columns_;
  std::string row_;
  std::vector<std::string_view> fields_;
  int line_ = 1;
};

struct Ingested {
  Corpus corpus;
  GeoInputs geo;
};

/// Reads and validates every table, then finalizes the corpus. Patent
/// inventors must appear in the inventors table; citations to unknown
/// patents are kept as external citations. Optional geo files that are
/// absent are left empty.
Ingested ingest(const TableFiles& files, const PeriodScheme& periods);

/// Writes the corpus and geography in the formats above.
void exportTables(const Corpus& corpus, const GeoInputs& geo, const TableFiles& files);

/// Shortest text that reads back to the same double.
std::string formatNumber(double v);

}  // namespace coinvent
