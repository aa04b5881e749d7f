#pragma once

#include <compare>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace coinvent {

/// Dense inventor index into Corpus::inventors.
using InventorId = std::uint32_t;
/// Dense patent index into Corpus::patents.
using PatentIndex = std::uint32_t;

inline constexpr int kNoLabel = -1;

/// Calendar date stored as days since 1970-01-01.
struct Date {
  std::int32_t days = 0;

  static Date fromYmd(int year, unsigned month, unsigned day);
  /// Parses YYYY-MM-DD. Throws DataError on malformed or impossible dates.
  static Date parse(std::string_view text);
  std::string str() const;
  int year() const;

  Date plusDays(double d) const;
  auto operator<=>(const Date&) const = default;
};

/// WGS84 coordinates in degrees.
struct GeoPoint {
  double lat = 0.0;
  double lon = 0.0;
};

/// One inventor's affiliation and location in one period. Labels are interned
/// indices into Corpus::firmNames / Corpus::establishmentNames, or kNoLabel.
struct Affiliation {
  int period = 0;
  int firm = kNoLabel;
  int establishment = kNoLabel;
  std::optional<GeoPoint> location;
};

struct InventorRecord {
  std::string id;
  std::vector<Affiliation> affiliations;

  const Affiliation* at(int period) const;
};

struct Citation {
  std::string citingId;
  Date date;
  /// Resolved when the citing patent is part of the corpus.
  std::optional<PatentIndex> citing;
};

/// A citation whose cited patent is not part of the corpus.
struct ExternalCitation {
  std::string citingId;
  std::string citedId;
  Date date;
};

struct PatentRecord {
  std::string id;
  std::vector<InventorId> inventors;  // G_j, sorted, unique
  std::string primaryCategory;        // e.g. "H01L 21/02"
  Date applicationDate;
  std::vector<Citation> citedBy;
  /// Externally supplied patent value (used by the "given" value metric).
  std::optional<double> value;
};

/// Hierarchical levels of a primary technology code.
enum class CategoryLevel { section, cls, subclass, subgroup };

/// Truncates a code like "H01L 21/02" to the requested level
/// ("H", "H01", "H01L", "H01L 21/02").
std::string categoryAt(std::string_view code, CategoryLevel level);

/// Year ranges of the analysis periods. Index 0 is the pre-sample period used
/// only for cumulative scope, 1 and 2 form the panel, 3 collects later
/// citing patents.
struct PeriodScheme {
  struct Range {
    int firstYear;
    int lastYear;
  };
  std::vector<Range> ranges{{1993, 1999}, {2000, 2004}, {2005, 2009}, {2010, 9999}};

  std::optional<int> periodOf(Date d) const;
  int count() const { return static_cast<int>(ranges.size()); }
  /// Throws ConfigError unless ranges are ordered and non-overlapping.
  void validate() const;
};

/// A validated, indexed patent corpus. Built by ingestion or by the economy
/// simulator; call finalize() after filling inventors and patents.
class Corpus {
 public:
  PeriodScheme periods;
  std::vector<InventorRecord> inventors;
  std::vector<PatentRecord> patents;
  std::vector<std::string> firmNames;
  std::vector<std::string> establishmentNames;
  /// Citations whose cited patent is not in the corpus (kept for accounting).
  std::vector<ExternalCitation> externalCitations;

  int internFirm(std::string_view name);
  int internEstablishment(std::string_view name);
  InventorId addInventor(std::string id);

  std::optional<InventorId> findInventor(std::string_view id) const;
  std::optional<PatentIndex> findPatent(std::string_view id) const;

  /// Resolves citing ids, assigns periods, interns categories and builds the
  /// per-(inventor, period) patent index. Throws DataError on integrity
  /// failures (empty inventor set, duplicate ids, undated patents).
  void finalize();

  std::size_t inventorCount() const { return inventors.size(); }
  std::size_t patentCount() const { return patents.size(); }

  /// Period of patent p, or -1 when its date falls outside every period.
  int patentPeriod(PatentIndex p) const { return patentPeriod_[p]; }
  /// Interned subgroup (full code) of patent p.
  int subgroupOf(PatentIndex p) const { return subgroup_[p]; }
  /// Interned class (three-character prefix) of patent p.
  int classOf(PatentIndex p) const { return class_[p]; }
  const std::vector<std::string>& subgroupNames() const { return subgroupNames_; }
  const std::vector<std::string>& classNames() const { return classNames_; }

  /// Patents of inventor i applied in period t (the set 𝒢_it), ascending.
  std::span<const PatentIndex> patentsOf(InventorId i, int period) const;
  /// Firm label of inventor i in period t, or kNoLabel.
  int firm(InventorId i, int period) const;
  int establishment(InventorId i, int period) const;
  std::optional<GeoPoint> location(InventorId i, int period) const;

  bool finalized() const { return finalized_; }

 private:
  std::unordered_map<std::string, InventorId> inventorIndex_;
  std::unordered_map<std::string, PatentIndex> patentIndex_;
  std::unordered_map<std::string, int> firmIndex_;
  std::unordered_map<std::string, int> establishmentIndex_;

  std::vector<int> patentPeriod_;
  std::vector<int> subgroup_;
  std::vector<int> class_;
  std::vector<std::string> subgroupNames_;
  std::vector<std::string> classNames_;
  // CSR per period: offsets_[t][i] .. offsets_[t][i + 1] into byInventor_[t].
  std::vector<std::vector<std::uint32_t>> offsets_;
  std::vector<std::vector<PatentIndex>> byInventor_;
  std::vector<std::vector<int>> firmTable_;
  std::vector<std::vector<int>> establishmentTable_;
  bool finalized_ = false;
};

}  // namespace coinvent
