#include "coinvent/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <map>
#include <memory>
#include <set>
#include <sstream>

#include "coinvent/errors.hpp"
#include "coinvent/parallel.hpp"
#include "coinvent/rng.hpp"

namespace coinvent {

namespace fs = std::filesystem;

// ---------------------------------------------------------------- config

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

double toDouble(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const double d = std::stod(v, &used);
    if (used == v.size() && std::isfinite(d)) return d;
  } catch (const std::exception&) {
  }
  throw ConfigError(key + ": expected a number, got '" + v + "'");
}

long long toInt(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const long long n = std::stoll(v, &used);
    if (used == v.size()) return n;
  } catch (const std::exception&) {
  }
  throw ConfigError(key + ": expected an integer, got '" + v + "'");
}

bool toBool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw ConfigError(key + ": expected true or false, got '" + v + "'");
}

std::vector<std::string> splitList(const std::string& v, char sep) {
  std::vector<std::string> out;
  std::stringstream ss(v);
  for (std::string item; std::getline(ss, item, sep);) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

std::string joinOrders(const std::vector<int>& orders) {
  std::string s;
  for (std::size_t k = 0; k < orders.size(); ++k) s += (k ? "," : "") + std::to_string(orders[k]);
  return s;
}

std::string fmt(double v) { return formatNumber(v); }

}  // namespace

void PipelineConfig::validate() const {
  periods.validate();
  if (periods.count() < 3) throw ConfigError("periods: need a pre-sample period and two panel periods");
  if (instrumentOrders.empty()) throw ConfigError("instrument_orders: at least one order is required");
  std::set<int> seen;
  for (int l : instrumentOrders) {
    if (l < 1 || l > 5) throw ConfigError("instrument_orders: order " + std::to_string(l) + " outside 1..5");
    if (!seen.insert(l).second) throw ConfigError("instrument_orders: order " + std::to_string(l) + " repeated");
  }
  if (frontierOrder < *seen.rbegin()) throw ConfigError("frontier_order must be at least the largest instrument order");
  for (double r : {radii.inventors, radii.rnd, radii.manufacturing, radii.population, uaBufferKm}) {
    if (!(r > 0.0)) throw ConfigError("radii and the UA buffer must be positive");
  }
  if (!(ciLevel > 0.0 && ciLevel < 1.0)) throw ConfigError("ci_level must lie in (0, 1)");
  if (!(quality.windowYears > 0.0)) throw ConfigError("citation_window_years must be positive");
  if (counterfactual && counterfactualDraws == 0) throw ConfigError("counterfactual_draws must be positive");
}

void PipelineConfig::set(const std::string& rawKey, const std::string& rawValue) {
  const std::string key = trim(rawKey), v = trim(rawValue);
  if (key == "input_dir") {
    inputs = TableFiles::inDirectory(v);
  } else if (key == "patents") {
    inputs.patents = v;
  } else if (key == "citations") {
    inputs.citations = v;
  } else if (key == "inventors") {
    inputs.inventors = v;
  } else if (key == "establishments") {
    inputs.establishments = v;
  } else if (key == "industry_rnd") {
    inputs.industryRnd = v;
  } else if (key == "population") {
    inputs.population = v;
  } else if (key == "uas") {
    inputs.uas = v;
  } else if (key == "panel_file") {
    panelFile = v;
  } else if (key == "periods") {
    PeriodScheme p;
    p.ranges.clear();
    for (const auto& item : splitList(v, ',')) {
      const auto dash = item.find('-');
      if (dash == std::string::npos) throw ConfigError("periods: expected FIRST-LAST year ranges, got '" + item + "'");
      p.ranges.push_back({static_cast<int>(toInt(key, trim(item.substr(0, dash)))),
                          static_cast<int>(toInt(key, trim(item.substr(dash + 1))))});
    }
    p.validate();
    periods = p;
  } else if (key == "value_metric") {
    if (v == "quality") metric = ValueMetric::quality;
    else if (v == "novelty") metric = ValueMetric::novelty;
    else if (v == "given") metric = ValueMetric::given;
    else throw ConfigError("value_metric: expected quality, novelty or given, got '" + v + "'");
  } else if (key == "citation_window_years") {
    quality.windowYears = toDouble(key, v);
  } else if (key == "citation_window_start") {
    if (v == "application") quality.start = QualityOptions::WindowStart::application;
    else if (v == "publication") quality.start = QualityOptions::WindowStart::publication;
    else throw ConfigError("citation_window_start: expected application or publication, got '" + v + "'");
  } else if (key == "publication_lag_days") {
    quality.publicationLagDays = toDouble(key, v);
  } else if (key == "radius_inventors") {
    radii.inventors = toDouble(key, v);
  } else if (key == "radius_rnd") {
    radii.rnd = toDouble(key, v);
  } else if (key == "radius_manufacturing") {
    radii.manufacturing = toDouble(key, v);
  } else if (key == "radius_population") {
    radii.population = toDouble(key, v);
  } else if (key == "ua_buffer_km") {
    uaBufferKm = toDouble(key, v);
  } else if (key == "frontier_order") {
    frontierOrder = static_cast<int>(toInt(key, v));
  } else if (key == "instrument_orders") {
    instrumentOrders.clear();
    for (const auto& item : splitList(v, ',')) instrumentOrders.push_back(static_cast<int>(toInt(key, item)));
  } else if (key == "transform") {
    if (v == "within") transform = FeTransform::within;
    else if (v == "first_difference") transform = FeTransform::firstDifference;
    else throw ConfigError("transform: expected within or first_difference, got '" + v + "'");
  } else if (key == "ipc_class_effects") {
    ipcClassEffects = toBool(key, v);
  } else if (key == "firm_controls") {
    if (v == "none") firmControls = FirmControls::none;
    else if (v == "firm") firmControls = FirmControls::firm;
    else if (v == "establishment") firmControls = FirmControls::establishment;
    else throw ConfigError("firm_controls: expected none, firm or establishment, got '" + v + "'");
  } else if (key == "small_sample") {
    smallSample = toBool(key, v);
  } else if (key == "ci_level") {
    ciLevel = toDouble(key, v);
  } else if (key == "jaccard_include_self") {
    jaccardIncludeSelf = toBool(key, v);
  } else if (key == "counterfactual") {
    counterfactual = toBool(key, v);
  } else if (key == "counterfactual_draws") {
    const auto n = toInt(key, v);
    if (n < 0) throw ConfigError("counterfactual_draws must be non-negative");
    counterfactualDraws = static_cast<std::size_t>(n);
  } else if (key == "counterfactual_level") {
    if (v == "firm") counterfactualLevel = RewireLevel::firm;
    else if (v == "establishment") counterfactualLevel = RewireLevel::establishment;
    else throw ConfigError("counterfactual_level: expected firm or establishment, got '" + v + "'");
  } else if (key == "counterfactual_per_period") {
    counterfactualPerPeriod = toBool(key, v);
  } else if (key == "seed") {
    const auto n = toInt(key, v);
    if (n < 0) throw ConfigError("seed must be non-negative");
    seed = static_cast<std::uint64_t>(n);
  } else if (key == "output_dir") {
    outputDir = v;
  } else {
    throw ConfigError("unknown configuration key '" + key + "'");
  }
}

void PipelineConfig::apply(std::istream& in, const std::string& source) {
  int lineNo = 0;
  for (std::string line; std::getline(in, line);) {
    ++lineNo;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    if (trim(line).empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError(source + ":" + std::to_string(lineNo) + ": expected key=value");
    try {
      set(line.substr(0, eq), line.substr(eq + 1));
    } catch (const ConfigError& e) {
      throw ConfigError(source + ":" + std::to_string(lineNo) + ": " + e.what());
    }
  }
}

void PipelineConfig::applyFile(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path.string() + ": cannot open config file");
  apply(in, path.string());
}

std::vector<std::pair<std::string, std::string>> PipelineConfig::entries() const {
  std::string ranges;
  for (std::size_t k = 0; k < periods.ranges.size(); ++k) {
    ranges += (k ? "," : "") + std::to_string(periods.ranges[k].firstYear) + "-" +
              std::to_string(periods.ranges[k].lastYear);
  }
  const char* metricName = metric == ValueMetric::quality ? "quality" : metric == ValueMetric::novelty ? "novelty" : "given";
  const char* controls = firmControls == FirmControls::none ? "none"
                         : firmControls == FirmControls::firm ? "firm" : "establishment";
  auto b = [](bool x) { return std::string(x ? "true" : "false"); };
  return {
      {"patents", inputs.patents.string()},
      {"citations", inputs.citations.string()},
      {"inventors", inputs.inventors.string()},
      {"establishments", inputs.establishments.string()},
      {"industry_rnd", inputs.industryRnd.string()},
      {"population", inputs.population.string()},
      {"uas", inputs.uas.string()},
      {"panel_file", panelFile.string()},
      {"periods", ranges},
      {"value_metric", metricName},
      {"citation_window_years", fmt(quality.windowYears)},
      {"citation_window_start", quality.start == QualityOptions::WindowStart::application ? "application" : "publication"},
      {"publication_lag_days", fmt(quality.publicationLagDays)},
      {"radius_inventors", fmt(radii.inventors)},
      {"radius_rnd", fmt(radii.rnd)},
      {"radius_manufacturing", fmt(radii.manufacturing)},
      {"radius_population", fmt(radii.population)},
      {"ua_buffer_km", fmt(uaBufferKm)},
      {"frontier_order", std::to_string(frontierOrder)},
      {"instrument_orders", joinOrders(instrumentOrders)},
      {"transform", transform == FeTransform::within ? "within" : "first_difference"},
      {"ipc_class_effects", b(ipcClassEffects)},
      {"firm_controls", controls},
      {"small_sample", b(smallSample)},
      {"ci_level", fmt(ciLevel)},
      {"jaccard_include_self", b(jaccardIncludeSelf)},
      {"counterfactual", b(counterfactual)},
      {"counterfactual_draws", std::to_string(counterfactualDraws)},
      {"counterfactual_level", counterfactualLevel == RewireLevel::firm ? "firm" : "establishment"},
      {"counterfactual_per_period", b(counterfactualPerPeriod)},
      {"seed", std::to_string(seed)},
      {"output_dir", outputDir.string()},
  };
}

std::uint64_t fnv1a(std::string_view bytes, std::uint64_t state) {
  for (unsigned char c : bytes) {
    state ^= c;
    state *= 0x100000001b3ULL;
  }
  return state;
}

std::string hex64(std::uint64_t v) {
  std::ostringstream s;
  s << std::hex << std::setw(16) << std::setfill('0') << v;
  return s.str();
}

std::uint64_t PipelineConfig::hash() const {
  std::uint64_t h = fnv1a("");
  for (const auto& [k, v] : entries()) {
    if (k == "output_dir") continue;
    h = fnv1a(k + "=" + v + "\n", h);
  }
  return h;
}

void Logger::operator()(const std::string& event,
                        std::initializer_list<std::pair<std::string, std::string>> fields) const {
  std::string line = "event=" + event;
  for (const auto& [k, v] : fields) {
    const bool quote = v.find_first_of(" \t\"=") != std::string::npos || v.empty();
    line += " " + k + "=" + (quote ? "\"" + v + "\"" : v);
  }
  line += "\n";
  if (sink_) *sink_ << line << std::flush;
  if (extra_) *extra_ << line << std::flush;
}

// ---------------------------------------------------------------- measures

std::vector<double> patentValues(const Corpus& corpus, const PipelineConfig& config) {
  switch (config.metric) {
    case ValueMetric::quality:
      return qualityValues(corpus, config.quality).values;
    case ValueMetric::novelty:
      return noveltyValues(corpus.patents);
    case ValueMetric::given:
      return givenValues(corpus);
  }
  return {};
}

PeriodNetwork buildPeriodNetwork(const Corpus& corpus, std::span<const double> values, int period) {
  PeriodNetwork n;
  n.period = period;
  n.graph = buildGraph(corpus, period);
  n.kD = differentiatedKnowledgeAll(corpus, n.graph, values);
  n.scopes = periodScopes(corpus, period);
  return n;
}

namespace {
double ownValue(const Corpus& corpus, std::span<const double> values, InventorId i, int period) {
  double s = 0.0;
  for (PatentIndex p : corpus.patentsOf(i, period)) s += values[p] / static_cast<double>(corpus.patents[p].inventors.size());
  return s;
}
}  // namespace

SampleSelection selectSample(const Corpus& corpus, std::span<const double> values,
                             const std::array<PeriodNetwork, 2>& networks, int frontierOrder,
                             std::span<const int> instrumentOrders) {
  SampleSelection sel;
  sel.counts.assign(exclusionRules().size(), 0);
  std::array<HopExplorer, 2> explorers{HopExplorer(networks[0].graph), HopExplorer(networks[1].graph)};

  for (InventorId i = 0; i < corpus.inventorCount(); ++i) {
    std::size_t rule = 0;
    std::array<HopSets, 2> hops;
    auto check = [&]() -> bool {
      if (corpus.patentsOf(i, 1).empty() || corpus.patentsOf(i, 2).empty()) return false;
      ++rule;
      const int e1 = corpus.establishment(i, 1);
      if (e1 == kNoLabel || e1 != corpus.establishment(i, 2)) return false;
      ++rule;
      for (const auto& n : networks) {
        if (n.graph.degree(i) == 0) return false;
      }
      ++rule;
      for (const auto& n : networks) {
        if (!(ownValue(corpus, values, i, n.period) > 0.0)) return false;
      }
      ++rule;
      for (const auto& n : networks) {
        if (!(n.kD[i] > 0.0)) return false;
      }
      ++rule;
      for (std::size_t t = 0; t < 2; ++t) {
        hops[t] = explorers[t].run(i, frontierOrder);
        if (!hops[t].complete()) return false;
      }
      ++rule;
      for (std::size_t t = 0; t < 2; ++t) {
        for (int l : instrumentOrders) {
          const auto iv = buildInstrument(hops[t], [&](InventorId j) { return networks[t].kD[j]; }, l);
          if (!iv || !(*iv > 0.0)) return false;
        }
      }
      return true;
    };
    if (check()) {
      sel.panel.push_back(i);
      sel.hops.push_back(std::move(hops));
    } else {
      ++sel.counts[rule];
      sel.excluded.emplace_back(i, exclusionRules()[rule]);
    }
  }
  if (sel.panel.empty()) {
    std::string msg = "sample selection left no inventors:";
    for (std::size_t r = 0; r < sel.counts.size(); ++r) msg += " " + exclusionRules()[r] + "=" + std::to_string(sel.counts[r]);
    throw DataError(msg);
  }
  return sel;
}

namespace {

const std::vector<std::string> kCovariateNames{"ln_a_inv", "ln_a_rnd", "ln_a_mnf_e", "ln_a_mnf_o", "ln_a_pop"};

/// Radius queries of one period.
class Neighborhood {
 public:
  Neighborhood(const Corpus& corpus, const GeoInputs& geo, const PeriodNetwork& net, const NeighborhoodRadii& radii)
      : corpus_(corpus),
        net_(net),
        radii_(radii),
        activeIndex_(locate(corpus, net), std::max(radii.inventors, 1.0)),
        employment_(weights(geo, net.period, true), radii.manufacturing),
        output_(weights(geo, net.period, false), radii.manufacturing),
        population_(geo.population, radii.population) {
    if (const auto it = geo.industryRnD.find(net.period - 1); it != geo.industryRnD.end()) {
      std::vector<Establishment> prior;
      for (const auto& e : geo.establishments) {
        if (e.period == net.period - 1) prior.push_back(e);
      }
      rnd_.emplace(allocatedRnD(it->second, employmentShares(prior)), radii.rnd);
    }
  }

  NeighborhoodCovariates at(InventorId i) const {
    NeighborhoodCovariates c;
    const auto where = corpus_.location(i, net_.period);
    if (!where) return c;
    const auto nb = net_.graph.neighbors(i);
    for (std::size_t k : activeIndex_.within(*where, radii_.inventors)) {
      const InventorId j = activeIds_[k];
      if (j != i && !std::binary_search(nb.begin(), nb.end(), j)) c.aInv += 1.0;
    }
    if (rnd_) c.aRnD = (*rnd_)(*where);
    c.aMnfE = employment_(*where);
    c.aMnfO = output_(*where);
    c.aPop = population_(*where);
    return c;
  }

 private:
  std::vector<GeoPoint> locate(const Corpus& corpus, const PeriodNetwork& net) {
    std::vector<GeoPoint> points;
    for (InventorId j : net.graph.nodes()) {
      if (auto p = corpus.location(j, net.period)) {
        points.push_back(*p);
        activeIds_.push_back(j);
      }
    }
    return points;
  }
  static std::vector<WeightedPoint> weights(const GeoInputs& geo, int period, bool employment) {
    std::vector<WeightedPoint> out;
    for (const auto& e : geo.establishments) {
      if (e.period == period) out.push_back({e.at, employment ? e.employment : e.output});
    }
    return out;
  }

  const Corpus& corpus_;
  const PeriodNetwork& net_;
  NeighborhoodRadii radii_;
  std::vector<InventorId> activeIds_;
  SpatialIndex activeIndex_;
  RadiusAggregator employment_;
  RadiusAggregator output_;
  RadiusAggregator population_;
  std::optional<RadiusAggregator> rnd_;
};

std::string modalClass(const Corpus& corpus, InventorId i, int period) {
  std::map<std::string, int> counts;
  for (PatentIndex p : corpus.patentsOf(i, period)) ++counts[corpus.classNames()[static_cast<std::size_t>(corpus.classOf(p))]];
  std::string best;
  int most = 0;
  for (const auto& [cls, n] : counts) {
    if (n > most) {
      best = cls;
      most = n;
    }
  }
  return best;
}

}  // namespace

PanelBuild buildPanel(const Corpus& corpus, const GeoInputs& geo, const PipelineConfig& config) {
  config.validate();
  PanelBuild b;
  b.values = patentValues(corpus, config);
  for (int t = 1; t <= 2; ++t) b.networks[static_cast<std::size_t>(t - 1)] = buildPeriodNetwork(corpus, b.values, t);
  b.selection = selectSample(corpus, b.values, b.networks, config.frontierOrder, config.instrumentOrders);
  const auto& panel = b.selection.panel;

  // Clusters: UA of the period-1 location; unlocated inventors join the rural cluster.
  std::vector<GeoPoint> firstLocations;
  std::vector<std::size_t> locatedRow;
  for (std::size_t k = 0; k < panel.size(); ++k) {
    if (auto p = corpus.location(panel[k], 1)) {
      firstLocations.push_back(*p);
      locatedRow.push_back(k);
    }
  }
  std::vector<std::string> cluster(panel.size(), "rural");
  const UaAssignment assignment = assignUA(firstLocations, geo.uas, config.uaBufferKm);
  for (std::size_t q = 0; q < locatedRow.size(); ++q) {
    if (assignment.ua[q]) cluster[locatedRow[q]] = geo.uas[*assignment.ua[q]].id;
  }
  b.unlocated = panel.size() - locatedRow.size();

  b.panel.covariateNames = kCovariateNames;
  // Rows are emitted inventor by inventor so both periods sit together.
  std::array<std::unique_ptr<Neighborhood>, 2> hoods;
  std::array<std::unique_ptr<MembershipIndex>, 2> members;
  for (std::size_t t = 0; t < 2; ++t) {
    hoods[t] = std::make_unique<Neighborhood>(corpus, geo, b.networks[t], config.radii);
    members[t] = std::make_unique<MembershipIndex>(corpus, b.networks[t].period);
    const auto& scopes = b.networks[t].scopes;
    members[t]->cacheScopes([&](InventorId j) { return std::span<const int>(scopes[j]); });
  }
  for (std::size_t k = 0; k < panel.size(); ++k) {
    const InventorId i = panel[k];
    for (std::size_t t = 0; t < 2; ++t) {
      const PeriodNetwork& net = b.networks[t];
      auto scope = [&](InventorId j) { return std::span<const int>(net.scopes[j]); };
      InventorPeriodMeasures m = inventorMeasures(corpus, net.graph, b.values, i);
      m.firm = firmCovariates(corpus, net.graph, *members[t], scope, i);
      const NeighborhoodCovariates hood = hoods[t]->at(i);

      PanelObservation row;
      row.inventor = corpus.inventors[i].id;
      row.period = net.period;
      row.lnY = std::log(m.y);
      row.lnYp = std::log(m.yP);
      row.lnYq = row.lnY - row.lnYp;
      row.lnKD = std::log(m.kD);
      row.firstPatent = m.k == 0;
      row.lnK = m.k > 0 ? std::log(static_cast<double>(m.k)) : 0.0;
      row.lnK2 = row.lnK * row.lnK;
      row.covariates = {std::log1p(hood.aInv), std::log1p(hood.aRnD), std::log1p(hood.aMnfE), std::log1p(hood.aMnfO),
                        std::log1p(hood.aPop)};
      row.ipcClass = modalClass(corpus, i, net.period);
      row.cluster = cluster[k];
      const HopSets& hops = b.selection.hops[k][t];
      for (int l : config.instrumentOrders) {
        row.instruments[l] = std::log(*buildInstrument(hops, [&](InventorId j) { return net.kD[j]; }, l));
      }
      if (m.firm) {
        const auto& f = *m.firm;
        row.firmControls = std::array<double, 4>{
            std::log1p(static_cast<double>(f.firmSize)), std::log1p(static_cast<double>(f.firmScope)),
            std::log1p(static_cast<double>(f.establishmentSize)), std::log1p(static_cast<double>(f.establishmentScope))};
      }
      b.jaccard.push_back(jaccardProfile(hops, scope, config.jaccardIncludeSelf));
      b.measures.push_back(std::move(m));
      b.neighborhoods.push_back(hood);
      b.panel.rows.push_back(std::move(row));
    }
  }
  return b;
}

// ---------------------------------------------------------------- panel files

void writePanel(std::ostream& out, const Panel& panel) {
  std::set<int> orders;
  bool firm = false;
  for (const auto& r : panel.rows) {
    for (const auto& [l, v] : r.instruments) orders.insert(l);
    firm = firm || r.firmControls.has_value();
  }
  out << "inventor\tperiod\tln_y\tln_yp\tln_yq\tln_kd\tln_k\tln_k2\tfirst_patent";
  for (const auto& c : panel.covariateNames) out << '\t' << c;
  out << "\tipc_class\tcluster";
  for (int l : orders) out << '\t' << instrumentName(l);
  if (firm) out << "\tln_f\tln_sf\tln_e\tln_se";
  out << '\n';
  for (const auto& r : panel.rows) {
    out << r.inventor << '\t' << r.period << '\t' << fmt(r.lnY) << '\t' << fmt(r.lnYp) << '\t' << fmt(r.lnYq) << '\t'
        << fmt(r.lnKD) << '\t' << fmt(r.lnK) << '\t' << fmt(r.lnK2) << '\t' << (r.firstPatent ? 1 : 0);
    for (double c : r.covariates) out << '\t' << fmt(c);
    out << '\t' << r.ipcClass << '\t' << r.cluster;
    for (int l : orders) {
      const auto it = r.instruments.find(l);
      out << '\t' << (it == r.instruments.end() ? std::string() : fmt(it->second));
    }
    if (firm) {
      for (std::size_t c = 0; c < 4; ++c) out << '\t' << (r.firmControls ? fmt((*r.firmControls)[c]) : std::string());
    }
    out << '\n';
  }
}

Panel readPanel(const fs::path& path) {
  std::ifstream probe(path);
  if (!probe) throw DataError(path.string() + ": cannot open panel file");
  std::string header;
  std::getline(probe, header);
  const std::vector<std::string> core{"inventor", "period", "ln_y",  "ln_yp", "ln_yq",     "ln_kd",
                                      "ln_k",     "ln_k2",  "first_patent", "ipc_class", "cluster"};
  const std::vector<std::string> firmCols{"ln_f", "ln_sf", "ln_e", "ln_se"};
  Panel panel;
  std::vector<std::string> optional;
  std::vector<int> orders;
  for (const auto& name : splitList(header, '\t')) {
    if (std::find(core.begin(), core.end(), name) != core.end()) continue;
    if (std::find(firmCols.begin(), firmCols.end(), name) != firmCols.end()) {
      optional.push_back(name);
    } else if (name.rfind("lnKD_IV", 0) == 0) {
      optional.push_back(name);
      orders.push_back(static_cast<int>(toInt(name, name.substr(7))));
    } else {
      optional.push_back(name);
      panel.covariateNames.push_back(name);
    }
  }
  TsvReader r(path, core, optional);
  const bool firm = r.has("ln_f");
  while (r.next()) {
    PanelObservation o;
    o.inventor = std::string(r.field("inventor"));
    o.period = static_cast<int>(r.integer("period"));
    o.lnY = r.number("ln_y");
    o.lnYp = r.number("ln_yp");
    o.lnYq = r.number("ln_yq");
    o.lnKD = r.number("ln_kd");
    o.lnK = r.number("ln_k");
    o.lnK2 = r.number("ln_k2");
    o.firstPatent = r.integer("first_patent") != 0;
    for (const auto& c : panel.covariateNames) o.covariates.push_back(r.number(c));
    o.ipcClass = std::string(r.field("ipc_class"));
    o.cluster = std::string(r.field("cluster"));
    for (int l : orders) {
      if (!r.field(instrumentName(l)).empty()) o.instruments[l] = r.number(instrumentName(l));
    }
    if (firm && !r.field("ln_f").empty()) {
      o.firmControls = std::array<double, 4>{r.number("ln_f"), r.number("ln_sf"), r.number("ln_e"), r.number("ln_se")};
    }
    panel.rows.push_back(std::move(o));
  }
  return panel;
}

// ---------------------------------------------------------------- estimation

EstimationSuite estimateSuite(const Panel& panel, const PipelineConfig& config) {
  const DesignSpec spec{config.transform, config.ipcClassEffects, config.firmControls, config.instrumentOrders};
  const VcvOptions vcv{config.smallSample};
  EstimationSuite s{assembleDesign(panel, spec), {}, {}, {}};
  s.ols = fitOls(s.design, Outcome::lnY, vcv);
  s.ols.label = "OLS";
  s.iv.push_back(fitTsls(s.design, config.instrumentOrders, Outcome::lnY, vcv));
  if (config.instrumentOrders.size() > 1) {
    for (int l : config.instrumentOrders) s.iv.push_back(fitTsls(s.design, {l}, Outcome::lnY, vcv));
  }
  s.decomposition = fitDecomposition(s.design, config.instrumentOrders, config.ciLevel, vcv);
  return s;
}

namespace {
std::vector<const EstimationResult*> columns(const EstimationSuite& s) {
  std::vector<const EstimationResult*> c{&s.ols};
  for (const auto& r : s.iv) c.push_back(&r);
  return c;
}

std::string fixed(double v, int digits = 4) {
  if (!std::isfinite(v)) return "n/a";
  std::ostringstream o;
  o << std::fixed << std::setprecision(digits) << v;
  return o.str();
}
}  // namespace

void writeEstimateTable(std::ostream& out, const EstimationSuite& s) {
  const auto cols = columns(s);
  const int w0 = 22, w = 14;
  out << std::left << std::setw(w0) << "" << std::right;
  for (const auto* c : cols) out << std::setw(w) << c->label;
  out << '\n';
  for (std::size_t k = 0; k < s.ols.names.size(); ++k) {
    out << std::left << std::setw(w0) << s.ols.names[k] << std::right;
    for (const auto* c : cols) out << std::setw(w) << fixed(c->coef(static_cast<Eigen::Index>(k)));
    out << '\n' << std::setw(w0) << "";
    for (const auto* c : cols) {
      out << std::setw(w) << ("(" + fixed(std::sqrt(c->vcv(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(k)))) + ")");
    }
    out << '\n';
  }
  auto footer = [&](const std::string& name, auto&& cell) {
    out << std::left << std::setw(w0) << name << std::right;
    for (const auto* c : cols) out << std::setw(w) << cell(*c);
    out << '\n';
  };
  footer("Effective F", [](const EstimationResult& r) { return r.effectiveF ? fixed(r.effectiveF->statistic, 2) : ""; });
  footer("Critical value", [](const EstimationResult& r) { return r.effectiveF ? fixed(r.effectiveF->critical, 2) : ""; });
  footer("Hansen J p-value", [](const EstimationResult& r) {
    if (!r.firstStage) return std::string();
    return r.hansenJ ? fixed(r.hansenJ->pValue, 3) : std::string("n/a");
  });
  footer("Within R2", [](const EstimationResult& r) { return fixed(r.r2, 3); });
  footer("Observations", [](const EstimationResult& r) { return std::to_string(r.nObs); });
  footer("Clusters", [](const EstimationResult& r) { return std::to_string(r.nClusters); });
  if (!s.design.droppedColumns.empty()) {
    // Class dummies absorbed by the inventor effects are only counted.
    std::size_t classes = 0;
    out << "Dropped columns:";
    for (const auto& c : s.design.droppedColumns) {
      if (c.rfind("class:", 0) == 0) ++classes;
      else out << ' ' << c;
    }
    if (classes > 0) out << ' ' << classes << " class dummies";
    out << '\n';
  }
}

void writeEstimateTsv(std::ostream& out, const EstimationSuite& s) {
  out << "model\tterm\tcoef\tse\n";
  for (const auto* c : columns(s)) {
    for (std::size_t k = 0; k < c->names.size(); ++k) {
      const auto e = static_cast<Eigen::Index>(k);
      out << c->label << '\t' << c->names[k] << '\t' << fmt(c->coef(e)) << '\t' << fmt(std::sqrt(c->vcv(e, e))) << '\n';
    }
  }
  out << "model\tstatistic\tvalue\t\n";
  for (const auto* c : columns(s)) {
    out << c->label << "\tr2\t" << fmt(c->r2) << "\t\n";
    out << c->label << "\tn_obs\t" << c->nObs << "\t\n";
    out << c->label << "\tn_clusters\t" << c->nClusters << "\t\n";
    if (c->effectiveF) {
      out << c->label << "\teffective_f\t" << fmt(c->effectiveF->statistic) << "\t\n";
      out << c->label << "\tcritical_value\t" << fmt(c->effectiveF->critical) << "\t\n";
      out << c->label << "\teffective_dof\t" << fmt(c->effectiveF->effectiveDof) << "\t\n";
    }
    if (c->firstStage) {
      if (c->hansenJ) {
        out << c->label << "\thansen_j\t" << fmt(c->hansenJ->statistic) << "\t\n";
        out << c->label << "\thansen_j_dof\t" << c->hansenJ->dof << "\t\n";
        out << c->label << "\thansen_j_p\t" << fmt(c->hansenJ->pValue) << "\t\n";
      } else {
        out << c->label << "\thansen_j\tNA\t\n";
      }
    }
  }
}

void writeVcvTsv(std::ostream& out, const EstimationSuite& s) {
  out << "model\trow\tcol\tvalue\n";
  for (const auto* c : columns(s)) {
    for (std::size_t a = 0; a < c->names.size(); ++a) {
      for (std::size_t b = 0; b < c->names.size(); ++b) {
        out << c->label << '\t' << c->names[a] << '\t' << c->names[b] << '\t'
            << fmt(c->vcv(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b))) << '\n';
      }
    }
  }
}

void writeFirstStageTable(std::ostream& out, const EstimationSuite& s) {
  std::vector<std::string> names;
  for (const auto& r : s.iv) {
    for (const auto& n : r.firstStage->names) {
      if (std::find(names.begin(), names.end(), n) == names.end()) names.push_back(n);
    }
  }
  // Instruments first, in order of appearance; exogenous regressors follow.
  std::stable_partition(names.begin(), names.end(), [](const std::string& n) { return n.rfind("lnKD_IV", 0) == 0; });
  const int w0 = 22, w = 14;
  out << std::left << std::setw(w0) << "" << std::right;
  for (const auto& r : s.iv) out << std::setw(w) << r.label;
  out << '\n';
  for (const auto& n : names) {
    std::vector<std::string> coef, se;
    for (const auto& r : s.iv) {
      const auto& fs = *r.firstStage;
      const auto it = std::find(fs.names.begin(), fs.names.end(), n);
      if (it == fs.names.end()) {
        coef.emplace_back();
        se.emplace_back();
      } else {
        const auto k = static_cast<Eigen::Index>(it - fs.names.begin());
        coef.push_back(fixed(fs.coef(k)));
        se.push_back("(" + fixed(std::sqrt(fs.vcv(k, k))) + ")");
      }
    }
    out << std::left << std::setw(w0) << n << std::right;
    for (const auto& c : coef) out << std::setw(w) << c;
    out << '\n' << std::setw(w0) << "";
    for (const auto& c : se) out << std::setw(w) << c;
    out << '\n';
  }
  out << std::left << std::setw(w0) << "R2" << std::right;
  for (const auto& r : s.iv) out << std::setw(w) << fixed(r.firstStage->r2, 3);
  out << '\n' << std::left << std::setw(w0) << "Effective F" << std::right;
  for (const auto& r : s.iv) out << std::setw(w) << (r.effectiveF ? fixed(r.effectiveF->statistic, 2) : "");
  out << '\n';
}

void writeFirstStageTsv(std::ostream& out, const EstimationSuite& s) {
  out << "model\tterm\tcoef\tse\n";
  for (const auto& r : s.iv) {
    const auto& fs = *r.firstStage;
    for (std::size_t k = 0; k < fs.names.size(); ++k) {
      const auto e = static_cast<Eigen::Index>(k);
      out << r.label << '\t' << fs.names[k] << '\t' << fmt(fs.coef(e)) << '\t' << fmt(std::sqrt(fs.vcv(e, e))) << '\n';
    }
    out << r.label << "\tr2\t" << fmt(fs.r2) << "\t\n";
  }
}

// ---------------------------------------------------------------- pipeline

namespace {

std::string fileHash(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream buf;
  buf << in.rdbuf();
  return hex64(fnv1a(buf.str()));
}

class OutputSet {
 public:
  explicit OutputSet(fs::path dir) : dir_(std::move(dir)) {}

  template <typename Writer>
  void write(const std::string& name, Writer&& writer) {
    const fs::path p = dir_ / name;
    std::ofstream out(p, std::ios::binary);
    if (!out) throw ConfigError(p.string() + ": cannot write output file");
    writer(out);
    out.close();
    if (!out) throw ConfigError(p.string() + ": write failed");
    files_.push_back(p);
  }
  const std::vector<fs::path>& files() const { return files_; }

 private:
  fs::path dir_;
  std::vector<fs::path> files_;
};

void writeMeasures(std::ostream& out, const Corpus& corpus, const PanelBuild& b) {
  out << "inventor\tperiod\ty_bar\tn\ty\ty_p\ty_q\tk_d\tk\tscope_size\tfirm_size\tfirm_scope\test_size\test_scope"
         "\ta_inv\ta_rnd\ta_mnf_e\ta_mnf_o\ta_pop\n";
  for (std::size_t r = 0; r < b.measures.size(); ++r) {
    const auto& m = b.measures[r];
    const auto& h = b.neighborhoods[r];
    out << corpus.inventors[m.inventor].id << '\t' << m.period << '\t' << fmt(m.yBar) << '\t' << m.n << '\t'
        << fmt(m.y) << '\t' << fmt(m.yP) << '\t' << fmt(m.yQ) << '\t' << fmt(m.kD) << '\t' << m.k << '\t'
        << m.scopeSet.size();
    if (m.firm) {
      out << '\t' << m.firm->firmSize << '\t' << m.firm->firmScope << '\t' << m.firm->establishmentSize << '\t'
          << m.firm->establishmentScope;
    } else {
      out << "\t\t\t\t";
    }
    out << '\t' << fmt(h.aInv) << '\t' << fmt(h.aRnD) << '\t' << fmt(h.aMnfE) << '\t' << fmt(h.aMnfO) << '\t'
        << fmt(h.aPop) << '\n';
  }
}

void writeJaccard(std::ostream& out, const Corpus& corpus, const PanelBuild& b) {
  out << "inventor\tperiod\torder\tjaccard\n";
  for (std::size_t r = 0; r < b.measures.size(); ++r) {
    const auto& prof = b.jaccard[r];
    for (std::size_t l = 0; l < prof.size(); ++l) {
      out << corpus.inventors[b.measures[r].inventor].id << '\t' << b.measures[r].period << '\t' << l << '\t'
          << (prof[l] ? fmt(*prof[l]) : "NA") << '\n';
    }
  }
}

void writeJaccardSummary(std::ostream& out, const PanelBuild& b) {
  std::map<std::pair<int, std::size_t>, std::pair<double, std::size_t>> acc;
  for (std::size_t r = 0; r < b.measures.size(); ++r) {
    for (std::size_t l = 0; l < b.jaccard[r].size(); ++l) {
      if (!b.jaccard[r][l]) continue;
      auto& [sum, n] = acc[{b.measures[r].period, l}];
      sum += *b.jaccard[r][l];
      ++n;
    }
  }
  out << "period\torder\tmean\tcount\n";
  for (const auto& [key, v] : acc) {
    out << key.first << '\t' << key.second << '\t' << fmt(v.first / static_cast<double>(v.second)) << '\t' << v.second
        << '\n';
  }
}

void writeDecomposition(std::ostream& out, const Decomposition& d, double level) {
  out << "statistic\tvalue\n"
      << "beta\t" << fmt(d.beta) << "\n"
      << "beta_p\t" << fmt(d.betaP) << "\n"
      << "beta_q\t" << fmt(d.betaQ) << "\n"
      << "share_q\t" << fmt(d.ratio) << "\n"
      << "share_p\t" << fmt(1.0 - d.ratio) << "\n"
      << "share_se\t" << fmt(d.ratioStdError) << "\n"
      << "share_q_ci_low\t" << fmt(d.ciLow) << "\n"
      << "share_q_ci_high\t" << fmt(d.ciHigh) << "\n"
      << "share_p_ci_low\t" << fmt(1.0 - d.ciHigh) << "\n"
      << "share_p_ci_high\t" << fmt(1.0 - d.ciLow) << "\n"
      << "ci_level\t" << fmt(level) << "\n"
      << "additivity_gap\t" << fmt(d.additivityGap) << "\n";
}

void writeManifest(const fs::path& path, const PipelineConfig& config, const std::vector<fs::path>& inputs,
                   const std::vector<fs::path>& outputs, const std::string& status, const std::string& error) {
  std::ofstream out(path, std::ios::binary);
  out << "key\tvalue\n"
      << "status\t" << status << "\n"
      << "config_hash\t" << hex64(config.hash()) << "\n"
      << "seed\t" << config.seed << "\n";
  if (!error.empty()) {
    std::string clean = error;
    std::replace(clean.begin(), clean.end(), '\t', ' ');
    std::replace(clean.begin(), clean.end(), '\n', ' ');
    out << "error\t" << clean << "\n";
  }
  for (const auto& p : inputs) out << "input:" << p.filename().string() << '\t' << fileHash(p) << '\n';
  for (const auto& p : outputs) out << "output:" << p.filename().string() << '\t' << fileHash(p) << '\n';
}

}  // namespace

PipelineReport runPipeline(const PipelineConfig& config, const PipelineStages& stages, const Logger& log) {
  config.validate();
  fs::create_directories(config.outputDir);
  OutputSet outputs(config.outputDir);
  PipelineReport report;
  report.manifest = config.outputDir / "manifest.tsv";
  std::vector<fs::path> inputs;

  const bool fromPanel = !config.panelFile.empty() && !stages.measure && !stages.counterfactual;
  try {
    outputs.write("config.txt", [&](std::ostream& out) {
      for (const auto& [k, v] : config.entries()) {
        if (k != "output_dir") out << k << '=' << v << '\n';
      }
    });
    log("config", {{"hash", hex64(config.hash())}, {"seed", std::to_string(config.seed)}});

    std::optional<Ingested> data;
    std::optional<PanelBuild> build;
    Panel panel;
    if (fromPanel) {
      inputs.push_back(config.panelFile);
      panel = readPanel(config.panelFile);
      log("panel_read", {{"file", config.panelFile.string()}, {"rows", std::to_string(panel.rows.size())}});
    } else {
      const TableFiles& f = config.inputs;
      for (const auto& p : {f.inventors, f.patents, f.citations, f.establishments, f.industryRnd, f.population, f.uas}) {
        if (fs::exists(p)) inputs.push_back(p);
      }
      data = ingest(config.inputs, config.periods);
      log("ingest", {{"inventors", std::to_string(data->corpus.inventorCount())},
                     {"patents", std::to_string(data->corpus.patentCount())},
                     {"external_citations", std::to_string(data->corpus.externalCitations.size())},
                     {"establishments", std::to_string(data->geo.establishments.size())},
                     {"uas", std::to_string(data->geo.uas.size())}});
      build = buildPanel(data->corpus, data->geo, config);
      const auto& sel = build->selection;
      for (std::size_t r = 0; r < sel.counts.size(); ++r) {
        log("exclusion", {{"rule", exclusionRules()[r]}, {"count", std::to_string(sel.counts[r])}});
      }
      log("sample", {{"panel_inventors", std::to_string(sel.panel.size())},
                     {"excluded", std::to_string(sel.excluded.size())},
                     {"unlocated", std::to_string(build->unlocated)}});
      panel = build->panel;
      report.panelInventors = sel.panel.size();
      if (stages.measure) {
        const Corpus& corpus = data->corpus;
        outputs.write("measures.tsv", [&](std::ostream& o) { writeMeasures(o, corpus, *build); });
        outputs.write("exclusions.tsv", [&](std::ostream& o) {
          o << "inventor\trule\n";
          for (const auto& [i, rule] : sel.excluded) o << corpus.inventors[i].id << '\t' << rule << '\n';
        });
        outputs.write("exclusion_counts.tsv", [&](std::ostream& o) {
          o << "rule\tcount\n";
          for (std::size_t r = 0; r < sel.counts.size(); ++r) o << exclusionRules()[r] << '\t' << sel.counts[r] << '\n';
        });
        outputs.write("panel.tsv", [&](std::ostream& o) { writePanel(o, panel); });
        outputs.write("jaccard.tsv", [&](std::ostream& o) { writeJaccard(o, corpus, *build); });
        outputs.write("jaccard_summary.tsv", [&](std::ostream& o) { writeJaccardSummary(o, *build); });
      }
    }

    if (stages.estimate || stages.counterfactual) {
      EstimationSuite suite = estimateSuite(panel, config);
      for (const auto& c : columns(suite)) {
        log("estimate", {{"model", c->label},
                         {"beta", fmt(c->coef(0))},
                         {"se", fmt(std::sqrt(c->vcv(0, 0)))},
                         {"effective_f", c->effectiveF ? fmt(c->effectiveF->statistic) : "NA"},
                         {"hansen_j_p", c->hansenJ ? fmt(c->hansenJ->pValue) : "NA"}});
      }
      if (stages.estimate) {
        outputs.write("estimates.txt", [&](std::ostream& o) { writeEstimateTable(o, suite); });
        outputs.write("estimates.tsv", [&](std::ostream& o) { writeEstimateTsv(o, suite); });
        outputs.write("estimates_vcv.tsv", [&](std::ostream& o) { writeVcvTsv(o, suite); });
        outputs.write("first_stage.txt", [&](std::ostream& o) { writeFirstStageTable(o, suite); });
        outputs.write("first_stage.tsv", [&](std::ostream& o) { writeFirstStageTsv(o, suite); });
        outputs.write("decomposition.tsv", [&](std::ostream& o) { writeDecomposition(o, *suite.decomposition, config.ciLevel); });
      }
      if (stages.counterfactual) {
        const Corpus& corpus = data->corpus;
        EnsembleInputs in;
        in.corpus = &corpus;
        in.values = build->values;
        in.panel = panel;
        in.spec = DesignSpec{config.transform, config.ipcClassEffects, config.firmControls, {}};
        in.betaHat = suite.iv.front().coef(0);
        in.periodOne = makeConstraint(corpus, build->networks[0].graph, build->selection.panel, config.counterfactualLevel);
        in.periodTwo = makeConstraint(corpus, build->networks[1].graph, build->selection.panel, config.counterfactualLevel);
        EnsembleOptions opt;
        opt.draws = config.counterfactualDraws;
        opt.seed = deriveSeed(config.seed, 0xcf);
        opt.resamplePerPeriod = config.counterfactualPerPeriod;
        opt.threads = threadCount();
        EnsembleResult ens = runEnsemble(in, opt);
        std::size_t dropped = 0;
        for (const auto& d : ens.draws) dropped += d.droppedInventors;
        log("counterfactual", {{"draws", std::to_string(ens.summary.completed)},
                               {"skipped", std::to_string(ens.summary.skipped)},
                               {"dropped_inventor_draws", std::to_string(dropped)},
                               {"mean_ratio", fmt(ens.summary.meanRatio)}});
        outputs.write("counterfactual.tsv", [&](std::ostream& o) { writeEnsemble(o, ens); });
        outputs.write("counterfactual_summary.tsv", [&](std::ostream& o) { writeEnsembleSummary(o, ens); });
        report.ensemble = std::move(ens);
      }
      report.estimates = std::move(suite);
    }
  } catch (const std::exception& e) {
    writeManifest(report.manifest, config, inputs, outputs.files(), "failed", e.what());
    log("failed", {{"error", e.what()}});
    throw;
  }
  writeManifest(report.manifest, config, inputs, outputs.files(), "ok", "");
  report.outputs = outputs.files();
  log("done", {{"manifest", report.manifest.string()}, {"outputs", std::to_string(report.outputs.size())}});
  return report;
}

}  // namespace coinvent
