#include "coinvent/model_sim.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numbers>
#include <numeric>
#include <random>
#include <set>
#include <sstream>
#include <variant>

#include "coinvent/errors.hpp"
#include "coinvent/rng.hpp"

namespace coinvent {

void BfParams::validate() const {
  if (!(a > 0.0)) throw DomainError("BF isolation productivity a must be positive");
  if (!(b > 0.0)) throw DomainError("BF collaboration productivity b must be positive");
  if (!(theta > 0.0 && theta < 1.0)) throw DomainError("BF theta must lie in (0,1)");
}

namespace {
void requireFraction(double d, const char* what) {
  if (!(d >= 0.0 && d <= 1.0)) throw DomainError(std::string(what) + " must lie in [0,1]");
}
void requireStock(double k, const char* what) {
  if (!(k >= 0.0) || !std::isfinite(k)) throw DomainError(std::string(what) + " must be a non-negative finite stock");
}
}  // namespace

double isolatedOutput(const BfParams& p, double deltaII, double kOwn) {
  p.validate();
  requireFraction(deltaII, "delta_ii");
  requireStock(kOwn, "k_ii");
  return deltaII > 0.0 ? deltaII * p.a * kOwn : 0.0;
}

double pairOutput(const BfParams& p, double deltaIJ, double kC, double kDij, double kDji) {
  p.validate();
  requireFraction(deltaIJ, "delta_ij");
  requireStock(kC, "k^C_ij");
  requireStock(kDij, "k^D_ij");
  requireStock(kDji, "k^D_ji");
  if (deltaIJ == 0.0) return 0.0;
  const double e = (1.0 - p.theta) / 2.0;
  return deltaIJ * p.b * std::pow(kC, p.theta) * std::pow(kDij, e) * std::pow(kDji, e);
}

SteadyStateTargets steadyStateTargets(double theta) {
  if (!(theta > 0.0 && theta < 1.0)) throw DomainError("theta must lie in (0,1)");
  const double size = 1.0 + 1.0 / theta;
  return {size, 1.0 / size};
}

void KnowledgeState::validate() const {
  const auto n = kOwn.size();
  if (kC.rows() != n || kC.cols() != n || kD.rows() != n || kD.cols() != n) {
    throw DomainError("knowledge matrices do not match the agent count");
  }
  auto check = [](double v) { return std::isfinite(v) && v >= 0.0; };
  for (Eigen::Index i = 0; i < n; ++i) {
    if (!check(kOwn(i))) throw DomainError("own stock of agent " + std::to_string(i) + " is invalid");
    for (Eigen::Index j = 0; j < n; ++j) {
      if (!check(kC(i, j)) || !check(kD(i, j))) throw DomainError("negative or non-finite knowledge stock");
      if (kC(i, j) != kC(j, i)) throw DomainError("common knowledge must be symmetric");
    }
  }
}

void TimeAllocation::validate() const {
  for (Eigen::Index i = 0; i < delta.rows(); ++i) {
    double row = 0.0;
    for (Eigen::Index j = 0; j < delta.cols(); ++j) {
      requireFraction(delta(i, j), "time share");
      row += delta(i, j);
    }
    if (row > 1.0 + 1e-12) throw DomainError("time shares of agent " + std::to_string(i) + " exceed one");
  }
}

std::vector<Round> roundRobinSchedule(int groupSize) {
  if (groupSize < 1) throw DomainError("group size must be at least 1");
  const int m = groupSize;
  std::vector<Round> rounds;
  if (m % 2 == 1) {
    // Circle method: in round r agent r sits out and a, b meet when a + b = 2r (mod m).
    for (int r = 0; r < m; ++r) {
      Round round;
      round.alone.push_back(r);
      for (int k = 1; k <= (m - 1) / 2; ++k) {
        const int a = (r + k) % m;
        const int b = (r - k + m) % m;
        round.pairs.emplace_back(std::min(a, b), std::max(a, b));
      }
      rounds.push_back(std::move(round));
    }
    return rounds;
  }
  // Even m: the odd schedule of m - 1 agents, with agent m - 1 taking the bye,
  // then one round in which everyone works alone.
  for (auto round : roundRobinSchedule(m - 1)) {
    round.pairs.emplace_back(round.alone.front(), m - 1);
    round.alone.clear();
    rounds.push_back(std::move(round));
  }
  Round last;
  for (int a = 0; a < m; ++a) last.alone.push_back(a);
  rounds.push_back(std::move(last));
  return rounds;
}

BfSimulation simulateSteadyState(const BfSimulationConfig& config) {
  const auto& p = config.params;
  p.validate();
  const double size = steadyStateTargets(p.theta).componentSize;
  const int m = static_cast<int>(std::lround(size));
  if (std::abs(size - m) > 1e-9) throw DomainError("1 + 1/theta must be an integer for the rotation schedule");
  if (config.agents < m || config.agents % m != 0) {
    throw DomainError("agent count must be a positive multiple of the group size " + std::to_string(m));
  }
  if (config.cycles < 1) throw DomainError("at least one cycle is required");
  requireStock(config.initialCommon, "initial common knowledge");
  requireStock(config.initialDifferentiated, "initial differentiated knowledge");
  requireStock(config.initialOwn, "initial own knowledge");

  const int n = config.agents;
  BfSimulation out;
  out.groupSize = m;
  auto& s = out.state;
  s.kC = Eigen::MatrixXd::Zero(n, n);
  s.kD = Eigen::MatrixXd::Constant(n, n, config.initialDifferentiated);
  s.kOwn = Eigen::VectorXd::Constant(n, config.initialOwn);
  for (int i = 0; i < n; ++i) {
    s.kD(i, i) = 0.0;
    for (int j = 0; j < n; ++j) {
      if (i != j && i / m == j / m) s.kC(i, j) = config.initialCommon;
    }
  }

  const auto schedule = roundRobinSchedule(m);
  const double share = 1.0 / static_cast<double>(schedule.size());
  out.allocation.delta = Eigen::MatrixXd::Zero(n, n);

  for (int cycle = 0; cycle < config.cycles; ++cycle) {
    double total = 0.0;
    for (const auto& round : schedule) {
      // Outputs of a round are computed from the stocks at its start.
      std::vector<std::tuple<int, int, double>> produced;
      for (int g = 0; g < n; g += m) {
        for (auto [a, b] : round.pairs) {
          const int i = g + a, j = g + b;
          produced.emplace_back(i, j, pairOutput(p, share, s.kC(i, j), s.kD(i, j), s.kD(j, i)));
          if (cycle == 0) {
            out.allocation.delta(i, j) += share;
            out.allocation.delta(j, i) += share;
          }
        }
        for (int a : round.alone) {
          const int i = g + a;
          produced.emplace_back(i, i, isolatedOutput(p, share, s.kOwn(i)));
          if (cycle == 0) out.allocation.delta(i, i) += share;
        }
      }
      for (auto [i, j, y] : produced) {
        total += y;
        for (int k = 0; k < n; ++k) {
          if (k != i && k != j) {
            s.kD(i, k) += y;
            if (i != j) s.kD(j, k) += y;
          }
        }
        s.kOwn(i) += y;
        if (i != j) {
          s.kOwn(j) += y;
          s.kC(i, j) += y;
          s.kC(j, i) += y;
        }
      }
    }
    out.outputPerCycle.push_back(total);
  }
  s.validate();
  out.allocation.validate();

  // Components of the collaboration graph with positive time shares.
  std::vector<int> parent(static_cast<std::size_t>(n));
  std::iota(parent.begin(), parent.end(), 0);
  auto find = [&](int x) {
    while (parent[static_cast<std::size_t>(x)] != x) {
      parent[static_cast<std::size_t>(x)] = parent[static_cast<std::size_t>(parent[static_cast<std::size_t>(x)])];
      x = parent[static_cast<std::size_t>(x)];
    }
    return x;
  };
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      if (out.allocation.delta(i, j) > 0.0) parent[static_cast<std::size_t>(find(i))] = find(j);
    }
  }
  std::map<int, int> label;
  out.componentOf.resize(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    auto [it, fresh] = label.try_emplace(find(i), static_cast<int>(label.size()));
    out.componentOf[static_cast<std::size_t>(i)] = it->second;
  }
  out.componentSizes.assign(label.size(), 0);
  for (int c : out.componentOf) ++out.componentSizes[static_cast<std::size_t>(c)];
  return out;
}

// ---------------------------------------------------------------------------
// Config

namespace {
using FieldRef = std::variant<double*, int*, std::uint64_t*, bool*>;

std::vector<std::pair<std::string, FieldRef>> fieldTable(SyntheticEconomyConfig& c) {
  return {
      {"seed", &c.seed},
      {"inventors", &c.inventors},
      {"peripherals_per_inventor", &c.peripheralsPerInventor},
      {"firms", &c.firms},
      {"establishments_per_firm", &c.establishmentsPerFirm},
      {"uas", &c.uas},
      {"rural_share", &c.ruralShare},
      {"mean_extra_collaborators", &c.meanExtraCollaborators},
      {"mean_extra_scope", &c.meanExtraScope},
      {"lattice_degree", &c.latticeDegree},
      {"same_firm_share", &c.sameFirmShare},
      {"true_beta", &c.trueBeta},
      {"gamma1", &c.gamma1},
      {"gamma2", &c.gamma2},
      {"quantity_share", &c.quantityShare},
      {"sigma_fixed_effect", &c.sigmaFixedEffect},
      {"period_effect", &c.periodEffect},
      {"sigma_u", &c.sigmaU},
      {"sigma_quantity", &c.sigmaQuantity},
      {"shock_loading", &c.shockLoading},
      {"sigma_firm", &c.sigmaFirm},
      {"firm_loading", &c.firmLoading},
      {"sigma_field", &c.sigmaField},
      {"field_width", &c.fieldWidth},
      {"sigma_idio", &c.sigmaIdio},
      {"value_mean", &c.valueMean},
      {"quantity_scale", &c.quantityScale},
      {"bf_a", &c.bf.a},
      {"bf_b", &c.bf.b},
      {"bf_theta", &c.bf.theta},
      {"bf_common_stock", &c.bfCommonStock},
      {"lattice_values", &c.latticeValues},
      {"topic_width", &c.topicWidth},
      {"topic_spread", &c.topicSpread},
      {"movers_share", &c.moversShare},
      {"dropout_share", &c.dropoutShare},
      {"citations_per_patent", &c.citationsPerPatent},
  };
}

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

template <typename T>
T parseNumber(const std::string& key, const std::string& text) {
  T v{};
  const auto* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, v);
  if (ec != std::errc() || ptr != end) throw ConfigError("bad value '" + text + "' for key " + key);
  return v;
}

std::string formatDouble(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}
}  // namespace

void SyntheticEconomyConfig::set(const std::string& rawKey, const std::string& value) {
  std::string key = rawKey;
  std::replace(key.begin(), key.end(), '-', '_');
  for (auto& [name, ref] : fieldTable(*this)) {
    if (name != key) continue;
    std::visit(
        [&](auto* field) {
          using T = std::remove_pointer_t<decltype(field)>;
          if constexpr (std::is_same_v<T, bool>) {
            if (value == "true" || value == "1") {
              *field = true;
            } else if (value == "false" || value == "0") {
              *field = false;
            } else {
              throw ConfigError("bad boolean '" + value + "' for key " + key);
            }
          } else {
            *field = parseNumber<T>(key, value);
          }
        },
        ref);
    return;
  }
  throw ConfigError("unknown economy key '" + rawKey + "'");
}

SyntheticEconomyConfig SyntheticEconomyConfig::parse(std::istream& in) {
  SyntheticEconomyConfig c;
  std::string line;
  int lineNo = 0;
  while (std::getline(in, line)) {
    ++lineNo;
    const auto hash = line.find('#');
    const std::string body = trim(std::string_view(line).substr(0, hash));
    if (body.empty()) continue;
    const auto eq = body.find('=');
    if (eq == std::string::npos) throw ConfigError("line " + std::to_string(lineNo) + ": expected key = value");
    c.set(trim(body.substr(0, eq)), trim(body.substr(eq + 1)));
  }
  c.validate();
  return c;
}

SyntheticEconomyConfig SyntheticEconomyConfig::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open economy config " + path);
  return parse(in);
}

std::vector<std::pair<std::string, std::string>> SyntheticEconomyConfig::entries() const {
  auto copy = *this;
  std::vector<std::pair<std::string, std::string>> out;
  for (auto& [name, ref] : fieldTable(copy)) {
    std::string text = std::visit(
        [](auto* field) -> std::string {
          using T = std::remove_pointer_t<decltype(field)>;
          if constexpr (std::is_same_v<T, bool>) {
            return *field ? "true" : "false";
          } else if constexpr (std::is_same_v<T, double>) {
            return formatDouble(*field);
          } else {
            return std::to_string(*field);
          }
        },
        ref);
    out.emplace_back(name, std::move(text));
  }
  return out;
}

void SyntheticEconomyConfig::validate() const {
  auto fail = [](const std::string& m) { throw ConfigError("economy config: " + m); };
  if (inventors < 2) fail("inventors must be at least 2");
  if (firms < 1) fail("firms must be at least 1");
  if (firms > inventors) fail("more firms than inventors");
  if (establishmentsPerFirm < 1) fail("establishments_per_firm must be at least 1");
  if (uas < 1 || uas > 100) fail("uas must lie in 1..100");
  if (!(peripheralsPerInventor >= 1.0)) fail("peripherals_per_inventor must be at least 1");
  if (latticeDegree < 1) fail("lattice_degree must be at least 1");
  const double ring = std::round(inventors * peripheralsPerInventor);
  if (ring < 2.0 * latticeDegree + 2.0) fail("too few peripheral positions for the lattice degree");
  if (ring < firms * 2.0) fail("each firm needs at least two peripheral positions");
  for (auto [v, name] : {std::pair{ruralShare, "rural_share"}, {sameFirmShare, "same_firm_share"},
                         {quantityShare, "quantity_share"}, {moversShare, "movers_share"},
                         {dropoutShare, "dropout_share"}}) {
    if (!(v >= 0.0 && v <= 1.0)) fail(std::string(name) + " must lie in [0,1]");
  }
  for (auto [v, name] : {std::pair{meanExtraCollaborators, "mean_extra_collaborators"},
                         {meanExtraScope, "mean_extra_scope"}, {sigmaFixedEffect, "sigma_fixed_effect"},
                         {sigmaU, "sigma_u"}, {sigmaQuantity, "sigma_quantity"}, {sigmaFirm, "sigma_firm"},
                         {sigmaField, "sigma_field"}, {sigmaIdio, "sigma_idio"}, {topicSpread, "topic_spread"},
                         {citationsPerPatent, "citations_per_patent"}, {bfCommonStock, "bf_common_stock"}}) {
    if (!(v >= 0.0) || !std::isfinite(v)) fail(std::string(name) + " must be non-negative");
  }
  if (!(fieldWidth >= 1.0)) fail("field_width must be at least 1");
  if (!(topicWidth >= 1.0)) fail("topic_width must be at least 1");
  if (!(quantityScale > 0.5)) fail("quantity_scale must exceed 0.5");
  try {
    bf.validate();
  } catch (const DomainError& e) {
    fail(e.what());
  }
}

// ---------------------------------------------------------------------------
// Synthetic economy

namespace {

enum StreamTag : std::uint64_t { layoutTag = 1, scopeTag, shockTag, peripheralTag, quantityTag, dateTag, citeTag, geoTag };

constexpr double kKmPerDegLat = 111.195;

struct Layout {
  int ring = 0;  // peripheral positions per period
  int firms = 0;
  int estPerFirm = 0;
  int uas = 0;

  int segment(int pos) const { return static_cast<int>(static_cast<long long>(pos) * firms / ring); }
  int establishment(int pos) const {
    const int s = segment(pos);
    const long long start = (static_cast<long long>(s) * ring + firms - 1) / firms;
    const long long end = (static_cast<long long>(s + 1) * ring + firms - 1) / firms;
    const long long len = std::max<long long>(1, end - start);
    return s * estPerFirm + static_cast<int>((pos - start) * estPerFirm / len);
  }
  int ua(int pos) const { return static_cast<int>(static_cast<long long>(pos) * uas / ring); }
};

GeoPoint uaCenter(int u) { return {34.0 + (u / 10) * 1.0, 132.0 + (u % 10) * 1.0}; }

GeoPoint offsetKm(const GeoPoint& c, double northKm, double eastKm) {
  const double lat = c.lat + northKm / kKmPerDegLat;
  const double lon = c.lon + eastKm / (kKmPerDegLat * std::cos(c.lat * std::numbers::pi / 180.0));
  return {lat, lon};
}

std::string pad(long long v, int width) {
  std::ostringstream s;
  s << std::setw(width) << std::setfill('0') << v;
  return s.str();
}

/// Subgroup code of a topic inside the class attached to a firm segment.
std::string categoryCode(int cls, int topic) {
  std::string code;
  code += static_cast<char>('A' + (cls / 100) % 8);
  code += pad(cls % 100, 2);
  code += static_cast<char>('A' + (cls / 800) % 26);
  code += ' ' + std::to_string(topic / 100 + 1) + '/' + pad(topic % 100, 2);
  return code;
}

Date randomDate(std::mt19937_64& rng, const PeriodScheme::Range& r) {
  const int last = std::min(r.lastYear, r.firstYear + 4);
  const Date from = Date::fromYmd(r.firstYear, 1, 1);
  const Date to = Date::fromYmd(last, 12, 31);
  std::uniform_int_distribution<int> day(from.days, to.days);
  return Date{day(rng)};
}

}  // namespace

SyntheticEconomy simulateEconomy(const SyntheticEconomyConfig& cfg) {
  cfg.validate();
  SyntheticEconomy econ;
  econ.config = cfg;
  econ.params = cfg.bf;
  econ.trueBeta = cfg.trueBeta;
  econ.trueGammas = {cfg.gamma1, cfg.gamma2};
  econ.seed = cfg.seed;
  econ.periodEffects = {0.0, 0.0, cfg.periodEffect};

  Layout lay{static_cast<int>(std::lround(cfg.inventors * cfg.peripheralsPerInventor)), cfg.firms,
             cfg.establishmentsPerFirm, cfg.uas};
  const int topics = std::max(1, static_cast<int>(std::ceil(lay.ring / cfg.topicWidth)));

  auto layoutRng = makeStream(cfg.seed, layoutTag);
  auto scopeRng = makeStream(cfg.seed, scopeTag);
  auto shockRng = makeStream(cfg.seed, shockTag);
  auto periRng = makeStream(cfg.seed, peripheralTag);
  auto qtyRng = makeStream(cfg.seed, quantityTag);
  auto dateRng = makeStream(cfg.seed, dateTag);
  auto citeRng = makeStream(cfg.seed, citeTag);
  auto geoRng = makeStream(cfg.seed, geoTag);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> gauss(0.0, 1.0);

  Corpus& corpus = econ.corpus;
  for (int f = 0; f < cfg.firms; ++f) corpus.internFirm("F" + pad(f, 4));
  for (int e = 0; e < cfg.firms * cfg.establishmentsPerFirm; ++e) corpus.internEstablishment("E" + pad(e, 5));

  auto jitter = [&](const GeoPoint& center) {
    return offsetKm(center, (unit(geoRng) * 2.0 - 1.0) * 3.0, (unit(geoRng) * 2.0 - 1.0) * 3.0);
  };
  auto ruralPoint = [&](int u) { return jitter(GeoPoint{uaCenter(u).lat + 0.5, uaCenter(u).lon + 0.5}); };

  // Focal inventors: fixed ring position, firm, establishment and location.
  struct Focal {
    InventorId id;
    int pos;
    int firm;
    int est;
    GeoPoint at;
    double lambda;
    double lambdaQ;
    bool mover;
    bool dropout;
    std::vector<std::vector<int>> scope;  // topics per period 0..2
  };
  std::vector<Focal> focal(static_cast<std::size_t>(cfg.inventors));
  for (int k = 0; k < cfg.inventors; ++k) {
    auto& f = focal[static_cast<std::size_t>(k)];
    f.id = corpus.addInventor("I" + pad(k + 1, 6));
    f.pos = static_cast<int>((k + unit(layoutRng)) * lay.ring / cfg.inventors) % lay.ring;
    f.firm = lay.segment(f.pos);
    f.est = lay.establishment(f.pos);
    f.at = unit(layoutRng) < cfg.ruralShare ? ruralPoint(lay.ua(f.pos)) : jitter(uaCenter(lay.ua(f.pos)));
    f.lambda = cfg.sigmaFixedEffect * gauss(shockRng);
    f.lambdaQ = 0.5 * cfg.sigmaFixedEffect * gauss(shockRng);
    f.mover = unit(layoutRng) < cfg.moversShare;
    f.dropout = !f.mover && unit(layoutRng) < cfg.dropoutShare;
    econ.focal.push_back(f.id);
    econ.fixedEffects[f.id] = f.lambda;
    econ.plantedMovers += f.mover;
    econ.plantedDropouts += f.dropout;
  }

  auto drawTopics = [&](int home, int count) {
    std::normal_distribution<double> spread(0.0, cfg.topicSpread);
    std::vector<int> out;
    for (int attempt = 0; static_cast<int>(out.size()) < count && attempt < 50 * count; ++attempt) {
      const int t = ((home + static_cast<int>(std::lround(spread(scopeRng)))) % topics + topics) % topics;
      if (std::find(out.begin(), out.end(), t) == out.end()) out.push_back(t);
    }
    return out;
  };
  auto homeTopic = [&](int pos) { return static_cast<int>(pos / cfg.topicWidth) % topics; };
  std::poisson_distribution<int> extraScope(cfg.meanExtraScope);
  std::poisson_distribution<int> extraCollab(cfg.meanExtraCollaborators);

  std::vector<std::vector<PatentIndex>> patentsByPeriod(3);
  auto addPatent = [&](int period, std::vector<InventorId> inventors, std::string code, double value) {
    PatentRecord p;
    p.id = "T" + std::to_string(period) + "-" + pad(static_cast<long long>(corpus.patents.size()) + 1, 7);
    std::sort(inventors.begin(), inventors.end());
    p.inventors = std::move(inventors);
    p.primaryCategory = std::move(code);
    p.applicationDate = randomDate(dateRng, corpus.periods.ranges[static_cast<std::size_t>(period)]);
    p.value = value;
    patentsByPeriod[static_cast<std::size_t>(period)].push_back(static_cast<PatentIndex>(corpus.patents.size()));
    corpus.patents.push_back(std::move(p));
  };

  // Period 0: solo patents that seed cumulative scope.
  for (auto& f : focal) {
    f.scope.resize(3);
    f.scope[0] = drawTopics(homeTopic(f.pos), 1 + extraScope(scopeRng));
    corpus.inventors[f.id].affiliations.push_back(Affiliation{0, f.firm, f.est, f.at});
    for (int t : f.scope[0]) addPatent(0, {f.id}, categoryCode(f.firm, t), 1.0);
  }

  const double timeShare = steadyStateTargets(cfg.bf.theta).timeShare;
  const double betaP = cfg.quantityShare * cfg.trueBeta;

  for (int period = 1; period <= 2; ++period) {
    // Shocks: firm-period, a smooth field over the ring, idiosyncratic.
    std::vector<double> firmShock(static_cast<std::size_t>(cfg.firms));
    for (auto& s : firmShock) s = cfg.sigmaFirm * gauss(shockRng);
    std::vector<double> field(static_cast<std::size_t>(lay.ring));
    {
      const int w = std::max(1, static_cast<int>(std::lround(cfg.fieldWidth)));
      std::vector<double> white(static_cast<std::size_t>(lay.ring));
      for (auto& x : white) x = gauss(shockRng);
      double acc = 0.0;
      for (int q = -w / 2; q < w - w / 2; ++q) acc += white[static_cast<std::size_t>((q % lay.ring + lay.ring) % lay.ring)];
      for (int p = 0; p < lay.ring; ++p) {
        field[static_cast<std::size_t>(p)] = acc / std::sqrt(static_cast<double>(w));
        acc -= white[static_cast<std::size_t>(((p - w / 2) % lay.ring + lay.ring) % lay.ring)];
        acc += white[static_cast<std::size_t>(((p + w - w / 2) % lay.ring + lay.ring) % lay.ring)];
      }
    }

    // Peripheral collaborators: one per ring position, new identities each period.
    struct Peripheral {
      InventorId id;
      int firm;
      int est;
      double lnV;
      double v;
      double latticeShare = 0.0;  // Σ lattice values / 2
      std::vector<std::size_t> focalNeighbors;
      std::vector<std::string> codes;
    };
    std::vector<Peripheral> peri(static_cast<std::size_t>(lay.ring));
    for (int p = 0; p < lay.ring; ++p) {
      auto& q = peri[static_cast<std::size_t>(p)];
      q.id = corpus.addInventor("P" + std::to_string(period) + "-" + pad(p + 1, 6));
      if (unit(periRng) < cfg.sameFirmShare) {
        q.firm = lay.segment(p);
        q.est = lay.establishment(p);
      } else {
        q.firm = std::uniform_int_distribution<int>(0, cfg.firms - 1)(periRng);
        q.est = q.firm * cfg.establishmentsPerFirm +
                std::uniform_int_distribution<int>(0, cfg.establishmentsPerFirm - 1)(periRng);
      }
      const GeoPoint at = jitter(uaCenter(lay.ua(p)));
      corpus.inventors[q.id].affiliations.push_back(Affiliation{period, q.firm, q.est, at});
    }

    // Focal collaborator sets: the n nearest ring positions.
    struct FocalPeriod {
      std::vector<int> partners;
      double u = 0.0;
    };
    std::vector<FocalPeriod> fp(focal.size());
    for (std::size_t k = 0; k < focal.size(); ++k) {
      auto& f = focal[k];
      fp[k].u = cfg.sigmaU * gauss(shockRng);
      const int n = 1 + extraCollab(layoutRng);
      f.scope[static_cast<std::size_t>(period)] = drawTopics(homeTopic(f.pos), std::min(n, 1 + extraScope(scopeRng)));
      if (period == 2 && f.dropout) continue;
      for (int r = 0; static_cast<int>(fp[k].partners.size()) < n; ++r) {
        const int off = (r % 2 == 0) ? r / 2 : -(r + 1) / 2;
        const int p = ((f.pos + off) % lay.ring + lay.ring) % lay.ring;
        fp[k].partners.push_back(p);
        peri[static_cast<std::size_t>(p)].focalNeighbors.push_back(k);
      }
    }

    // Collaborator output: solo value plus BF-valued lattice patents.
    for (int p = 0; p < lay.ring; ++p) {
      auto& q = peri[static_cast<std::size_t>(p)];
      double shared = 0.0;
      for (auto k : q.focalNeighbors) shared += fp[k].u;
      if (!q.focalNeighbors.empty()) shared /= static_cast<double>(q.focalNeighbors.size());
      q.lnV = cfg.valueMean + firmShock[static_cast<std::size_t>(q.firm)] + cfg.sigmaField * field[static_cast<std::size_t>(p)] +
              cfg.sigmaIdio * gauss(shockRng) + cfg.shockLoading * shared;
      q.v = std::exp(q.lnV);
      const int home = homeTopic(p);
      q.codes.push_back(categoryCode(lay.segment(p), drawTopics(home, 1).front()));
    }
    for (int p = 0; p < lay.ring; ++p) {
      auto& q = peri[static_cast<std::size_t>(p)];
      addPatent(period, {q.id}, q.codes.front(), q.v);
      for (int d = 1; d <= cfg.latticeDegree; ++d) {
        auto& r = peri[static_cast<std::size_t>((p + d) % lay.ring)];
        const double w = cfg.latticeValues ? pairOutput(cfg.bf, timeShare, cfg.bfCommonStock, q.v, r.v) : 0.0;
        q.latticeShare += w / 2.0;
        r.latticeShare += w / 2.0;
        addPatent(period, {q.id, r.id}, q.codes.front(), w);
      }
    }

    // Focal output from the structural equation.
    for (std::size_t k = 0; k < focal.size(); ++k) {
      auto& f = focal[k];
      if (period == 2 && f.dropout) continue;
      int firm = f.firm;
      int est = f.est;
      if (period == 2 && f.mover) {
        // Movers switch establishment, and firm when the firm has only one.
        const int e = cfg.establishmentsPerFirm;
        if (e > 1) {
          est = f.firm * e + (f.est % e + 1) % e;
        } else {
          firm = (f.firm + 1) % cfg.firms;
          est = firm;
        }
      }
      corpus.inventors[f.id].affiliations.push_back(Affiliation{period, firm, est, f.at});

      const auto& partners = fp[k].partners;
      const double n = static_cast<double>(partners.size());
      double kd = 0.0;
      for (int p : partners) kd += peri[static_cast<std::size_t>(p)].v + peri[static_cast<std::size_t>(p)].latticeShare;
      kd /= n;

      std::set<int> past;
      for (int t = 0; t < period; ++t) past.insert(f.scope[static_cast<std::size_t>(t)].begin(), f.scope[static_cast<std::size_t>(t)].end());
      const double lnK = std::log(static_cast<double>(past.size()));
      const double lnKD = std::log(kd);
      const double lnY = cfg.trueBeta * lnKD + cfg.gamma1 * lnK + cfg.gamma2 * lnK * lnK + f.lambda +
                         econ.periodEffects[static_cast<std::size_t>(period)] +
                         cfg.firmLoading * firmShock[static_cast<std::size_t>(f.firm)] + fp[k].u;
      const double target = cfg.quantityScale *
                             std::exp(betaP * (lnKD - cfg.valueMean) + f.lambdaQ + cfg.sigmaQuantity * gauss(qtyRng));
      const long m = std::max(1L, std::lround(n * target - n / 2.0));

      const auto& scope = f.scope[static_cast<std::size_t>(period)];
      std::size_t slot = 0;
      auto nextCode = [&]() { return categoryCode(f.firm, scope[slot++ % scope.size()]); };
      for (int p : partners) addPatent(period, {f.id, peri[static_cast<std::size_t>(p)].id}, nextCode(), 0.0);
      const double y = std::exp(lnY);
      for (long s = 0; s < m; ++s) addPatent(period, {f.id}, nextCode(), n * y / static_cast<double>(m));

      FocalTruth tr;
      tr.inventor = f.id;
      tr.period = period;
      tr.lnKD = lnKD;
      tr.lnK = lnK;
      tr.fixedEffect = f.lambda;
      tr.u = fp[k].u;
      tr.lnY = lnY;
      tr.lnYp = std::log((static_cast<double>(m) + n / 2.0) / n);
      tr.collaborators = partners.size();
      tr.soloPatents = static_cast<std::size_t>(m);
      econ.truth.push_back(tr);
    }
  }

  // Forward citations among corpus patents plus a few from outside.
  if (cfg.citationsPerPatent > 0.0) {
    std::poisson_distribution<int> cites(cfg.citationsPerPatent);
    std::uniform_int_distribution<std::size_t> anyPatent(0, corpus.patents.size() - 1);
    for (auto& cited : corpus.patents) {
      const int c = cites(citeRng);
      for (int r = 0; r < c; ++r) {
        if (unit(citeRng) < 0.1) {
          const Date d = cited.applicationDate.plusDays(1.0 + unit(citeRng) * 2000.0);
          cited.citedBy.push_back(Citation{"X" + pad(static_cast<long long>(citeRng() % 10000000), 7), d, std::nullopt});
          continue;
        }
        const auto& citing = corpus.patents[anyPatent(citeRng)];
        if (citing.applicationDate <= cited.applicationDate) continue;
        cited.citedBy.push_back(Citation{citing.id, citing.applicationDate, std::nullopt});
      }
    }
  }

  // Geography: UA cell blocks, a population grid, manufacturing
  // establishments and industry R&D by period.
  auto& geo = econ.geo;
  for (int u = 0; u < cfg.uas; ++u) {
    UrbanAgglomeration ua;
    ua.id = "UA" + pad(u + 1, 3);
    for (int dy = -2; dy <= 2; ++dy) {
      for (int dx = -2; dx <= 2; ++dx) {
        const GeoPoint cell = offsetKm(uaCenter(u), dy, dx);
        const double pop = std::round(2000.0 + 3000.0 * unit(geoRng));
        ua.cells.push_back(cell);
        ua.population += pop;
        geo.population.push_back(WeightedPoint{cell, pop});
      }
    }
    geo.uas.push_back(std::move(ua));
  }
  const std::vector<std::string> industries{"M1", "M2", "M3", "M4"};
  for (int period = 0; period <= 2; ++period) {
    for (int u = 0; u < cfg.uas; ++u) {
      for (int e = 0; e < 6; ++e) {
        Establishment est;
        est.id = "M" + pad(u + 1, 3) + "-" + std::to_string(e + 1);
        est.period = period;
        est.industry = industries[static_cast<std::size_t>(e) % industries.size()];
        est.employment = std::round(10.0 + 490.0 * unit(geoRng));
        est.output = est.employment * (50.0 + 100.0 * unit(geoRng));
        est.at = jitter(uaCenter(u));
        geo.establishments.push_back(std::move(est));
      }
    }
    for (const auto& ind : industries) geo.industryRnD[period][ind] = std::round(100.0 + 900.0 * unit(geoRng));
  }

  corpus.finalize();
  return econ;
}

}  // namespace coinvent
