#pragma once

// Berliant–Fujita knowledge creation and the synthetic economy used as the
// ground truth for the estimators.

#include <Eigen/Dense>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "coinvent/geo.hpp"
#include "coinvent/records.hpp"

namespace coinvent {

struct BfParams {
  double a = 1.0;      // isolation productivity
  double b = 1.0;      // collaboration productivity
  double theta = 0.5;  // weight of common knowledge

  /// Throws DomainError unless a > 0, b > 0 and 0 < theta < 1.
  void validate() const;
};

/// δ_ii · a · k_ii, or 0 when δ_ii = 0.
double isolatedOutput(const BfParams& p, double deltaII, double kOwn);

/// δ_ij · b · kC^θ · (kD_ij · kD_ji)^((1-θ)/2), or 0 when δ_ij = 0.
double pairOutput(const BfParams& p, double deltaIJ, double kC, double kDij, double kDji);

struct SteadyStateTargets {
  double componentSize = 0.0;  // 1 + 1/θ
  double timeShare = 0.0;      // 1 / (1 + 1/θ)
};

SteadyStateTargets steadyStateTargets(double theta);

struct KnowledgeState {
  Eigen::MatrixXd kC;   // symmetric, zero diagonal
  Eigen::MatrixXd kD;   // kD(i, j): knowledge of i differentiated from j
  Eigen::VectorXd kOwn; // total stock of each agent

  /// Throws DomainError on a negative or non-finite entry or an asymmetric kC.
  void validate() const;
};

struct TimeAllocation {
  Eigen::MatrixXd delta;  // δ_ij including the diagonal δ_ii

  /// Throws DomainError when an entry leaves [0,1] or a row sums above 1.
  void validate() const;
};

/// One round of a rotation: the pairs that work together and the agents that
/// work alone. Agents are numbered 0..m-1 within the group.
struct Round {
  std::vector<std::pair<int, int>> pairs;
  std::vector<int> alone;
};

/// Rotation over m rounds in which every pair of the m agents meets exactly
/// once and every agent spends exactly one round alone.
std::vector<Round> roundRobinSchedule(int groupSize);

struct BfSimulationConfig {
  BfParams params;
  int agents = 12;
  int cycles = 5;
  /// Initial stocks; the steady state presumes enough common knowledge to
  /// start collaborating.
  double initialCommon = 1.0;
  double initialDifferentiated = 1.0;
  double initialOwn = 1.0;
};

struct BfSimulation {
  int groupSize = 0;
  std::vector<int> componentOf;         // component label per agent
  std::vector<std::size_t> componentSizes;
  TimeAllocation allocation;            // average time shares over one cycle
  KnowledgeState state;                 // stocks after the last cycle
  std::vector<double> outputPerCycle;   // aggregate output of each cycle
};

/// Agents are split into groups of size 1 + 1/θ (which must be an integer)
/// and rotate partners on roundRobinSchedule for the configured cycles.
BfSimulation simulateSteadyState(const BfSimulationConfig& config);

/// Generator settings. Keys of the key=value file match the field names.
struct SyntheticEconomyConfig {
  std::uint64_t seed = 1;
  int inventors = 5000;              // panel (focal) inventors
  double peripheralsPerInventor = 3.0;
  int firms = 100;
  int establishmentsPerFirm = 4;
  int uas = 50;
  double ruralShare = 0.0;
  double meanExtraCollaborators = 2.0;  // n = 1 + Poisson(mean)
  double meanExtraScope = 1.5;          // |S| = min(n, 1 + Poisson(mean))
  int latticeDegree = 2;
  double sameFirmShare = 0.85;

  double trueBeta = 0.4;
  double gamma1 = 0.3;
  double gamma2 = -0.05;
  double quantityShare = 0.5;  // β^p / β
  double sigmaFixedEffect = 0.5;
  double periodEffect = 0.1;   // τ_2 - τ_1
  double sigmaU = 0.3;
  double sigmaQuantity = 0.1;
  double shockLoading = -0.5;  // weight of focal shocks in collaborators' output
  double sigmaFirm = 0.3;
  double firmLoading = 0.0;    // direct effect of the firm shock on focal output
  double sigmaField = 0.3;
  double fieldWidth = 25.0;    // positions
  double sigmaIdio = 0.3;
  double valueMean = 1.0;      // mean log value of collaborator output
  double quantityScale = 3.0;  // typical (m + n/2) / n

  BfParams bf{1.0, 0.2, 0.5};
  double bfCommonStock = 1.0;
  bool latticeValues = true;

  double topicWidth = 10.0;
  double topicSpread = 3.0;
  double moversShare = 0.0;
  double dropoutShare = 0.0;
  double citationsPerPatent = 0.5;

  /// Throws ConfigError on inconsistent settings.
  void validate() const;
  /// Applies key=value pairs; unknown keys and bad values raise ConfigError.
  void set(const std::string& key, const std::string& value);
  static SyntheticEconomyConfig parse(std::istream& in);
  static SyntheticEconomyConfig load(const std::string& path);
  /// All keys with their current values, in declaration order.
  std::vector<std::pair<std::string, std::string>> entries() const;
};

/// Structural pieces of one focal inventor-period, as generated.
struct FocalTruth {
  InventorId inventor = 0;
  int period = 1;
  double lnKD = 0.0;
  double lnK = 0.0;
  double fixedEffect = 0.0;
  double u = 0.0;
  double lnY = 0.0;
  double lnYp = 0.0;
  std::size_t collaborators = 0;
  std::size_t soloPatents = 0;
};

struct SyntheticEconomy {
  SyntheticEconomyConfig config;
  BfParams params;
  Corpus corpus;
  GeoInputs geo;
  double trueBeta = 0.0;
  std::pair<double, double> trueGammas;
  std::vector<InventorId> focal;
  std::map<InventorId, double> fixedEffects;  // λ_i
  std::vector<double> periodEffects;           // τ_t, indexed by period
  std::vector<FocalTruth> truth;
  std::size_t plantedMovers = 0;
  std::size_t plantedDropouts = 0;
  std::uint64_t seed = 0;
};

SyntheticEconomy simulateEconomy(const SyntheticEconomyConfig& config);

}  // namespace coinvent
