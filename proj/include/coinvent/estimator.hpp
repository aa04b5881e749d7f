#pragma once

// Panel fixed-effects OLS / 2SLS with cluster-robust inference, the
// Montiel Olea–Pflueger effective F, Hansen's J and the joint
// quantity–quality decomposition.
//
// Matrix-level entry points take the regressor block already transformed
// (within or first-difference). Panel-level helpers assemble and transform
// designs from PanelObservation rows.

#include <Eigen/Dense>
#include <array>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace coinvent {

/// One inventor-period row of the estimation panel.
struct PanelObservation {
  std::string inventor;
  int period = 1;
  double lnY = 0.0;
  double lnYp = 0.0;
  double lnYq = 0.0;
  double lnKD = 0.0;
  double lnK = 0.0;
  double lnK2 = 0.0;
  bool firstPatent = false;  // k_it = 0: lnK and lnK2 are entered as 0
  std::vector<double> covariates;
  std::string ipcClass;
  std::string cluster;
  /// ln of the order-l instrument, keyed by l.
  std::map<int, double> instruments;
  /// ln f, ln s^f, ln e, ln s^e when firm information is available.
  std::optional<std::array<double, 4>> firmControls;
};

struct Panel {
  std::vector<std::string> covariateNames;
  std::vector<PanelObservation> rows;
};

enum class FeTransform { within, firstDifference };
enum class FirmControls { none, firm, establishment };
enum class Outcome { lnY, lnYp, lnYq };

struct DesignSpec {
  FeTransform transform = FeTransform::within;
  bool ipcClassEffects = true;
  FirmControls firmControls = FirmControls::none;
  std::vector<int> instrumentOrders{3, 4, 5};
};

/// Transformed regression design. Column 0 of `regressors` is always lnKD.
struct Design {
  std::vector<std::string> names;   // regressor names, lnKD first
  Eigen::MatrixXd regressors;       // [lnKD, exogenous...]
  Eigen::MatrixXd instruments;      // excluded instruments only
  std::vector<std::string> instrumentNames;
  Eigen::VectorXd lnY, lnYp, lnYq;
  std::vector<int> clusters;        // dense cluster ids per row
  std::vector<std::string> clusterNames;
  std::size_t panelObservations = 0;
  std::size_t inventors = 0;
  std::vector<std::string> droppedColumns;  // degenerate optional columns

  Eigen::MatrixXd exogenous() const { return regressors.rightCols(regressors.cols() - 1); }
  Eigen::VectorXd endogenous() const { return regressors.col(0); }
  const Eigen::VectorXd& outcome(Outcome o) const;
};

/// Demeans every column within groups (inventors).
Eigen::MatrixXd withinTransform(const Eigen::MatrixXd& data, std::span<const int> groups);

/// Assembles the design for a balanced two-period panel. Throws DataError
/// naming the first inventor not observed exactly once in each of periods 1
/// and 2, or a row lacking a requested instrument. Optional columns (class
/// dummies, first-patent flag, covariates) that vanish or are collinear after
/// the transform are dropped and listed; a collinear core column raises
/// EstimationError naming the columns involved.
Design assembleDesign(const Panel& panel, const DesignSpec& spec);

struct VcvOptions {
  /// Multiply by G/(G-1) * (N-1)/(N-K).
  bool smallSample = true;
};

/// Cluster-robust sandwich bread * (Σ_g s_g s_g') * bread with scores
/// s_g = Σ_{i∈g} x_i e_i. Throws EstimationError with fewer than 2 clusters.
Eigen::MatrixXd clusterVcv(const Eigen::MatrixXd& scoresX, const Eigen::VectorXd& residuals,
                           std::span<const int> clusters, const Eigen::MatrixXd& bread,
                           const VcvOptions& options = {});

struct FirstStage {
  std::vector<std::string> names;  // excluded instruments, then exogenous
  Eigen::VectorXd coef;
  Eigen::MatrixXd vcv;
  double r2 = 0.0;
};

struct EffectiveF {
  double statistic = 0.0;
  double critical = 0.0;
  double effectiveDof = 0.0;  // K_eff
};

struct HansenJ {
  double statistic = 0.0;
  int dof = 0;
  double pValue = 1.0;
};

struct EstimationResult {
  std::string label;
  std::vector<std::string> names;
  Eigen::VectorXd coef;
  Eigen::MatrixXd vcv;
  double r2 = 0.0;  // within R^2
  std::optional<FirstStage> firstStage;
  std::optional<EffectiveF> effectiveF;
  std::optional<HansenJ> hansenJ;  // nullopt: not applicable
  std::size_t nObs = 0;
  std::size_t nClusters = 0;

  double coefficient(const std::string& name) const;
  double stdError(const std::string& name) const;
};

/// (X'X)^{-1} X'y with cluster-robust covariance. Rank deficiency raises
/// EstimationError naming the collinear columns.
EstimationResult olsFit(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, std::span<const int> clusters,
                        std::vector<std::string> names, const VcvOptions& options = {});

/// 2SLS of y on [endogenous, exogenous] with instruments [excluded, exogenous].
EstimationResult tslsFit(const Eigen::VectorXd& endogenous, const Eigen::MatrixXd& exogenous,
                         const Eigen::MatrixXd& excluded, const Eigen::VectorXd& y, std::span<const int> clusters,
                         std::vector<std::string> names, const VcvOptions& options = {});

enum class FirstStageVcv { cluster, classical };

/// Effective first-stage F and its critical value for a Nagar bias threshold
/// `tau` at level `alpha`, using the simplified procedure (x = 1/tau).
EffectiveF effectiveF(const Eigen::VectorXd& endogenous, const Eigen::MatrixXd& exogenous,
                      const Eigen::MatrixXd& excluded, std::span<const int> clusters,
                      FirstStageVcv kind = FirstStageVcv::cluster, double tau = 0.10, double alpha = 0.05);

/// Critical value for the effective F given K_eff.
double effectiveFCritical(double effectiveDof, double tau = 0.10, double alpha = 0.05);

/// Two-step efficient GMM J statistic with a cluster-robust weight matrix.
/// Returns nullopt when the model is just identified.
std::optional<HansenJ> hansenJ(const Eigen::VectorXd& endogenous, const Eigen::MatrixXd& exogenous,
                               const Eigen::MatrixXd& excluded, const Eigen::VectorXd& y,
                               std::span<const int> clusters);

struct Decomposition {
  double beta = 0.0;
  double betaP = 0.0;
  double betaQ = 0.0;
  double ratio = 0.0;  // betaQ / beta
  double ratioStdError = 0.0;
  double ciLow = 0.0;
  double ciHigh = 0.0;
  double additivityGap = 0.0;  // |beta - betaP - betaQ|
  Eigen::Matrix3d vcv;         // joint clustered covariance of (beta, betaP, betaQ)
};

/// Joint estimation of the baseline and both margin equations with the 2SLS
/// weighting matrix; ratio CI by the delta method at level `level`.
/// Throws EstimationError when beta is zero.
Decomposition decomposeGmm(const Eigen::VectorXd& endogenous, const Eigen::MatrixXd& exogenous,
                           const Eigen::MatrixXd& excluded, const Eigen::VectorXd& lnY,
                           const Eigen::VectorXd& lnYp, const Eigen::VectorXd& lnYq,
                           std::span<const int> clusters, double level = 0.95, const VcvOptions& options = {});

/// Panel-level convenience wrappers over an assembled design.
EstimationResult fitOls(const Design& d, Outcome outcome = Outcome::lnY, const VcvOptions& options = {});
/// `orders` selects the instrument columns by their order (subset of the
/// design's instrument orders).
EstimationResult fitTsls(const Design& d, const std::vector<int>& orders, Outcome outcome = Outcome::lnY,
                         const VcvOptions& options = {});
Decomposition fitDecomposition(const Design& d, const std::vector<int>& orders, double level = 0.95,
                               const VcvOptions& options = {});

/// Column label used for an instrument order, e.g. "lnKD_IV3".
std::string instrumentName(int order);

}  // namespace coinvent
