#include "coinvent/estimator.hpp"

#include <algorithm>
#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/distributions/non_central_chi_squared.hpp>
#include <boost/math/distributions/normal.hpp>
#include <cmath>
#include <numeric>
#include <sstream>
#include <unordered_map>

#include "coinvent/errors.hpp"

namespace coinvent {

using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

std::string joinNames(const std::vector<std::string>& names) {
  std::string out;
  for (const auto& n : names) out += (out.empty() ? "" : ", ") + n;
  return out;
}

// Screens columns left to right against the span of the accepted ones.
// Returns the accepted column indices; for each rejected column records the
// accepted columns it loads on.
struct ColumnScreen {
  std::vector<Eigen::Index> accepted;
  struct Rejection {
    Eigen::Index column;
    std::vector<Eigen::Index> dependsOn;
  };
  std::vector<Rejection> rejected;
};

ColumnScreen screenColumns(const MatrixXd& X, double relTol = 1e-9) {
  ColumnScreen out;
  const Eigen::Index n = X.rows();
  MatrixXd basis(n, 0);
  for (Eigen::Index c = 0; c < X.cols(); ++c) {
    const VectorXd col = X.col(c);
    const double norm = col.norm();
    VectorXd r = col;
    // Two passes of classical Gram-Schmidt keep orthogonality at this size.
    for (int pass = 0; pass < 2 && basis.cols() > 0; ++pass) r -= basis * (basis.transpose() * r);
    if (norm > 0.0 && r.norm() > relTol * norm) {
      basis.conservativeResize(n, basis.cols() + 1);
      basis.col(basis.cols() - 1) = r / r.norm();
      out.accepted.push_back(c);
      continue;
    }
    ColumnScreen::Rejection rej{c, {}};
    if (norm > 0.0 && !out.accepted.empty()) {
      MatrixXd A(n, static_cast<Eigen::Index>(out.accepted.size()));
      for (std::size_t k = 0; k < out.accepted.size(); ++k) A.col(static_cast<Eigen::Index>(k)) = X.col(out.accepted[k]);
      const VectorXd w = A.colPivHouseholderQr().solve(col);
      for (std::size_t k = 0; k < out.accepted.size(); ++k) {
        if (std::abs(w(static_cast<Eigen::Index>(k))) > 1e-8) rej.dependsOn.push_back(out.accepted[k]);
      }
    }
    out.rejected.push_back(std::move(rej));
  }
  return out;
}

std::string describeRejection(const ColumnScreen::Rejection& r, const std::vector<std::string>& names) {
  if (r.dependsOn.empty()) return "'" + names[static_cast<std::size_t>(r.column)] + "' is identically zero";
  std::vector<std::string> deps;
  for (auto d : r.dependsOn) deps.push_back(names[static_cast<std::size_t>(d)]);
  return "'" + names[static_cast<std::size_t>(r.column)] + "' is collinear with {" + joinNames(deps) + "}";
}

void requireFullRank(const MatrixXd& X, const std::vector<std::string>& names, const std::string& what) {
  if (X.rows() < X.cols()) {
    throw EstimationError(what + ": " + std::to_string(X.rows()) + " observations for " + std::to_string(X.cols()) +
                          " columns");
  }
  const auto screen = screenColumns(X);
  if (screen.rejected.empty()) return;
  std::string msg = what + " is rank deficient: ";
  for (std::size_t k = 0; k < screen.rejected.size(); ++k) {
    msg += (k ? "; " : "") + describeRejection(screen.rejected[k], names);
  }
  throw EstimationError(msg);
}

struct LeastSquares {
  VectorXd coef;
  MatrixXd bread;  // (X'X)^{-1}
};

LeastSquares leastSquares(const MatrixXd& X, const VectorXd& y) {
  const Eigen::Index k = X.cols();
  LeastSquares out;
  if (k == 0) {
    out.coef = VectorXd(0);
    out.bread = MatrixXd(0, 0);
    return out;
  }
  const Eigen::HouseholderQR<MatrixXd> qr(X);
  const MatrixXd R = qr.matrixQR().topRows(k).triangularView<Eigen::Upper>();
  const VectorXd qty = (qr.householderQ().transpose() * y).head(k);
  out.coef = R.triangularView<Eigen::Upper>().solve(qty);
  const MatrixXd Rinv = R.triangularView<Eigen::Upper>().solve(MatrixXd::Identity(k, k));
  out.bread = Rinv * Rinv.transpose();
  return out;
}

// Orthonormal basis of the column space of a full-rank X.
MatrixXd thinQ(const MatrixXd& X) {
  const Eigen::HouseholderQR<MatrixXd> qr(X);
  return qr.householderQ() * MatrixXd::Identity(X.rows(), X.cols());
}

// M_W v for a full-rank W (no-op for an empty W).
MatrixXd residualize(const MatrixXd& W, const MatrixXd& v) {
  if (W.cols() == 0) return v;
  const MatrixXd Q = thinQ(W);
  return v - Q * (Q.transpose() * v);
}

std::vector<int> denseClusters(std::span<const int> clusters, std::size_t& count) {
  std::unordered_map<int, int> ids;
  std::vector<int> dense(clusters.size());
  for (std::size_t r = 0; r < clusters.size(); ++r) {
    auto [it, fresh] = ids.try_emplace(clusters[r], static_cast<int>(ids.size()));
    dense[r] = it->second;
  }
  count = ids.size();
  return dense;
}

MatrixXd sandwich(const MatrixXd& X, const VectorXd& e, std::span<const int> clusters, const MatrixXd& bread,
                  Eigen::Index dofK, const VcvOptions& options) {
  if (static_cast<std::size_t>(X.rows()) != clusters.size() || e.size() != X.rows()) {
    throw EstimationError("cluster ids, residuals and design differ in length");
  }
  std::size_t G = 0;
  const auto dense = denseClusters(clusters, G);
  if (G < 2) throw EstimationError("cluster-robust covariance needs at least 2 clusters, got " + std::to_string(G));
  MatrixXd scores = MatrixXd::Zero(static_cast<Eigen::Index>(G), X.cols());
  for (Eigen::Index r = 0; r < X.rows(); ++r) scores.row(dense[static_cast<std::size_t>(r)]) += X.row(r) * e(r);
  const MatrixXd meat = scores.transpose() * scores;
  MatrixXd V = bread * meat * bread.transpose();
  if (options.smallSample) {
    const double n = static_cast<double>(X.rows());
    const double g = static_cast<double>(G);
    const double k = static_cast<double>(dofK);
    if (n <= k) throw EstimationError("no residual degrees of freedom for the small-sample factor");
    V *= g / (g - 1.0) * (n - 1.0) / (n - k);
  }
  return 0.5 * (V + V.transpose());
}

std::size_t clusterCount(std::span<const int> clusters) {
  std::size_t G = 0;
  denseClusters(clusters, G);
  return G;
}

double withinR2(const VectorXd& y, const VectorXd& e) {
  const double tss = y.squaredNorm();
  return tss > 0.0 ? 1.0 - e.squaredNorm() / tss : 0.0;
}

MatrixXd hcat(const MatrixXd& A, const MatrixXd& B) {
  MatrixXd out(A.rows(), A.cols() + B.cols());
  out << A, B;
  return out;
}

std::vector<std::string> exogenousNames(const std::vector<std::string>& names, Eigen::Index exogCols) {
  std::vector<std::string> out;
  for (Eigen::Index c = 0; c < exogCols; ++c) {
    const auto k = static_cast<std::size_t>(c + 1);
    out.push_back(k < names.size() ? names[k] : "w" + std::to_string(c + 1));
  }
  return out;
}

}  // namespace

Eigen::MatrixXd withinTransform(const Eigen::MatrixXd& data, std::span<const int> groups) {
  if (static_cast<std::size_t>(data.rows()) != groups.size()) {
    throw EstimationError("group ids and data differ in length");
  }
  std::unordered_map<int, std::pair<VectorXd, int>> sums;
  for (Eigen::Index r = 0; r < data.rows(); ++r) {
    auto [it, fresh] = sums.try_emplace(groups[static_cast<std::size_t>(r)], VectorXd::Zero(data.cols()), 0);
    it->second.first += data.row(r).transpose();
    ++it->second.second;
  }
  MatrixXd out = data;
  for (Eigen::Index r = 0; r < data.rows(); ++r) {
    const auto& [sum, count] = sums.at(groups[static_cast<std::size_t>(r)]);
    out.row(r) -= (sum / static_cast<double>(count)).transpose();
  }
  return out;
}

const Eigen::VectorXd& Design::outcome(Outcome o) const {
  switch (o) {
    case Outcome::lnYp: return lnYp;
    case Outcome::lnYq: return lnYq;
    default: return lnY;
  }
}

std::string instrumentName(int order) { return "lnKD_IV" + std::to_string(order); }

Design assembleDesign(const Panel& panel, const DesignSpec& spec) {
  if (panel.rows.empty()) throw DataError("empty estimation panel");
  for (int l : spec.instrumentOrders) {
    if (l < 1 || l > 5) throw ConfigError("instrument order " + std::to_string(l) + " outside 1..5");
  }

  // Pair up the two periods of every inventor, in order of first appearance.
  std::unordered_map<std::string, std::size_t> slot;
  std::vector<std::array<long, 2>> pairs;
  std::vector<std::string> ids;
  for (std::size_t r = 0; r < panel.rows.size(); ++r) {
    const auto& row = panel.rows[r];
    if (row.period != 1 && row.period != 2) {
      throw DataError("inventor " + row.inventor + ": period " + std::to_string(row.period) + " outside {1,2}");
    }
    auto [it, fresh] = slot.try_emplace(row.inventor, pairs.size());
    if (fresh) {
      pairs.push_back({-1, -1});
      ids.push_back(row.inventor);
    }
    auto& cell = pairs[it->second][static_cast<std::size_t>(row.period - 1)];
    if (cell >= 0) throw DataError("unbalanced panel: inventor " + row.inventor + " observed twice in one period");
    cell = static_cast<long>(r);
  }
  for (std::size_t k = 0; k < pairs.size(); ++k) {
    if (pairs[k][0] < 0 || pairs[k][1] < 0) throw DataError("unbalanced panel: inventor " + ids[k]);
  }

  const auto& rows = panel.rows;
  const std::size_t nCov = panel.covariateNames.size();
  for (const auto& row : rows) {
    if (row.covariates.size() != nCov) throw DataError("inventor " + row.inventor + ": covariate count mismatch");
    if (spec.firmControls != FirmControls::none && !row.firmControls) {
      throw DataError("inventor " + row.inventor + ": firm controls requested but unavailable");
    }
    for (int l : spec.instrumentOrders) {
      if (!row.instruments.contains(l)) {
        throw DataError("inventor " + row.inventor + ": missing instrument " + instrumentName(l));
      }
    }
  }

  // Raw columns. Core columns must survive the transform.
  std::vector<std::string> names{"lnKD", "lnK", "lnK2", "period2"};
  const std::size_t coreCount = names.size();
  names.push_back("firstPatent");
  for (const auto& c : panel.covariateNames) names.push_back(c);
  if (spec.firmControls == FirmControls::firm) {
    names.push_back("lnF");
    names.push_back("lnSf");
  } else if (spec.firmControls == FirmControls::establishment) {
    names.push_back("lnE");
    names.push_back("lnSe");
  }
  std::vector<std::string> classes;
  if (spec.ipcClassEffects) {
    for (const auto& row : rows) classes.push_back(row.ipcClass);
    std::sort(classes.begin(), classes.end());
    classes.erase(std::unique(classes.begin(), classes.end()), classes.end());
    for (const auto& c : classes) names.push_back("class:" + c);
  }
  const auto classBase = static_cast<Eigen::Index>(names.size() - classes.size());

  const auto N = static_cast<Eigen::Index>(rows.size());
  const auto K = static_cast<Eigen::Index>(names.size());
  const auto L = static_cast<Eigen::Index>(spec.instrumentOrders.size());
  // Layout: [regressors | instruments | lnY lnYp lnYq]
  MatrixXd raw = MatrixXd::Zero(N, K + L + 3);
  for (Eigen::Index r = 0; r < N; ++r) {
    const auto& row = rows[static_cast<std::size_t>(r)];
    raw(r, 0) = row.lnKD;
    raw(r, 1) = row.lnK;
    raw(r, 2) = row.lnK2;
    raw(r, 3) = row.period == 2 ? 1.0 : 0.0;
    raw(r, 4) = row.firstPatent ? 1.0 : 0.0;
    Eigen::Index c = 5;
    for (double v : row.covariates) raw(r, c++) = v;
    if (spec.firmControls == FirmControls::firm) {
      raw(r, c++) = (*row.firmControls)[0];
      raw(r, c++) = (*row.firmControls)[1];
    } else if (spec.firmControls == FirmControls::establishment) {
      raw(r, c++) = (*row.firmControls)[2];
      raw(r, c++) = (*row.firmControls)[3];
    }
    if (spec.ipcClassEffects) {
      const auto at = std::lower_bound(classes.begin(), classes.end(), row.ipcClass) - classes.begin();
      raw(r, classBase + at) = 1.0;
    }
    for (Eigen::Index l = 0; l < L; ++l) raw(r, K + l) = row.instruments.at(spec.instrumentOrders[static_cast<std::size_t>(l)]);
    raw(r, K + L) = row.lnY;
    raw(r, K + L + 1) = row.lnYp;
    raw(r, K + L + 2) = row.lnYq;
  }

  Design d;
  d.inventors = pairs.size();
  d.panelObservations = rows.size();

  std::unordered_map<std::string, int> clusterIds;
  auto clusterOf = [&](const std::string& c) {
    auto [it, fresh] = clusterIds.try_emplace(c, static_cast<int>(clusterIds.size()));
    if (fresh) d.clusterNames.push_back(c);
    return it->second;
  };

  MatrixXd transformed;
  if (spec.transform == FeTransform::within) {
    std::vector<int> groups(rows.size());
    for (std::size_t k = 0; k < pairs.size(); ++k) {
      groups[static_cast<std::size_t>(pairs[k][0])] = static_cast<int>(k);
      groups[static_cast<std::size_t>(pairs[k][1])] = static_cast<int>(k);
    }
    transformed = withinTransform(raw, groups);
    for (const auto& row : rows) d.clusters.push_back(clusterOf(row.cluster));
  } else {
    transformed.resize(static_cast<Eigen::Index>(pairs.size()), raw.cols());
    for (std::size_t k = 0; k < pairs.size(); ++k) {
      transformed.row(static_cast<Eigen::Index>(k)) = raw.row(pairs[k][1]) - raw.row(pairs[k][0]);
      d.clusters.push_back(clusterOf(rows[static_cast<std::size_t>(pairs[k][0])].cluster));
    }
  }

  // Drop optional columns that vanish or are spanned by earlier ones.
  const auto screen = screenColumns(transformed.leftCols(K));
  for (const auto& rej : screen.rejected) {
    if (rej.column < static_cast<Eigen::Index>(coreCount)) {
      throw EstimationError("design is rank deficient after the fixed-effect transform: " + describeRejection(rej, names));
    }
    d.droppedColumns.push_back(names[static_cast<std::size_t>(rej.column)]);
  }
  d.regressors.resize(transformed.rows(), static_cast<Eigen::Index>(screen.accepted.size()));
  for (std::size_t k = 0; k < screen.accepted.size(); ++k) {
    d.regressors.col(static_cast<Eigen::Index>(k)) = transformed.col(screen.accepted[k]);
    d.names.push_back(names[static_cast<std::size_t>(screen.accepted[k])]);
  }
  d.instruments = transformed.middleCols(K, L);
  for (int l : spec.instrumentOrders) d.instrumentNames.push_back(instrumentName(l));
  d.lnY = transformed.col(K + L);
  d.lnYp = transformed.col(K + L + 1);
  d.lnYq = transformed.col(K + L + 2);
  return d;
}

Eigen::MatrixXd clusterVcv(const Eigen::MatrixXd& scoresX, const Eigen::VectorXd& residuals,
                           std::span<const int> clusters, const Eigen::MatrixXd& bread, const VcvOptions& options) {
  return sandwich(scoresX, residuals, clusters, bread, bread.cols(), options);
}

double EstimationResult::coefficient(const std::string& name) const {
  const auto it = std::find(names.begin(), names.end(), name);
  if (it == names.end()) throw LookupError("no coefficient named " + name);
  return coef(it - names.begin());
}

double EstimationResult::stdError(const std::string& name) const {
  const auto it = std::find(names.begin(), names.end(), name);
  if (it == names.end()) throw LookupError("no coefficient named " + name);
  const auto k = it - names.begin();
  return std::sqrt(std::max(0.0, vcv(k, k)));
}

EstimationResult olsFit(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, std::span<const int> clusters,
                        std::vector<std::string> names, const VcvOptions& options) {
  if (names.size() != static_cast<std::size_t>(X.cols())) throw EstimationError("column names do not match the design");
  requireFullRank(X, names, "OLS design");
  const auto ls = leastSquares(X, y);
  const VectorXd e = y - X * ls.coef;
  EstimationResult out;
  out.label = "OLS";
  out.names = std::move(names);
  out.coef = ls.coef;
  out.vcv = sandwich(X, e, clusters, ls.bread, X.cols(), options);
  out.r2 = withinR2(y, e);
  out.nObs = static_cast<std::size_t>(X.rows());
  out.nClusters = clusterCount(clusters);
  return out;
}

EstimationResult tslsFit(const Eigen::VectorXd& endogenous, const Eigen::MatrixXd& exogenous,
                         const Eigen::MatrixXd& excluded, const Eigen::VectorXd& y, std::span<const int> clusters,
                         std::vector<std::string> names, const VcvOptions& options) {
  if (excluded.cols() < 1) throw EstimationError("2SLS needs at least one excluded instrument");
  const MatrixXd X = hcat(endogenous, exogenous);
  if (names.size() != static_cast<std::size_t>(X.cols())) throw EstimationError("column names do not match the design");
  const MatrixXd Z = hcat(excluded, exogenous);

  std::vector<std::string> zNames;
  for (Eigen::Index c = 0; c < excluded.cols(); ++c) zNames.push_back("z" + std::to_string(c + 1));
  const auto wNames = exogenousNames(names, exogenous.cols());
  zNames.insert(zNames.end(), wNames.begin(), wNames.end());
  requireFullRank(Z, zNames, "first-stage instrument matrix");

  // First stage of the endogenous regressor on all instruments.
  const auto fs = leastSquares(Z, endogenous);
  const VectorXd v = endogenous - Z * fs.coef;

  const MatrixXd Qz = thinQ(Z);
  const MatrixXd Xhat = Qz * (Qz.transpose() * X);
  requireFullRank(Xhat, names, "projected 2SLS design (first-stage rank failure)");
  const auto ls = leastSquares(Xhat, y);
  const VectorXd e = y - X * ls.coef;

  EstimationResult out;
  out.names = std::move(names);
  out.coef = ls.coef;
  out.vcv = sandwich(Xhat, e, clusters, ls.bread, X.cols(), options);
  out.r2 = withinR2(y, e);
  out.nObs = static_cast<std::size_t>(X.rows());
  out.nClusters = clusterCount(clusters);

  FirstStage first;
  first.names = std::move(zNames);
  first.coef = fs.coef;
  first.vcv = sandwich(Z, v, clusters, fs.bread, Z.cols(), options);
  first.r2 = withinR2(endogenous, v);
  out.firstStage = std::move(first);
  try {
    out.effectiveF = effectiveF(endogenous, exogenous, excluded, clusters);
  } catch (const EstimationError&) {
    // An exact first stage leaves no first-stage error to scale the F by.
    out.effectiveF.reset();
  }
  out.hansenJ = hansenJ(endogenous, exogenous, excluded, y, clusters);
  return out;
}

double effectiveFCritical(double effectiveDof, double tau, double alpha) {
  if (!(effectiveDof > 0.0)) throw EstimationError("effective degrees of freedom must be positive");
  if (!(tau > 0.0) || !(alpha > 0.0 && alpha < 1.0)) throw ConfigError("tau and alpha must lie in (0,1)");
  const double x = 1.0 / tau;
  const boost::math::non_central_chi_squared dist(effectiveDof, x * effectiveDof);
  return boost::math::quantile(dist, 1.0 - alpha) / effectiveDof;
}

EffectiveF effectiveF(const Eigen::VectorXd& endogenous, const Eigen::MatrixXd& exogenous,
                      const Eigen::MatrixXd& excluded, std::span<const int> clusters, FirstStageVcv kind, double tau,
                      double alpha) {
  if (excluded.cols() < 1) throw EstimationError("effective F needs at least one instrument");
  const MatrixXd zt = residualize(exogenous, excluded);
  const VectorXd xt = residualize(exogenous, endogenous);
  const MatrixXd Q = zt.transpose() * zt;
  const Eigen::LLT<MatrixXd> chol(Q);
  if (chol.info() != Eigen::Success) throw EstimationError("instruments are collinear after partialling out exogenous regressors");
  const VectorXd pi = chol.solve(zt.transpose() * xt);
  const VectorXd v = xt - zt * pi;
  const MatrixXd Qinv = chol.solve(MatrixXd::Identity(Q.rows(), Q.cols()));
  const Eigen::Index dofK = exogenous.cols() + excluded.cols();

  MatrixXd sigma;
  if (kind == FirstStageVcv::classical) {
    const double dof = static_cast<double>(zt.rows() - dofK);
    if (dof <= 0.0) throw EstimationError("no residual degrees of freedom in the first stage");
    sigma = v.squaredNorm() / dof * Qinv;
  } else {
    sigma = sandwich(zt, v, clusters, Qinv, dofK, VcvOptions{});
  }

  const MatrixXd Lc = chol.matrixL();
  const MatrixXd M = Lc.transpose() * sigma * Lc;
  const double trM = M.trace();
  if (!(trM > 0.0)) throw EstimationError("first-stage covariance is degenerate");
  const double trM2 = (M * M).trace();
  const double lmax = Eigen::SelfAdjointEigenSolver<MatrixXd>(M, Eigen::EigenvaluesOnly).eigenvalues().maxCoeff();
  const double x = 1.0 / tau;

  EffectiveF out;
  out.statistic = (Lc.transpose() * pi).squaredNorm() / trM;
  out.effectiveDof = trM * trM * (1.0 + 2.0 * x) / (trM2 + 2.0 * x * trM * lmax);
  out.critical = effectiveFCritical(out.effectiveDof, tau, alpha);
  return out;
}

std::optional<HansenJ> hansenJ(const Eigen::VectorXd& endogenous, const Eigen::MatrixXd& exogenous,
                               const Eigen::MatrixXd& excluded, const Eigen::VectorXd& y,
                               std::span<const int> clusters) {
  const Eigen::Index L = excluded.cols();
  if (L <= 1) return std::nullopt;
  // Exogenous regressors are exactly identified by their own moments, so the
  // efficient estimate and J of the partialled system equal the full one.
  const MatrixXd Z = residualize(exogenous, excluded);
  const VectorXd x = residualize(exogenous, endogenous);
  const VectorXd yt = residualize(exogenous, y);

  std::size_t G = 0;
  const auto dense = denseClusters(clusters, G);
  if (G < 2) throw EstimationError("Hansen J needs at least 2 clusters");

  const MatrixXd ZZ = Z.transpose() * Z;
  const VectorXd Zx = Z.transpose() * x;
  const VectorXd Zy = Z.transpose() * yt;
  const Eigen::LLT<MatrixXd> zz(ZZ);
  const VectorXd a = zz.solve(Zx);
  const double b1 = a.dot(Zy) / a.dot(Zx);
  const VectorXd e1 = yt - x * b1;

  MatrixXd scores = MatrixXd::Zero(static_cast<Eigen::Index>(G), L);
  for (Eigen::Index r = 0; r < Z.rows(); ++r) scores.row(dense[static_cast<std::size_t>(r)]) += Z.row(r) * e1(r);
  const MatrixXd S = scores.transpose() * scores;
  const Eigen::LDLT<MatrixXd> sInv(S);
  if (sInv.info() != Eigen::Success || sInv.rcond() < 1e-14) {
    throw EstimationError("cluster moment covariance is singular; too few clusters for " + std::to_string(L) +
                          " instruments");
  }
  const VectorXd wx = sInv.solve(Zx);
  const double b2 = wx.dot(Zy) / wx.dot(Zx);
  const VectorXd m = Zy - Zx * b2;

  HansenJ out;
  out.statistic = m.dot(sInv.solve(m));
  out.dof = static_cast<int>(L - 1);
  const boost::math::chi_squared chi(out.dof);
  out.pValue = boost::math::cdf(boost::math::complement(chi, std::max(0.0, out.statistic)));
  return out;
}

Decomposition decomposeGmm(const Eigen::VectorXd& endogenous, const Eigen::MatrixXd& exogenous,
                           const Eigen::MatrixXd& excluded, const Eigen::VectorXd& lnY, const Eigen::VectorXd& lnYp,
                           const Eigen::VectorXd& lnYq, std::span<const int> clusters, double level,
                           const VcvOptions& options) {
  if (excluded.cols() < 1) throw EstimationError("decomposition needs at least one excluded instrument");
  if (!(level > 0.0 && level < 1.0)) throw ConfigError("confidence level must lie in (0,1)");
  const MatrixXd X = hcat(endogenous, exogenous);
  const MatrixXd Z = hcat(excluded, exogenous);
  std::vector<std::string> names{"lnKD"};
  const auto wNames = exogenousNames({}, exogenous.cols());
  names.insert(names.end(), wNames.begin(), wNames.end());
  std::vector<std::string> zNames;
  for (Eigen::Index c = 0; c < excluded.cols(); ++c) zNames.push_back("z" + std::to_string(c + 1));
  zNames.insert(zNames.end(), wNames.begin(), wNames.end());
  requireFullRank(Z, zNames, "decomposition instruments");

  const MatrixXd Qz = thinQ(Z);
  const MatrixXd Xhat = Qz * (Qz.transpose() * X);
  requireFullRank(Xhat, names, "projected decomposition design");

  // With the 2SLS weighting matrix each equation's estimate is its own 2SLS
  // fit; stacking only matters for the joint covariance.
  MatrixXd Y(lnY.size(), 3);
  Y << lnY, lnYp, lnYq;
  const auto ls = leastSquares(Xhat, Y.col(0));
  const Eigen::HouseholderQR<MatrixXd> qr(Xhat);
  const Eigen::Index k = Xhat.cols();
  const MatrixXd R = qr.matrixQR().topRows(k).triangularView<Eigen::Upper>();
  const MatrixXd B = R.triangularView<Eigen::Upper>().solve((qr.householderQ().transpose() * Y).topRows(k));
  const MatrixXd E = Y - X * B;

  std::size_t G = 0;
  const auto dense = denseClusters(clusters, G);
  if (G < 2) throw EstimationError("decomposition covariance needs at least 2 clusters");
  // Influence of each cluster on the lnKD coefficient of each equation.
  const VectorXd h = ls.bread.row(0).transpose();  // first row of (X̂'X̂)^{-1}
  MatrixXd psi = MatrixXd::Zero(static_cast<Eigen::Index>(G), 3);
  const VectorXd xh = Xhat * h;
  for (Eigen::Index r = 0; r < Xhat.rows(); ++r) psi.row(dense[static_cast<std::size_t>(r)]) += xh(r) * E.row(r);
  Eigen::Matrix3d V = psi.transpose() * psi;
  if (options.smallSample) {
    const double n = static_cast<double>(X.rows());
    const double g = static_cast<double>(G);
    V *= g / (g - 1.0) * (n - 1.0) / (n - static_cast<double>(k));
  }

  Decomposition out;
  out.beta = B(0, 0);
  out.betaP = B(0, 1);
  out.betaQ = B(0, 2);
  out.vcv = 0.5 * (V + V.transpose());
  out.additivityGap = std::abs(out.beta - out.betaP - out.betaQ);
  if (!std::isfinite(out.beta) || std::abs(out.beta) <= 1e-14 * std::max(1.0, std::abs(out.betaP) + std::abs(out.betaQ))) {
    throw EstimationError("beta is zero; the margin ratio is undefined");
  }
  out.ratio = out.betaQ / out.beta;
  const Eigen::Vector2d grad(-out.betaQ / (out.beta * out.beta), 1.0 / out.beta);
  Eigen::Matrix2d sub;
  sub << out.vcv(0, 0), out.vcv(0, 2), out.vcv(2, 0), out.vcv(2, 2);
  out.ratioStdError = std::sqrt(std::max(0.0, grad.dot(sub * grad)));
  const double z = boost::math::quantile(boost::math::normal(), 0.5 + level / 2.0);
  out.ciLow = out.ratio - z * out.ratioStdError;
  out.ciHigh = out.ratio + z * out.ratioStdError;
  return out;
}

namespace {
MatrixXd selectInstruments(const Design& d, const std::vector<int>& orders) {
  if (orders.empty()) throw ConfigError("no instrument orders selected");
  MatrixXd Z(d.instruments.rows(), static_cast<Eigen::Index>(orders.size()));
  for (std::size_t k = 0; k < orders.size(); ++k) {
    const auto name = instrumentName(orders[k]);
    const auto it = std::find(d.instrumentNames.begin(), d.instrumentNames.end(), name);
    if (it == d.instrumentNames.end()) throw ConfigError("instrument " + name + " was not assembled into the design");
    Z.col(static_cast<Eigen::Index>(k)) = d.instruments.col(it - d.instrumentNames.begin());
  }
  return Z;
}

std::string ivLabel(std::vector<int> orders) {
  std::sort(orders.begin(), orders.end());
  bool contiguous = true;
  for (std::size_t k = 1; k < orders.size(); ++k) contiguous = contiguous && orders[k] == orders[k - 1] + 1;
  if (orders.size() > 1 && contiguous) return "IV" + std::to_string(orders.front()) + "-" + std::to_string(orders.back());
  std::string out = "IV";
  for (std::size_t k = 0; k < orders.size(); ++k) out += (k ? "," : "") + std::to_string(orders[k]);
  return out;
}
}  // namespace

EstimationResult fitOls(const Design& d, Outcome outcome, const VcvOptions& options) {
  auto r = olsFit(d.regressors, d.outcome(outcome), d.clusters, d.names, options);
  r.nObs = d.panelObservations;
  return r;
}

EstimationResult fitTsls(const Design& d, const std::vector<int>& orders, Outcome outcome,
                         const VcvOptions& options) {
  const MatrixXd Z = selectInstruments(d, orders);
  auto r = tslsFit(d.endogenous(), d.exogenous(), Z, d.outcome(outcome), d.clusters, d.names, options);
  r.label = ivLabel(orders);
  r.nObs = d.panelObservations;
  if (r.firstStage) {
    for (std::size_t k = 0; k < orders.size(); ++k) r.firstStage->names[k] = instrumentName(orders[k]);
  }
  return r;
}

Decomposition fitDecomposition(const Design& d, const std::vector<int>& orders, double level,
                               const VcvOptions& options) {
  const MatrixXd Z = selectInstruments(d, orders);
  return decomposeGmm(d.endogenous(), d.exogenous(), Z, d.lnY, d.lnYp, d.lnYq, d.clusters, level, options);
}

}  // namespace coinvent
