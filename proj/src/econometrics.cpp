#include "vmtco2/econometrics.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <numbers>
#include <sstream>

#include <Eigen/Eigenvalues>
#include <Eigen/SparseLU>
#include <json.hpp>

#include "vmtco2/errors.hpp"
#include "vmtco2/io.hpp"

namespace vmtco2 {

// ---------------------------------------------------------------------------
// Log-determinant and shared numerics

namespace linalg {

double logdet_dense_lu(const SparseRowMatrix& w, double rho) {
  const auto n = w.rows();
  const Eigen::MatrixXd a = Eigen::MatrixXd::Identity(n, n) - rho * Eigen::MatrixXd(w);
  const Eigen::PartialPivLU<Eigen::MatrixXd> lu(a);
  return lu.matrixLU().diagonal().array().abs().log().sum();
}

double logdet_sparse_lu(const SparseRowMatrix& w, double rho) {
  const auto n = w.rows();
  Eigen::SparseMatrix<double> a(n, n);
  a.setIdentity();
  a -= rho * Eigen::SparseMatrix<double>(w);
  a.makeCompressed();
  Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
  lu.analyzePattern(a);
  lu.factorize(a);
  if (lu.info() != Eigen::Success) throw NumericalError("sparse LU of I - rho W failed at rho = " + io::fmt(rho));
  return lu.logAbsDeterminant();
}

LogDeterminant::LogDeterminant(const SparseRowMatrix& w, Eigen::Index dense_limit) : w_(&w) {
  use_eigen_ = w.rows() <= dense_limit;
  if (use_eigen_) {
    Eigen::EigenSolver<Eigen::MatrixXd> es(Eigen::MatrixXd(w), false);
    if (es.info() != Eigen::Success) throw NumericalError("eigenvalue decomposition of W failed");
    eigenvalues_ = es.eigenvalues();
  }
}

double LogDeterminant::operator()(double rho) const {
  if (!use_eigen_) return logdet_sparse_lu(*w_, rho);
  double s = 0.0;
  for (const auto& l : eigenvalues_) s += 0.5 * std::log(std::norm(1.0 - rho * l));
  return s;
}

double LogDeterminant::derivative(double rho) const {
  if (!use_eigen_) {
    const double h = 1e-6;
    return (logdet_sparse_lu(*w_, rho + h) - logdet_sparse_lu(*w_, rho - h)) / (2 * h);
  }
  double s = 0.0;
  for (const auto& l : eigenvalues_) s -= (l / (1.0 - rho * l)).real();
  return s;
}

double LogDeterminant::spectral_radius() const {
  if (!use_eigen_) throw NumericalError("spectral radius needs the eigenvalue path");
  return eigenvalues_.cwiseAbs().maxCoeff();
}

std::vector<double> spatial_parameter_grid() {
  std::vector<double> g;
  for (int i = -19; i <= 19; ++i) g.push_back(0.05 * i);
  return g;
}

}  // namespace linalg

namespace {

constexpr double kSpatialBound = 0.99;
const double kLog2Pi = std::log(2.0 * std::numbers::pi);

std::string join(const std::vector<std::string>& v) {
  std::string s;
  for (const auto& x : v) s += (s.empty() ? "" : ", ") + x;
  return s;
}

std::string trace_text(const std::vector<std::pair<double, double>>& trace) {
  std::string s;
  for (const auto& [x, f] : trace) s += " (" + io::fmt(x) + ", " + io::fmt(f) + ")";
  return s;
}

linalg::LeastSquares<double> checked_ls(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                                        const std::vector<std::string>& names) {
  auto ls = linalg::least_squares(x, y);
  if (!ls.dependent_columns.empty()) {
    std::vector<std::string> bad;
    for (auto c : ls.dependent_columns) bad.push_back(c < static_cast<Eigen::Index>(names.size()) ? names[c] : "#" + std::to_string(c));
    throw InputError("design matrix is rank deficient; collinear column(s): " + join(bad));
  }
  return ls;
}

void check_panel(const TractPanel& p) {
  if (p.n() <= p.k()) throw InputError("need more observations (" + std::to_string(p.n()) + ") than parameters (" +
                                      std::to_string(p.k()) + ")");
}

void check_spatial(const TractPanel& p, const SpatialWeights& w) {
  check_panel(p);
  if (w.size() != p.n())
    throw ConsistencyError("weights cover " + std::to_string(w.size()) + " tracts, panel has " + std::to_string(p.n()));
  if (!w.row_standardized) throw InputError("spatial estimators require row-standardised weights");
}

std::vector<Coefficient> make_coefficients(const std::vector<std::string>& names, const Eigen::VectorXd& b,
                                           const Eigen::VectorXd& se) {
  std::vector<Coefficient> out;
  for (Eigen::Index i = 0; i < b.size(); ++i) out.push_back({names[i], b(i), se(i)});
  return out;
}

double ols_loglik(double rss, double n) { return -0.5 * n * (kLog2Pi + 1.0 + std::log(rss / n)); }

// Outcome prediction (I - gamma W)^-1 X beta.
Eigen::VectorXd reduced_form(const SparseRowMatrix& w, double gamma, const Eigen::VectorXd& xb) {
  if (gamma == 0.0) return xb;
  const auto n = w.rows();
  Eigen::SparseMatrix<double> a(n, n);
  a.setIdentity();
  a -= gamma * Eigen::SparseMatrix<double>(w);
  a.makeCompressed();
  Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
  lu.compute(a);
  if (lu.info() != Eigen::Success) throw NumericalError("I - gamma W is singular");
  return lu.solve(xb);
}

struct DenseSpatialTraces {
  Eigen::MatrixXd g;  // W (I - rho W)^-1
  double tr = 0.0, tr_sq = 0.0, tr_tg = 0.0;
};

DenseSpatialTraces spatial_traces(const SparseRowMatrix& w, double rho) {
  const auto n = w.rows();
  const Eigen::MatrixXd a = Eigen::MatrixXd::Identity(n, n) - rho * Eigen::MatrixXd(w);
  DenseSpatialTraces t;
  t.g = w * a.partialPivLu().inverse();
  t.tr = t.g.trace();
  t.tr_sq = t.g.cwiseProduct(t.g.transpose()).sum();
  t.tr_tg = t.g.squaredNorm();
  return t;
}

double maybe_sqrt(double v) { return v > 0.0 ? std::sqrt(v) : std::numeric_limits<double>::quiet_NaN(); }

}  // namespace

std::string_view to_string(Estimator e) {
  switch (e) {
    case Estimator::Ols: return "OLS";
    case Estimator::OlsFixedEffects: return "OLS-FE";
    case Estimator::SlmMl: return "SLM-ML";
    case Estimator::SlmGs2sls: return "SLM-GS2SLS";
    case Estimator::SemMl: return "SEM-ML";
    case Estimator::SemGmm: return "SEM-GMM";
    case Estimator::SelmGmm: return "SELM-GMM";
  }
  return "?";
}

Estimator parse_estimator(std::string_view s) {
  std::string u;
  for (unsigned char c : s) u.push_back(static_cast<char>(std::toupper(c)));
  for (auto e : kAllEstimators)
    if (to_string(e) == u) return e;
  throw InputError("unknown estimator '" + std::string(s) + "'");
}

bool is_spatial(Estimator e) { return e != Estimator::Ols && e != Estimator::OlsFixedEffects; }

std::string stars(double t) {
  const double a = std::abs(t);
  if (a >= 2.5758293035489) return "***";
  if (a >= 1.9599639845401) return "**";
  if (a >= 1.6448536269515) return "*";
  return "";
}

const Coefficient* ModelFit::find(std::string_view name) const {
  for (const auto& c : coefficients)
    if (c.name == name) return &c;
  return nullptr;
}

// ---------------------------------------------------------------------------
// OLS family

ModelFit fit_ols(const TractPanel& panel) {
  check_panel(panel);
  const auto ls = checked_ls(panel.x, panel.y, panel.names);
  const double n = static_cast<double>(panel.n());
  const double p = static_cast<double>(panel.k());
  const double rss = ls.residuals.squaredNorm();
  const double tss = (panel.y.array() - panel.y.mean()).matrix().squaredNorm();

  ModelFit fit;
  fit.method = Estimator::Ols;
  fit.sigma2 = rss / (n - p);
  const Eigen::VectorXd se = (fit.sigma2 * ls.xtx_inv.diagonal()).cwiseSqrt();
  fit.coefficients = make_coefficients(panel.names, ls.coef, se);
  fit.mse = rss / n;
  const double r2 = tss > 0.0 ? 1.0 - rss / tss : 1.0;
  fit.r2 = 1.0 - (1.0 - r2) * (n - 1.0) / (n - (p - 1.0) - 1.0);
  fit.loglik = rss > 0.0 ? std::optional(ols_loglik(rss, n)) : std::nullopt;
  fit.n = panel.n();
  fit.k_params = panel.k();
  fit.panel_signature = panel.signature();
  fit.residuals = ls.residuals;
  fit.fitted = panel.y - ls.residuals;
  return fit;
}

ModelFit fit_ols_fe(const TractPanel& panel) {
  check_panel(panel);
  if (static_cast<Eigen::Index>(panel.groups.size()) != panel.n())
    throw InputError("fixed effects need a group column for every row");
  std::map<std::string, std::vector<Eigen::Index>> members;
  for (Eigen::Index i = 0; i < panel.n(); ++i) members[panel.groups[i]].push_back(i);
  if (members.size() < 2) throw InputError("fixed effects need at least two groups");
  for (const auto& [g, rows] : members)
    if (rows.size() < 2) throw InputError("fixed-effects group " + g + " has fewer than two rows");

  const Eigen::Index first = (!panel.names.empty() && panel.names[0] == "const") ? 1 : 0;
  const Eigen::MatrixXd x = panel.x.rightCols(panel.k() - first);
  std::vector<std::string> names(panel.names.begin() + first, panel.names.end());

  Eigen::MatrixXd xd = x;
  Eigen::VectorXd yd = panel.y;
  std::map<std::string, std::pair<double, Eigen::RowVectorXd>> means;
  for (const auto& [g, rows] : members) {
    double ym = 0.0;
    Eigen::RowVectorXd xm = Eigen::RowVectorXd::Zero(x.cols());
    for (auto i : rows) {
      ym += panel.y(i);
      xm += x.row(i);
    }
    ym /= static_cast<double>(rows.size());
    xm /= static_cast<double>(rows.size());
    for (auto i : rows) {
      yd(i) -= ym;
      xd.row(i) -= xm;
    }
    means[g] = {ym, xm};
  }

  ModelFit fit;
  fit.method = Estimator::OlsFixedEffects;
  std::vector<Eigen::Index> keep;
  for (Eigen::Index j = 0; j < xd.cols(); ++j) {
    if (xd.col(j).norm() <= 1e-10 * (1.0 + x.col(j).norm()))
      fit.warnings.push_back("dropped group-constant column " + names[j]);
    else
      keep.push_back(j);
  }
  Eigen::MatrixXd xk(xd.rows(), static_cast<Eigen::Index>(keep.size()));
  std::vector<std::string> kept_names;
  for (std::size_t c = 0; c < keep.size(); ++c) {
    xk.col(static_cast<Eigen::Index>(c)) = xd.col(keep[c]);
    kept_names.push_back(names[keep[c]]);
  }

  const double n = static_cast<double>(panel.n());
  const double groups = static_cast<double>(members.size());
  const double k = static_cast<double>(xk.cols());
  const double dof = n - k - groups;
  if (!(dof > 0.0)) throw InputError("fixed effects leave no residual degrees of freedom");

  Eigen::VectorXd beta = Eigen::VectorXd::Zero(0);
  Eigen::VectorXd resid = yd;
  Eigen::VectorXd se = Eigen::VectorXd::Zero(0);
  if (xk.cols() > 0) {
    const auto ls = checked_ls(xk, yd, kept_names);
    beta = ls.coef;
    resid = ls.residuals;
    fit.sigma2 = resid.squaredNorm() / dof;
    se = (fit.sigma2 * ls.xtx_inv.diagonal()).cwiseSqrt();
  } else {
    fit.sigma2 = resid.squaredNorm() / dof;
  }
  fit.coefficients = make_coefficients(kept_names, beta, se);
  for (const auto& [g, m] : means) {
    double xb = 0.0;
    for (std::size_t c = 0; c < keep.size(); ++c) xb += m.second(keep[c]) * beta(static_cast<Eigen::Index>(c));
    fit.group_effects[g] = m.first - xb;
  }
  const double rss = resid.squaredNorm();
  const double tss = (panel.y.array() - panel.y.mean()).matrix().squaredNorm();
  const double r2 = tss > 0.0 ? 1.0 - rss / tss : 1.0;
  const double k_total = k + groups - 1.0;
  fit.r2 = 1.0 - (1.0 - r2) * (n - 1.0) / (n - k_total - 1.0);
  fit.mse = rss / n;
  fit.loglik = rss > 0.0 ? std::optional(ols_loglik(rss, n)) : std::nullopt;
  fit.n = panel.n();
  fit.k_params = xk.cols() + static_cast<Eigen::Index>(members.size());
  fit.panel_signature = panel.signature();
  fit.residuals = resid;
  fit.fitted = panel.y - resid;
  return fit;
}

// ---------------------------------------------------------------------------
// Spatial lag, maximum likelihood

SlmLikelihood::SlmLikelihood(const TractPanel& panel, const SpatialWeights& w, const linalg::LogDeterminant& logdet)
    : logdet_(&logdet), n_(static_cast<double>(panel.n())) {
  const Eigen::VectorXd wy = w.matrix * panel.y;
  const auto ls0 = checked_ls(panel.x, panel.y, panel.names);
  const auto lsl = checked_ls(panel.x, wy, panel.names);
  e0_ = ls0.residuals;
  el_ = lsl.residuals;
  b0_ = ls0.coef;
  bl_ = lsl.coef;
}

double SlmLikelihood::operator()(double gamma) const {
  const double rss = (e0_ - gamma * el_).squaredNorm();
  return -0.5 * n_ * (kLog2Pi + 1.0 + std::log(rss / n_)) + (*logdet_)(gamma);
}

double SlmLikelihood::derivative(double gamma) const {
  const Eigen::VectorXd e = e0_ - gamma * el_;
  return n_ * el_.dot(e) / e.squaredNorm() + logdet_->derivative(gamma);
}

Eigen::VectorXd SlmLikelihood::beta(double gamma) const { return b0_ - gamma * bl_; }

ModelFit fit_slm_ml(const TractPanel& panel, const SpatialWeights& w, const SpatialPins& pins) {
  check_spatial(panel, w);
  const linalg::LogDeterminant logdet(w.matrix);
  return fit_slm_ml(panel, w, logdet, pins);
}

ModelFit fit_slm_ml(const TractPanel& panel, const SpatialWeights& w, const linalg::LogDeterminant& logdet,
                    const SpatialPins& pins) {
  check_spatial(panel, w);
  const SlmLikelihood lik(panel, w, logdet);
  double gamma = 0.0;
  if (pins.gamma) {
    gamma = *pins.gamma;
  } else {
    const auto opt = linalg::maximize_on_interval([&](double g) { return lik(g); },
                                                  [&](double g) { return lik.derivative(g); }, -kSpatialBound,
                                                  kSpatialBound, linalg::spatial_parameter_grid());
    if (!opt.interior)
      throw NumericalError("SLM likelihood has no interior maximum in (-0.99, 0.99); trace:" + trace_text(opt.trace));
    gamma = opt.argmax;
  }

  const double n = static_cast<double>(panel.n());
  const Eigen::VectorXd beta = lik.beta(gamma);
  const Eigen::VectorXd wy = w.matrix * panel.y;
  const Eigen::VectorXd xb = panel.x * beta;
  const Eigen::VectorXd e = panel.y - gamma * wy - xb;
  const double sigma2 = e.squaredNorm() / n;
  const auto k = panel.k();

  ModelFit fit;
  fit.method = Estimator::SlmMl;
  fit.sigma2 = sigma2;
  Eigen::VectorXd se(k);
  if (pins.gamma) {
    const auto ls = linalg::least_squares(panel.x, Eigen::VectorXd(panel.y - gamma * wy));
    se = (sigma2 * ls.xtx_inv.diagonal()).cwiseSqrt();
    fit.gamma = SpatialParameter{gamma, std::nullopt};
  } else {
    const auto t = spatial_traces(w.matrix, gamma);
    const Eigen::VectorXd gxb = t.g * xb;
    Eigen::MatrixXd info = Eigen::MatrixXd::Zero(k + 2, k + 2);
    info.topLeftCorner(k, k) = panel.x.transpose() * panel.x / sigma2;
    info.block(0, k, k, 1) = panel.x.transpose() * gxb / sigma2;
    info.block(k, 0, 1, k) = info.block(0, k, k, 1).transpose();
    info(k, k) = t.tr_sq + t.tr_tg + gxb.squaredNorm() / sigma2;
    info(k, k + 1) = info(k + 1, k) = t.tr / sigma2;
    info(k + 1, k + 1) = n / (2.0 * sigma2 * sigma2);
    const Eigen::MatrixXd cov = info.inverse();
    for (Eigen::Index i = 0; i < k; ++i) se(i) = maybe_sqrt(cov(i, i));
    fit.gamma = SpatialParameter{gamma, maybe_sqrt(cov(k, k))};
  }
  fit.coefficients = make_coefficients(panel.names, beta, se);
  fit.mse = sigma2;
  fit.loglik = lik(gamma);
  fit.fitted = reduced_form(w.matrix, gamma, xb);
  fit.residuals = e;
  fit.r2 = linalg::squared_correlation(panel.y, fit.fitted);
  fit.n = panel.n();
  fit.k_params = k + 1;
  fit.panel_signature = panel.signature();
  return fit;
}

// ---------------------------------------------------------------------------
// Instrumental-variable machinery

Eigen::MatrixXd spatial_instruments(const Eigen::MatrixXd& x, const SparseRowMatrix& w) {
  const Eigen::MatrixXd wx = w * x;
  const Eigen::MatrixXd wwx = w * wx;
  std::vector<Eigen::VectorXd> cols;
  for (Eigen::Index j = 0; j < x.cols(); ++j) cols.push_back(x.col(j));
  auto non_constant = [](const Eigen::VectorXd& v) {
    return (v.array() - v.mean()).matrix().norm() > 1e-10 * (1.0 + v.norm());
  };
  for (const auto* m : {&wx, &wwx})
    for (Eigen::Index j = 0; j < m->cols(); ++j)
      if (non_constant(m->col(j))) cols.push_back(m->col(j));
  Eigen::MatrixXd h(x.rows(), static_cast<Eigen::Index>(cols.size()));
  for (std::size_t j = 0; j < cols.size(); ++j) h.col(static_cast<Eigen::Index>(j)) = cols[j];

  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(h);
  qr.setThreshold(1e-10);
  if (qr.rank() == h.cols()) return h;
  std::vector<Eigen::Index> keep(qr.colsPermutation().indices().data(),
                                 qr.colsPermutation().indices().data() + qr.rank());
  std::sort(keep.begin(), keep.end());
  Eigen::MatrixXd out(h.rows(), static_cast<Eigen::Index>(keep.size()));
  for (std::size_t j = 0; j < keep.size(); ++j) out.col(static_cast<Eigen::Index>(j)) = h.col(keep[j]);
  return out;
}

TwoStageResult two_stage_least_squares(const Eigen::VectorXd& y, const Eigen::MatrixXd& z, const Eigen::MatrixXd& h) {
  if (h.cols() < z.cols()) throw InputError("fewer instruments than regressors");
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> hqr(h);
  hqr.setThreshold(1e-10);
  if (hqr.rank() < z.cols()) throw InputError("instrument matrix is rank deficient");
  const Eigen::HouseholderQR<Eigen::MatrixXd> qr(h);
  const Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(h.rows(), h.cols());
  TwoStageResult r;
  r.z_hat = q * (q.transpose() * z);
  const auto ls = linalg::least_squares(r.z_hat, y);
  if (!ls.dependent_columns.empty()) throw InputError("projected regressors are rank deficient (weak instruments)");
  r.coef = ls.coef;
  r.residuals = y - z * r.coef;
  r.cov_unscaled = ls.xtx_inv;
  return r;
}

namespace {

Eigen::MatrixXd lag_design(const TractPanel& panel, const Eigen::VectorXd& wy) {
  Eigen::MatrixXd z(panel.n(), panel.k() + 1);
  z.leftCols(panel.k()) = panel.x;
  z.col(panel.k()) = wy;
  return z;
}

}  // namespace

TwoStageResult sarar_filtered_2sls(const TractPanel& panel, const SpatialWeights& w, double lambda) {
  check_spatial(panel, w);
  const Eigen::VectorXd wy = w.matrix * panel.y;
  const Eigen::MatrixXd z = lag_design(panel, wy);
  const Eigen::VectorXd ys = panel.y - lambda * wy;
  const Eigen::MatrixXd zs = z - lambda * (w.matrix * z);
  return two_stage_least_squares(ys, zs, spatial_instruments(panel.x, w.matrix));
}

namespace {

// Coefficients, gamma and metrics shared by the lag estimators.
void finish_lag_fit(ModelFit& fit, const TractPanel& panel, const SpatialWeights& w, const Eigen::VectorXd& coef,
                    const Eigen::VectorXd& se_all, double sigma2, bool gamma_pinned) {
  const auto k = panel.k();
  const double gamma = coef(k);
  const Eigen::VectorXd beta = coef.head(k);
  fit.coefficients = make_coefficients(panel.names, beta, se_all.head(k));
  fit.gamma = SpatialParameter{gamma, gamma_pinned ? std::nullopt : std::optional(se_all(k))};
  fit.sigma2 = sigma2;
  const Eigen::VectorXd xb = panel.x * beta;
  fit.residuals = panel.y - gamma * (w.matrix * panel.y) - xb;
  fit.mse = fit.residuals.squaredNorm() / static_cast<double>(panel.n());
  fit.fitted = reduced_form(w.matrix, gamma, xb);
  fit.r2 = linalg::squared_correlation(panel.y, fit.fitted);
  fit.n = panel.n();
  fit.k_params = k + 1;
  fit.panel_signature = panel.signature();
}

// Error-model coefficients from the spatially filtered regression at lambda.
void finish_error_fit(ModelFit& fit, const TractPanel& panel, const SpatialWeights& w, double lambda) {
  const Eigen::VectorXd ys = panel.y - lambda * (w.matrix * panel.y);
  const Eigen::MatrixXd xs = panel.x - lambda * (w.matrix * panel.x);
  const auto ls = checked_ls(xs, ys, panel.names);
  const double n = static_cast<double>(panel.n());
  fit.sigma2 = ls.residuals.squaredNorm() / n;
  const Eigen::VectorXd se = (fit.sigma2 * ls.xtx_inv.diagonal()).cwiseSqrt();
  fit.coefficients = make_coefficients(panel.names, ls.coef, se);
  fit.fitted = panel.x * ls.coef;
  fit.residuals = panel.y - fit.fitted;
  fit.mse = fit.residuals.squaredNorm() / n;
  fit.r2 = linalg::squared_correlation(panel.y, fit.fitted);
  fit.n = panel.n();
  fit.k_params = panel.k() + 1;
  fit.panel_signature = panel.signature();
}

}  // namespace

ModelFit fit_slm_gs2sls(const TractPanel& panel, const SpatialWeights& w, const SpatialPins& pins) {
  check_spatial(panel, w);
  const Eigen::VectorXd wy = w.matrix * panel.y;
  ModelFit fit;
  fit.method = Estimator::SlmGs2sls;
  const auto k = panel.k();
  if (pins.gamma) {
    const auto ls = checked_ls(panel.x, Eigen::VectorXd(panel.y - *pins.gamma * wy), panel.names);
    const double sigma2 = ls.residuals.squaredNorm() / static_cast<double>(panel.n());
    Eigen::VectorXd coef(k + 1);
    coef << ls.coef, *pins.gamma;
    Eigen::VectorXd se = Eigen::VectorXd::Zero(k + 1);
    se.head(k) = (sigma2 * ls.xtx_inv.diagonal()).cwiseSqrt();
    finish_lag_fit(fit, panel, w, coef, se, sigma2, true);
    return fit;
  }
  const auto r = two_stage_least_squares(panel.y, lag_design(panel, wy), spatial_instruments(panel.x, w.matrix));
  const double sigma2 = r.residuals.squaredNorm() / static_cast<double>(panel.n());
  const Eigen::VectorXd se = (sigma2 * r.cov_unscaled.diagonal()).cwiseSqrt();
  finish_lag_fit(fit, panel, w, r.coef, se, sigma2, false);
  return fit;
}

// ---------------------------------------------------------------------------
// Spatial error models

ModelFit fit_sem_ml(const TractPanel& panel, const SpatialWeights& w, const SpatialPins& pins) {
  check_spatial(panel, w);
  const linalg::LogDeterminant logdet(w.matrix);
  return fit_sem_ml(panel, w, logdet, pins);
}

ModelFit fit_sem_ml(const TractPanel& panel, const SpatialWeights& w, const linalg::LogDeterminant& logdet,
                    const SpatialPins& pins) {
  check_spatial(panel, w);
  const double n = static_cast<double>(panel.n());
  const Eigen::VectorXd wy = w.matrix * panel.y;
  const Eigen::MatrixXd wx = w.matrix * panel.x;

  auto filtered = [&](double lambda) {
    return linalg::least_squares(Eigen::MatrixXd(panel.x - lambda * wx), Eigen::VectorXd(panel.y - lambda * wy));
  };
  auto lik = [&](double lambda) {
    const auto ls = filtered(lambda);
    if (!ls.dependent_columns.empty()) return -std::numeric_limits<double>::infinity();
    return -0.5 * n * (kLog2Pi + 1.0 + std::log(ls.residuals.squaredNorm() / n)) + logdet(lambda);
  };
  auto dlik = [&](double lambda) {
    const auto ls = filtered(lambda);
    const Eigen::VectorXd wu = wy - wx * ls.coef;
    return n * ls.residuals.dot(wu) / ls.residuals.squaredNorm() + logdet.derivative(lambda);
  };

  double lambda = 0.0;
  if (pins.lambda) {
    lambda = *pins.lambda;
  } else {
    checked_ls(panel.x, panel.y, panel.names);
    const auto opt = linalg::maximize_on_interval(lik, dlik, -kSpatialBound, kSpatialBound,
                                                  linalg::spatial_parameter_grid());
    if (!opt.interior)
      throw NumericalError("SEM likelihood has no interior maximum in (-0.99, 0.99); trace:" + trace_text(opt.trace));
    lambda = opt.argmax;
  }

  ModelFit fit;
  fit.method = Estimator::SemMl;
  finish_error_fit(fit, panel, w, lambda);
  fit.loglik = lik(lambda);
  std::optional<double> lambda_se;
  if (!pins.lambda) {
    const auto t = spatial_traces(w.matrix, lambda);
    Eigen::Matrix2d info;
    info << t.tr_sq + t.tr_tg, t.tr / fit.sigma2, t.tr / fit.sigma2, n / (2.0 * fit.sigma2 * fit.sigma2);
    lambda_se = maybe_sqrt(info.inverse()(0, 0));
  }
  fit.lambda = SpatialParameter{lambda, lambda_se};
  return fit;
}

MomentEstimate kp_moment_lambda(const Eigen::VectorXd& u, const SparseRowMatrix& w) {
  const double n = static_cast<double>(u.size());
  const Eigen::VectorXd ub = w * u;
  const Eigen::VectorXd ubb = w * ub;
  const double tr_ww = w.squaredNorm();
  Eigen::Matrix3d g;
  g << 2.0 * u.dot(ub), -ub.squaredNorm(), n,
       2.0 * ub.dot(ubb), -ubb.squaredNorm(), tr_ww,
       u.dot(ubb) + ub.squaredNorm(), -ub.dot(ubb), 0.0;
  g /= n;
  const Eigen::Vector3d rhs = Eigen::Vector3d(u.squaredNorm(), ub.squaredNorm(), u.dot(ub)) / n;

  // Profile out sigma^2 (closed form, clamped at zero) for each lambda.
  auto profile = [&](double lambda, double* sigma2_out) {
    const Eigen::Vector3d r = rhs - g.col(0) * lambda - g.col(1) * lambda * lambda;
    const double s2 = std::max(0.0, g.col(2).dot(r) / g.col(2).squaredNorm());
    if (sigma2_out) *sigma2_out = s2;
    return (r - g.col(2) * s2).squaredNorm();
  };
  auto neg_q = [&](double lambda) { return -profile(lambda, nullptr); };
  auto dneg_q = [&](double lambda) {
    const double h = 1e-7;
    return (neg_q(lambda + h) - neg_q(lambda - h)) / (2 * h);
  };
  const auto opt = linalg::maximize_on_interval(neg_q, dneg_q, -kSpatialBound, kSpatialBound,
                                                linalg::spatial_parameter_grid(), 1e-8);
  MomentEstimate m;
  m.trace = opt.trace;
  for (auto& [x, f] : m.trace) f = -f;
  if (!opt.interior)
    throw NumericalError("moment conditions have no solution inside (-1, 1); moment objective trace:" +
                         trace_text(m.trace));
  m.lambda = opt.argmax;
  m.objective = profile(m.lambda, &m.sigma2);
  return m;
}

ModelFit fit_sem_gmm(const TractPanel& panel, const SpatialWeights& w, const SpatialPins& pins) {
  check_spatial(panel, w);
  double lambda = 0.0;
  if (pins.lambda) {
    lambda = *pins.lambda;
  } else {
    const auto ols = checked_ls(panel.x, panel.y, panel.names);
    lambda = kp_moment_lambda(ols.residuals, w.matrix).lambda;
  }
  ModelFit fit;
  fit.method = Estimator::SemGmm;
  finish_error_fit(fit, panel, w, lambda);
  fit.lambda = SpatialParameter{lambda, std::nullopt};
  return fit;
}

ModelFit fit_selm_gmm(const TractPanel& panel, const SpatialWeights& w, const SpatialPins& pins) {
  check_spatial(panel, w);
  const auto k = panel.k();
  const double n = static_cast<double>(panel.n());
  const Eigen::VectorXd wy = w.matrix * panel.y;
  ModelFit fit;
  fit.method = Estimator::SelmGmm;

  if (pins.gamma) {
    // Lag fixed: an error model on y - gamma Wy.
    TractPanel shifted = panel;
    shifted.y = panel.y - *pins.gamma * wy;
    double lambda = pins.lambda ? *pins.lambda
                                : kp_moment_lambda(checked_ls(panel.x, shifted.y, panel.names).residuals, w.matrix).lambda;
    ModelFit inner;
    finish_error_fit(inner, shifted, w, lambda);
    Eigen::VectorXd coef(k + 1);
    Eigen::VectorXd se(k + 1);
    for (Eigen::Index i = 0; i < k; ++i) {
      coef(i) = inner.coefficients[i].estimate;
      se(i) = inner.coefficients[i].se;
    }
    coef(k) = *pins.gamma;
    se(k) = 0.0;
    finish_lag_fit(fit, panel, w, coef, se, inner.sigma2, true);
    fit.lambda = SpatialParameter{lambda, std::nullopt};
    return fit;
  }

  double lambda = 0.0;
  if (pins.lambda) {
    lambda = *pins.lambda;
  } else {
    const auto first = two_stage_least_squares(panel.y, lag_design(panel, wy), spatial_instruments(panel.x, w.matrix));
    lambda = kp_moment_lambda(first.residuals, w.matrix).lambda;
  }
  const auto r = sarar_filtered_2sls(panel, w, lambda);
  const double sigma2 = r.residuals.squaredNorm() / n;
  const Eigen::VectorXd se = (sigma2 * r.cov_unscaled.diagonal()).cwiseSqrt();
  finish_lag_fit(fit, panel, w, r.coef, se, sigma2, false);
  fit.lambda = SpatialParameter{lambda, std::nullopt};
  fit.k_params = k + 2;
  return fit;
}

ModelFit fit_model(Estimator e, const TractPanel& panel, const SpatialWeights* w) {
  if (is_spatial(e) && !w) throw InputError(std::string(to_string(e)) + " needs spatial weights");
  switch (e) {
    case Estimator::Ols: return fit_ols(panel);
    case Estimator::OlsFixedEffects: return fit_ols_fe(panel);
    case Estimator::SlmMl: return fit_slm_ml(panel, *w);
    case Estimator::SlmGs2sls: return fit_slm_gs2sls(panel, *w);
    case Estimator::SemMl: return fit_sem_ml(panel, *w);
    case Estimator::SemGmm: return fit_sem_gmm(panel, *w);
    case Estimator::SelmGmm: return fit_selm_gmm(panel, *w);
  }
  throw InputError("unknown estimator");
}

// ---------------------------------------------------------------------------
// Comparison and reporting

std::vector<ModelRanking> compare_models(const std::vector<ModelFit>& fits) {
  if (fits.size() < 2) throw InputError("model comparison needs at least two fits");
  for (const auto& f : fits)
    if (f.panel_signature != fits.front().panel_signature || f.n != fits.front().n)
      throw ConsistencyError("fits were estimated on different panels");
  std::vector<ModelRanking> out;
  for (const auto& f : fits) out.push_back({f.method, f.mse, f.r2, f.pseudo_r2()});
  std::stable_sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
    return a.mse != b.mse ? a.mse < b.mse : a.r2 > b.r2;
  });
  return out;
}

namespace {

using nlohmann::json;

json num(double v) {
  if (!std::isfinite(v)) return nullptr;
  return io::round6(v);
}

json param_json(const std::optional<SpatialParameter>& p) {
  if (!p) return nullptr;
  json j = {{"estimate", num(p->estimate)}, {"se", p->se ? num(*p->se) : json()}};
  if (p->se && *p->se > 0.0) j["stars"] = stars(p->estimate / *p->se);
  return j;
}

std::optional<SpatialParameter> param_from(const json& j) {
  if (j.is_null()) return std::nullopt;
  SpatialParameter p;
  p.estimate = j.at("estimate").get<double>();
  if (j.contains("se") && !j["se"].is_null()) p.se = j["se"].get<double>();
  return p;
}

}  // namespace

std::string fit_to_json(const ModelFit& fit) {
  json coefs = json::array();
  for (const auto& c : fit.coefficients) {
    json cj = {{"name", c.name}, {"estimate", num(c.estimate)}, {"se", num(c.se)}};
    cj["t"] = c.se > 0.0 ? num(c.t_stat()) : json();
    cj["stars"] = c.se > 0.0 ? stars(c.t_stat()) : "";
    coefs.push_back(cj);
  }
  json groups = json::object();
  for (const auto& [g, v] : fit.group_effects) groups[g] = num(v);
  json j = {
      {"method", std::string(to_string(fit.method))},
      {"n", fit.n},
      {"k_params", fit.k_params},
      {"panel_signature", fit.panel_signature},
      {"coefficients", coefs},
      {"gamma", param_json(fit.gamma)},
      {"lambda", param_json(fit.lambda)},
      {"sigma2", num(fit.sigma2)},
      {"metrics",
       {{"mse", num(fit.mse)},
        {"mse_kind", "in-sample RSS/n"},
        {"r2", num(fit.r2)},
        {"r2_kind", fit.pseudo_r2() ? "pseudo (squared correlation)" : "adjusted"},
        {"loglik", fit.loglik ? num(*fit.loglik) : json()}}},
      {"group_effects", groups},
      {"warnings", fit.warnings},
  };
  return j.dump(2) + "\n";
}

ModelFit fit_from_json(const std::string& text) {
  try {
    const json j = json::parse(text);
    ModelFit fit;
    fit.method = parse_estimator(j.at("method").get<std::string>());
    fit.n = j.at("n").get<Eigen::Index>();
    fit.k_params = j.value("k_params", Eigen::Index{0});
    fit.panel_signature = j.value("panel_signature", "");
    for (const auto& c : j.at("coefficients")) {
      Coefficient co;
      co.name = c.at("name").get<std::string>();
      co.estimate = c.at("estimate").get<double>();
      co.se = c.contains("se") && !c["se"].is_null() ? c["se"].get<double>() : 0.0;
      fit.coefficients.push_back(co);
    }
    fit.gamma = param_from(j.value("gamma", json()));
    fit.lambda = param_from(j.value("lambda", json()));
    fit.sigma2 = j.value("sigma2", 0.0);
    const auto& m = j.at("metrics");
    fit.mse = m.at("mse").get<double>();
    fit.r2 = m.at("r2").get<double>();
    if (m.contains("loglik") && !m["loglik"].is_null()) fit.loglik = m["loglik"].get<double>();
    if (j.contains("group_effects"))
      for (const auto& [g, v] : j["group_effects"].items()) fit.group_effects[g] = v.get<double>();
    if (j.contains("warnings")) fit.warnings = j["warnings"].get<std::vector<std::string>>();
    return fit;
  } catch (const json::exception& e) {
    throw InputError(std::string("malformed fit JSON: ") + e.what());
  }
}

std::string coefficient_table(const std::vector<ModelFit>& fits) {
  std::vector<std::string> rows;
  for (const auto& f : fits)
    for (const auto& c : f.coefficients)
      if (c.name != "const" && std::find(rows.begin(), rows.end(), c.name) == rows.end()) rows.push_back(c.name);

  auto cell = [](double est, std::optional<double> se) {
    std::string s = io::fmt(est);
    if (se && *se > 0.0) s += stars(est / *se) + " (" + io::fmt(*se) + ")";
    return s;
  };
  std::vector<std::vector<std::string>> table;
  std::vector<std::string> head{"Variable"};
  for (const auto& f : fits) head.emplace_back(to_string(f.method));
  table.push_back(head);
  auto add_row = [&](const std::string& label, auto getter) {
    std::vector<std::string> r{label};
    for (const auto& f : fits) r.push_back(getter(f));
    table.push_back(r);
  };
  for (const auto& name : rows)
    add_row(name, [&](const ModelFit& f) {
      const auto* c = f.find(name);
      return c ? cell(c->estimate, c->se) : std::string();
    });
  add_row("Spatial lag (W*y)", [&](const ModelFit& f) {
    return f.gamma ? cell(f.gamma->estimate, f.gamma->se) : std::string();
  });
  add_row("Lambda", [&](const ModelFit& f) {
    return f.lambda ? cell(f.lambda->estimate, f.lambda->se) : std::string();
  });
  add_row("Constant", [&](const ModelFit& f) {
    const auto* c = f.find("const");
    return c ? cell(c->estimate, c->se) : std::string(f.group_effects.empty() ? "" : "(group effects)");
  });
  add_row("Observations", [](const ModelFit& f) { return std::to_string(f.n); });
  add_row("Adjusted (Pseudo) R-Squared", [](const ModelFit& f) { return io::fmt(f.r2); });
  add_row("MSE", [](const ModelFit& f) { return io::fmt(f.mse); });

  std::vector<std::size_t> width(table.front().size(), 0);
  for (const auto& r : table)
    for (std::size_t c = 0; c < r.size(); ++c) width[c] = std::max(width[c], r[c].size());
  std::ostringstream os;
  for (const auto& r : table) {
    for (std::size_t c = 0; c < r.size(); ++c) {
      os << r[c];
      if (c + 1 < r.size()) os << std::string(width[c] - r[c].size() + 2, ' ');
    }
    os << '\n';
  }
  os << "Note: *, **, *** denote significance at the 0.10, 0.05 and 0.01 levels.\n";
  return os.str();
}

std::string comparison_table_csv(const std::vector<ModelRanking>& ranking, const std::vector<std::string>& failed) {
  std::ostringstream os;
  os << "rank,method,mse,r2,r2_kind,status\n";
  int rank = 1;
  for (const auto& r : ranking)
    os << rank++ << ',' << to_string(r.method) << ',' << io::fmt(r.mse) << ',' << io::fmt(r.r2) << ','
       << (r.pseudo ? "pseudo" : "adjusted") << ",ok\n";
  for (const auto& f : failed) os << ",," << ",,," << f << '\n';
  return os.str();
}

}  // namespace vmtco2
