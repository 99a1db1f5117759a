#pragma once

#include <array>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "vmtco2/linalg.hpp"
#include "vmtco2/panel.hpp"
#include "vmtco2/weights.hpp"

namespace vmtco2 {

enum class Estimator { Ols, OlsFixedEffects, SlmMl, SlmGs2sls, SemMl, SemGmm, SelmGmm };

inline constexpr std::array<Estimator, 7> kAllEstimators{Estimator::Ols,   Estimator::OlsFixedEffects,
                                                         Estimator::SlmMl, Estimator::SlmGs2sls,
                                                         Estimator::SemMl, Estimator::SemGmm,
                                                         Estimator::SelmGmm};

std::string_view to_string(Estimator e);
Estimator parse_estimator(std::string_view s);
/// True for the spatial family, which reports a pseudo R-squared.
bool is_spatial(Estimator e);

struct Coefficient {
  std::string name;
  double estimate = 0.0;
  double se = 0.0;

  double t_stat() const { return estimate / se; }
};

/// Significance stars at the 0.10 / 0.05 / 0.01 two-sided normal levels.
std::string stars(double t_stat);

struct SpatialParameter {
  double estimate = 0.0;
  std::optional<double> se;
};

struct ModelFit {
  Estimator method = Estimator::Ols;
  std::vector<Coefficient> coefficients;
  std::optional<SpatialParameter> gamma;   // spatial lag of the outcome
  std::optional<SpatialParameter> lambda;  // spatial autoregression of the error
  double sigma2 = 0.0;
  /// In-sample RSS / n of the structural residual (observed spatial lag
  /// included, error filter not applied).
  double mse = 0.0;
  /// Adjusted R-squared for the OLS family, squared correlation of observed
  /// and fitted outcome for the spatial family.
  double r2 = 0.0;
  std::optional<double> loglik;
  Eigen::Index n = 0;
  Eigen::Index k_params = 0;
  std::string panel_signature;
  std::map<std::string, double> group_effects;
  std::vector<std::string> warnings;

  Eigen::VectorXd fitted;
  Eigen::VectorXd residuals;

  bool pseudo_r2() const { return is_spatial(method); }
  const Coefficient* find(std::string_view name) const;
};

/// Optional pins used for nesting checks: a pinned parameter is held at the
/// given value instead of being estimated.
struct SpatialPins {
  std::optional<double> gamma;
  std::optional<double> lambda;
};

ModelFit fit_ols(const TractPanel& panel);
ModelFit fit_ols_fe(const TractPanel& panel);

/// Concentrated log-likelihood of the spatial lag model at gamma, with the
/// pieces needed to evaluate it cheaply for many gamma.
class SlmLikelihood {
 public:
  SlmLikelihood(const TractPanel& panel, const SpatialWeights& w, const linalg::LogDeterminant& logdet);
  double operator()(double gamma) const;
  double derivative(double gamma) const;
  Eigen::VectorXd beta(double gamma) const;

 private:
  Eigen::VectorXd e0_, el_, b0_, bl_;
  const linalg::LogDeterminant* logdet_;
  double n_;
};

ModelFit fit_slm_ml(const TractPanel& panel, const SpatialWeights& w, const SpatialPins& pins = {});
ModelFit fit_slm_ml(const TractPanel& panel, const SpatialWeights& w, const linalg::LogDeterminant& logdet,
                    const SpatialPins& pins = {});
ModelFit fit_slm_gs2sls(const TractPanel& panel, const SpatialWeights& w, const SpatialPins& pins = {});
ModelFit fit_sem_ml(const TractPanel& panel, const SpatialWeights& w, const SpatialPins& pins = {});
ModelFit fit_sem_ml(const TractPanel& panel, const SpatialWeights& w, const linalg::LogDeterminant& logdet,
                    const SpatialPins& pins = {});
ModelFit fit_sem_gmm(const TractPanel& panel, const SpatialWeights& w, const SpatialPins& pins = {});
ModelFit fit_selm_gmm(const TractPanel& panel, const SpatialWeights& w, const SpatialPins& pins = {});

/// Kelejian-Prucha moment estimate of lambda from residuals `u`.
struct MomentEstimate {
  double lambda = 0.0;
  double sigma2 = 0.0;
  double objective = 0.0;
  std::vector<std::pair<double, double>> trace;
};
MomentEstimate kp_moment_lambda(const Eigen::VectorXd& u, const SparseRowMatrix& w);

/// Instrument matrix [X, WX, W^2X] with constant and dependent columns removed.
Eigen::MatrixXd spatial_instruments(const Eigen::MatrixXd& x, const SparseRowMatrix& w);

/// Two-stage least squares of y on z with instruments h.
struct TwoStageResult {
  Eigen::VectorXd coef;
  Eigen::VectorXd residuals;
  Eigen::MatrixXd z_hat;
  Eigen::MatrixXd cov_unscaled;  // (Zhat'Zhat)^-1
};
TwoStageResult two_stage_least_squares(const Eigen::VectorXd& y, const Eigen::MatrixXd& z, const Eigen::MatrixXd& h);

/// Final SARAR step with lambda held fixed: 2SLS of (y - lambda Wy) on
/// ([X, Wy] - lambda W[X, Wy]) with instruments [X, WX, W^2X].
TwoStageResult sarar_filtered_2sls(const TractPanel& panel, const SpatialWeights& w, double lambda);

ModelFit fit_model(Estimator e, const TractPanel& panel, const SpatialWeights* w);

struct ModelRanking {
  Estimator method;
  double mse = 0.0;
  double r2 = 0.0;
  bool pseudo = false;
};

/// Sorted by MSE ascending, ties by R-squared descending. Throws
/// ConsistencyError when fits come from different panels.
std::vector<ModelRanking> compare_models(const std::vector<ModelFit>& fits);

std::string fit_to_json(const ModelFit& fit);
ModelFit fit_from_json(const std::string& text);

/// Coefficient (SE) table with stars, one column per model.
std::string coefficient_table(const std::vector<ModelFit>& fits);
std::string comparison_table_csv(const std::vector<ModelRanking>& ranking, const std::vector<std::string>& failed = {});

}  // namespace vmtco2
