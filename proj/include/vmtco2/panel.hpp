#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "vmtco2/geo.hpp"
#include "vmtco2/io.hpp"

namespace vmtco2 {

/// One right-hand-side term of a model formula. A term is the product of one
/// or more factors; each factor is a column, optionally transformed.
struct FormulaFactor {
  enum class Transform { None, Log, LogSquared, Squared };
  std::string column;
  Transform transform = Transform::None;
};

struct FormulaTerm {
  std::vector<FormulaFactor> factors;
  std::string name;  // canonical spelling, e.g. "w_carpool:mapc" or "logsq(percapinc)"
};

/// `outcome ~ term + term + ...`; an intercept is always included.
/// Factors: `col`, `log(col)`, `logsq(col)` (square of the log), `sq(col)`;
/// `a:b` multiplies factors.
struct Formula {
  FormulaTerm outcome;
  std::vector<FormulaTerm> terms;
  std::string text;

  std::vector<std::string> columns() const;
};

Formula parse_formula(const std::string& text);
/// Reads the first non-comment line of a model-spec file.
Formula load_formula(const std::filesystem::path& path);

struct PanelOptions {
  std::string id_column = "tract_id";
  std::string group_column = "region_id";
  std::string centroid_x = "cx";
  std::string centroid_y = "cy";
  /// Raw columns that must lie in [0, 1] when they are used.
  std::vector<std::string> unit_interval_columns = {"w_carpool", "w_pubtrans", "w_bike", "w_home", "accessindex", "mapc"};
};

/// Per-tract regression dataset: outcome, design matrix with a leading
/// intercept column named "const", and optional grouping and centroids.
struct TractPanel {
  std::vector<std::string> ids;
  Eigen::VectorXd y;
  Eigen::MatrixXd x;
  std::vector<std::string> names;
  std::string outcome_name;
  std::vector<std::string> groups;      // empty when no group column
  std::vector<geo::Point> centroids;    // empty when no centroid columns
  int dropped_rows = 0;

  Eigen::Index n() const { return y.size(); }
  Eigen::Index k() const { return x.cols(); }
  /// Content hash tying fits to the data they were estimated on.
  std::string signature() const;
};

/// Builds the panel. Rows with an empty, NA or non-finite value in a used
/// column, or a non-positive argument to log, are dropped and counted.
TractPanel build_panel(const io::CsvTable& table, const Formula& formula, const PanelOptions& options = {});

/// Panel from in-memory arrays (intercept prepended), for tests and generators.
TractPanel make_panel(Eigen::VectorXd y, const Eigen::MatrixXd& covariates, std::vector<std::string> covariate_names,
                      std::vector<std::string> ids = {});

/// Permutes rows (ids, y, x, groups, centroids) so new row i is old row perm[i].
/// `perm` must be a full permutation of the rows.
TractPanel permute_rows(const TractPanel& panel, const std::vector<Eigen::Index>& perm);

}  // namespace vmtco2
