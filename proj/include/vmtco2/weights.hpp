#pragma once

#include <filesystem>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Core>
#include <Eigen/SparseCore>

#include "vmtco2/geo.hpp"

namespace vmtco2 {

struct KnnScheme {
  int k = 8;
};
struct DistanceBandScheme {
  double distance = 0.0;
};
using WeightsScheme = std::variant<KnnScheme, DistanceBandScheme>;

std::string describe(const WeightsScheme& scheme);
/// "knn:8" or "band:2.5".
WeightsScheme parse_weights_scheme(const std::string& text);

using SparseRowMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor>;

/// Sparse spatial weight matrix over tracts; w_ii = 0 and weights >= 0.
struct SpatialWeights {
  SparseRowMatrix matrix;
  WeightsScheme scheme = KnnScheme{};
  bool row_standardized = false;
  /// Tract ids in row order.
  std::vector<std::string> ids;
  /// Jittered duplicates, islands and similar notices.
  std::vector<std::string> warnings;

  Eigen::Index size() const { return matrix.rows(); }
  /// Dense copy; only for small n and cross-checks.
  Eigen::MatrixXd dense() const { return Eigen::MatrixXd(matrix); }
};

/// Scales every nonempty row to sum to one.
SparseRowMatrix row_standardize(const SparseRowMatrix& w);

/// k nearest centroids per row (Euclidean), raw weight 1, then row-standardised.
/// Distance ties go to the lower tract id; exact duplicate centroids are
/// separated by a 1e-9 jitter along x and reported in `warnings`.
SpatialWeights knn_weights(const std::vector<geo::Point>& centroids, const std::vector<std::string>& ids, int k);
SpatialWeights knn_weights(const std::vector<geo::Point>& centroids, int k);

/// Every centroid within `distance` (inclusive), raw weight 1, then row-standardised.
/// Rows without neighbours stay empty and are reported in `warnings`.
SpatialWeights distance_band_weights(const std::vector<geo::Point>& centroids, const std::vector<std::string>& ids,
                                     double distance);

SpatialWeights build_weights(const std::vector<geo::Point>& centroids, const std::vector<std::string>& ids,
                             const WeightsScheme& scheme);

/// Moran's I of `values` under `w`. Throws InputError on constant input.
double morans_i(const Eigen::Ref<const Eigen::VectorXd>& values, const SparseRowMatrix& w);

/// Text export: header lines then `i j w_ij` triples (0-based).
std::string weights_to_text(const SpatialWeights& w);
SpatialWeights weights_from_text(const std::string& text);

}  // namespace vmtco2
