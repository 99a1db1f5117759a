#include <doctest.h>

#include <algorithm>
#include <set>

#include "vmtco2/errors.hpp"
#include "vmtco2/synth.hpp"
#include "vmtco2/weights.hpp"

using namespace vmtco2;

namespace {

// Brute-force neighbour sets: sort every other point by (distance, id).
std::vector<std::set<Eigen::Index>> knn_oracle(const std::vector<geo::Point>& pts, const std::vector<std::string>& ids,
                                               int k) {
  std::vector<std::set<Eigen::Index>> out;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    std::vector<std::pair<std::pair<double, std::string>, Eigen::Index>> cand;
    for (std::size_t j = 0; j < pts.size(); ++j)
      if (i != j) cand.push_back({{(pts[i] - pts[j]).squaredNorm(), ids[j]}, static_cast<Eigen::Index>(j)});
    std::sort(cand.begin(), cand.end());
    std::set<Eigen::Index> s;
    for (int m = 0; m < k; ++m) s.insert(cand[static_cast<std::size_t>(m)].second);
    out.push_back(s);
  }
  return out;
}

std::set<Eigen::Index> row_support(const SparseRowMatrix& w, Eigen::Index i) {
  std::set<Eigen::Index> s;
  for (SparseRowMatrix::InnerIterator it(w, i); it; ++it) s.insert(it.col());
  return s;
}

}  // namespace

TEST_CASE("k nearest neighbours match brute force") {
  synth::Rng rng(3);
  for (int trial = 0; trial < 10; ++trial) {
    const int n = rng.integer(12, 60);
    std::vector<geo::Point> pts;
    std::vector<std::string> ids;
    for (int i = 0; i < n; ++i) {
      pts.emplace_back(rng.uniform(0, 10), rng.uniform(0, 10));
      ids.push_back("P" + std::to_string(1000 + (i * 37) % n));
    }
    const int k = rng.integer(1, 8);
    const auto w = knn_weights(pts, ids, k);
    const auto oracle = knn_oracle(pts, ids, k);
    CHECK(w.row_standardized);
    for (Eigen::Index i = 0; i < n; ++i) {
      CHECK(row_support(w.matrix, i) == oracle[static_cast<std::size_t>(i)]);
      CHECK(w.matrix.row(i).sum() == doctest::Approx(1.0));
      CHECK(w.matrix.coeff(i, i) == 0.0);
    }
  }
}

TEST_CASE("distance ties go to the lower id") {
  // Centre point with four equidistant neighbours; k = 2 picks the two lowest ids.
  const std::vector<geo::Point> pts = {{0, 0}, {1, 0}, {0, 1}, {-1, 0}, {0, -1}};
  const std::vector<std::string> ids = {"c", "d", "b", "e", "a"};
  const auto w = knn_weights(pts, ids, 2);
  CHECK(row_support(w.matrix, 0) == std::set<Eigen::Index>{4, 2});
}

TEST_CASE("lattice weights are deterministic and row standardised") {
  const auto a = synth::lattice_weights({20, 20, 1.0}, 8);
  const auto b = synth::lattice_weights({20, 20, 1.0}, 8);
  CHECK(a.size() == 400);
  CHECK((a.dense() - b.dense()).norm() == 0.0);
  const Eigen::VectorXd sums = a.dense().rowwise().sum();
  CHECK((sums.array() - 1.0).abs().maxCoeff() < 1e-12);
}

TEST_CASE("duplicate centroids are separated with a warning") {
  const std::vector<geo::Point> pts = {{0, 0}, {0, 0}, {1, 0}, {2, 0}};
  const auto w = knn_weights(pts, {"a", "b", "c", "d"}, 1);
  CHECK_FALSE(w.warnings.empty());
  CHECK(row_support(w.matrix, 0) == std::set<Eigen::Index>{1});
  CHECK(row_support(w.matrix, 1) == std::set<Eigen::Index>{0});
}

TEST_CASE("k must be smaller than n") {
  const std::vector<geo::Point> pts = {{0, 0}, {1, 0}, {2, 0}};
  CHECK_THROWS_AS(knn_weights(pts, 3), InputError);
  CHECK_THROWS_AS(knn_weights(pts, 0), InputError);
}

TEST_CASE("distance band is inclusive and reports islands") {
  const std::vector<geo::Point> pts = {{0, 0}, {1, 0}, {2, 0}, {10, 0}};
  const auto w = distance_band_weights(pts, {"a", "b", "c", "d"}, 1.0);
  CHECK(row_support(w.matrix, 1) == std::set<Eigen::Index>{0, 2});
  CHECK(w.matrix.coeff(1, 0) == doctest::Approx(0.5));
  CHECK(row_support(w.matrix, 3).empty());
  CHECK(w.warnings.size() == 1);
}

TEST_CASE("scheme parsing") {
  CHECK(std::get<KnnScheme>(parse_weights_scheme("knn:5")).k == 5);
  CHECK(std::get<DistanceBandScheme>(parse_weights_scheme("band:2.5")).distance == 2.5);
  CHECK(describe(parse_weights_scheme("knn:5")) == "knn:5");
  CHECK_THROWS_AS(parse_weights_scheme("queen"), InputError);
  CHECK_THROWS_AS(parse_weights_scheme("knn:x"), InputError);
  CHECK_THROWS_AS(parse_weights_scheme("band:-1"), InputError);
}

TEST_CASE("Moran's I") {
  const synth::Lattice lat{10, 10, 1.0};
  const auto w = synth::lattice_weights(lat, 4);
  const auto pts = synth::lattice_centroids(lat);
  Eigen::VectorXd trend(100), checker(100);
  for (int i = 0; i < 100; ++i) {
    trend(i) = pts[static_cast<std::size_t>(i)].x() + pts[static_cast<std::size_t>(i)].y();
    checker(i) = ((i / 10 + i % 10) % 2) ? 1.0 : -1.0;
  }
  CHECK(morans_i(trend, w.matrix) > 0.5);
  CHECK(morans_i(checker, w.matrix) < -0.5);
  CHECK_THROWS_AS(morans_i(Eigen::VectorXd::Constant(100, 2.0), w.matrix), InputError);
}

TEST_CASE("text export round trip") {
  const auto w = synth::lattice_weights({4, 5, 1.0}, 3);
  const auto text = weights_to_text(w);
  CHECK(text.rfind("# vmtco2 spatial weights", 0) == 0);
  const auto back = weights_from_text(text);
  CHECK(back.ids == w.ids);
  CHECK(back.row_standardized);
  CHECK((back.dense() - w.dense()).cwiseAbs().maxCoeff() < 1e-5);
  CHECK(weights_to_text(back) == text);
  CHECK_THROWS_AS(weights_from_text("garbage"), InputError);
}
