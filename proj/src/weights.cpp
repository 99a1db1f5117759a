#include "vmtco2/weights.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <sstream>

#include "vmtco2/errors.hpp"
#include "vmtco2/io.hpp"

namespace vmtco2 {

std::string describe(const WeightsScheme& scheme) {
  if (const auto* k = std::get_if<KnnScheme>(&scheme)) return "knn:" + std::to_string(k->k);
  return "band:" + io::fmt(std::get<DistanceBandScheme>(scheme).distance);
}

WeightsScheme parse_weights_scheme(const std::string& text) {
  const auto colon = text.find(':');
  const std::string kind = io::trim(text.substr(0, colon));
  const std::string arg = colon == std::string::npos ? "" : io::trim(text.substr(colon + 1));
  if (kind == "knn") {
    const int k = arg.empty() ? 8 : static_cast<int>(io::parse_int(arg, "knn k", 0));
    if (k < 1) throw InputError("knn k must be >= 1");
    return KnnScheme{k};
  }
  if (kind == "band") {
    const double d = io::parse_double(arg, "band distance", 0);
    if (!(d > 0.0)) throw InputError("band distance must be positive");
    return DistanceBandScheme{d};
  }
  throw InputError("unknown weights scheme '" + text + "' (expected knn:K or band:D)");
}

SparseRowMatrix row_standardize(const SparseRowMatrix& w) {
  SparseRowMatrix out = w;
  for (Eigen::Index i = 0; i < out.outerSize(); ++i) {
    double sum = 0.0;
    for (SparseRowMatrix::InnerIterator it(out, i); it; ++it) sum += it.value();
    if (sum > 0.0)
      for (SparseRowMatrix::InnerIterator it(out, i); it; ++it) it.valueRef() /= sum;
  }
  return out;
}

namespace {

std::vector<std::string> default_ids(std::size_t n) {
  std::vector<std::string> ids(n);
  for (std::size_t i = 0; i < n; ++i) ids[i] = std::to_string(i);
  return ids;
}

// Position of each row in ascending-id order, used to break distance ties.
std::vector<std::size_t> id_ranks(const std::vector<std::string>& ids) {
  std::vector<std::size_t> order(ids.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](auto a, auto b) { return ids[a] < ids[b]; });
  std::vector<std::size_t> rank(ids.size());
  for (std::size_t r = 0; r < order.size(); ++r) rank[order[r]] = r;
  return rank;
}

std::vector<geo::Point> separate_duplicates(std::vector<geo::Point> pts, const std::vector<std::string>& ids,
                                            std::vector<std::string>& warnings) {
  std::map<std::pair<double, double>, int> seen;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    const auto key = std::make_pair(pts[i].x(), pts[i].y());
    const int count = seen[key]++;
    if (count > 0) {
      pts[i].x() += 1e-9 * count;
      warnings.push_back("duplicate centroid for tract " + ids[i] + " jittered by " + io::fmt(1e-9 * count));
    }
  }
  return pts;
}

void check_inputs(const std::vector<geo::Point>& centroids, const std::vector<std::string>& ids) {
  if (centroids.size() != ids.size()) throw InputError("centroid and id counts differ");
  if (centroids.empty()) throw InputError("no centroids");
}

}  // namespace

SpatialWeights knn_weights(const std::vector<geo::Point>& centroids, const std::vector<std::string>& ids, int k) {
  check_inputs(centroids, ids);
  const auto n = centroids.size();
  if (k < 1 || static_cast<std::size_t>(k) >= n)
    throw InputError("knn requires 1 <= k < n (k=" + std::to_string(k) + ", n=" + std::to_string(n) + ")");
  SpatialWeights w;
  w.scheme = KnnScheme{k};
  w.ids = ids;
  const auto pts = separate_duplicates(centroids, ids, w.warnings);
  const auto rank = id_ranks(ids);

  std::vector<Eigen::Triplet<double>> triplets;
  triplets.reserve(n * static_cast<std::size_t>(k));
  std::vector<std::pair<double, std::size_t>> cand(n - 1);
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t c = 0;
    for (std::size_t j = 0; j < n; ++j)
      if (j != i) cand[c++] = {(pts[j] - pts[i]).squaredNorm(), j};
    std::partial_sort(cand.begin(), cand.begin() + k, cand.end(), [&](const auto& a, const auto& b) {
      return a.first != b.first ? a.first < b.first : rank[a.second] < rank[b.second];
    });
    for (int m = 0; m < k; ++m)
      triplets.emplace_back(static_cast<int>(i), static_cast<int>(cand[m].second), 1.0 / k);
  }
  w.matrix.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  w.matrix.setFromTriplets(triplets.begin(), triplets.end());
  w.row_standardized = true;
  return w;
}

SpatialWeights knn_weights(const std::vector<geo::Point>& centroids, int k) {
  return knn_weights(centroids, default_ids(centroids.size()), k);
}

SpatialWeights distance_band_weights(const std::vector<geo::Point>& centroids, const std::vector<std::string>& ids,
                                     double distance) {
  check_inputs(centroids, ids);
  if (!(distance > 0.0)) throw InputError("band distance must be positive");
  SpatialWeights w;
  w.scheme = DistanceBandScheme{distance};
  w.ids = ids;
  const auto pts = separate_duplicates(centroids, ids, w.warnings);
  const auto n = pts.size();
  const double d2 = distance * distance;
  std::vector<Eigen::Triplet<double>> triplets;
  for (std::size_t i = 0; i < n; ++i) {
    bool any = false;
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i || (pts[j] - pts[i]).squaredNorm() > d2) continue;
      triplets.emplace_back(static_cast<int>(i), static_cast<int>(j), 1.0);
      any = true;
    }
    if (!any) w.warnings.push_back("tract " + ids[i] + " has no neighbours within " + io::fmt(distance));
  }
  SparseRowMatrix raw(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  raw.setFromTriplets(triplets.begin(), triplets.end());
  w.matrix = row_standardize(raw);
  w.row_standardized = true;
  return w;
}

SpatialWeights build_weights(const std::vector<geo::Point>& centroids, const std::vector<std::string>& ids,
                             const WeightsScheme& scheme) {
  if (const auto* k = std::get_if<KnnScheme>(&scheme)) return knn_weights(centroids, ids, k->k);
  return distance_band_weights(centroids, ids, std::get<DistanceBandScheme>(scheme).distance);
}

double morans_i(const Eigen::Ref<const Eigen::VectorXd>& values, const SparseRowMatrix& w) {
  const auto n = values.size();
  if (n != w.rows() || w.rows() != w.cols()) throw InputError("values length does not match weights");
  const Eigen::VectorXd z = values.array() - values.mean();
  const double zz = z.squaredNorm();
  if (!(zz > 0.0)) throw InputError("Moran's I is undefined for a constant vector");
  const double s0 = w.sum();
  if (!(s0 > 0.0)) throw InputError("weights have no links");
  return (static_cast<double>(n) / s0) * z.dot(w * z) / zz;
}

std::string weights_to_text(const SpatialWeights& w) {
  std::ostringstream os;
  os << "# vmtco2 spatial weights\n";
  os << "n " << w.size() << '\n';
  os << "scheme " << describe(w.scheme) << '\n';
  os << "row_standardized " << (w.row_standardized ? 1 : 0) << '\n';
  for (std::size_t i = 0; i < w.ids.size(); ++i) os << "id " << i << ' ' << w.ids[i] << '\n';
  os << "i j w_ij\n";
  for (Eigen::Index i = 0; i < w.matrix.outerSize(); ++i)
    for (SparseRowMatrix::InnerIterator it(w.matrix, i); it; ++it)
      os << it.row() << ' ' << it.col() << ' ' << io::fmt(it.value()) << '\n';
  return os.str();
}

SpatialWeights weights_from_text(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  long long n = -1;
  SpatialWeights w;
  std::vector<Eigen::Triplet<double>> triplets;
  bool in_body = false;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string t = io::trim(line);
    if (t.empty() || t.front() == '#') continue;
    std::istringstream ls(t);
    std::string head;
    ls >> head;
    const auto where = "weights line " + std::to_string(lineno) + ": ";
    if (!in_body) {
      std::string arg;
      ls >> arg;
      if (head == "n") {
        n = io::parse_int(arg, "n", lineno);
      } else if (head == "scheme") {
        w.scheme = parse_weights_scheme(arg);
      } else if (head == "row_standardized") {
        w.row_standardized = arg == "1";
      } else if (head == "id") {
        std::string id;
        ls >> id;
        if (io::parse_int(arg, "id index", lineno) != static_cast<long long>(w.ids.size()))
          throw InputError(where + "ids must be listed in order");
        w.ids.push_back(id);
      } else if (head == "i") {
        in_body = true;
      } else {
        throw InputError(where + "unexpected header '" + head + "'");
      }
      continue;
    }
    std::string js;
    std::string ws;
    ls >> js >> ws;
    const auto i = io::parse_int(head, "i", lineno);
    const auto j = io::parse_int(js, "j", lineno);
    const double v = io::parse_double(ws, "w_ij", lineno);
    if (i < 0 || j < 0 || i >= n || j >= n) throw InputError(where + "index out of range");
    if (i == j) throw InputError(where + "self-neighbour");
    if (v < 0.0) throw InputError(where + "negative weight");
    triplets.emplace_back(static_cast<int>(i), static_cast<int>(j), v);
  }
  if (n <= 0) throw InputError("weights file lacks a positive n");
  if (!w.ids.empty() && static_cast<long long>(w.ids.size()) != n) throw InputError("weights file id count differs from n");
  if (w.ids.empty()) w.ids = default_ids(static_cast<std::size_t>(n));
  w.matrix.resize(n, n);
  w.matrix.setFromTriplets(triplets.begin(), triplets.end());
  // Six-digit weights are re-normalised so rows sum to one exactly.
  if (w.row_standardized) w.matrix = row_standardize(w.matrix);
  return w;
}

}  // namespace vmtco2
