#include "vmtco2/synth.hpp"

#include <cmath>
#include <cstdio>
#include <numbers>
#include <sstream>

#include <Eigen/SparseLU>
#include <json.hpp>

#include "vmtco2/errors.hpp"
#include "vmtco2/io.hpp"

namespace vmtco2::synth {

double Rng::uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

double Rng::normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  double u1 = uniform();
  while (u1 <= 0.0) u1 = uniform();
  const double u2 = uniform();
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double t = 2.0 * std::numbers::pi * u2;
  spare_ = r * std::sin(t);
  has_spare_ = true;
  return r * std::cos(t);
}

int Rng::integer(int lo, int hi) {
  return lo + static_cast<int>(std::floor(uniform() * static_cast<double>(hi - lo + 1)));
}

Eigen::VectorXd normals(Rng& rng, Eigen::Index n) {
  Eigen::VectorXd v(n);
  for (Eigen::Index i = 0; i < n; ++i) v(i) = rng.normal();
  return v;
}

std::vector<std::string> lattice_ids(const Lattice& lattice) {
  const int n = lattice.rows * lattice.cols;
  const int width = std::max(4, static_cast<int>(std::to_string(n).size()));
  std::vector<std::string> ids;
  for (int i = 0; i < n; ++i) {
    const auto digits = std::to_string(i + 1);
    ids.push_back("T" + std::string(static_cast<std::size_t>(width) - digits.size(), '0') + digits);
  }
  return ids;
}

std::vector<geo::Point> lattice_centroids(const Lattice& lattice) {
  std::vector<geo::Point> pts;
  for (int r = 0; r < lattice.rows; ++r)
    for (int c = 0; c < lattice.cols; ++c) pts.emplace_back((c + 0.5) * lattice.cell, (r + 0.5) * lattice.cell);
  return pts;
}

std::vector<geo::TractGeometry> lattice_tracts(const Lattice& lattice) {
  const auto ids = lattice_ids(lattice);
  std::vector<geo::TractGeometry> tracts;
  const double s = lattice.cell;
  for (int r = 0; r < lattice.rows; ++r)
    for (int c = 0; c < lattice.cols; ++c) {
      geo::PolygonPart part;
      part.outer = {{c * s, r * s}, {(c + 1) * s, r * s}, {(c + 1) * s, (r + 1) * s}, {c * s, (r + 1) * s}};
      tracts.push_back(geo::make_tract(ids[static_cast<std::size_t>(r * lattice.cols + c)], {part}));
    }
  return tracts;
}

SpatialWeights lattice_weights(const Lattice& lattice, int k) {
  return knn_weights(lattice_centroids(lattice), lattice_ids(lattice), k);
}

namespace {

Eigen::VectorXd solve_spatial(const SparseRowMatrix& w, double rho, const Eigen::VectorXd& b) {
  if (rho == 0.0) return b;
  const auto n = w.rows();
  Eigen::SparseMatrix<double> a(n, n);
  a.setIdentity();
  a -= rho * Eigen::SparseMatrix<double>(w);
  a.makeCompressed();
  Eigen::SparseLU<Eigen::SparseMatrix<double>> lu(a);
  if (lu.info() != Eigen::Success) throw NumericalError("I - rho W is singular at rho = " + io::fmt(rho));
  return lu.solve(b);
}

}  // namespace

Eigen::VectorXd simulate_sarar(const Eigen::MatrixXd& x, const Eigen::VectorXd& beta, const SparseRowMatrix& w,
                               double gamma, double lambda, double sigma, Rng& rng) {
  const Eigen::VectorXd u = solve_spatial(w, lambda, sigma * normals(rng, x.rows()));
  return solve_spatial(w, gamma, x * beta + u);
}

TractPanel simulate_panel(const DgpParams& params, const SpatialWeights& w, std::uint64_t seed) {
  Rng rng(seed);
  const auto n = w.size();
  const auto k = static_cast<Eigen::Index>(params.beta.size());
  Eigen::MatrixXd x(n, k);
  x.col(0).setOnes();
  std::vector<std::string> names;
  for (Eigen::Index j = 1; j < k; ++j) {
    x.col(j) = normals(rng, n);
    names.push_back("x" + std::to_string(j));
  }
  const Eigen::VectorXd beta = Eigen::Map<const Eigen::VectorXd>(params.beta.data(), k);
  Eigen::VectorXd y = simulate_sarar(x, beta, w.matrix, params.gamma, params.lambda, params.sigma, rng);
  return make_panel(std::move(y), x.rightCols(k - 1), names, w.ids);
}

namespace {

using nlohmann::json;

json ring_coordinates(const geo::Ring& ring) {
  json arr = json::array();
  for (const auto& p : ring) arr.push_back({io::round6(p.x()), io::round6(p.y())});
  return arr;
}

// Intercept and slopes of the generated panel, keyed by formula term.
const std::vector<std::pair<std::string, double>>& true_beta() {
  static const std::vector<std::pair<std::string, double>> b = {
      {"const", 3.95},        {"log_popden", -0.08}, {"log_jobden", -0.03},     {"w_carpool", 0.2},
      {"w_pubtrans", -0.6},   {"mapc", 0.05},        {"w_carpool:mapc", -0.4}, {"accessindex", -0.3},
  };
  return b;
}

constexpr const char* kFormula =
    "log_vmt ~ log_popden + log_jobden + w_carpool + w_pubtrans + mapc + w_carpool:mapc + accessindex";

}  // namespace

std::map<std::string, std::string> synthesize(const SynthConfig& config) {
  const auto& lat = config.lattice;
  if (lat.rows < 2 || lat.cols < 2) throw InputError("synthetic lattice needs at least 2 x 2 cells");
  if (!(lat.cell > 0.0)) throw InputError("synthetic cell size must be positive");
  if (std::abs(config.gamma) >= 1.0 || std::abs(config.lambda) >= 1.0)
    throw InputError("synthetic gamma and lambda must lie in (-1, 1)");
  if (!(config.sigma >= 0.0)) throw InputError("synthetic sigma must be non-negative");

  Rng rng(config.seed);
  const auto tracts = lattice_tracts(lat);
  const auto ids = lattice_ids(lat);
  const auto centroids = lattice_centroids(lat);
  const auto w = lattice_weights(lat, config.k);
  const auto n = static_cast<Eigen::Index>(ids.size());
  std::map<std::string, std::string> files;

  // Tracts.
  json tract_features = json::array();
  for (const auto& t : tracts)
    tract_features.push_back({{"type", "Feature"},
                              {"properties", {{"tract_id", t.tract_id}}},
                              {"geometry", {{"type", "Polygon"}, {"coordinates", {ring_coordinates(t.parts[0].outer)}}}}});
  files["tracts.geojson"] = json{{"type", "FeatureCollection"}, {"features", tract_features}}.dump(1) + "\n";

  // Panel covariates and outcome.
  const auto& beta = true_beta();
  Eigen::MatrixXd x(n, static_cast<Eigen::Index>(beta.size()));
  std::vector<std::string> region(static_cast<std::size_t>(n));
  const int band = std::max(1, lat.rows / 5);
  for (Eigen::Index i = 0; i < n; ++i) {
    const int r = static_cast<int>(i) / lat.cols;
    const int c = static_cast<int>(i) % lat.cols;
    const double mapc = c < lat.cols / 2 ? 1.0 : 0.0;
    const double carpool = io::round6(rng.uniform(0.02, 0.2));
    x.row(i) << 1.0, io::round6(rng.normal()), io::round6(rng.normal()), carpool, io::round6(rng.uniform(0.0, 0.35)),
        mapc, carpool * mapc, io::round6(rng.uniform(0.0, 1.0));
    region[static_cast<std::size_t>(i)] = "R" + std::to_string(r / band + 1);
  }
  Eigen::VectorXd b(static_cast<Eigen::Index>(beta.size()));
  for (std::size_t j = 0; j < beta.size(); ++j) b(static_cast<Eigen::Index>(j)) = beta[j].second;
  const Eigen::VectorXd y = simulate_sarar(x, b, w.matrix, config.gamma, config.lambda, config.sigma, rng);

  std::ostringstream panel;
  panel << "tract_id,region_id,cx,cy,log_vmt,log_popden,log_jobden,w_carpool,w_pubtrans,mapc,accessindex\n";
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto s = static_cast<std::size_t>(i);
    panel << ids[s] << ',' << region[s] << ',' << io::fmt(centroids[s].x()) << ',' << io::fmt(centroids[s].y()) << ','
          << io::fmt(y(i)) << ',' << io::fmt(x(i, 1)) << ',' << io::fmt(x(i, 2)) << ',' << io::fmt(x(i, 3)) << ','
          << io::fmt(x(i, 4)) << ',' << io::fmt(x(i, 5)) << ',' << io::fmt(x(i, 7)) << '\n';
  }
  files["panel.csv"] = panel.str();

  // Vehicle census, consistent with the panel outcome.
  std::ostringstream census;
  census << "tract_id,quarter,dvmt_per_vehicle,vehicle_count\n";
  for (Eigen::Index i = 0; i < n; ++i) {
    const double count = rng.integer(300, 3000);
    for (int q = 1; q <= 4; ++q) {
      const double dvmt = std::exp(y(i)) / 365.0 * (1.0 + 0.05 * rng.normal());
      census << ids[static_cast<std::size_t>(i)] << ',' << q << ',' << io::fmt(std::max(dvmt, 0.1)) << ','
             << io::fmt(count + rng.integer(-20, 20)) << '\n';
    }
  }
  files["vehicle_census.csv"] = census.str();

  // Road network: broken east-west roads in every row, north-south roads every fifth column.
  static const double kLimits[] = {25, 30, 35, 40, 45, 50, 55, 65};
  static const char* kClasses[] = {"Interstate", "PrincipalArterial", "MinorArterial", "MajorCollector", "Other"};
  json roads = json::array();
  int seg = 0;
  auto add_road = [&](geo::Point a, geo::Point b2) {
    ++seg;
    const int cls = rng.integer(0, 4);
    const double limit = kLimits[rng.integer(0, 7)];
    const double aadt = std::round(rng.uniform(500.0, cls == 0 ? 60000.0 : 15000.0));
    json speed = seg % 17 == 0 ? json() : json(limit);
    char id[32];
    std::snprintf(id, sizeof id, "S%05d", seg);
    roads.push_back({{"type", "Feature"},
                     {"properties",
                      {{"segment_id", id},
                       {"speed_limit", speed},
                       {"aadt", aadt},
                       {"functional_class", kClasses[cls]},
                       {"length_mi", io::round6((b2 - a).norm())}}},
                     {"geometry",
                      {{"type", "LineString"},
                       {"coordinates", {{io::round6(a.x()), io::round6(a.y())}, {io::round6(b2.x()), io::round6(b2.y())}}}}}});
  };
  const double s = lat.cell;
  for (int r = 0; r < lat.rows; ++r)
    for (int c0 = 0; c0 < lat.cols; c0 += 4)
      add_road({(c0 + 0.1) * s, (r + 0.35) * s}, {(std::min(c0 + 4, lat.cols) - 0.1) * s, (r + 0.35) * s});
  for (int c = 2; c < lat.cols; c += 5)
    add_road({(c + 0.6) * s, 0.05 * s}, {(c + 0.6) * s, (lat.rows - 0.05) * s});
  files["roads.geojson"] = json{{"type", "FeatureCollection"}, {"features", roads}}.dump(1) + "\n";

  files["model.txt"] = std::string(kFormula) + "\n";
  files["scenario.txt"] =
      "# carpool and transit +1 percentage point in the MAPC region\n"
      "region = MAPC\n"
      "delta.w_carpool = 0.01\n"
      "delta.w_pubtrans = 0.01\n";

  json truth_beta = json::object();
  for (const auto& [name, v] : beta) truth_beta[name] = v;
  json truth = {{"seed", config.seed},
                {"n", n},
                {"lattice", {{"rows", lat.rows}, {"cols", lat.cols}, {"cell", lat.cell}}},
                {"weights", describe(KnnScheme{config.k})},
                {"gamma", config.gamma},
                {"lambda", config.lambda},
                {"sigma", config.sigma},
                {"beta", truth_beta},
                {"formula", kFormula}};
  files["truth.json"] = truth.dump(2) + "\n";

  files["run.conf"] =
      "# generated by vmtco2 synth; paths are relative to this file\n"
      "tracts = tracts.geojson\n"
      "roads = roads.geojson\n"
      "census = vehicle_census.csv\n"
      "panel = panel.csv\n"
      "formula = model.txt\n"
      "weights = " + describe(KnnScheme{config.k}) + "\n"
      "scenario = scenario.txt\n"
      "fit = out/fit_SLM-ML.json\n"
      "out = out\n";
  return files;
}

}  // namespace vmtco2::synth
