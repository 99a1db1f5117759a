#include <doctest.h>

#include <json.hpp>
#include <sstream>

#include "vmtco2/io.hpp"
#include "vmtco2/panel.hpp"
#include "vmtco2/synth.hpp"

using namespace vmtco2;

TEST_CASE("generator is deterministic per seed") {
  synth::Rng a(42), b(42), c(43);
  for (int i = 0; i < 100; ++i) {
    const double x = a.normal();
    CHECK(x == b.normal());
    (void)c;
  }
  CHECK(synth::Rng(42).uniform() != synth::Rng(43).uniform());
}

TEST_CASE("normal draws have unit moments") {
  synth::Rng rng(1);
  const auto v = synth::normals(rng, 200000);
  CHECK(std::abs(v.mean()) < 0.01);
  CHECK((v.array() - v.mean()).square().mean() == doctest::Approx(1.0).epsilon(0.01));
  for (int i = 0; i < 1000; ++i) {
    const int k = rng.integer(2, 5);
    CHECK(k >= 2);
    CHECK(k <= 5);
  }
}

TEST_CASE("lattice geometry") {
  const synth::Lattice lat{3, 4, 0.5};
  const auto tracts = synth::lattice_tracts(lat);
  REQUIRE(tracts.size() == 12);
  CHECK(tracts[0].tract_id == "T0001");
  CHECK(tracts[5].centroid.x() == doctest::Approx(0.75));
  CHECK(tracts[5].centroid.y() == doctest::Approx(0.75));
  CHECK(tracts[5].area == doctest::Approx(0.25));
}

TEST_CASE("synthesised files") {
  synth::SynthConfig cfg;
  cfg.lattice = {8, 8, 1.0};
  cfg.seed = 42;
  const auto a = synth::synthesize(cfg);
  const auto b = synth::synthesize(cfg);
  CHECK(a == b);
  cfg.seed = 43;
  CHECK(synth::synthesize(cfg).at("panel.csv") != a.at("panel.csv"));

  for (const char* name : {"tracts.geojson", "roads.geojson", "vehicle_census.csv", "panel.csv", "model.txt",
                           "scenario.txt", "truth.json", "run.conf"})
    CHECK(a.count(name) == 1);
  const auto truth = nlohmann::json::parse(a.at("truth.json"));
  CHECK(truth["gamma"].get<double>() == 0.6);
  CHECK(truth["lambda"].get<double>() == 0.12);
  CHECK(truth["n"].get<int>() == 64);

  std::istringstream in(a.at("panel.csv"));
  const auto panel = build_panel(io::parse_csv(in), parse_formula(truth["formula"].get<std::string>()));
  CHECK(panel.n() == 64);
  CHECK(panel.dropped_rows == 0);
}

TEST_CASE("simulated SARAR outcome solves the structural equation") {
  const auto w = synth::lattice_weights({6, 6, 1.0}, 4);
  synth::Rng rng(5);
  Eigen::MatrixXd x = Eigen::MatrixXd::Ones(36, 1);
  const Eigen::VectorXd beta = Eigen::VectorXd::Constant(1, 2.0);
  const auto y = synth::simulate_sarar(x, beta, w.matrix, 0.4, 0.0, 0.0, rng);
  // Noise-free: y - 0.4 W y = X beta.
  CHECK(((y - 0.4 * (w.matrix * y)) - x * beta).cwiseAbs().maxCoeff() < 1e-10);
}
