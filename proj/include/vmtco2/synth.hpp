#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "vmtco2/geo.hpp"
#include "vmtco2/inventory.hpp"
#include "vmtco2/panel.hpp"
#include "vmtco2/weights.hpp"

namespace vmtco2::synth {

/// Platform-independent draws from mt19937_64 (the standard library's
/// distributions are implementation defined).
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}
  /// Uniform on [0, 1).
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  double normal();
  int integer(int lo, int hi);  // inclusive

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

Eigen::VectorXd normals(Rng& rng, Eigen::Index n);

struct Lattice {
  int rows = 20;
  int cols = 20;
  double cell = 1.0;  // miles
};

std::vector<std::string> lattice_ids(const Lattice& lattice);
std::vector<geo::Point> lattice_centroids(const Lattice& lattice);
std::vector<geo::TractGeometry> lattice_tracts(const Lattice& lattice);

/// Row-standardised k-nearest-neighbour weights on the lattice centroids.
SpatialWeights lattice_weights(const Lattice& lattice, int k = 8);

/// y = (I - gamma W)^-1 (X beta + u), u = (I - lambda W)^-1 sigma e.
Eigen::VectorXd simulate_sarar(const Eigen::MatrixXd& x, const Eigen::VectorXd& beta, const SparseRowMatrix& w,
                               double gamma, double lambda, double sigma, Rng& rng);

struct DgpParams {
  double gamma = 0.0;
  double lambda = 0.0;
  double sigma = 1.0;
  /// Intercept then one coefficient per standard-normal covariate.
  std::vector<double> beta = {1.0, 1.0, -0.5};
};

/// Panel with standard-normal covariates x1.. and an outcome drawn from the
/// SARAR process on `w`.
TractPanel simulate_panel(const DgpParams& params, const SpatialWeights& w, std::uint64_t seed);

struct SynthConfig {
  std::uint64_t seed = 42;
  Lattice lattice;
  int k = 8;
  double gamma = 0.6;
  double lambda = 0.12;
  double sigma = 0.1;
};

/// Everything `synth` writes, as file name -> contents.
std::map<std::string, std::string> synthesize(const SynthConfig& config);

}  // namespace vmtco2::synth
