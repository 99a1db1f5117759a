#pragma once

// Random rectangular tract partitions with random road networks, for the
// conservation and linearity properties.

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "vmtco2/geo.hpp"
#include "vmtco2/synth.hpp"

namespace testing {

struct RandomNetwork {
  std::vector<double> xcuts, ycuts;  // include both ends
  std::vector<vmtco2::geo::TractGeometry> tracts;
  std::vector<vmtco2::geo::RoadSegment> roads;
};

inline std::string cell_id(std::size_t r, std::size_t c) {
  return "C" + std::to_string(100 + r) + "_" + std::to_string(100 + c);
}

inline vmtco2::geo::TractGeometry rect_tract(const std::string& id, double x0, double y0, double x1, double y1) {
  vmtco2::geo::PolygonPart part;
  part.outer = {{x0, y0}, {x1, y0}, {x1, y1}, {x0, y1}};
  return vmtco2::geo::make_tract(id, {part});
}

inline std::vector<double> cuts(vmtco2::synth::Rng& rng, int cells, double extent) {
  std::vector<double> v{0.0, extent};
  for (int i = 1; i < cells; ++i) v.push_back(rng.uniform(0.05, 0.95) * extent);
  std::sort(v.begin(), v.end());
  return v;
}

/// Tracts tile [0, w] x [0, h]; every road lies strictly inside that box.
/// About a fifth of the roads run exactly along interior cut lines.
inline RandomNetwork random_network(std::uint64_t seed) {
  vmtco2::synth::Rng rng(seed);
  RandomNetwork net;
  const double w = rng.uniform(3.0, 8.0), h = rng.uniform(3.0, 8.0);
  net.xcuts = cuts(rng, rng.integer(2, 5), w);
  net.ycuts = cuts(rng, rng.integer(2, 5), h);
  for (std::size_t r = 0; r + 1 < net.ycuts.size(); ++r)
    for (std::size_t c = 0; c + 1 < net.xcuts.size(); ++c)
      net.tracts.push_back(rect_tract(cell_id(r, c), net.xcuts[c], net.ycuts[r], net.xcuts[c + 1], net.ycuts[r + 1]));

  static const vmtco2::geo::FunctionalClass classes[] = {
      vmtco2::geo::FunctionalClass::Interstate, vmtco2::geo::FunctionalClass::PrincipalArterial,
      vmtco2::geo::FunctionalClass::MinorArterial, vmtco2::geo::FunctionalClass::MajorCollector,
      vmtco2::geo::FunctionalClass::Other};
  const int n_roads = rng.integer(3, 15);
  for (int i = 0; i < n_roads; ++i) {
    vmtco2::geo::RoadSegment s;
    s.segment_id = "S" + std::to_string(1000 + i);
    if (rng.uniform() < 0.2 && net.xcuts.size() > 2) {
      const double x = net.xcuts[1 + static_cast<std::size_t>(rng.integer(0, static_cast<int>(net.xcuts.size()) - 3))];
      s.polyline = {{x, rng.uniform(0.01, 0.4) * h}, {x, rng.uniform(0.6, 0.99) * h}};
    } else {
      const int pts = rng.integer(2, 6);
      for (int p = 0; p < pts; ++p) s.polyline.emplace_back(rng.uniform(0.01, 0.99) * w, rng.uniform(0.01, 0.99) * h);
    }
    s.length = vmtco2::geo::polyline_length(s.polyline);
    s.speed_limit = 5.0 * rng.integer(5, 13);
    s.aadt = std::round(rng.uniform(100.0, 50000.0));
    s.functional_class = classes[rng.integer(0, 4)];
    net.roads.push_back(s);
  }
  return net;
}

}  // namespace testing
