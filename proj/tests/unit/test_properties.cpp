#include <doctest.h>

#include <map>

#include "random_network.hpp"
#include "vmtco2/ef_model.hpp"
#include "vmtco2/geo.hpp"
#include "vmtco2/inventory.hpp"

using namespace vmtco2;

namespace {

double total_g(const std::vector<TractInventory>& inv) {
  double s = 0.0;
  for (const auto& t : inv) s += t.emissions_g;
  return s;
}

std::map<std::string, double> by_id(const std::vector<TractInventory>& inv) {
  std::map<std::string, double> m;
  for (const auto& t : inv) m[t.tract_id] = t.emissions_g;
  return m;
}

}  // namespace

TEST_CASE("property: clipped lengths conserve segment length") {
  for (std::uint64_t seed = 100; seed < 220; ++seed) {
    const auto net = testing::random_network(seed);
    const auto r = geo::assign_segments(net.tracts, net.roads);
    REQUIRE(r.unassigned.empty());
    std::map<std::string, double> sum;
    for (const auto& a : r.assignments) sum[a.segment_id] += a.clipped_length;
    for (const auto& s : net.roads) CHECK(std::abs(sum[s.segment_id] / s.length - 1.0) <= 1e-4);
  }
}

TEST_CASE("property: production emissions scale exactly with traffic") {
  const auto ef = load_default_ef_model();
  for (std::uint64_t seed = 300; seed < 420; ++seed) {
    auto net = testing::random_network(seed);
    const auto r = geo::assign_segments(net.tracts, net.roads);
    const auto base = production_inventory(net.roads, r.assignments, ef);
    for (auto& s : net.roads) s.aadt = *s.aadt * 4.0;
    const auto scaled = production_inventory(net.roads, r.assignments, ef);
    REQUIRE(base.size() == scaled.size());
    for (std::size_t i = 0; i < base.size(); ++i) CHECK(scaled[i].emissions_g == 4.0 * base[i].emissions_g);
  }
}

TEST_CASE("property: merging tracts conserves production totals") {
  const auto ef = load_default_ef_model();
  for (std::uint64_t seed = 500; seed < 620; ++seed) {
    const auto net = testing::random_network(seed);
    const auto before = production_inventory(net.roads, geo::assign_segments(net.tracts, net.roads).assignments, ef);

    // Merge the first two cells of the bottom row into one rectangle.
    std::vector<geo::TractGeometry> merged;
    merged.push_back(testing::rect_tract("M", net.xcuts[0], net.ycuts[0], net.xcuts[2], net.ycuts[1]));
    const auto a = testing::cell_id(0, 0), b = testing::cell_id(0, 1);
    for (const auto& t : net.tracts)
      if (t.tract_id != a && t.tract_id != b) merged.push_back(t);
    const auto after = production_inventory(net.roads, geo::assign_segments(merged, net.roads).assignments, ef);

    const double tb = total_g(before), ta = total_g(after);
    CHECK(std::abs(ta - tb) <= 1e-6 * std::max(1.0, tb));
    const auto mb = by_id(before), ma = by_id(after);
    const double parts = (mb.count(a) ? mb.at(a) : 0.0) + (mb.count(b) ? mb.at(b) : 0.0);
    const double whole = ma.count("M") ? ma.at("M") : 0.0;
    CHECK(std::abs(whole - parts) <= 1e-6 * std::max(1.0, tb));
  }
}

TEST_CASE("property: consumption emissions scale exactly with vehicle counts") {
  const auto ef = load_default_ef_model();
  synth::Rng rng(9);
  for (int trial = 0; trial < 120; ++trial) {
    std::vector<TractVehicleRecord> recs;
    std::map<std::string, double> speeds;
    const int tracts = rng.integer(1, 6);
    for (int t = 0; t < tracts; ++t) {
      const std::string id = "T" + std::to_string(t);
      speeds[id] = rng.uniform(5.0, 70.0);
      for (int q = 1; q <= 4; ++q)
        if (rng.uniform() < 0.85) recs.push_back({id, q, rng.uniform(1.0, 60.0), std::round(rng.uniform(1.0, 5000.0))});
    }
    const auto base = consumption_inventory(recs, speeds, ef);
    for (auto& r : recs) r.vehicle_count *= 2.0;
    const auto scaled = consumption_inventory(recs, speeds, ef);
    REQUIRE(base.size() == scaled.size());
    for (std::size_t i = 0; i < base.size(); ++i) CHECK(scaled[i].emissions_g == 2.0 * base[i].emissions_g);
  }
}
