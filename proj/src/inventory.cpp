#include "vmtco2/inventory.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

#include <json.hpp>

#include "vmtco2/errors.hpp"
#include "vmtco2/io.hpp"

namespace vmtco2 {

std::string_view to_string(InventoryMethod m) {
  return m == InventoryMethod::Consumption ? "consumption" : "production";
}

TodVector tract_annual_vmt(std::span<const TractVehicleRecord> records, const TodVector& tod_share) {
  if (records.size() > 4) throw InputError("more than four quarterly records for tract " + records.front().tract_id);
  std::array<bool, 4> seen{};
  TodVector vmt{};
  for (const auto& r : records) {
    if (r.tract_id != records.front().tract_id) throw InputError("records from several tracts passed together");
    if (r.quarter < 1 || r.quarter > 4) throw InputError("tract " + r.tract_id + ": quarter must be 1..4");
    if (seen[r.quarter - 1]) throw InputError("tract " + r.tract_id + ": duplicate quarter " + std::to_string(r.quarter));
    seen[r.quarter - 1] = true;
    if (!(r.dvmt_per_vehicle >= 0.0) || !(r.vehicle_count >= 0.0))
      throw InputError("tract " + r.tract_id + ": negative dvmt_per_vehicle or vehicle_count");
    const double daily = r.dvmt_per_vehicle * r.vehicle_count * (kDaysPerYear / 4.0);
    for (std::size_t t = 0; t < 4; ++t) vmt[t] += daily * tod_share[t];
  }
  return vmt;
}

std::vector<TractInventory> consumption_inventory(std::span<const TractVehicleRecord> records,
                                                  const std::map<std::string, geo::TractSpeed>& speeds,
                                                  const EfModel& ef) {
  std::map<std::string, std::vector<TractVehicleRecord>> by_tract;
  for (const auto& r : records) by_tract[r.tract_id].push_back(r);

  std::string missing;
  for (const auto& [id, recs] : by_tract)
    if (!speeds.contains(id)) missing += missing.empty() ? id : ", " + id;
  if (!missing.empty()) throw ConsistencyError("no speed limit for tract(s) with vehicle records: " + missing);

  std::vector<TractInventory> out;
  out.reserve(by_tract.size());
  for (const auto& [id, recs] : by_tract) {
    const auto& speed = speeds.at(id);
    TractInventory inv;
    inv.tract_id = id;
    inv.method = InventoryMethod::Consumption;
    inv.annual_vmt_by_tod = tract_annual_vmt(recs, ef.tod_shares());
    for (auto t : kTimesOfDay) {
      const auto i = static_cast<std::size_t>(t);
      inv.emissions_g += weighted_ef(ef, speed.snapped_mph, t) * inv.annual_vmt_by_tod[i];
    }
    if (recs.size() < 4) inv.flags.push_back("quarters=" + std::to_string(recs.size()));
    if (speed.fallback) inv.flags.push_back("speed_fallback");
    out.push_back(std::move(inv));
  }
  return out;
}

std::vector<TractInventory> consumption_inventory(std::span<const TractVehicleRecord> records,
                                                  const std::map<std::string, double>& speed_limits,
                                                  const EfModel& ef) {
  std::map<std::string, geo::TractSpeed> speeds;
  for (const auto& [id, mph] : speed_limits) speeds[id] = {mph, snap_speed_limit(mph), 0.0, false};
  return consumption_inventory(records, speeds, ef);
}

double passenger_vmt_factor(geo::FunctionalClass fc) {
  return fc == geo::FunctionalClass::Other ? 1.0 : kPassengerShareMajorRoads;
}

std::vector<TractInventory> production_inventory(const std::vector<geo::RoadSegment>& segments,
                                                 const std::vector<geo::SegmentTractAssignment>& assignments,
                                                 const EfModel& ef) {
  std::map<std::string, const geo::RoadSegment*> lookup;
  for (const auto& s : segments) lookup[s.segment_id] = &s;

  std::map<std::string, TractInventory> by_tract;
  for (const auto& a : assignments) {
    const auto it = lookup.find(a.segment_id);
    if (it == lookup.end()) throw ConsistencyError("assignment references unknown segment " + a.segment_id);
    const auto& seg = *it->second;
    auto& inv = by_tract[a.tract_id];
    inv.tract_id = a.tract_id;
    inv.method = InventoryMethod::Production;
    if (!seg.aadt || !seg.speed_limit) {
      inv.flags.push_back("excluded_segment=" + seg.segment_id);
      continue;
    }
    const double annual = *seg.aadt * a.clipped_length * kDaysPerYear * passenger_vmt_factor(seg.functional_class);
    for (auto t : kTimesOfDay) {
      const auto i = static_cast<std::size_t>(t);
      const double slice = annual * ef.tod_share(t);
      inv.annual_vmt_by_tod[i] += slice;
      inv.emissions_g += weighted_ef(ef, *seg.speed_limit, t) * slice;
    }
  }
  std::vector<TractInventory> out;
  out.reserve(by_tract.size());
  for (auto& [id, inv] : by_tract) out.push_back(std::move(inv));
  return out;
}

double median(std::vector<double> values) {
  if (values.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(values.begin(), values.end());
  const auto n = values.size();
  return n % 2 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

namespace {

MethodSummary summarize(const std::vector<double>& tons) {
  MethodSummary s;
  s.mean_tons = std::accumulate(tons.begin(), tons.end(), 0.0) / static_cast<double>(tons.size());
  s.median_tons = median(tons);
  return s;
}

std::map<std::string, double> tons_by_tract(const std::vector<TractInventory>& inv, InventoryMethod expected) {
  std::map<std::string, double> m;
  for (const auto& t : inv) {
    if (t.method != expected)
      throw ConsistencyError("tract " + t.tract_id + " carries a " + std::string(to_string(t.method)) +
                             " inventory where " + std::string(to_string(expected)) + " was expected");
    if (!m.emplace(t.tract_id, t.emissions_tons()).second)
      throw ConsistencyError("tract " + t.tract_id + " appears twice in one inventory");
  }
  return m;
}

}  // namespace

InventoryComparison compare_inventories(const std::vector<TractInventory>& consumption,
                                        const std::vector<TractInventory>& production) {
  const auto c = tons_by_tract(consumption, InventoryMethod::Consumption);
  const auto p = tons_by_tract(production, InventoryMethod::Production);
  InventoryComparison cmp;
  std::vector<double> ct;
  std::vector<double> pt;
  for (const auto& [id, tons] : c) {
    if (auto it = p.find(id); it != p.end()) {
      cmp.rows.push_back({id, tons, it->second, it->second - tons});
      ct.push_back(tons);
      pt.push_back(it->second);
    } else {
      cmp.consumption_only.push_back(id);
    }
  }
  for (const auto& [id, tons] : p)
    if (!c.contains(id)) cmp.production_only.push_back(id);
  if (cmp.rows.empty()) throw ConsistencyError("consumption and production inventories share no tract");
  cmp.consumption = summarize(ct);
  cmp.production = summarize(pt);
  return cmp;
}

std::vector<TractVehicleRecord> parse_vehicle_census_csv(std::istream& in) {
  const auto table = io::parse_csv(in);
  const auto cols = table.require({"tract_id", "quarter", "dvmt_per_vehicle", "vehicle_count"});
  std::vector<TractVehicleRecord> out;
  std::set<std::pair<std::string, int>> seen;
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& row = table.rows[r];
    const int line = table.lines[r];
    TractVehicleRecord rec;
    rec.tract_id = row[cols[0]];
    rec.quarter = static_cast<int>(io::parse_int(row[cols[1]], "quarter", line));
    rec.dvmt_per_vehicle = io::parse_double(row[cols[2]], "dvmt_per_vehicle", line);
    rec.vehicle_count = io::parse_double(row[cols[3]], "vehicle_count", line);
    const std::string where = "line " + std::to_string(line) + ": ";
    if (rec.tract_id.empty()) throw InputError(where + "empty tract_id");
    if (rec.quarter < 1 || rec.quarter > 4) throw InputError(where + "quarter must be 1..4");
    if (!(rec.dvmt_per_vehicle >= 0.0)) throw InputError(where + "dvmt_per_vehicle must be non-negative");
    if (!(rec.vehicle_count >= 0.0)) throw InputError(where + "vehicle_count must be non-negative");
    if (!seen.emplace(rec.tract_id, rec.quarter).second)
      throw InputError(where + "duplicate record for tract " + rec.tract_id + " quarter " + std::to_string(rec.quarter));
    out.push_back(std::move(rec));
  }
  return out;
}

std::vector<TractVehicleRecord> load_vehicle_census_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open " + path.string());
  try {
    return parse_vehicle_census_csv(in);
  } catch (const InputError& e) {
    throw InputError(path.string() + ": " + e.what());
  }
}

std::string inventory_csv(const std::vector<TractInventory>& inventories) {
  std::ostringstream os;
  os << "tract_id,method,vmt_am,vmt_md,vmt_pm,vmt_nt,emissions_tons,flags\n";
  for (const auto& inv : inventories) {
    os << inv.tract_id << ',' << to_string(inv.method);
    for (double v : inv.annual_vmt_by_tod) os << ',' << io::fmt(v);
    std::string flags;
    for (const auto& f : inv.flags) flags += (flags.empty() ? "" : ";") + f;
    os << ',' << io::fmt(inv.emissions_tons()) << ',' << flags << '\n';
  }
  return os.str();
}

std::string comparison_csv(const InventoryComparison& cmp) {
  std::ostringstream os;
  os << "tract_id,consumption_tons,production_tons,difference_tons\n";
  for (const auto& r : cmp.rows)
    os << r.tract_id << ',' << io::fmt(r.consumption_tons) << ',' << io::fmt(r.production_tons) << ','
       << io::fmt(r.difference_tons) << '\n';
  return os.str();
}

std::string comparison_summary_csv(const InventoryComparison& cmp) {
  std::ostringstream os;
  os << "statistic,consumption_tons,production_tons\n";
  os << "tracts," << cmp.rows.size() << ',' << cmp.rows.size() << '\n';
  os << "mean," << io::fmt(cmp.consumption.mean_tons) << ',' << io::fmt(cmp.production.mean_tons) << '\n';
  os << "median," << io::fmt(cmp.consumption.median_tons) << ',' << io::fmt(cmp.production.median_tons) << '\n';
  return os.str();
}

namespace {


nlohmann::json ring_json(const geo::Ring& ring) {
  auto arr = nlohmann::json::array();
  for (const auto& p : ring) arr.push_back({io::round6(p.x()), io::round6(p.y())});
  return arr;
}

}  // namespace

std::string inventory_geojson(const std::vector<geo::TractGeometry>& tracts,
                              const std::vector<TractInventory>& consumption,
                              const std::vector<TractInventory>& production) {
  std::map<std::string, const TractInventory*> c;
  std::map<std::string, const TractInventory*> p;
  for (const auto& t : consumption) c[t.tract_id] = &t;
  for (const auto& t : production) p[t.tract_id] = &t;

  std::vector<const geo::TractGeometry*> sorted;
  for (const auto& t : tracts) sorted.push_back(&t);
  std::sort(sorted.begin(), sorted.end(), [](auto* a, auto* b) { return a->tract_id < b->tract_id; });

  nlohmann::json features = nlohmann::json::array();
  for (const auto* t : sorted) {
    nlohmann::json props = {{"tract_id", t->tract_id}};
    const auto ci = c.find(t->tract_id);
    const auto pi = p.find(t->tract_id);
    props["consumption_tons"] = ci != c.end() ? nlohmann::json(io::round6(ci->second->emissions_tons())) : nlohmann::json();
    props["production_tons"] = pi != p.end() ? nlohmann::json(io::round6(pi->second->emissions_tons())) : nlohmann::json();
    if (ci != c.end() && pi != p.end())
      props["difference_tons"] = io::round6(pi->second->emissions_tons() - ci->second->emissions_tons());
    auto polys = nlohmann::json::array();
    for (const auto& part : t->parts) {
      auto rings = nlohmann::json::array({ring_json(part.outer)});
      for (const auto& h : part.holes) rings.push_back(ring_json(h));
      polys.push_back(rings);
    }
    features.push_back({{"type", "Feature"},
                        {"properties", props},
                        {"geometry", {{"type", "MultiPolygon"}, {"coordinates", polys}}}});
  }
  nlohmann::json doc = {{"type", "FeatureCollection"}, {"features", features}};
  return doc.dump(1) + "\n";
}

}  // namespace vmtco2
