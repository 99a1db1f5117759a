#pragma once

#include <array>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "vmtco2/ef_model.hpp"
#include "vmtco2/geo.hpp"

namespace vmtco2 {

inline constexpr double kDaysPerYear = 365.0;
inline constexpr double kGramsPerMetricTon = 1e6;
/// Passenger share of traffic on Interstates, arterials and major collectors.
inline constexpr double kPassengerShareMajorRoads = 0.9266;

struct TractVehicleRecord {
  std::string tract_id;
  int quarter = 1;                // 1..4
  double dvmt_per_vehicle = 0.0;  // miles / day
  double vehicle_count = 0.0;
};

enum class InventoryMethod { Consumption, Production };
std::string_view to_string(InventoryMethod m);

using TodVector = std::array<double, 4>;

struct TractInventory {
  std::string tract_id;
  TodVector annual_vmt_by_tod{};
  double emissions_g = 0.0;
  InventoryMethod method = InventoryMethod::Consumption;
  std::vector<std::string> flags;

  double emissions_tons() const { return emissions_g / kGramsPerMetricTon; }
  double total_vmt() const { return annual_vmt_by_tod[0] + annual_vmt_by_tod[1] + annual_vmt_by_tod[2] + annual_vmt_by_tod[3]; }
};

/// Annual VMT of one tract per time-of-day period: each quarter contributes
/// dvmt * share(t) * vehicles * 365/4. Absent quarters contribute nothing.
TodVector tract_annual_vmt(std::span<const TractVehicleRecord> records, const TodVector& tod_share);

/// Consumption view: vehicles attributed to their home tract at the tract's
/// average speed limit. Every tract with records needs an entry in `speeds`.
std::vector<TractInventory> consumption_inventory(std::span<const TractVehicleRecord> records,
                                                  const std::map<std::string, geo::TractSpeed>& speeds,
                                                  const EfModel& ef);
std::vector<TractInventory> consumption_inventory(std::span<const TractVehicleRecord> records,
                                                  const std::map<std::string, double>& speed_limits,
                                                  const EfModel& ef);

double passenger_vmt_factor(geo::FunctionalClass fc);

/// Production view: traffic counted on each clipped road portion.
std::vector<TractInventory> production_inventory(const std::vector<geo::RoadSegment>& segments,
                                                 const std::vector<geo::SegmentTractAssignment>& assignments,
                                                 const EfModel& ef);

struct ComparisonRow {
  std::string tract_id;
  double consumption_tons = 0.0;
  double production_tons = 0.0;
  double difference_tons = 0.0;  // production - consumption
};

struct MethodSummary {
  double mean_tons = 0.0;
  double median_tons = 0.0;
};

struct InventoryComparison {
  std::vector<ComparisonRow> rows;  // common tracts, sorted by id
  MethodSummary consumption;
  MethodSummary production;
  std::vector<std::string> consumption_only;
  std::vector<std::string> production_only;
};

/// Throws ConsistencyError when the two inventories share no tract.
InventoryComparison compare_inventories(const std::vector<TractInventory>& consumption,
                                        const std::vector<TractInventory>& production);

double median(std::vector<double> values);

std::vector<TractVehicleRecord> load_vehicle_census_csv(const std::filesystem::path& path);
std::vector<TractVehicleRecord> parse_vehicle_census_csv(std::istream& in);

std::string inventory_csv(const std::vector<TractInventory>& inventories);
std::string comparison_csv(const InventoryComparison& cmp);
std::string comparison_summary_csv(const InventoryComparison& cmp);
/// Tract polygons with per-method emissions (tons) as feature properties.
std::string inventory_geojson(const std::vector<geo::TractGeometry>& tracts,
                              const std::vector<TractInventory>& consumption,
                              const std::vector<TractInventory>& production);

}  // namespace vmtco2
