#pragma once

#include <filesystem>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

namespace vmtco2::geo {

/// Planar coordinates in an already-projected, length-preserving system.
using Point = Eigen::Vector2d;
/// Closed ring: front() == back().
using Ring = std::vector<Point>;

struct PolygonPart {
  Ring outer;
  std::vector<Ring> holes;
};

struct BoundingBox {
  Point min{Point::Constant(std::numeric_limits<double>::infinity())};
  Point max{Point::Constant(-std::numeric_limits<double>::infinity())};

  void extend(const Point& p) {
    min = min.cwiseMin(p);
    max = max.cwiseMax(p);
  }
  bool intersects(const BoundingBox& o) const {
    return (min.array() <= o.max.array()).all() && (o.min.array() <= max.array()).all();
  }
};

struct TractGeometry {
  std::string tract_id;
  std::vector<PolygonPart> parts;
  Point centroid{Point::Zero()};
  double area = 0.0;
  BoundingBox bbox;
};

/// Closes open rings and computes area, centroid and bounding box.
TractGeometry make_tract(std::string tract_id, std::vector<PolygonPart> parts);

enum class FunctionalClass { Interstate, PrincipalArterial, MinorArterial, MajorCollector, Other };

std::string_view to_string(FunctionalClass fc);
/// Accepts the enumerator names (case, spaces and underscores ignored) or the
/// numeric highway functional classification codes 1 to 7.
FunctionalClass parse_functional_class(std::string_view s);

struct RoadSegment {
  std::string segment_id;
  std::vector<Point> polyline;
  std::optional<double> speed_limit;  // mph
  std::optional<double> aadt;         // vehicles / day
  FunctionalClass functional_class = FunctionalClass::Other;
  double length = 0.0;  // miles, authoritative for VMT
};

/// Throws InputError when a segment breaks its field invariants.
void validate(const RoadSegment& segment);

double polyline_length(const std::vector<Point>& polyline);

/// Even-odd test over every ring of the tract. Points on a shared edge are
/// claimed by exactly one of the two neighbouring tracts.
bool contains(const TractGeometry& tract, const Point& p);

/// Arc length of `polyline` inside `tract`, in coordinate units.
double clipped_arc_length(const TractGeometry& tract, const std::vector<Point>& polyline);

struct SegmentTractAssignment {
  std::string segment_id;
  std::string tract_id;
  double clipped_length = 0.0;  // miles
};

struct GeoWarning {
  std::string subject;
  std::string message;
};

struct AssignmentResult {
  /// Sorted by (segment_id, tract_id).
  std::vector<SegmentTractAssignment> assignments;
  /// Segments intersecting no tract, sorted.
  std::vector<std::string> unassigned;
  std::vector<GeoWarning> warnings;
};

struct AssignOptions {
  /// Coordinate units per mile, used only to audit declared lengths.
  double units_per_mile = 1.0;
  /// Relative disagreement between declared and digitised length that raises a warning.
  double length_audit_tolerance = 0.05;
};

/// Length-weighted clipping of every segment against the tract polygons.
/// Clipped lengths are the inside arc fraction times the declared length.
AssignmentResult assign_segments(const std::vector<TractGeometry>& tracts, const std::vector<RoadSegment>& segments,
                                 const AssignOptions& options = {});

struct TractSpeed {
  double mean_mph = 0.0;     // clipped-length weighted
  double snapped_mph = 0.0;  // nearest multiple of 5, ties up
  double road_length = 0.0;  // miles with a known speed limit
  bool fallback = false;     // no roads; dataset-wide mean used
};

/// Clipped-length-weighted mean speed limit of each tract that has roads.
/// Segments without a speed limit are ignored.
std::map<std::string, TractSpeed> tract_avg_speed_limit(const std::vector<SegmentTractAssignment>& assignments,
                                                        const std::vector<RoadSegment>& segments);

/// As above for every id in `tract_ids`; roadless tracts receive the
/// dataset-wide length-weighted mean, flagged as a fallback.
std::map<std::string, TractSpeed> tract_speed_limits(const std::vector<std::string>& tract_ids,
                                                     const std::vector<SegmentTractAssignment>& assignments,
                                                     const std::vector<RoadSegment>& segments);

std::vector<TractGeometry> parse_tracts_geojson(std::string_view text);
std::vector<RoadSegment> parse_roads_geojson(std::string_view text);
std::vector<TractGeometry> load_tracts_geojson(const std::filesystem::path& path);
std::vector<RoadSegment> load_roads_geojson(const std::filesystem::path& path);

}  // namespace vmtco2::geo
