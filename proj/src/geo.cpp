#include "vmtco2/geo.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <set>

#include <json.hpp>

#include "vmtco2/ef_model.hpp"
#include "vmtco2/errors.hpp"
#include "vmtco2/io.hpp"

namespace vmtco2::geo {

namespace {

double cross(const Point& a, const Point& b) { return a.x() * b.y() - a.y() * b.x(); }

void close_ring(Ring& ring) {
  if (!ring.empty() && ring.front() != ring.back()) ring.push_back(ring.front());
}

// Signed shoelace area and area centroid of a closed ring.
std::pair<double, Point> ring_moments(const Ring& ring) {
  double a2 = 0.0;
  Point c = Point::Zero();
  for (std::size_t i = 0; i + 1 < ring.size(); ++i) {
    const double w = cross(ring[i], ring[i + 1]);
    a2 += w;
    c += (ring[i] + ring[i + 1]) * w;
  }
  if (a2 == 0.0) return {0.0, Point::Zero()};
  return {a2 / 2.0, c / (3.0 * a2)};
}

// Crossing-number parity for one ring, horizontal ray towards +x.
bool ray_crosses_odd(const Ring& ring, const Point& p) {
  bool inside = false;
  for (std::size_t i = 0, j = ring.size() - 1; i < ring.size(); j = i++) {
    const Point& a = ring[i];
    const Point& b = ring[j];
    if ((a.y() > p.y()) != (b.y() > p.y())) {
      const double x = a.x() + (p.y() - a.y()) * (b.x() - a.x()) / (b.y() - a.y());
      if (p.x() < x) inside = !inside;
    }
  }
  return inside;
}

// Parameters t in [0,1] along p0->p1 where the edge meets ring edges.
void edge_ring_params(const Point& p0, const Point& p1, const Ring& ring, std::vector<double>& ts) {
  const Point d = p1 - p0;
  const double dd = d.squaredNorm();
  if (dd == 0.0) return;
  constexpr double eps = 1e-12;
  for (std::size_t i = 0; i + 1 < ring.size(); ++i) {
    const Point& q0 = ring[i];
    const Point e = ring[i + 1] - q0;
    const Point w = q0 - p0;
    const double denom = cross(d, e);
    const double scale = std::sqrt(dd * e.squaredNorm());
    if (std::abs(denom) > eps * scale) {
      const double t = cross(w, e) / denom;
      const double u = cross(w, d) / denom;
      if (t > -eps && t < 1.0 + eps && u > -eps && u < 1.0 + eps) ts.push_back(std::clamp(t, 0.0, 1.0));
    } else if (std::abs(cross(w, d)) <= eps * std::sqrt(dd) * std::max(1.0, w.norm())) {
      for (const Point& q : {q0, Point(ring[i + 1])}) {
        const double t = (q - p0).dot(d) / dd;
        if (t > 0.0 && t < 1.0) ts.push_back(t);
      }
    }
  }
}

// Uniform grid over tract bounding boxes.
class TractIndex {
 public:
  explicit TractIndex(const std::vector<TractGeometry>& tracts) {
    for (const auto& t : tracts)
      if (t.area > 0.0) {
        extent_.extend(t.bbox.min);
        extent_.extend(t.bbox.max);
      }
    cells_per_side_ = std::max<int>(1, static_cast<int>(std::ceil(std::sqrt(static_cast<double>(tracts.size())))));
    const Point span = (extent_.max - extent_.min).cwiseMax(Point::Constant(1e-12));
    cell_size_ = span / cells_per_side_;
    cells_.resize(static_cast<std::size_t>(cells_per_side_) * cells_per_side_);
    for (std::size_t i = 0; i < tracts.size(); ++i) {
      if (!(tracts[i].area > 0.0)) continue;
      const auto [x0, y0] = cell_of(tracts[i].bbox.min);
      const auto [x1, y1] = cell_of(tracts[i].bbox.max);
      for (int y = y0; y <= y1; ++y)
        for (int x = x0; x <= x1; ++x) cells_[static_cast<std::size_t>(y) * cells_per_side_ + x].push_back(i);
    }
  }

  std::vector<std::size_t> query(const BoundingBox& box) const {
    if (!box.intersects(extent_)) return {};
    const auto [x0, y0] = cell_of(box.min);
    const auto [x1, y1] = cell_of(box.max);
    std::set<std::size_t> hits;
    for (int y = y0; y <= y1; ++y)
      for (int x = x0; x <= x1; ++x)
        for (auto i : cells_[static_cast<std::size_t>(y) * cells_per_side_ + x]) hits.insert(i);
    return {hits.begin(), hits.end()};
  }

 private:
  std::pair<int, int> cell_of(const Point& p) const {
    auto clampi = [&](double v) { return std::clamp(static_cast<int>(std::floor(v)), 0, cells_per_side_ - 1); };
    const Point rel = (p - extent_.min).cwiseQuotient(cell_size_);
    return {clampi(rel.x()), clampi(rel.y())};
  }

  BoundingBox extent_;
  int cells_per_side_ = 1;
  Point cell_size_{Point::Ones()};
  std::vector<std::vector<std::size_t>> cells_;
};

}  // namespace

TractGeometry make_tract(std::string tract_id, std::vector<PolygonPart> parts) {
  TractGeometry t;
  t.tract_id = std::move(tract_id);
  double area = 0.0;
  Point moment = Point::Zero();
  for (auto& part : parts) {
    close_ring(part.outer);
    for (auto& h : part.holes) close_ring(h);
    for (const auto& p : part.outer) t.bbox.extend(p);
    const auto [a, c] = ring_moments(part.outer);
    area += std::abs(a);
    moment += std::abs(a) * c;
    for (const auto& h : part.holes) {
      const auto [ha, hc] = ring_moments(h);
      area -= std::abs(ha);
      moment -= std::abs(ha) * hc;
    }
  }
  t.parts = std::move(parts);
  t.area = area;
  if (area > 0.0) t.centroid = moment / area;
  return t;
}

std::string_view to_string(FunctionalClass fc) {
  switch (fc) {
    case FunctionalClass::Interstate: return "Interstate";
    case FunctionalClass::PrincipalArterial: return "PrincipalArterial";
    case FunctionalClass::MinorArterial: return "MinorArterial";
    case FunctionalClass::MajorCollector: return "MajorCollector";
    case FunctionalClass::Other: return "Other";
  }
  return "Other";
}

FunctionalClass parse_functional_class(std::string_view s) {
  std::string key;
  for (unsigned char c : s)
    if (!std::isspace(c) && c != '_' && c != '-') key.push_back(static_cast<char>(std::tolower(c)));
  if (key == "interstate" || key == "1") return FunctionalClass::Interstate;
  if (key == "principalarterial" || key == "2" || key == "3") return FunctionalClass::PrincipalArterial;
  if (key == "minorarterial" || key == "4") return FunctionalClass::MinorArterial;
  if (key == "majorcollector" || key == "5") return FunctionalClass::MajorCollector;
  if (key == "other" || key == "6" || key == "7" || key == "minorcollector" || key == "local")
    return FunctionalClass::Other;
  throw InputError("unknown functional class '" + std::string(s) + "'");
}

void validate(const RoadSegment& s) {
  auto fail = [&](const std::string& why) { throw InputError("segment " + s.segment_id + ": " + why); };
  if (s.polyline.size() < 2) fail("polyline needs at least 2 points");
  if (!(s.length > 0.0)) fail("length must be positive");
  if (s.aadt && !(*s.aadt >= 0.0)) fail("aadt must be non-negative");
  if (s.speed_limit && !(*s.speed_limit > 0.0 && *s.speed_limit <= 80.0)) fail("speed_limit must be in (0, 80]");
}

double polyline_length(const std::vector<Point>& polyline) {
  double len = 0.0;
  for (std::size_t i = 0; i + 1 < polyline.size(); ++i) len += (polyline[i + 1] - polyline[i]).norm();
  return len;
}

bool contains(const TractGeometry& tract, const Point& p) {
  bool inside = false;
  for (const auto& part : tract.parts) {
    if (ray_crosses_odd(part.outer, p)) inside = !inside;
    for (const auto& h : part.holes)
      if (ray_crosses_odd(h, p)) inside = !inside;
  }
  return inside;
}

double clipped_arc_length(const TractGeometry& tract, const std::vector<Point>& polyline) {
  double inside = 0.0;
  std::vector<double> ts;
  for (std::size_t i = 0; i + 1 < polyline.size(); ++i) {
    const Point& p0 = polyline[i];
    const Point& p1 = polyline[i + 1];
    const double len = (p1 - p0).norm();
    if (len == 0.0) continue;
    ts.assign({0.0, 1.0});
    for (const auto& part : tract.parts) {
      edge_ring_params(p0, p1, part.outer, ts);
      for (const auto& h : part.holes) edge_ring_params(p0, p1, h, ts);
    }
    std::sort(ts.begin(), ts.end());
    for (std::size_t k = 0; k + 1 < ts.size(); ++k) {
      const double dt = ts[k + 1] - ts[k];
      if (dt <= 0.0) continue;
      const Point mid = p0 + (p1 - p0) * (0.5 * (ts[k] + ts[k + 1]));
      if (contains(tract, mid)) inside += dt * len;
    }
  }
  return inside;
}

AssignmentResult assign_segments(const std::vector<TractGeometry>& tracts, const std::vector<RoadSegment>& segments,
                                 const AssignOptions& options) {
  if (tracts.empty()) throw InputError("no tracts to assign segments to");
  AssignmentResult out;
  for (const auto& t : tracts)
    if (!(t.area > 0.0)) out.warnings.push_back({t.tract_id, "degenerate polygon (zero area) skipped"});

  const TractIndex index(tracts);
  for (const auto& seg : segments) {
    validate(seg);
    const double arc = polyline_length(seg.polyline);
    if (!(arc > 0.0)) {
      out.warnings.push_back({seg.segment_id, "zero-length polyline"});
      out.unassigned.push_back(seg.segment_id);
      continue;
    }
    const double digitised_miles = arc / options.units_per_mile;
    if (std::abs(digitised_miles - seg.length) > options.length_audit_tolerance * seg.length) {
      out.warnings.push_back({seg.segment_id, "declared length " + io::fmt(seg.length) +
                                                  " mi differs from digitised " + io::fmt(digitised_miles) + " mi"});
    }
    BoundingBox box;
    for (const auto& p : seg.polyline) box.extend(p);
    const double scale = seg.length / arc;
    bool any = false;
    for (auto i : index.query(box)) {
      const auto& tract = tracts[i];
      if (!tract.bbox.intersects(box)) continue;
      const double inside = clipped_arc_length(tract, seg.polyline);
      if (inside > 0.0) {
        out.assignments.push_back({seg.segment_id, tract.tract_id, inside * scale});
        any = true;
      }
    }
    if (!any) out.unassigned.push_back(seg.segment_id);
  }
  std::sort(out.assignments.begin(), out.assignments.end(), [](const auto& a, const auto& b) {
    return std::tie(a.segment_id, a.tract_id) < std::tie(b.segment_id, b.tract_id);
  });
  std::sort(out.unassigned.begin(), out.unassigned.end());
  return out;
}

namespace {

std::map<std::string, const RoadSegment*> by_id(const std::vector<RoadSegment>& segments) {
  std::map<std::string, const RoadSegment*> m;
  for (const auto& s : segments) m[s.segment_id] = &s;
  return m;
}

}  // namespace

std::map<std::string, TractSpeed> tract_avg_speed_limit(const std::vector<SegmentTractAssignment>& assignments,
                                                        const std::vector<RoadSegment>& segments) {
  const auto lookup = by_id(segments);
  std::map<std::string, std::pair<double, double>> acc;  // Σ limit·len, Σ len
  for (const auto& a : assignments) {
    const auto it = lookup.find(a.segment_id);
    if (it == lookup.end()) throw ConsistencyError("assignment references unknown segment " + a.segment_id);
    const auto& limit = it->second->speed_limit;
    if (!limit) continue;
    auto& [num, den] = acc[a.tract_id];
    num += *limit * a.clipped_length;
    den += a.clipped_length;
  }
  std::map<std::string, TractSpeed> out;
  for (const auto& [id, nd] : acc) {
    if (!(nd.second > 0.0)) continue;
    const double mean = nd.first / nd.second;
    out[id] = {mean, snap_speed_limit(mean), nd.second, false};
  }
  return out;
}

std::map<std::string, TractSpeed> tract_speed_limits(const std::vector<std::string>& tract_ids,
                                                     const std::vector<SegmentTractAssignment>& assignments,
                                                     const std::vector<RoadSegment>& segments) {
  auto speeds = tract_avg_speed_limit(assignments, segments);
  double num = 0.0;
  double den = 0.0;
  for (const auto& [id, s] : speeds) {
    num += s.mean_mph * s.road_length;
    den += s.road_length;
  }
  std::map<std::string, TractSpeed> out;
  for (const auto& id : tract_ids) {
    if (auto it = speeds.find(id); it != speeds.end()) {
      out[id] = it->second;
    } else if (den > 0.0) {
      const double mean = num / den;
      out[id] = {mean, snap_speed_limit(mean), 0.0, true};
    }
  }
  return out;
}

namespace {

using nlohmann::json;

Point parse_point(const json& j) {
  if (!j.is_array() || j.size() < 2) throw InputError("coordinate must be [x, y]");
  return {j[0].get<double>(), j[1].get<double>()};
}

Ring parse_ring(const json& j) {
  Ring r;
  for (const auto& p : j) r.push_back(parse_point(p));
  if (r.size() < 3) throw InputError("polygon ring needs at least 3 points");
  return r;
}

PolygonPart parse_polygon(const json& rings) {
  if (!rings.is_array() || rings.empty()) throw InputError("polygon without rings");
  PolygonPart part;
  part.outer = parse_ring(rings[0]);
  for (std::size_t i = 1; i < rings.size(); ++i) part.holes.push_back(parse_ring(rings[i]));
  return part;
}

const json& features_of(const json& doc) {
  if (!doc.is_object() || doc.value("type", "") != "FeatureCollection" || !doc.contains("features"))
    throw InputError("expected a GeoJSON FeatureCollection");
  return doc["features"];
}

std::string id_string(const json& v) {
  if (v.is_string()) return v.get<std::string>();
  if (v.is_number_integer()) return std::to_string(v.get<long long>());
  throw InputError("identifier must be a string or integer");
}

std::optional<double> optional_number(const json& props, const char* key) {
  if (!props.contains(key) || props[key].is_null()) return std::nullopt;
  if (!props[key].is_number()) throw InputError(std::string("property ") + key + " must be numeric");
  return props[key].get<double>();
}

json parse_json(std::string_view text) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw InputError(std::string("invalid JSON: ") + e.what());
  }
}

}  // namespace

std::vector<TractGeometry> parse_tracts_geojson(std::string_view text) {
  const json doc = parse_json(text);
  std::vector<TractGeometry> out;
  std::set<std::string> seen;
  try {
    for (const auto& f : features_of(doc)) {
      const auto& props = f.at("properties");
      if (!props.contains("tract_id")) throw InputError("tract feature missing property tract_id");
      std::string id = id_string(props["tract_id"]);
      if (!seen.insert(id).second) throw InputError("duplicate tract_id " + id);
      const auto& g = f.at("geometry");
      const std::string type = g.at("type").get<std::string>();
      std::vector<PolygonPart> parts;
      if (type == "Polygon") {
        parts.push_back(parse_polygon(g.at("coordinates")));
      } else if (type == "MultiPolygon") {
        for (const auto& poly : g.at("coordinates")) parts.push_back(parse_polygon(poly));
      } else {
        throw InputError("tract " + id + ": unsupported geometry " + type);
      }
      out.push_back(make_tract(std::move(id), std::move(parts)));
    }
  } catch (const json::exception& e) {
    throw InputError(std::string("malformed tract GeoJSON: ") + e.what());
  }
  return out;
}

std::vector<RoadSegment> parse_roads_geojson(std::string_view text) {
  const json doc = parse_json(text);
  std::vector<RoadSegment> out;
  std::set<std::string> seen;
  try {
    for (const auto& f : features_of(doc)) {
      const auto& props = f.at("properties");
      std::string missing;
      for (const char* key : {"segment_id", "speed_limit", "aadt", "functional_class", "length_mi"})
        if (!props.contains(key)) missing += missing.empty() ? key : std::string(", ") + key;
      if (!missing.empty()) throw InputError("road feature missing propert(ies): " + missing);
      RoadSegment s;
      s.segment_id = id_string(props["segment_id"]);
      if (!seen.insert(s.segment_id).second) throw InputError("duplicate segment_id " + s.segment_id);
      s.speed_limit = optional_number(props, "speed_limit");
      s.aadt = optional_number(props, "aadt");
      const auto& fc = props["functional_class"];
      s.functional_class = parse_functional_class(fc.is_number_integer() ? std::to_string(fc.get<int>())
                                                                          : fc.get<std::string>());
      const auto len = optional_number(props, "length_mi");
      if (!len) throw InputError("segment " + s.segment_id + ": length_mi is null");
      s.length = *len;
      const auto& g = f.at("geometry");
      if (g.at("type").get<std::string>() != "LineString")
        throw InputError("segment " + s.segment_id + ": geometry must be a LineString");
      for (const auto& p : g.at("coordinates")) s.polyline.push_back(parse_point(p));
      validate(s);
      out.push_back(std::move(s));
    }
  } catch (const json::exception& e) {
    throw InputError(std::string("malformed road GeoJSON: ") + e.what());
  }
  return out;
}

std::vector<TractGeometry> load_tracts_geojson(const std::filesystem::path& path) {
  try {
    return parse_tracts_geojson(io::read_text(path));
  } catch (const InputError& e) {
    throw InputError(path.string() + ": " + e.what());
  }
}

std::vector<RoadSegment> load_roads_geojson(const std::filesystem::path& path) {
  try {
    return parse_roads_geojson(io::read_text(path));
  } catch (const InputError& e) {
    throw InputError(path.string() + ": " + e.what());
  }
}

}  // namespace vmtco2::geo
