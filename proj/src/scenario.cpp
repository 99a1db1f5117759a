#include "vmtco2/scenario.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <set>

#include <json.hpp>

#include "vmtco2/errors.hpp"
#include "vmtco2/io.hpp"

namespace vmtco2 {

namespace {

std::string lower(std::string_view s) {
  std::string out;
  for (unsigned char c : s)
    if (c != '-' && c != '_' && c != ' ') out.push_back(static_cast<char>(std::tolower(c)));
  return out;
}

bool is_share(const std::string& column) {
  const auto& s = share_columns();
  return std::find(s.begin(), s.end(), column) != s.end();
}

const Coefficient* interaction(const ModelFit& fit, const std::string& column, const std::string& mapc) {
  if (const auto* c = fit.find(column + ":" + mapc)) return c;
  return fit.find(mapc + ":" + column);
}

bool parse_bool(const io::KeyValueLine& kv) {
  const auto v = lower(kv.value);
  if (v == "1" || v == "true" || v == "yes" || v == "on") return true;
  if (v == "0" || v == "false" || v == "no" || v == "off") return false;
  throw InputError("line " + std::to_string(kv.line) + ": " + kv.key + " expects true or false, got '" + kv.value +
                   "'");
}

}  // namespace

std::string_view to_string(RegionContext r) { return r == RegionContext::Mapc ? "MAPC" : "non-MAPC"; }

RegionContext parse_region(std::string_view s) {
  const auto v = lower(s);
  if (v == "mapc") return RegionContext::Mapc;
  if (v == "nonmapc") return RegionContext::NonMapc;
  throw InputError("unknown region context '" + std::string(s) + "' (expected MAPC or non-MAPC)");
}

const std::vector<std::string>& share_columns() {
  static const std::vector<std::string> cols = PanelOptions{}.unit_interval_columns;
  return cols;
}

ScenarioResult mode_shift_effect(const ModelFit& fit, const Intervention& intervention,
                                 const std::map<std::string, double>& baseline) {
  ScenarioResult r;
  if (intervention.spatial_multiplier) {
    if (!fit.gamma) throw InputError("spatial multiplier requested but the fit has no spatial lag");
    r.multiplier = 1.0 / (1.0 - fit.gamma->estimate);
  }
  std::set<std::string> seen;
  for (const auto& term : intervention.terms) {
    if (!seen.insert(term.column).second) throw InputError("scenario names column " + term.column + " twice");
    if (!std::isfinite(term.delta)) throw InputError("scenario delta for " + term.column + " is not finite");
    const auto* base = fit.find(term.column);
    if (!base) throw InputError("scenario column " + term.column + " is not a coefficient of the " +
                                std::string(to_string(fit.method)) + " fit");
    if (is_share(term.column)) {
      if (auto b = baseline.find(term.column); b != baseline.end()) {
        const double after = b->second + term.delta;
        if (after < 0.0 || after > 1.0)
          throw InputError("scenario moves share " + term.column + " to " + io::fmt(after) + ", outside [0, 1]");
      } else if (std::abs(term.delta) > 1.0) {
        throw InputError("scenario delta for share " + term.column + " exceeds one");
      }
    }
    TermContribution c;
    c.column = term.column;
    c.delta = term.delta;
    c.coefficient = base->estimate;
    if (intervention.region == RegionContext::Mapc)
      if (const auto* ix = interaction(fit, term.column, intervention.mapc_column)) c.interaction_coefficient = ix->estimate;
    c.contribution = (c.coefficient + c.interaction_coefficient) * c.delta * r.multiplier;
    r.contributions.push_back(c);
  }
  for (const auto& c : r.contributions) r.delta_log_vmt += c.contribution;
  r.pct_change_vmt = 100.0 * std::expm1(r.delta_log_vmt);
  r.linear_pct_change_vmt = 100.0 * r.delta_log_vmt;
  return r;
}

ScenarioResult composite_scenario(const ModelFit& fit, const std::map<std::string, double>& baseline,
                                  const std::map<std::string, double>& targets, RegionContext region,
                                  bool spatial_multiplier) {
  Intervention iv;
  iv.region = region;
  iv.spatial_multiplier = spatial_multiplier;
  for (const auto& [col, target] : targets) {
    const auto b = baseline.find(col);
    if (b == baseline.end()) throw InputError("target for " + col + " has no baseline value");
    iv.terms.push_back({col, target - b->second});
  }
  return mode_shift_effect(fit, iv, baseline);
}

ScenarioSpec parse_scenario(std::istream& in, std::string_view source) {
  ScenarioSpec spec;
  std::vector<std::pair<std::string, double>> targets;
  for (const auto& kv : io::parse_key_values(in, source)) {
    const auto where = std::string(source) + ":" + std::to_string(kv.line) + ": ";
    try {
      if (kv.key == "region") {
        spec.intervention.region = parse_region(kv.value);
      } else if (kv.key == "spatial_multiplier") {
        spec.intervention.spatial_multiplier = parse_bool(kv);
      } else if (kv.key == "mapc_column") {
        spec.intervention.mapc_column = kv.value;
      } else if (kv.key.starts_with("delta.") && kv.key.size() > 6) {
        spec.intervention.terms.push_back({kv.key.substr(6), io::parse_double(kv.value, kv.key, kv.line)});
      } else if (kv.key.starts_with("target.") && kv.key.size() > 7) {
        targets.emplace_back(kv.key.substr(7), io::parse_double(kv.value, kv.key, kv.line));
      } else if (kv.key.starts_with("baseline.") && kv.key.size() > 9) {
        if (!spec.baseline.emplace(kv.key.substr(9), io::parse_double(kv.value, kv.key, kv.line)).second)
          throw InputError("duplicate key " + kv.key);
      } else {
        throw InputError("unknown key '" + kv.key + "'");
      }
    } catch (const InputError& e) {
      const std::string msg = e.what();
      throw InputError(msg.starts_with(where) ? msg : where + msg);
    }
  }
  for (const auto& [col, target] : targets) {
    const auto b = spec.baseline.find(col);
    if (b == spec.baseline.end())
      throw InputError(std::string(source) + ": target." + col + " needs a baseline." + col + " value");
    spec.intervention.terms.push_back({col, target - b->second});
  }
  return spec;
}

ScenarioSpec load_scenario(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open scenario file " + path.string());
  return parse_scenario(in, path.filename().string());
}

ScenarioResult run_scenario(const ModelFit& fit, const ScenarioSpec& spec) {
  return mode_shift_effect(fit, spec.intervention, spec.baseline);
}

std::string scenario_to_json(const ModelFit& fit, const ScenarioSpec& spec, const ScenarioResult& result) {
  using nlohmann::json;
  json terms = json::array();
  for (const auto& c : result.contributions)
    terms.push_back({{"column", c.column},
                     {"delta", io::round6(c.delta)},
                     {"coefficient", io::round6(c.coefficient)},
                     {"interaction_coefficient", io::round6(c.interaction_coefficient)},
                     {"contribution_log_vmt", io::round6(c.contribution)},
                     {"linear_pct", io::round6(100.0 * c.contribution)}});
  json j = {
      {"method", std::string(to_string(fit.method))},
      {"region", std::string(to_string(spec.intervention.region))},
      {"effect", spec.intervention.spatial_multiplier ? "total (spatial multiplier)" : "direct"},
      {"multiplier", io::round6(result.multiplier)},
      {"delta_log_vmt", io::round6(result.delta_log_vmt)},
      {"pct_change_vmt", io::round6(result.pct_change_vmt)},
      {"linear_pct_change_vmt", io::round6(result.linear_pct_change_vmt)},
      {"terms", terms},
  };
  return j.dump(2) + "\n";
}

}  // namespace vmtco2
