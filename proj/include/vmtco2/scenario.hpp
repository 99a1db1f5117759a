#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "vmtco2/econometrics.hpp"

namespace vmtco2 {

enum class RegionContext { Mapc, NonMapc };

std::string_view to_string(RegionContext r);
RegionContext parse_region(std::string_view s);

struct InterventionTerm {
  std::string column;
  double delta = 0.0;  // native units: share points, log units, index units
};

struct Intervention {
  std::vector<InterventionTerm> terms;
  RegionContext region = RegionContext::NonMapc;
  /// Name of the dummy whose interactions apply in MAPC context.
  std::string mapc_column = "mapc";
  /// Scale direct effects by 1 / (1 - gamma) (lag models only).
  bool spatial_multiplier = false;
};

struct TermContribution {
  std::string column;
  double delta = 0.0;
  double coefficient = 0.0;
  double interaction_coefficient = 0.0;  // zero outside MAPC or when absent
  double contribution = 0.0;             // in log VMT
};

struct ScenarioResult {
  double delta_log_vmt = 0.0;
  /// 100 (exp(delta_log_vmt) - 1).
  double pct_change_vmt = 0.0;
  /// 100 delta_log_vmt, shown next to the exact value.
  double linear_pct_change_vmt = 0.0;
  double multiplier = 1.0;
  std::vector<TermContribution> contributions;
};

/// Columns whose values are shares in [0, 1].
const std::vector<std::string>& share_columns();

/// Direct-effect arithmetic: sum over terms of (base + MAPC interaction) x delta.
/// With a baseline, share columns are checked to stay in [0, 1] afterwards;
/// without one, share deltas must lie in [-1, 1].
ScenarioResult mode_shift_effect(const ModelFit& fit, const Intervention& intervention,
                                 const std::map<std::string, double>& baseline = {});

/// Deltas are target - baseline per column, then as mode_shift_effect.
ScenarioResult composite_scenario(const ModelFit& fit, const std::map<std::string, double>& baseline,
                                  const std::map<std::string, double>& targets, RegionContext region,
                                  bool spatial_multiplier = false);

/// Parsed scenario file: `region`, `spatial_multiplier`, `mapc_column`,
/// `delta.<col>`, `target.<col>` and `baseline.<col>` keys.
struct ScenarioSpec {
  Intervention intervention;
  std::map<std::string, double> baseline;
};

ScenarioSpec parse_scenario(std::istream& in, std::string_view source);
ScenarioSpec load_scenario(const std::filesystem::path& path);

ScenarioResult run_scenario(const ModelFit& fit, const ScenarioSpec& spec);

std::string scenario_to_json(const ModelFit& fit, const ScenarioSpec& spec, const ScenarioResult& result);

}  // namespace vmtco2
