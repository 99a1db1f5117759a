#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "vmtco2/synth.hpp"

namespace vmtco2::cli {

/// One run's settings: a `key = value` file, then command-line overrides.
/// Relative paths resolve against the config file's directory (file values)
/// or the working directory (overrides).
struct RunConfig {
  std::optional<std::filesystem::path> tracts;
  std::optional<std::filesystem::path> roads;
  std::optional<std::filesystem::path> census;
  std::optional<std::filesystem::path> panel;
  std::optional<std::filesystem::path> ef_model;
  std::optional<std::filesystem::path> formula;
  std::optional<std::filesystem::path> scenario;
  std::optional<std::filesystem::path> fit;  // fit JSON read by `scenario`
  std::filesystem::path out = "out";
  std::string weights = "knn:8";
  std::string estimators = "all";  // comma-separated estimator names or "all"
  std::string group_column = "region_id";
  double units_per_mile = 1.0;
  synth::SynthConfig synth;
};

/// Keys accepted in config files and via --set.
const std::vector<std::string>& config_keys();

void set_config_value(RunConfig& config, const std::string& key, const std::string& value,
                      const std::filesystem::path& base_dir);
RunConfig load_run_config(const std::filesystem::path& path);

enum class InventoryChoice { Consumption, Production, Both };
InventoryChoice parse_inventory_choice(std::string_view s);

int cmd_inventory(const RunConfig& config, InventoryChoice method, std::ostream& log);
int cmd_fit(const RunConfig& config, std::ostream& log);
int cmd_scenario(const RunConfig& config, std::ostream& log);
int cmd_synth(const RunConfig& config, std::ostream& log);
int cmd_weights_export(const RunConfig& config, std::ostream& log);

}  // namespace vmtco2::cli
