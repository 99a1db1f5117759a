#include <algorithm>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "vmtco2/commands.hpp"
#include "vmtco2/errors.hpp"

namespace {

using vmtco2::cli::RunConfig;

// Flag name -> config key, for the settings each subcommand understands.
struct FlagSpec {
  const char* flag;
  const char* key;
  const char* help;
};

const std::vector<FlagSpec> kPathFlags = {
    {"--tracts", "tracts", "Tract polygons (GeoJSON, property tract_id)"},
    {"--roads", "roads", "Road segments (GeoJSON LineStrings)"},
    {"--census", "census", "Vehicle census CSV (tract_id, quarter, dvmt_per_vehicle, vehicle_count)"},
    {"--panel", "panel", "Regression panel CSV"},
    {"--ef-model", "ef_model", "Emission-factor table CSV replacing the built-in one"},
    {"--formula", "formula", "Model formula file (outcome ~ term + term ...)"},
    {"--scenario", "scenario", "Scenario file (key = value)"},
    {"--fit", "fit", "Fit JSON written by `fit`, read by `scenario`"},
    {"--out", "out", "Output directory"},
    {"--weights", "weights", "Spatial weights scheme: knn:K or band:DISTANCE"},
    {"--estimators", "estimators", "Comma-separated estimators or 'all'"},
    {"--group-column", "group_column", "Fixed-effects grouping column"},
    {"--units-per-mile", "units_per_mile", "Map units per mile for digitised lengths"},
    {"--seed", "seed", "Random seed for synth"},
    {"--rows", "synth.rows", "Synthetic lattice rows"},
    {"--cols", "synth.cols", "Synthetic lattice columns"},
    {"--cell", "synth.cell", "Synthetic cell size (miles)"},
    {"--k", "synth.k", "Neighbours in the synthetic weights"},
    {"--gamma", "synth.gamma", "True spatial lag of the synthetic panel"},
    {"--lambda", "synth.lambda", "True spatial error parameter of the synthetic panel"},
    {"--sigma", "synth.sigma", "Innovation standard deviation of the synthetic panel"},
};

struct CommandOptions {
  std::string config_path;
  std::map<std::string, std::string> flags;
  std::vector<std::string> sets;
};

void add_common(CLI::App* cmd, CommandOptions& o, const std::vector<std::string>& keys) {
  cmd->add_option("-c,--config", o.config_path, "Run configuration file (key = value)");
  for (const auto& spec : kPathFlags)
    if (std::find(keys.begin(), keys.end(), spec.key) != keys.end())
      cmd->add_option(spec.flag, o.flags[spec.key], spec.help);
  cmd->add_option("--set", o.sets, "Override any setting as key=value (repeatable)");
}

RunConfig build_config(const CommandOptions& o) {
  RunConfig c = o.config_path.empty() ? RunConfig{} : vmtco2::cli::load_run_config(o.config_path);
  for (const auto& [key, value] : o.flags)
    if (!value.empty()) vmtco2::cli::set_config_value(c, key, value, {});
  for (const auto& s : o.sets) {
    const auto eq = s.find('=');
    if (eq == std::string::npos) throw vmtco2::InputError("--set expects key=value, got '" + s + "'");
    vmtco2::cli::set_config_value(c, s.substr(0, eq), s.substr(eq + 1), {});
  }
  return c;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"vmtco2: tract-level passenger-vehicle CO2 inventories and spatial VMT models"};
  app.require_subcommand(1);

  CommandOptions inv_o, fit_o, scen_o, synth_o, wexp_o;
  std::string inv_method = "both";

  auto* inv = app.add_subcommand("inventory", "Consumption and/or production CO2 inventories per tract");
  inv->add_option("method", inv_method, "consumption, production or both")
      ->check(CLI::IsMember({"consumption", "production", "both"}));
  add_common(inv, inv_o, {"tracts", "roads", "census", "ef_model", "out", "units_per_mile"});

  auto* fit = app.add_subcommand("fit", "Fit the estimator suite on a panel and rank by MSE");
  add_common(fit, fit_o, {"panel", "formula", "tracts", "weights", "estimators", "group_column", "out"});

  auto* scen = app.add_subcommand("scenario", "Predicted VMT change for a covariate intervention");
  add_common(scen, scen_o, {"fit", "scenario", "out"});

  auto* syn = app.add_subcommand("synth", "Write a synthetic lattice dataset with known parameters");
  add_common(syn, synth_o,
             {"out", "seed", "synth.rows", "synth.cols", "synth.cell", "synth.k", "synth.gamma", "synth.lambda",
              "synth.sigma"});

  auto* wexp = app.add_subcommand("weights-export", "Write the spatial weights matrix as text triples");
  add_common(wexp, wexp_o, {"tracts", "panel", "formula", "weights", "out"});

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : static_cast<int>(vmtco2::ExitCode::InputError);
  }

  try {
    if (*inv) return vmtco2::cli::cmd_inventory(build_config(inv_o), vmtco2::cli::parse_inventory_choice(inv_method), std::cerr);
    if (*fit) return vmtco2::cli::cmd_fit(build_config(fit_o), std::cerr);
    if (*scen) return vmtco2::cli::cmd_scenario(build_config(scen_o), std::cerr);
    if (*syn) return vmtco2::cli::cmd_synth(build_config(synth_o), std::cerr);
    if (*wexp) return vmtco2::cli::cmd_weights_export(build_config(wexp_o), std::cerr);
  } catch (const vmtco2::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return static_cast<int>(e.code());
  }
  return 0;
}
