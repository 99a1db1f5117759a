#include "vmtco2/commands.hpp"

#include <algorithm>
#include <functional>
#include <map>
#include <sstream>

#include "vmtco2/econometrics.hpp"
#include "vmtco2/ef_model.hpp"
#include "vmtco2/errors.hpp"
#include "vmtco2/geo.hpp"
#include "vmtco2/inventory.hpp"
#include "vmtco2/io.hpp"
#include "vmtco2/panel.hpp"
#include "vmtco2/scenario.hpp"
#include "vmtco2/weights.hpp"

namespace fs = std::filesystem;

namespace vmtco2::cli {

namespace {

fs::path resolve(const fs::path& base, const std::string& value) {
  fs::path p(value);
  return p.is_absolute() || base.empty() ? p : base / p;
}

const fs::path& require_path(const std::optional<fs::path>& p, const char* key) {
  if (!p) throw InputError(std::string("missing required setting '") + key + "'");
  if (!fs::exists(*p)) throw InputError(std::string(key) + " file not found: " + p->string());
  return *p;
}

// Runs a command body, mapping library errors to exit codes.
int guarded(std::ostream& log, const std::function<int()>& body) {
  try {
    return body();
  } catch (const Error& e) {
    log << "error: " << e.what() << '\n';
    return static_cast<int>(e.code());
  } catch (const fs::filesystem_error& e) {
    log << "error: " << e.what() << '\n';
    return static_cast<int>(ExitCode::InputError);
  }
}

void write_output(const fs::path& dir, const std::string& name, const std::string& contents) {
  fs::create_directories(dir);
  io::write_atomic(dir / name, contents);
}

EfModel ef_model_for(const RunConfig& config) {
  return config.ef_model ? load_ef_model_csv(require_path(config.ef_model, "ef_model")) : load_default_ef_model();
}

std::vector<Estimator> selected_estimators(const std::string& text) {
  if (io::trim(text) == "all") return {kAllEstimators.begin(), kAllEstimators.end()};
  std::vector<Estimator> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto e = parse_estimator(io::trim(item));
    if (std::find(out.begin(), out.end(), e) == out.end()) out.push_back(e);
  }
  if (out.empty()) throw InputError("no estimators selected");
  return out;
}

TractPanel load_panel(const RunConfig& config) {
  const auto formula = load_formula(require_path(config.formula, "formula"));
  PanelOptions options;
  options.group_column = config.group_column;
  return build_panel(io::read_csv(require_path(config.panel, "panel")), formula, options);
}

std::vector<geo::Point> panel_centroids(const RunConfig& config, const TractPanel& panel) {
  if (!panel.centroids.empty()) return panel.centroids;
  if (!config.tracts) throw InputError("panel has no centroid columns (cx, cy) and no tracts file is configured");
  std::map<std::string, geo::Point> by_id;
  for (const auto& t : geo::load_tracts_geojson(require_path(config.tracts, "tracts"))) by_id[t.tract_id] = t.centroid;
  std::vector<geo::Point> out;
  std::vector<std::string> missing;
  for (const auto& id : panel.ids) {
    if (auto it = by_id.find(id); it != by_id.end()) out.push_back(it->second);
    else missing.push_back(id);
  }
  if (!missing.empty()) throw ConsistencyError("panel tracts missing from tracts file: " + missing.front() +
                                               (missing.size() > 1 ? " and " + std::to_string(missing.size() - 1) + " more" : ""));
  return out;
}

}  // namespace

const std::vector<std::string>& config_keys() {
  static const std::vector<std::string> keys = {
      "tracts", "roads", "census", "panel", "ef_model", "formula", "scenario", "fit", "out", "weights", "estimators",
      "group_column", "units_per_mile", "seed", "synth.rows", "synth.cols", "synth.cell", "synth.k", "synth.gamma",
      "synth.lambda", "synth.sigma"};
  return keys;
}

void set_config_value(RunConfig& c, const std::string& key, const std::string& value, const fs::path& base) {
  auto num = [&] { return io::parse_double(value, key, 0); };
  auto integer = [&] { return io::parse_int(value, key, 0); };
  if (key == "tracts") c.tracts = resolve(base, value);
  else if (key == "roads") c.roads = resolve(base, value);
  else if (key == "census") c.census = resolve(base, value);
  else if (key == "panel") c.panel = resolve(base, value);
  else if (key == "ef_model") c.ef_model = resolve(base, value);
  else if (key == "formula") c.formula = resolve(base, value);
  else if (key == "scenario") c.scenario = resolve(base, value);
  else if (key == "fit") c.fit = resolve(base, value);
  else if (key == "out") c.out = resolve(base, value);
  else if (key == "weights") {
    parse_weights_scheme(value);
    c.weights = value;
  } else if (key == "estimators") {
    selected_estimators(value);
    c.estimators = value;
  } else if (key == "group_column") c.group_column = value;
  else if (key == "units_per_mile") {
    c.units_per_mile = num();
    if (!(c.units_per_mile > 0.0)) throw InputError("units_per_mile must be positive");
  } else if (key == "seed") {
    const auto s = integer();
    if (s < 0) throw InputError("seed must be non-negative");
    c.synth.seed = static_cast<std::uint64_t>(s);
  } else if (key == "synth.rows") c.synth.lattice.rows = static_cast<int>(integer());
  else if (key == "synth.cols") c.synth.lattice.cols = static_cast<int>(integer());
  else if (key == "synth.cell") c.synth.lattice.cell = num();
  else if (key == "synth.k") c.synth.k = static_cast<int>(integer());
  else if (key == "synth.gamma") c.synth.gamma = num();
  else if (key == "synth.lambda") c.synth.lambda = num();
  else if (key == "synth.sigma") c.synth.sigma = num();
  else throw InputError("unknown setting '" + key + "'");
}

RunConfig load_run_config(const fs::path& path) {
  RunConfig c;
  const auto base = path.parent_path();
  for (const auto& kv : io::read_key_values(path)) {
    try {
      set_config_value(c, kv.key, kv.value, base);
    } catch (const InputError& e) {
      throw InputError(path.filename().string() + ":" + std::to_string(kv.line) + ": " + e.what());
    }
  }
  return c;
}

InventoryChoice parse_inventory_choice(std::string_view s) {
  if (s == "consumption") return InventoryChoice::Consumption;
  if (s == "production") return InventoryChoice::Production;
  if (s == "both") return InventoryChoice::Both;
  throw InputError("inventory method must be consumption, production or both");
}

int cmd_inventory(const RunConfig& config, InventoryChoice method, std::ostream& log) {
  return guarded(log, [&] {
    const bool want_c = method != InventoryChoice::Production;
    const bool want_p = method != InventoryChoice::Consumption;
    // Validate every input up front so a missing file fails before any work.
    require_path(config.tracts, "tracts");
    require_path(config.roads, "roads");
    if (want_c) require_path(config.census, "census");

    const auto ef = ef_model_for(config);
    const auto tracts = geo::load_tracts_geojson(*config.tracts);
    const auto roads = geo::load_roads_geojson(*config.roads);
    geo::AssignOptions options;
    options.units_per_mile = config.units_per_mile;
    const auto assigned = geo::assign_segments(tracts, roads, options);
    for (const auto& w : assigned.warnings) log << "warning: " << w.subject << ": " << w.message << '\n';
    if (!assigned.unassigned.empty())
      log << "warning: " << assigned.unassigned.size() << " segment(s) outside every tract\n";

    std::vector<TractInventory> consumption, production;
    if (want_c) {
      const auto records = load_vehicle_census_csv(*config.census);
      std::vector<std::string> ids;
      for (const auto& r : records)
        if (ids.empty() || ids.back() != r.tract_id) ids.push_back(r.tract_id);
      std::sort(ids.begin(), ids.end());
      ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
      const auto speeds = geo::tract_speed_limits(ids, assigned.assignments, roads);
      consumption = consumption_inventory(records, speeds, ef);
      write_output(config.out, "inventory_consumption.csv", inventory_csv(consumption));
    }
    if (want_p) {
      production = production_inventory(roads, assigned.assignments, ef);
      write_output(config.out, "inventory_production.csv", inventory_csv(production));
    }
    if (method == InventoryChoice::Both) {
      const auto cmp = compare_inventories(consumption, production);
      write_output(config.out, "comparison.csv", comparison_csv(cmp));
      write_output(config.out, "comparison_summary.csv", comparison_summary_csv(cmp));
      if (!cmp.consumption_only.empty() || !cmp.production_only.empty())
        log << "note: " << cmp.consumption_only.size() << " tract(s) only in consumption, "
            << cmp.production_only.size() << " only in production\n";
    }
    write_output(config.out, "inventory.geojson", inventory_geojson(tracts, consumption, production));
    return 0;
  });
}

int cmd_fit(const RunConfig& config, std::ostream& log) {
  return guarded(log, [&] {
    const auto estimators = selected_estimators(config.estimators);
    const auto panel = load_panel(config);
    if (panel.dropped_rows > 0) log << "note: dropped " << panel.dropped_rows << " row(s) with missing values\n";

    std::optional<SpatialWeights> w;
    std::optional<linalg::LogDeterminant> logdet;
    const bool spatial = std::any_of(estimators.begin(), estimators.end(), is_spatial);
    if (spatial) {
      w = build_weights(panel_centroids(config, panel), panel.ids, parse_weights_scheme(config.weights));
      for (const auto& m : w->warnings) log << "warning: weights: " << m << '\n';
    }

    std::vector<ModelFit> fits;
    std::vector<std::string> failed;
    int first_code = 0;
    for (const auto e : estimators) {
      try {
        ModelFit fit;
        if (e == Estimator::SlmMl || e == Estimator::SemMl) {
          if (!logdet) logdet.emplace(w->matrix);
          fit = e == Estimator::SlmMl ? fit_slm_ml(panel, *w, *logdet) : fit_sem_ml(panel, *w, *logdet);
        } else {
          fit = fit_model(e, panel, w ? &*w : nullptr);
        }
        for (const auto& m : fit.warnings) log << "warning: " << to_string(e) << ": " << m << '\n';
        write_output(config.out, "fit_" + std::string(to_string(e)) + ".json", fit_to_json(fit));
        fits.push_back(std::move(fit));
      } catch (const Error& err) {
        log << "error: " << to_string(e) << " failed: " << err.what() << '\n';
        failed.push_back(std::string(to_string(e)) + " failed: " + err.what());
        if (!first_code) first_code = static_cast<int>(err.code());
      }
    }
    if (fits.empty()) return first_code;

    std::vector<ModelRanking> ranking;
    if (fits.size() >= 2) {
      ranking = compare_models(fits);
    } else {
      const auto& f = fits.front();
      ranking.push_back({f.method, f.mse, f.r2, f.pseudo_r2()});
    }
    std::vector<std::string> failed_rows;
    for (const auto& f : failed) {
      std::string s = f;
      std::replace(s.begin(), s.end(), ',', ';');
      std::replace(s.begin(), s.end(), '\n', ' ');
      failed_rows.push_back(s);
    }
    write_output(config.out, "comparison.csv", comparison_table_csv(ranking, failed_rows));
    write_output(config.out, "coefficients.txt", coefficient_table(fits));
    return 0;
  });
}

int cmd_scenario(const RunConfig& config, std::ostream& log) {
  return guarded(log, [&] {
    const auto fit = fit_from_json(io::read_text(require_path(config.fit, "fit")));
    const auto spec = load_scenario(require_path(config.scenario, "scenario"));
    const auto result = run_scenario(fit, spec);
    write_output(config.out, "scenario.json", scenario_to_json(fit, spec, result));
    return 0;
  });
}

int cmd_synth(const RunConfig& config, std::ostream& log) {
  return guarded(log, [&] {
    for (const auto& [name, contents] : synth::synthesize(config.synth)) write_output(config.out, name, contents);
    return 0;
  });
}

int cmd_weights_export(const RunConfig& config, std::ostream& log) {
  return guarded(log, [&] {
    const auto scheme = parse_weights_scheme(config.weights);
    std::vector<geo::Point> centroids;
    std::vector<std::string> ids;
    if (config.formula && config.panel) {
      const auto panel = load_panel(config);
      centroids = panel_centroids(config, panel);
      ids = panel.ids;
    } else {
      for (const auto& t : geo::load_tracts_geojson(require_path(config.tracts, "tracts"))) {
        ids.push_back(t.tract_id);
        centroids.push_back(t.centroid);
      }
    }
    const auto w = build_weights(centroids, ids, scheme);
    for (const auto& m : w.warnings) log << "warning: weights: " << m << '\n';
    write_output(config.out, "weights.txt", weights_to_text(w));
    return 0;
  });
}

}  // namespace vmtco2::cli
