#include <doctest.h>

#include <json.hpp>

#include "test_support.hpp"
#include "vmtco2/commands.hpp"
#include "vmtco2/errors.hpp"
#include "vmtco2/weights.hpp"

using testing::golden_dir;
using testing::run_cli;
using testing::scratch;
namespace fs = std::filesystem;

namespace {

const fs::path kFixture = testing::data_dir() / "fixture3";

void check_matches_golden(const fs::path& out, const fs::path& golden) {
  const auto expected = testing::read_dir(golden);
  const auto actual = testing::read_dir(out);
  REQUIRE_FALSE(expected.empty());
  for (const auto& [name, contents] : expected) {
    CAPTURE(name);
    REQUIRE(actual.count(name) == 1);
    CHECK(actual.at(name) == contents);
  }
}

// Synthetic dataset used by the fit and scenario goldens.
fs::path golden_synth(const std::string& tag) {
  const auto dir = scratch(tag);
  REQUIRE(run_cli("synth --seed 7 --rows 10 --cols 10 --out '" + dir.string() + "'").code == 0);
  return dir;
}

}  // namespace

TEST_CASE("inventory both matches the golden files and is repeatable") {
  const auto out = scratch("inv_both");
  const auto r = run_cli("inventory both -c '" + (kFixture / "run.conf").string() + "' --out '" + out.string() + "'");
  CHECK(r.code == 0);
  check_matches_golden(out, golden_dir() / "inventory_both");

  const auto again = scratch("inv_both2");
  run_cli("inventory both -c '" + (kFixture / "run.conf").string() + "' --out '" + again.string() + "'");
  CHECK(testing::read_dir(out) == testing::read_dir(again));
}

TEST_CASE("inventory exit codes") {
  const auto out = scratch("inv_err");
  SUBCASE("missing roads file") {
    const auto r = run_cli("inventory production --tracts '" + (kFixture / "tracts.geojson").string() +
                           "' --roads '" + (out / "nope.geojson").string() + "' --out '" + out.string() + "'");
    CHECK(r.code == 2);
    CHECK(r.err.find("roads") != std::string::npos);
  }
  SUBCASE("schema mismatch names the column") {
    testing::write_file(out / "census.csv", "tract_id,quarter,miles\nT1,1,20\n");
    const auto r = run_cli("inventory consumption -c '" + (kFixture / "run.conf").string() + "' --census '" +
                           (out / "census.csv").string() + "' --out '" + out.string() + "'");
    CHECK(r.code == 2);
    CHECK(r.err.find("dvmt_per_vehicle") != std::string::npos);
    CHECK(r.err.find("vehicle_count") != std::string::npos);
  }
  SUBCASE("no common tracts") {
    testing::write_file(out / "census.csv", "tract_id,quarter,dvmt_per_vehicle,vehicle_count\nT9,1,20,100\n");
    const auto r = run_cli("inventory both -c '" + (kFixture / "run.conf").string() + "' --census '" +
                           (out / "census.csv").string() + "' --out '" + out.string() + "'");
    CHECK(r.code == 3);
  }
  SUBCASE("unknown method") {
    CHECK(run_cli("inventory sideways -c '" + (kFixture / "run.conf").string() + "'").code == 2);
  }
}

TEST_CASE("synth golden and determinism") {
  const auto a = golden_synth("synth_a");
  const auto b = golden_synth("synth_b");
  CHECK(testing::read_dir(a) == testing::read_dir(b));
  check_matches_golden(a, golden_dir() / "synth");
  const auto w = vmtco2::cli::RunConfig{};
  (void)w;
}

TEST_CASE("fit golden, determinism and failure modes") {
  const auto data = golden_synth("fit_data");
  const auto r1 = run_cli("fit -c '" + (data / "run.conf").string() + "'");
  CHECK(r1.code == 0);
  check_matches_golden(data / "out", golden_dir() / "fit");
  const auto first = testing::read_dir(data / "out");
  run_cli("fit -c '" + (data / "run.conf").string() + "'");
  CHECK(testing::read_dir(data / "out") == first);

  // The lag family ranks first on a dataset generated by a lag process.
  const auto cmp = vmtco2::io::read_text(data / "out" / "comparison.csv");
  const auto top = cmp.substr(cmp.find('\n') + 3, cmp.find(',', cmp.find('\n') + 3) - cmp.find('\n') - 3);
  CHECK((top == "SLM-ML" || top == "SELM-GMM" || top == "SLM-GS2SLS"));

  testing::write_file(data / "bad_model.txt", "log_vmt ~ log_popden + parking_supply\n");
  const auto bad = run_cli("fit -c '" + (data / "run.conf").string() + "' --formula '" +
                           (data / "bad_model.txt").string() + "' --out '" + (data / "bad").string() + "'");
  CHECK(bad.code == 2);
  CHECK(bad.err.find("parking_supply") != std::string::npos);

  const auto subset = run_cli("fit -c '" + (data / "run.conf").string() + "' --estimators OLS,SEM-GMM --out '" +
                              (data / "subset").string() + "'");
  CHECK(subset.code == 0);
  CHECK(fs::exists(data / "subset" / "fit_OLS.json"));
  CHECK_FALSE(fs::exists(data / "subset" / "fit_SLM-ML.json"));
}

TEST_CASE("scenario golden and edge cases") {
  const auto data = golden_synth("scen_data");
  REQUIRE(run_cli("fit -c '" + (data / "run.conf").string() + "'").code == 0);
  CHECK(run_cli("scenario -c '" + (data / "run.conf").string() + "'").code == 0);
  check_matches_golden(data / "out", golden_dir() / "scenario");

  // Matches the arithmetic on the stored fit.
  const auto fit = nlohmann::json::parse(vmtco2::io::read_text(data / "out" / "fit_SLM-ML.json"));
  double carpool = 0, inter = 0, transit = 0;
  for (const auto& c : fit["coefficients"]) {
    if (c["name"] == "w_carpool") carpool = c["estimate"].get<double>();
    if (c["name"] == "w_carpool:mapc") inter = c["estimate"].get<double>();
    if (c["name"] == "w_pubtrans") transit = c["estimate"].get<double>();
  }
  const auto res = nlohmann::json::parse(vmtco2::io::read_text(data / "out" / "scenario.json"));
  CHECK(res["delta_log_vmt"].get<double>() == doctest::Approx((carpool + inter + transit) * 0.01).epsilon(1e-5));

  testing::write_file(data / "empty.txt", "# nothing\n");
  CHECK(run_cli("scenario -c '" + (data / "run.conf").string() + "' --scenario '" + (data / "empty.txt").string() +
                "' --out '" + (data / "empty").string() + "'")
            .code == 0);
  const auto zero = nlohmann::json::parse(vmtco2::io::read_text(data / "empty" / "scenario.json"));
  CHECK(zero["pct_change_vmt"].get<double>() == 0.0);
  CHECK(zero["terms"].empty());

  testing::write_file(data / "broken.txt", "region = MAPC\ndelta.w_carpool 0.01\n");
  const auto broken = run_cli("scenario -c '" + (data / "run.conf").string() + "' --scenario '" +
                              (data / "broken.txt").string() + "' --out '" + (data / "broken").string() + "'");
  CHECK(broken.code == 2);
  CHECK(broken.err.find("broken.txt:2") != std::string::npos);
}

TEST_CASE("weights export rows sum to one") {
  const auto data = golden_synth("wexp");
  CHECK(run_cli("weights-export -c '" + (data / "run.conf").string() + "'").code == 0);
  const auto w = vmtco2::weights_from_text(vmtco2::io::read_text(data / "out" / "weights.txt"));
  CHECK(w.size() == 100);
  const Eigen::VectorXd sums = w.dense().rowwise().sum();
  CHECK((sums.array() - 1.0).abs().maxCoeff() < 1e-9);
}

TEST_CASE("config handling") {
  const auto dir = scratch("config");
  testing::write_file(dir / "run.conf", "panel = data/panel.csv\nweights = knn:4\nseed = 9\n");
  const auto c = vmtco2::cli::load_run_config(dir / "run.conf");
  CHECK(*c.panel == dir / "data" / "panel.csv");
  CHECK(c.weights == "knn:4");
  CHECK(c.synth.seed == 9);
  testing::write_file(dir / "bad.conf", "panel = p.csv\ncolour = red\n");
  try {
    vmtco2::cli::load_run_config(dir / "bad.conf");
    FAIL("expected an error");
  } catch (const vmtco2::InputError& e) {
    CHECK(std::string(e.what()).find("bad.conf:2") != std::string::npos);
  }
  CHECK(run_cli("fit --set colour=red").code == 2);
  CHECK(run_cli("").code == 2);
}

TEST_CASE("help documents every flag") {
  const auto help_file = scratch("help") / "help.txt";
  for (const char* cmd : {"inventory", "fit", "scenario", "synth", "weights-export"}) {
    const std::string c = std::string("'") + VMTCO2_CLI + "' " + cmd + " --help > '" + help_file.string() + "'";
    CHECK(std::system(c.c_str()) == 0);
    const auto text = vmtco2::io::read_text(help_file);
    CHECK(text.find("--config") != std::string::npos);
    CHECK(text.find("--out") != std::string::npos);
    CHECK(text.find("--set") != std::string::npos);
  }
}
