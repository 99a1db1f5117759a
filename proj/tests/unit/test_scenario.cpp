#include <doctest.h>

#include <cmath>
#include <sstream>

#include "vmtco2/errors.hpp"
#include "vmtco2/scenario.hpp"

using namespace vmtco2;

namespace {

// Mode-share rows of the published ML spatial-lag column.
ModelFit published_slm() {
  ModelFit f;
  f.method = Estimator::SlmMl;
  f.coefficients = {{"const", 2.106, 0.442},          {"w_carpool", 0.017, 0.034},
                    {"w_pubtrans", -0.104, 0.040},    {"w_bike", -0.451, 0.181},
                    {"w_home", 0.030, 0.051},         {"mapc", -0.011, 0.007},
                    {"w_carpool:mapc", -0.135, 0.053}, {"w_bike:mapc", 0.054, 0.196},
                    {"w_pubtrans:mapc", -0.034, 0.041}, {"w_home:mapc", -0.188, 0.071}};
  f.gamma = SpatialParameter{0.679, 0.013};
  return f;
}

ModelFit unit_fit() {
  ModelFit f;
  f.coefficients = {{"a", 1.0, 0.1}, {"b", 1.0, 0.1}};
  return f;
}

Intervention mapc(std::vector<InterventionTerm> terms) {
  Intervention iv;
  iv.region = RegionContext::Mapc;
  iv.terms = std::move(terms);
  return iv;
}

}  // namespace

TEST_CASE("carpool +1 point in MAPC under the published lag coefficients") {
  const auto r = mode_shift_effect(published_slm(), mapc({{"w_carpool", 0.01}}));
  CHECK(r.delta_log_vmt == doctest::Approx(-0.00118).epsilon(1e-12));
  CHECK(r.pct_change_vmt == doctest::Approx(100.0 * std::expm1(-0.00118)).epsilon(1e-12));
  CHECK(std::abs(r.pct_change_vmt - (-0.118)) < 1e-3);
  // Published figure, a loose anchor only.
  CHECK(std::abs(r.pct_change_vmt - (-0.13)) <= 0.05);
  REQUIRE(r.contributions.size() == 1);
  CHECK(r.contributions[0].interaction_coefficient == -0.135);
}

TEST_CASE("outside MAPC the interaction does not apply") {
  Intervention iv;
  iv.terms = {{"w_carpool", 0.01}};
  CHECK(mode_shift_effect(published_slm(), iv).delta_log_vmt == doctest::Approx(0.00017));
}

TEST_CASE("empty intervention is exactly zero") {
  const auto r = mode_shift_effect(published_slm(), Intervention{});
  CHECK(r.delta_log_vmt == 0.0);
  CHECK(r.pct_change_vmt == 0.0);
  CHECK(r.contributions.empty());
}

TEST_CASE("linearity and additivity") {
  const auto fit = published_slm();
  const auto one = mode_shift_effect(fit, mapc({{"w_bike", 0.01}}));
  const auto two = mode_shift_effect(fit, mapc({{"w_bike", 0.02}}));
  CHECK(two.delta_log_vmt == 2.0 * one.delta_log_vmt);
  const auto home = mode_shift_effect(fit, mapc({{"w_home", 0.01}}));
  const auto both = mode_shift_effect(fit, mapc({{"w_bike", 0.01}, {"w_home", 0.01}}));
  CHECK(both.delta_log_vmt == doctest::Approx(one.delta_log_vmt + home.delta_log_vmt).epsilon(1e-14));
  double sum = 0.0;
  for (const auto& c : both.contributions) sum += c.contribution;
  CHECK(std::abs(sum - both.delta_log_vmt) <= 1e-12);
}

TEST_CASE("sign coherence and the exponential bound") {
  const auto fit = published_slm();
  const auto r = mode_shift_effect(fit, mapc({{"w_carpool", 0.03}, {"w_pubtrans", 0.02}, {"w_home", 0.05}}));
  CHECK(r.delta_log_vmt < 0.0);
  CHECK(r.pct_change_vmt < 0.0);
  const double d = r.delta_log_vmt;
  CHECK(std::abs(r.pct_change_vmt - 100.0 * d) <= 100.0 * d * d / 2.0 + 1e-9);
  CHECK(r.linear_pct_change_vmt == 100.0 * d);
}

TEST_CASE("unit coefficients with two +0.1 deltas") {
  const auto r = mode_shift_effect(unit_fit(), Intervention{{{"a", 0.1}, {"b", 0.1}}, RegionContext::NonMapc});
  CHECK(r.delta_log_vmt == doctest::Approx(0.2).epsilon(1e-14));
  CHECK(r.pct_change_vmt == doctest::Approx(22.14).epsilon(1e-4));
}

TEST_CASE("composite scenario from baseline to targets") {
  const std::map<std::string, double> base{{"w_carpool", 0.075}, {"w_pubtrans", 0.299}};
  CHECK(composite_scenario(published_slm(), base, base, RegionContext::Mapc).delta_log_vmt == 0.0);
  const auto r = composite_scenario(published_slm(), base, {{"w_carpool", 0.15}, {"w_pubtrans", 0.598}},
                                    RegionContext::Mapc);
  CHECK(r.delta_log_vmt == doctest::Approx((0.017 - 0.135) * 0.075 + (-0.104 - 0.034) * 0.299));
  CHECK_THROWS_AS(composite_scenario(published_slm(), {}, {{"w_carpool", 0.1}}, RegionContext::Mapc), InputError);
}

TEST_CASE("intervention validation") {
  const auto fit = published_slm();
  CHECK_THROWS_AS(mode_shift_effect(fit, mapc({{"parking", 0.1}})), InputError);
  CHECK_THROWS_AS(mode_shift_effect(fit, mapc({{"w_carpool", 0.01}, {"w_carpool", 0.02}})), InputError);
  CHECK_THROWS_AS(mode_shift_effect(fit, mapc({{"w_pubtrans", 0.5}}), {{"w_pubtrans", 0.7}}), InputError);
  CHECK_THROWS_AS(mode_shift_effect(fit, mapc({{"w_pubtrans", -0.5}}), {{"w_pubtrans", 0.2}}), InputError);
  CHECK_THROWS_AS(mode_shift_effect(fit, mapc({{"w_pubtrans", 1.5}})), InputError);
  CHECK_NOTHROW(mode_shift_effect(fit, mapc({{"w_pubtrans", 0.5}}), {{"w_pubtrans", 0.4}}));
}

TEST_CASE("optional spatial multiplier") {
  auto iv = mapc({{"w_carpool", 0.01}});
  iv.spatial_multiplier = true;
  const auto r = mode_shift_effect(published_slm(), iv);
  CHECK(r.multiplier == doctest::Approx(1.0 / (1.0 - 0.679)));
  CHECK(r.delta_log_vmt == doctest::Approx(-0.00118 / (1.0 - 0.679)));
  CHECK_THROWS_AS(mode_shift_effect(unit_fit(), Intervention{{{"a", 0.1}}, RegionContext::NonMapc, "mapc", true}),
                  InputError);
}

TEST_CASE("scenario files") {
  std::istringstream in(
      "# comment\n"
      "region = MAPC\n"
      "delta.w_carpool = 0.01\n"
      "baseline.w_pubtrans = 0.299\n"
      "target.w_pubtrans = 0.598\n");
  const auto spec = parse_scenario(in, "s.txt");
  CHECK(spec.intervention.region == RegionContext::Mapc);
  REQUIRE(spec.intervention.terms.size() == 2);
  CHECK(spec.intervention.terms[1].column == "w_pubtrans");
  CHECK(spec.intervention.terms[1].delta == doctest::Approx(0.299));
  const auto r = run_scenario(published_slm(), spec);
  CHECK(r.contributions.size() == 2);
  const auto json = scenario_to_json(published_slm(), spec, r);
  CHECK(json.find("\"pct_change_vmt\"") != std::string::npos);
  CHECK(json.find("\"region\": \"MAPC\"") != std::string::npos);

  std::istringstream malformed("region = MAPC\nthis line is broken\n");
  try {
    parse_scenario(malformed, "bad.txt");
    FAIL("expected an error");
  } catch (const InputError& e) {
    CHECK(std::string(e.what()).find("bad.txt:2") != std::string::npos);
  }
  std::istringstream unknown("colour = blue\n");
  CHECK_THROWS_AS(parse_scenario(unknown, "u.txt"), InputError);
  std::istringstream orphan("target.w_bike = 0.1\n");
  CHECK_THROWS_AS(parse_scenario(orphan, "o.txt"), InputError);
  std::istringstream region("region = Boston\n");
  CHECK_THROWS_AS(parse_scenario(region, "r.txt"), InputError);
  std::istringstream empty("");
  const auto none = parse_scenario(empty, "e.txt");
  CHECK(run_scenario(published_slm(), none).pct_change_vmt == 0.0);
}
