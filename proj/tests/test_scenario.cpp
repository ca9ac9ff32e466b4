#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "splitbargain/scenario.hpp"

using namespace splitbargain;

namespace {

std::filesystem::path temp_file(const std::string& name) {
  return std::filesystem::temp_directory_path() / name;
}

void write_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path);
  out << content;
}

}  // namespace

TEST_CASE("generated devices fall inside the declared ranges") {
  ScenarioSpec spec;
  spec.seed = 7;
  const Scenario sc = generate_scenario(spec);
  REQUIRE(sc.n_devices() == 10);
  for (const auto& d : sc.devices) {
    CHECK(d.cpu_freq_hz >= 1.5e9);
    CHECK(d.cpu_freq_hz <= 2.4e9);
    CHECK(d.privacy_weight >= 25.0);
    CHECK(d.privacy_weight <= 30.0);
    CHECK(d.payoff_rate >= 1e-8);
    CHECK(d.payoff_rate <= 1e-7);
  }
}

TEST_CASE("all sampled parameters stay in range over many seeds") {
  for (std::uint64_t seed = 0; seed < 1000; ++seed) {
    ScenarioSpec spec;
    spec.seed = seed;
    spec.n_devices = 3;
    const Scenario sc = generate_scenario(spec);
    for (const auto& d : sc.devices) {
      REQUIRE(d.cpu_freq_hz >= spec.cpu_freq_hz.lo);
      REQUIRE(d.cpu_freq_hz <= spec.cpu_freq_hz.hi);
      REQUIRE(d.privacy_weight >= spec.privacy_weight.lo);
      REQUIRE(d.privacy_weight <= spec.privacy_weight.hi);
      REQUIRE(d.payoff_rate >= spec.payoff_rate.lo);
      REQUIRE(d.payoff_rate <= spec.payoff_rate.hi);
      REQUIRE(d.position_m[0] >= 0.0);
      REQUIRE(d.position_m[0] <= spec.area_side_m);
      REQUIRE(d.position_m[1] >= 0.0);
      REQUIRE(d.position_m[1] <= spec.area_side_m);
    }
  }
}

TEST_CASE("server sits exactly at the area center") {
  ScenarioSpec spec;
  spec.area_side_m = 80.0;
  const Scenario sc = generate_scenario(spec);
  CHECK(sc.server_position()[0] == 40.0);
  CHECK(sc.server_position()[1] == 40.0);
}

TEST_CASE("same seed regenerates the identical scenario") {
  ScenarioSpec spec;
  spec.seed = 12345;
  const Scenario a = generate_scenario(spec);
  const Scenario b = generate_scenario(spec);
  REQUIRE(a.n_devices() == b.n_devices());
  for (std::size_t k = 0; k < a.n_devices(); ++k) {
    CHECK(a.devices[k].cpu_freq_hz == b.devices[k].cpu_freq_hz);
    CHECK(a.devices[k].privacy_weight == b.devices[k].privacy_weight);
    CHECK(a.devices[k].payoff_rate == b.devices[k].payoff_rate);
    CHECK(a.devices[k].position_m == b.devices[k].position_m);
  }
}

TEST_CASE("changing one range leaves the other fields of a seed untouched") {
  ScenarioSpec low;
  low.seed = 99;
  ScenarioSpec high = low;
  high.privacy_weight = {30.0, 35.0};
  const Scenario a = generate_scenario(low);
  const Scenario b = generate_scenario(high);
  for (std::size_t k = 0; k < a.n_devices(); ++k) {
    CHECK(a.devices[k].cpu_freq_hz == b.devices[k].cpu_freq_hz);
    CHECK(a.devices[k].payoff_rate == b.devices[k].payoff_rate);
    CHECK(a.devices[k].position_m == b.devices[k].position_m);
    // Same underlying uniform draw, shifted range: exactly +5.
    CHECK(b.devices[k].privacy_weight == doctest::Approx(a.devices[k].privacy_weight + 5.0));
  }
}

TEST_CASE("degenerate point ranges produce exactly those values") {
  ScenarioSpec spec;
  spec.n_devices = 1;
  spec.cpu_freq_hz = {2.0e9, 2.0e9};
  spec.privacy_weight = {27.0, 27.0};
  spec.payoff_rate = {5e-8, 5e-8};
  const Scenario sc = generate_scenario(spec);
  CHECK(sc.devices[0].cpu_freq_hz == 2.0e9);
  CHECK(sc.devices[0].privacy_weight == 27.0);
  CHECK(sc.devices[0].payoff_rate == 5e-8);
}

TEST_CASE("invalid range is rejected") {
  ScenarioSpec spec;
  spec.cpu_freq_hz = {2.4e9, 1.5e9};
  CHECK_THROWS_AS(generate_scenario(spec), validation_error);
  ScenarioSpec none;
  none.n_devices = 0;
  CHECK_THROWS_AS(generate_scenario(none), validation_error);
}

TEST_CASE("dBm/Hz conversion") {
  CHECK(dbm_per_hz_to_watt(-174.0) == doctest::Approx(std::pow(10.0, -20.4)).epsilon(1e-12));
  CHECK(dbm_per_hz_to_watt(30.0) == doctest::Approx(1.0));
}

TEST_CASE("config round trip carries the stated values") {
  const auto path = temp_file("sb_scenario_roundtrip.cfg");
  ScenarioSpec spec;
  spec.seed = 42;
  spec.kappa = 2e-28;
  spec.bandwidth_hz = 1e7;
  spec.gamma = 0.01;
  save_scenario_spec(spec, path);

  const Scenario sc = load_scenario(path);
  CHECK(sc.server.capacitance_coeff == 2e-28);
  CHECK(sc.server.bandwidth_hz == doctest::Approx(1e7));
  CHECK(sc.server.time_energy_balance == doctest::Approx(0.01));
  CHECK(sc.rng_seed == 42);

  // load twice -> identical scenario
  const Scenario again = load_scenario(path);
  for (std::size_t k = 0; k < sc.n_devices(); ++k)
    CHECK(sc.devices[k].cpu_freq_hz == again.devices[k].cpu_freq_hz);
  std::filesystem::remove(path);
}

TEST_CASE("empty config file is a parse error") {
  const auto path = temp_file("sb_scenario_empty.cfg");
  write_file(path, "");
  CHECK_THROWS_AS(load_scenario(path), parse_error);
  std::filesystem::remove(path);
}

TEST_CASE("gamma outside [0,1] names gamma") {
  const auto path = temp_file("sb_scenario_gamma.cfg");
  write_file(path, "[server]\ngamma = 1.5\n");
  try {
    load_scenario(path);
    FAIL("expected validation_error");
  } catch (const validation_error& e) {
    CHECK(std::string(e.what()).find("gamma") != std::string::npos);
  }
  std::filesystem::remove(path);
}

TEST_CASE("unknown keys and malformed lines carry line context") {
  const auto path = temp_file("sb_scenario_bad.cfg");
  write_file(path, "n_devices = 4\nbogus_key = 3\n");
  try {
    load_scenario(path);
    FAIL("expected parse_error");
  } catch (const parse_error& e) {
    const std::string msg = e.what();
    CHECK(msg.find("bogus_key") != std::string::npos);
    CHECK(msg.find("line 2") != std::string::npos);
  }

  write_file(path, "n_devices 4\n");
  CHECK_THROWS_AS(load_scenario(path), parse_error);
  write_file(path, "n_devices = abc\n");
  CHECK_THROWS_AS(load_scenario(path), parse_error);
  std::filesystem::remove(path);
}

TEST_CASE("missing optional keys take the reference defaults") {
  const auto path = temp_file("sb_scenario_minimal.cfg");
  write_file(path, "n_devices = 2\nseed = 5\n");
  const Scenario sc = load_scenario(path);
  CHECK(sc.n_devices() == 2);
  CHECK(sc.server.budget == 1215.0);
  CHECK(sc.server.local_steps == 25);
  CHECK(sc.server.cpu_freq_hz == 4.0e9);
  CHECK(sc.area_side_m == 50.0);
  CHECK(sc.pathloss_exponent == 4.0);
  CHECK(sc.server.noise_psd_watt_per_hz == doctest::Approx(std::pow(10.0, -20.4)));
  std::filesystem::remove(path);
}

TEST_CASE("scenario validation names the offending field") {
  ScenarioSpec spec;
  Scenario sc = generate_scenario(spec);
  sc.devices[3].position_m = {60.0, 10.0};  // outside the 50 m square
  try {
    sc.validate();
    FAIL("expected validation_error");
  } catch (const validation_error& e) {
    CHECK(std::string(e.what()).find("position_m") != std::string::npos);
  }
}

TEST_CASE("compute_scale loads from config and must be positive") {
  const auto path = temp_file("sb_scenario_scale.cfg");
  write_file(path, "n_devices = 2\ncompute_scale = 4.5\n");
  const Scenario sc = load_scenario(path);
  CHECK(sc.server.compute_scale == 4.5);

  write_file(path, "n_devices = 2\ncompute_scale = 0\n");
  CHECK_THROWS_AS(load_scenario(path), validation_error);
  std::filesystem::remove(path);

  // Not emitted when left at the default, round-trips when set.
  ScenarioSpec spec;
  spec.compute_scale = 3.0;
  const auto out = temp_file("sb_scenario_scale_out.cfg");
  save_scenario_spec(spec, out);
  CHECK(load_scenario(out).server.compute_scale == 3.0);
  std::filesystem::remove(out);
}
