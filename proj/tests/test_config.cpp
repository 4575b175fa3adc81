#include <filesystem>
#include <string>

#include "doctest.h"
#include "wpfeel/config.hpp"

using namespace wpfeel;

namespace {

const char* kMinimal = R"(
# comment line
cell_radius_m = 50      # trailing comment
num_devices = 3
num_antennas = 2
wpt_source = beacon
)";

std::string with(const std::string& extra) { return std::string(kMinimal) + extra + "\n"; }

std::string error_of(const std::string& text) {
  try {
    parse_scenario(text);
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

std::filesystem::path config_dir() { return std::filesystem::path(WPFEEL_SOURCE_DIR) / "configs"; }

}  // namespace

TEST_CASE("minimal config takes defaults for everything else") {
  const auto s = parse_scenario(kMinimal);
  CHECK(s.system.cell_radius_m == 50.0);
  CHECK(s.system.num_devices == 3);
  CHECK(s.system.num_antennas == 2);
  CHECK(std::holds_alternative<BeaconSource>(s.source));
  CHECK(s.system.uplink_pathloss_exp == 3.8);
  CHECK_FALSE(s.learning_rate_auto);
}

TEST_CASE("units are converted at the boundary") {
  const auto s = parse_scenario(with("noise_psd_dbm_per_hz = -80\ncompute_coeff_mflops = 0.01:0.03:0.01"));
  CHECK(s.system.noise_psd_w_per_hz == doctest::Approx(1e-11).epsilon(1e-12));
  REQUIRE(s.devices.compute_coeff_choices.size() == 3);
  CHECK(s.devices.compute_coeff_choices[0] == doctest::Approx(1e-20));
  CHECK(s.devices.compute_coeff_choices[2] == doctest::Approx(3e-20));
  const auto list = parse_scenario(with("compute_coeff_mflops = 0.02, 0.05"));
  CHECK(list.devices.compute_coeff_choices.size() == 2);
}

TEST_CASE("server source and automatic learning rate") {
  const auto s = parse_scenario(
      "cell_radius_m = 10\nnum_devices = 2\nnum_antennas = 4\nwpt_source = server\n"
      "server_power_w = 3\nserver_power_control = optimized\nlearning_rate = auto\n");
  const auto& src = std::get<ServerSource>(s.source);
  CHECK(src.per_device_power_w == 3.0);
  CHECK(src.control == PowerControl::kOptimized);
  CHECK(s.learning_rate_auto);
}

TEST_CASE("malformed configs are rejected with a location") {
  CHECK(error_of(with("bogus_key = 1")).find("unknown key 'bogus_key'") != std::string::npos);
  CHECK(error_of(with("bogus_key = 1")).find("line 7") != std::string::npos);
  CHECK(error_of(with("num_devices = 4")).find("repeated key") != std::string::npos);
  CHECK(error_of(with("bandwidth_hz = fast")).find("not a number") != std::string::npos);
  CHECK(error_of(with("num_rounds = 2.5")).find("not an integer") != std::string::npos);
  CHECK(error_of(with("just words")).find("expected 'key = value'") != std::string::npos);
  CHECK(error_of("num_devices = 3\nnum_antennas = 1\nwpt_source = beacon\n").find("cell_radius_m") !=
        std::string::npos);
  CHECK(error_of(with("server_power_w = 1")).find("server_* keys") != std::string::npos);
  CHECK(error_of(with("noise_psd_dbm_per_hz = -80\nnoise_psd_w_per_hz = 1e-11")).find("once") !=
        std::string::npos);
  CHECK(error_of(with("uplink_pathloss_exp = 2")).find("alpha") != std::string::npos);
  CHECK(error_of(with("compute_s = 0.8")).find("compute_s + comm_s") != std::string::npos);
  CHECK(error_of(with("compute_coeff_mflops = 0.1:0.01:0.01")).find("range") != std::string::npos);
}

TEST_CASE("devices are drawn deterministically from the coefficient set") {
  DeviceSpec spec;
  spec.compute_coeff_choices = {1e-20, 2e-20, 3e-20};
  const auto a = make_devices(spec, 50);
  const auto b = make_devices(spec, 50);
  REQUIRE(a.size() == 50);
  bool varied = false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].compute_coeff == b[i].compute_coeff);
    varied = varied || a[i].compute_coeff != a[0].compute_coeff;
  }
  CHECK(varied);
  spec.seed = 2;
  const auto c = make_devices(spec, 50);
  bool differs = false;
  for (std::size_t i = 0; i < a.size(); ++i) differs = differs || a[i].compute_coeff != c[i].compute_coeff;
  CHECK(differs);
}

TEST_CASE("config text round-trips") {
  const auto s = parse_scenario(with("learning_rate = 0.25\ncompute_coeff_mflops = 0.01:0.1:0.01\ntask_seed = 99"));
  const auto again = parse_scenario(to_config_text(s));
  CHECK(to_config_text(again) == to_config_text(s));
  CHECK(again.system.learning_rate == 0.25);
  CHECK(again.devices.compute_coeff_choices == s.devices.compute_coeff_choices);
  CHECK(again.task.seed == 99);
}

TEST_CASE("shipped configs parse") {
  const auto dir = config_dir();
  for (const char* name : {"paper_default.cfg", "server_default.cfg", "desk_simulation.cfg"}) {
    CAPTURE(name);
    const auto s = load_scenario(dir / name);
    CHECK(s.system.num_devices == 30);
    CHECK(s.system.num_antennas == 64);
    CHECK(s.devices.compute_coeff_choices.size() == 10);
  }
  const auto beacon = load_scenario(dir / "paper_default.cfg");
  CHECK(beacon.system.cell_radius_m == 100.0);
  CHECK(beacon.system.payload_bits() == 349440.0);
  CHECK(std::holds_alternative<ServerSource>(load_scenario(dir / "server_default.cfg").source));
  CHECK_THROWS_AS(load_scenario(dir / "does_not_exist.cfg"), ConfigError);
}
