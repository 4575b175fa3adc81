#include <algorithm>
#include <cmath>
#include <vector>

#include "doctest.h"
#include "wpfeel/mathkit.hpp"
#include "wpfeel/sysmodel.hpp"

using namespace wpfeel;

namespace {

SystemConfig desk_config() {
  SystemConfig c;
  c.uplink_pathloss_exp = 3.8;
  return c;
}

}  // namespace

TEST_CASE("default config validates and dBm conversion round-trips") {
  CHECK_NOTHROW(desk_config().validate());
  CHECK(dbm_per_hz_to_w_per_hz(-80.0) == doctest::Approx(1e-11).epsilon(1e-12));
  CHECK(w_per_hz_to_dbm_per_hz(1e-11) == doctest::Approx(-80.0).epsilon(1e-12));
}

TEST_CASE("config invariants are enforced") {
  auto broken = [](auto mutate) {
    SystemConfig c;
    mutate(c);
    return c;
  };
  CHECK_THROWS_AS(broken([](SystemConfig& c) { c.uplink_pathloss_exp = 2.0; }).validate(), ConfigError);
  CHECK_THROWS_AS(broken([](SystemConfig& c) { c.wpt_pathloss_exp = 1.5; }).validate(), ConfigError);
  CHECK_THROWS_AS(broken([](SystemConfig& c) { c.wpt_min_dist_m = 0.5; }).validate(), ConfigError);
  CHECK_THROWS_AS(broken([](SystemConfig& c) { c.conversion_gain = 1.1; }).validate(), ConfigError);
  CHECK_THROWS_AS(broken([](SystemConfig& c) { c.compute_s = 0.7; }).validate(), ConfigError);
  CHECK_THROWS_AS(broken([](SystemConfig& c) { c.cell_radius_m = 0.0; }).validate(), ConfigError);
  try {
    broken([](SystemConfig& c) { c.compute_s = 0.9; }).validate();
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("compute_s + comm_s") != std::string::npos);
  }
}

TEST_CASE("phi") {
  SystemConfig c = desk_config();
  SUBCASE("value at the communication duration") {
    // 1e6 * 1e-11 * 0.5 * (2^(349440 / 5e5) - 1)
    CHECK(phi(0.5, c) == doctest::Approx(3.11622069343702068e-6).epsilon(1e-12));
    CHECK(phi(1.0, c) == doctest::Approx(2.74065986786949798e-6).epsilon(1e-12));
    CHECK(c.payload_bits() == 349440.0);
  }
  SUBCASE("monotone decreasing and convex") {
    std::vector<double> v;
    for (int i = 1; i <= 400; ++i) v.push_back(phi(0.005 * i, c));
    for (std::size_t i = 1; i < v.size(); ++i) CHECK(v[i] < v[i - 1]);
    for (std::size_t i = 1; i + 1 < v.size(); ++i) CHECK(v[i - 1] - 2 * v[i] + v[i + 1] >= -1e-15 * v[i]);
    CHECK(phi(1.0, c) < phi(0.5, c));
  }
  SUBCASE("overflow guard and domain") {
    CHECK(is_infinite_cost(phi(1e-4, c)));  // exponent 3494 > 1000
    CHECK_FALSE(is_infinite_cost(phi(0.5, c)));
    CHECK_THROWS_AS(phi(0.0, c), math::DomainError);
  }
}

TEST_CASE("beacon energy") {
  SystemConfig c = desk_config();
  const BeaconSource b{1.0, 1e-3};
  CHECK(spatial_energy_density(b, c) == doctest::Approx(1e-3));
  CHECK(beacon_harvested_energy(b, c) == doctest::Approx(math::kPi * 1e-3).epsilon(1e-14));
  CHECK(beacon_harvested_energy({2.0, 1e-3}, c) == doctest::Approx(2.0 * beacon_harvested_energy(b, c)));
  CHECK(beacon_harvested_energy(b, c) / spatial_energy_density(b, c) ==
        doctest::Approx(beacon_harvest_factor(c)).epsilon(1e-14));
  c.wpt_pathloss_exp = 2.0;
  CHECK_THROWS_AS(beacon_harvest_factor(c), math::DomainError);
}

TEST_CASE("server harvested energy") {
  SystemConfig c = desk_config();
  c.conversion_gain = 1.0;
  c.round_s = 5.0;
  c.compute_s = 4.0;
  const ServerSource s{1.0, PowerControl::kEqual};
  ChannelDraw d{1.0, 1.0, 2.0};
  CHECK(server_harvested_energy(s, d, 3.0, c) == doctest::Approx(24.0).epsilon(1e-14));
  ChannelDraw far = d;
  far.distance_m = 2.0;
  CHECK(server_harvested_energy(s, far, 3.0, c) ==
        doctest::Approx(24.0 * std::pow(2.0, -c.uplink_pathloss_exp)).epsilon(1e-14));
  d.wpt_gain = 0.0;
  CHECK(server_harvested_energy(s, d, 3.0, c) == 0.0);
  CHECK(server_harvested_energy(s, far, 0.0, c) == 0.0);
  ChannelDraw missing{1.0, 1.0, std::nullopt};
  CHECK_THROWS(server_harvested_energy(s, missing, 1.0, c));
}

TEST_CASE("required communication energy") {
  SystemConfig c = desk_config();
  CHECK(required_comm_energy({0.0, 1.0, std::nullopt}, c) == 0.0);
  const ChannelDraw d{37.0, 12.5, std::nullopt};
  const double e = required_comm_energy(d, c);
  CHECK(required_comm_energy({37.0, 6.25, std::nullopt}, c) == doctest::Approx(2.0 * e).epsilon(1e-14));
  CHECK(e * d.uplink_gain / std::pow(d.distance_m, c.uplink_pathloss_exp) ==
        doctest::Approx(phi(c.comm_s, c)).epsilon(1e-12));
  CHECK(is_infinite_cost(required_comm_energy({10.0, 0.0, std::nullopt}, c)));
}

TEST_CASE("device profile from chip description") {
  const auto p = DeviceProfile::from_chip(8e-18, 2, 1.0, 1e6, 50);
  CHECK(p.compute_coeff == doctest::Approx(1e-18).epsilon(1e-14));
  DeviceProfile bad = p;
  bad.compute_coeff *= 1.001;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  DeviceProfile neg;
  neg.compute_coeff = 0.0;
  CHECK_THROWS_AS(neg.validate(), ConfigError);
}

TEST_CASE("sampled channels follow the model laws") {
  SystemConfig c = desk_config();
  c.num_antennas = 4;
  const int n = 1000000;
  RandomStream rng(11, {purpose(StreamPurpose::kChannel)});
  double sum_h = 0, sum_h2 = 0, sum_r2 = 0, sum_r4 = 0;
  int out_of_range = 0;
  for (int i = 0; i < n; ++i) {
    const auto d = sample_channel(rng, c, true);
    if (!d.wpt_gain || d.distance_m < 0.0 || d.distance_m > c.cell_radius_m || d.uplink_gain < 0.0) ++out_of_range;
    sum_h += d.uplink_gain;
    sum_h2 += d.uplink_gain * d.uplink_gain;
    const double r2 = d.distance_m * d.distance_m;
    sum_r2 += r2;
    sum_r4 += r2 * r2;
  }
  CHECK(out_of_range == 0);
  const double mh = sum_h / n, sh = std::sqrt((sum_h2 / n - mh * mh) / n);
  CHECK(std::abs(mh - 4.0) < 4.0 * sh);
  const double mr = sum_r2 / n, sr = std::sqrt((sum_r4 / n - mr * mr) / n);
  CHECK(std::abs(mr - 5000.0) < 4.0 * sr);
}

TEST_CASE("single-antenna gain is exponential (Kolmogorov-Smirnov)") {
  SystemConfig c = desk_config();
  c.num_antennas = 1;
  RandomStream rng(5, {purpose(StreamPurpose::kChannel), 1});
  const int n = 20000;
  std::vector<double> h(n);
  for (auto& x : h) x = sample_channel(rng, c, false).uplink_gain;
  std::sort(h.begin(), h.end());
  double d = 0.0;
  for (int i = 0; i < n; ++i) {
    const double f = 1.0 - std::exp(-h[i]);
    d = std::max({d, f - static_cast<double>(i) / n, static_cast<double>(i + 1) / n - f});
  }
  CHECK(d < 1.628 / std::sqrt(static_cast<double>(n)));  // 1% critical value
}

TEST_CASE("sampling is reproducible from stream coordinates") {
  SystemConfig c = desk_config();
  RandomStream a(42, {purpose(StreamPurpose::kChannel), 3, 7});
  RandomStream b(42, {purpose(StreamPurpose::kChannel), 3, 7});
  RandomStream other(42, {purpose(StreamPurpose::kChannel), 3, 8});
  for (int i = 0; i < 100; ++i) {
    const auto x = sample_channel(a, c, true);
    const auto y = sample_channel(b, c, true);
    const auto z = sample_channel(other, c, true);
    CHECK(x.distance_m == y.distance_m);
    CHECK(x.uplink_gain == y.uplink_gain);
    CHECK(*x.wpt_gain == *y.wpt_gain);
    CHECK(x.uplink_gain != z.uplink_gain);
  }
}
