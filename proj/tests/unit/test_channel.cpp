#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "helpers.hpp"
#include "uavsec/channel.hpp"

using namespace uavsec;

namespace {

ChannelParams table_channel() { return ChannelParams::from(SimConfig{}); }

// Plain re-evaluation of the A2G chain for one link.
double a2g_gain_oracle(double r, double h, double fc) {
  const double d = std::sqrt(h * h + r * r);
  const double theta = std::asin(h / d) * 180.0 / std::numbers::pi;
  const double p = 1.0 / (1.0 + 12.08 * std::exp(-0.11 * (theta - 12.08)));
  const double lfs = 20 * std::log10(d) + 20 * std::log10(fc) + 20 * std::log10(4 * std::numbers::pi / 299792458.0);
  const double loss = lfs + (1.6 - 23.0) * p + 23.0;
  return std::pow(10.0, -loss / 10.0);
}

}  // namespace

TEST_CASE("LoS probability straight below the UAV") {
  const double want = 1.0 / (1.0 + 12.08 * std::exp(-0.11 * (90.0 - 12.08)));
  CHECK(los_probability(0, 70, 12.08, 0.11) == doctest::Approx(want).epsilon(1e-12));
  CHECK(los_probability(0, 70, 12.08, 0.11) == doctest::Approx(0.99771).epsilon(1e-5));
}

TEST_CASE("LoS probability approaches its floor far away") {
  const double floor = 1.0 / (1.0 + 12.08 * std::exp(12.08 * 0.11));
  CHECK(los_probability(1e9, 70, 12.08, 0.11) == doctest::Approx(floor).epsilon(1e-6));
  CHECK(los_probability(100, 70, 12.08, 0.11) > los_probability(400, 70, 12.08, 0.11));
}

TEST_CASE("LoS probability increases with elevation") {
  double prev = los_probability(5000, 70, 12.08, 0.11);
  for (double r = 4990; r >= 0; r -= 10) {
    const double p = los_probability(r, 70, 12.08, 0.11);
    CHECK(p > prev);
    CHECK(p <= 1.0);
    prev = p;
  }
}

TEST_CASE("free-space loss grows 20 log10 2 per doubling") {
  for (double d : {1.0, 70.0, 333.0})
    CHECK(free_space_loss_db(2 * d, 2e9) - free_space_loss_db(d, 2e9) ==
          doctest::Approx(20 * std::log10(2.0)).epsilon(1e-12));
  CHECK(20 * std::log10(2.0) == doctest::Approx(6.0206).epsilon(1e-5));
}

TEST_CASE("certain LoS leaves only the LoS excess loss") {
  ChannelParams ch = table_channel();
  ch.eta_b = 10.0;  // makes the sigmoid saturate at 90 degrees
  const LinkBudget lb = a2g_gain({0, 0}, {0, 0}, ch);
  CHECK(lb.p_los == 1.0);
  CHECK(lb.path_loss_db == doctest::Approx(free_space_loss_db(70, 2e9) + ch.eta_los_db).epsilon(1e-12));
}

TEST_CASE("A2G gain matches a scalar evaluation") {
  const ChannelParams ch = table_channel();
  const LinkBudget lb = a2g_gain({10, 20}, {110, 20}, ch);
  CHECK(lb.distance_3d_m == doctest::Approx(std::sqrt(70.0 * 70 + 100 * 100)));
  CHECK(testutil::rel_err(lb.gain_linear, a2g_gain_oracle(100, 70, 2e9)) < 1e-12);
  CHECK(lb.gain_linear == doctest::Approx(std::pow(10.0, -lb.path_loss_db / 10)).epsilon(1e-12));
  CHECK(lb.gain_linear > 0);
}

TEST_CASE("A2G gain falls with distance") {
  const ChannelParams ch = table_channel();
  double prev = a2g_gain({0, 0}, {0, 0}, ch).gain_linear;
  for (double r = 5; r <= 1000; r += 5) {
    const double g = a2g_gain({0, 0}, {r, 0}, ch).gain_linear;
    CHECK(g < prev);
    prev = g;
  }
}

TEST_CASE("A2A gain is inverse square from the 1 m reference") {
  CHECK(a2a_gain({0, 0}, {1, 0}, -50) == doctest::Approx(1e-5).epsilon(1e-12));
  CHECK(a2a_gain({0, 0}, {0, 10}, -50) == doctest::Approx(1e-7).epsilon(1e-12));
  CHECK(a2a_gain({0, 0}, {60, 80}, -50) == doctest::Approx(1e-9).epsilon(1e-12));
  CHECK_THROWS_AS(a2a_gain({3, 4}, {3, 4}, -50), std::domain_error);
}

TEST_CASE("single-link rate with SNR 100") {
  RateInputs in;
  in.noise_w = 1e-14;
  in.bandwidth_hz = 1e6;
  in.tx_powers_w = {1.0};
  in.gains_to_target = {100 * 1e-14};
  CHECK(user_rate(0, in) == doctest::Approx(1e6 * std::log2(101.0)).epsilon(1e-12));
  CHECK(eve_rate(0, in) == doctest::Approx(1e6 * std::log2(101.0)).epsilon(1e-12));
  in.tx_powers_w = {0.0};
  CHECK(user_rate(0, in) == 0.0);
}

TEST_CASE("rates respond to interference and jamming") {
  RateInputs in;
  in.noise_w = 1e-14;
  in.bandwidth_hz = 1e6;
  in.tx_powers_w = {1.0, 0.5};
  in.gains_to_target = {1e-10, 3e-11};
  const double base = user_rate(0, in);
  const double want = 1e6 * std::log2(1.0 + 1e-10 / (1e-14 + 0.5 * 3e-11));
  CHECK(base == doctest::Approx(want).epsilon(1e-12));
  in.jam_power_w = 0.3;
  in.jam_gain = 1e-11;
  CHECK(user_rate(0, in) < base);

  // a jammer sitting almost on top of E silences it
  RateInputs eve = in;
  eve.jam_gain = 1e-5;
  CHECK(eve_rate(0, eve) < 1e-3 * eve_rate(0, in));

  // swapping two equal interferers changes nothing
  RateInputs three;
  three.noise_w = 1e-14;
  three.bandwidth_hz = 1e6;
  three.tx_powers_w = {1.0, 0.4, 0.7};
  three.gains_to_target = {1e-9, 2e-10, 5e-11};
  RateInputs swapped = three;
  std::swap(swapped.tx_powers_w[1], swapped.tx_powers_w[2]);
  std::swap(swapped.gains_to_target[1], swapped.gains_to_target[2]);
  CHECK(eve_rate(0, swapped) == doctest::Approx(eve_rate(0, three)).epsilon(1e-14));
}

TEST_CASE("rates are monotone in own and interfering power") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> p(0.01, 1.0), g(1e-12, 1e-8);
  for (int t = 0; t < 500; ++t) {
    RateInputs in;
    in.noise_w = 1e-14;
    in.bandwidth_hz = 1e6;
    in.tx_powers_w = {p(rng), p(rng)};
    in.gains_to_target = {g(rng), g(rng)};
    in.jam_power_w = p(rng);
    in.jam_gain = g(rng);
    const double r0 = user_rate(0, in);
    CHECK(r0 >= 0);
    RateInputs up = in;
    up.tx_powers_w[0] *= 1.5;
    CHECK(user_rate(0, up) > r0);
    RateInputs other = in;
    other.tx_powers_w[1] *= 1.5;
    CHECK(user_rate(0, other) < r0);
    RateInputs jam = in;
    jam.jam_power_w *= 1.5;
    CHECK(eve_rate(0, jam) < eve_rate(0, in));
  }
}

TEST_CASE("secrecy rate is the positive part of the gap") {
  CHECK(secrecy_rate(5e6, 2e6) == 3e6);
  CHECK(secrecy_rate(2e6, 5e6) == 0);
  CHECK(secrecy_rate(4e6, 4e6) == 0);
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(0, 1e7);
  for (int i = 0; i < 1000; ++i) {
    const double a = u(rng), b = u(rng);
    CHECK(secrecy_rate(a, b) + secrecy_rate(b, a) == doctest::Approx(std::abs(a - b)));
  }
}
