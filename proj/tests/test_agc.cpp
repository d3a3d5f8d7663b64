#include <catch_amalgamated.hpp>

#include <cmath>
#include <limits>
#include <random>
#include <sstream>

#include <agcfdia/agc.hpp>
#include <agcfdia/attack.hpp>

#include "oracles/linear_agc.hpp"
#include "suites.hpp"

using namespace agcfdia;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

AttackSpec spec(Channel target, AttackKind kind, double t0, double dur) {
  AttackSpec a;
  a.target = target;
  a.kind = kind;
  a.start_t = t0;
  a.duration = dur;
  return a;
}

Scenario load_step(double magnitude, double at = 10.0, int area = 1) {
  Scenario s;
  s.load_area = area;
  s.load_magnitude = magnitude;
  s.load_time = at;
  return s;
}

}  // namespace

// ---- attack waveforms -----------------------------------------------------------

TEST_CASE("step attack is identity before its start", "[attack]") {
  auto a = spec(Channel::F1, AttackKind::STEP, 10.0, 5.0);
  a.magnitude_a = 0.01;
  CHECK(apply_attack(a, 5.0, 0.2) == 0.2);
  CHECK_THAT(apply_attack(a, 12.0, 0.2), WithinAbs(0.21, 1e-15));
  CHECK_THAT(apply_attack(a, 70.0, 0.2), WithinAbs(0.21, 1e-15));
}

TEST_CASE("ramp grows inside the window and holds its final offset", "[attack]") {
  auto a = spec(Channel::F2, AttackKind::RAMP, 10.0, 20.0);
  a.slope_r = 0.001;
  CHECK_THAT(apply_attack(a, 15.0, 0.0), WithinAbs(0.005, 1e-15));
  CHECK_THAT(apply_attack(a, 40.0, 0.0), WithinAbs(0.02, 1e-15));
}

TEST_CASE("scaling multiplies by one plus lambda inside the window only", "[attack]") {
  auto a = spec(Channel::PTIE, AttackKind::SCALING, 10.0, 20.0);
  a.scale_lambda = 0.2;
  CHECK_THAT(apply_attack(a, 15.0, 0.05), WithinAbs(0.06, 1e-15));
  CHECK(apply_attack(a, 31.0, 0.05) == 0.05);
}

TEST_CASE("pulse is additive inside the window only", "[attack]") {
  auto a = spec(Channel::PTIE, AttackKind::PULSE, 10.0, 5.0);
  a.magnitude_a = 0.3;
  CHECK(apply_attack(a, 16.0, 0.1) == 0.1);
  CHECK_THAT(apply_attack(a, 12.0, 0.1), WithinAbs(0.4, 1e-15));
}

TEST_CASE("combined attack scales first and then adds the ramp", "[attack]") {
  auto a = spec(Channel::F1, AttackKind::COMBINED, 0.0, 10.0);
  a.scale_lambda = 1.0;
  a.slope_r = 0.1;
  CHECK_THAT(apply_attack(a, 5.0, 2.0), WithinAbs(2.0 * 2.0 + 0.5, 1e-12));
  CHECK_THAT(apply_attack(a, 20.0, 2.0), WithinAbs(2.0 + 1.0, 1e-12));
}

TEST_CASE("apply_to_channels touches only the target channel", "[attack]") {
  const ChannelValues truth{0.011, -0.023, 0.0047};
  CHECK(apply_to_channels(std::nullopt, 30.0, truth) == truth);

  auto step = spec(Channel::F2, AttackKind::STEP, 10.0, 5.0);
  step.magnitude_a = 0.02;
  const auto m = apply_to_channels(step, 20.0, truth);
  CHECK(m.f1 == truth.f1);
  CHECK(m.ptie == truth.ptie);
  CHECK(m.f2 == truth.f2 + 0.02);

  auto pulse = spec(Channel::PTIE, AttackKind::PULSE, 10.0, 5.0);
  pulse.magnitude_a = 1.0;
  CHECK(apply_to_channels(pulse, 40.0, truth) == truth);
}

TEST_CASE("non-target channels are bit-identical for random specs", "[attack][property]") {
  std::mt19937_64 rng(41);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int k = 0; k < 20000; ++k) {
    AttackSpec a;
    a.target = kChannels[static_cast<std::size_t>(k % 3)];
    a.kind = kAttackKinds[static_cast<std::size_t>(k % 5)];
    a.start_t = 40.0 + 40.0 * u(rng);
    a.duration = 1.0 + 20.0 * std::abs(u(rng));
    a.magnitude_a = u(rng);
    a.slope_r = u(rng);
    a.scale_lambda = u(rng);
    const ChannelValues truth{u(rng), u(rng), u(rng)};
    const double t = 40.0 + 40.0 * u(rng);
    const auto m = apply_to_channels(a, t, truth);
    for (auto c : kChannels)
      if (c != a.target) REQUIRE(m[c] == truth[c]);
    if (t < a.start_t) REQUIRE(m == truth);
  }
}

TEST_CASE("scenario JSON round-trips and infers the label", "[attack]") {
  Scenario s = load_step(0.03, 12.0, 2);
  auto a = spec(Channel::PTIE, AttackKind::RAMP, 20.0, 10.0);
  a.slope_r = 0.002;
  s.attack = a;
  s.label = 3;
  const nlohmann::json j = s;
  CHECK(j.get<Scenario>() == s);
  auto unlabeled = j;
  unlabeled.erase("label");
  CHECK(unlabeled.get<Scenario>().label == 3);
  CHECK_THROWS_AS(validate(Scenario{2, 0.01, 5.0, std::nullopt, 1}, 80.0), InvalidArgument);
}

// ---- plant blocks ------------------------------------------------------------------

TEST_CASE("deadband examples and invariants", "[agc]") {
  CHECK(deadband(0.0002, 0.001) == 0.0);
  CHECK_THAT(deadband(0.002, 0.001), WithinAbs(0.0015, 1e-18));
  CHECK_THAT(deadband(-0.002, 0.001), WithinAbs(-0.0015, 1e-18));
  CHECK(deadband(0.0005, 0.001) == 0.0);
  const auto v = suites::deadband_suite(200000);
  INFO(v.detail);
  CHECK(v.pass);
}

TEST_CASE("rate limiter examples", "[agc]") {
  CHECK_THAT(rate_limit(0.0, 0.1, 0.0017, 0.01), WithinAbs(0.000017, 1e-18));
  CHECK(rate_limit(0.0, 0.00001, 0.0017, 0.01) == 0.00001);
  CHECK_THAT(rate_limit(0.05, 0.0, 0.0017, 0.01), WithinAbs(0.049983, 1e-15));
}

TEST_CASE("zero state with zero inputs is an exact fixed point", "[agc]") { CHECK(suites::zero_fixed_point()); }

TEST_CASE("a load step makes the local frequency fall on the first step", "[agc]") {
  AgcParameters p;
  auto s = SystemState::zero(p, 0.005);
  const auto next = step_dynamics(s, p, {0.02, 0.0}, s.true_channels(), 0.005);
  CHECK(next.delta_f[0] < 0.0);
  CHECK(next.delta_f[1] == 0.0);
}

TEST_CASE("a measured offset reaches the integrator only after the ACE delay", "[agc]") {
  AgcParameters p;
  const double dt = 0.005;
  auto s = SystemState::zero(p, dt);
  const std::size_t delay = s.ace_delay.delay_steps();
  REQUIRE(delay == 400);
  const ChannelValues measured{0.01, 0.0, 0.0};
  for (std::size_t n = 0; n <= delay; ++n) {
    // true plant stays at rest: only the integrator may move
    s.delta_f = {0.0, 0.0};
    s.delta_Pm = {0.0, 0.0};
    s.delta_Pv = {0.0, 0.0};
    s.delta_Ptie = 0.0;
    const auto x_before = s.integrator_x[0];
    s = step_dynamics(s, p, {0.0, 0.0}, measured, dt);
    if (n < delay) {
      REQUIRE(s.integrator_x[0] == 0.0);
    } else {
      // hand-integrated: dx = -KI * B * 0.01 * dt for the first delayed sample
      CHECK_THAT(s.integrator_x[0] - x_before,
                 WithinRel(-p.area[0].integral_gain_KI * p.area[0].bias_B * 0.01 * dt, 1e-12));
    }
  }
  CHECK(s.integrator_x[1] == 0.0);
}

TEST_CASE("delay line returns the ACE pushed k calls earlier", "[agc]") {
  AceDelayLine line(3);
  std::vector<std::array<double, 2>> out;
  for (int n = 0; n < 8; ++n) out.push_back(line.push({static_cast<double>(n), -static_cast<double>(n)}));
  for (int n = 0; n < 3; ++n) CHECK(out[static_cast<std::size_t>(n)] == std::array<double, 2>{0.0, 0.0});
  for (int n = 3; n < 8; ++n) CHECK(out[static_cast<std::size_t>(n)][0] == n - 3);
}

// ---- closed loop ------------------------------------------------------------------------

TEST_CASE("quiet scenario yields an all-zero 800-point trajectory", "[agc]") {
  const auto traj = simulate(AgcParameters{}, SimulationConfig{}, Scenario{});
  REQUIRE(traj.size() == 800);
  CHECK(traj.t.back() == Catch::Approx(79.9));
  for (auto c : kChannels)
    for (double v : traj.channel(c)) REQUIRE(v == 0.0);
}

TEST_CASE("load step: frequency dips, tie flow opposes, loop settles near the band", "[agc]") {
  const AgcParameters p;
  const auto traj = simulate(p, SimulationConfig{}, load_step(0.02));
  const auto ref = oracle::linear_reference(p, SimulationConfig{}, 1, 0.02, 10.0);
  const double dip = *std::min_element(traj.f1.begin(), traj.f1.end());
  CHECK(dip < 0.0);
  const double ref_dip = *std::min_element(ref[0].begin(), ref[0].end());
  CHECK(ref_dip < 0.0);
  // at the area-1 dip, power flows from area 2 into area 1: Ptie (1 -> 2) is negative
  const auto at = static_cast<std::size_t>(std::min_element(traj.f1.begin(), traj.f1.end()) - traj.f1.begin());
  CHECK(traj.ptie[at] < 0.0);
  CHECK(ref[2][at] < 0.0);
  // the residual over the last 5 s stays within 5x the dead-band-induced bound R w / 2
  const double bound = 5.0 * p.area[0].droop_R * p.gdb_width / 2.0;
  for (std::size_t k = traj.size() - 50; k < traj.size(); ++k) CHECK(std::abs(traj.f1[k]) <= bound);
}

TEST_CASE("attacking f2 changes only the measured f2 channel before feedback acts", "[agc]") {
  const AgcParameters p;
  auto sc = load_step(0.02);
  const auto base = simulate(p, SimulationConfig{}, sc);
  auto a = spec(Channel::F2, AttackKind::STEP, 30.0, 10.0);
  a.magnitude_a = 0.01;
  sc.attack = a;
  sc.label = 2;
  const auto attacked = simulate(p, SimulationConfig{}, sc);
  for (std::size_t k = 0; k < base.size(); ++k) {
    if (base.t[k] < 30.0) {
      REQUIRE(attacked.f1[k] == base.f1[k]);
      REQUIRE(attacked.f2[k] == base.f2[k]);
      REQUIRE(attacked.ptie[k] == base.ptie[k]);
    } else if (base.t[k] < 30.0 + p.ace_delay_tau) {
      // the falsified ACE has not reached the plant yet
      REQUIRE(attacked.f1[k] == base.f1[k]);
      REQUIRE(attacked.ptie[k] == base.ptie[k]);
      REQUIRE(attacked.f2[k] == Catch::Approx(base.f2[k] + 0.01).margin(1e-15));
    }
  }
}

TEST_CASE("GRC bound holds on random attacked scenarios", "[agc][property]") {
  const auto v = suites::grc_bound_suite(25);
  INFO(v.detail);
  CHECK(v.pass);
}

TEST_CASE("linear limit agrees with the state-space reference", "[agc][oracle]") {
  const auto v = suites::linear_limit_suite();
  INFO(v.detail);
  CHECK(v.pass);
}

TEST_CASE("simulation is deterministic", "[agc]") {
  std::mt19937_64 rng(8);
  const auto sc = suites::random_scenario(rng);
  CHECK(simulate(AgcParameters{}, SimulationConfig{}, sc) == simulate(AgcParameters{}, SimulationConfig{}, sc));
}

TEST_CASE("parameter validation rejects inconsistent plants", "[agc]") {
  AgcParameters p;
  p.area[0].droop_R = 3.0;
  CHECK_THROWS_AS(p.validate(), InvalidArgument);
  p.recompute_bias();
  CHECK_NOTHROW(p.validate());
  SimulationConfig c;
  c.measurement_rate = 7.0;
  CHECK_THROWS_AS(c.validate(), InvalidArgument);
}

TEST_CASE("unstable parameters raise NonFiniteState", "[agc]") {
  AgcParameters p;
  for (auto& a : p.area) {
    a.integral_gain_KI = 1e9;
  }
  p.grc_limit = std::numeric_limits<double>::infinity();
  SimulationConfig c;
  c.horizon = 300.0;
  CHECK_THROWS_AS(simulate(p, c, load_step(0.05)), NonFiniteState);
}

TEST_CASE("trajectory CSV has a header and one row per sample", "[agc]") {
  const auto traj = simulate(AgcParameters{}, SimulationConfig{}, load_step(0.01));
  std::ostringstream os;
  write_trajectory_csv(os, traj);
  const auto text = os.str();
  CHECK(text.rfind("t,f1,f2,ptie\n", 0) == 0);
  CHECK(std::count(text.begin(), text.end(), '\n') == 801);
}

TEST_CASE("plant JSON round-trips and keeps defaults for missing keys", "[agc]") {
  AgcParameters p;
  p.gdb_width = 0.001;
  const nlohmann::json j = p;
  CHECK(j.get<AgcParameters>() == p);
  CHECK(nlohmann::json::object().get<AgcParameters>() == AgcParameters{});
}
