#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include "fescycle/env.hpp"
#include "fescycle/error.hpp"

using namespace fes;
using namespace fes::env;

namespace {

Action uniform_action(double s) {
  Action a;
  a.fill(s);
  return a;
}

Policy zero_policy() {
  return [](const Observation &) { return Action{}; };
}

EpisodeConfig tracker_config() {
  EpisodeConfig c;
  c.mode = Mode::Tracker;
  return c;
}

} // namespace

TEST_CASE("starter reward examples") {
  auto r = reward_starter(3.0, uniform_action(0.0));
  CHECK(r.reward == 3.0);
  CHECK_FALSE(r.terminal);

  r = reward_starter(5.0, uniform_action(0.6));
  CHECK(std::abs(r.reward - 99.64) < 1e-12);
  CHECK(r.terminal);

  r = reward_starter(0.0, uniform_action(1.0));
  CHECK(r.reward == -1.0);
  CHECK_FALSE(r.terminal);
}

TEST_CASE("tracker reward examples") {
  CHECK(reward_tracker(5.0, 5.0, uniform_action(0.0)) == 0.0);
  CHECK(std::abs(reward_tracker(4.0, 5.0, uniform_action(1.0)) + 2.0) < 1e-12);
  CHECK(std::abs(reward_tracker(8.0, 5.0, uniform_action(0.5)) + 3.25) < 1e-12);
}

TEST_CASE("reward bounds") {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double cadence_max = 20.0, desired_max = 8.0;
  for (int i = 0; i < 5000; ++i) {
    Action a;
    for (auto &s : a) {
      s = u(rng);
    }
    const double cadence = cadence_max * u(rng);
    const double desired = 3.0 + 5.0 * u(rng);
    const double rt = reward_tracker(cadence, desired, a);
    CHECK(rt <= 0.0);
    CHECK(rt >= -(cadence_max + desired_max) - 1.0);
    const auto rs = reward_starter(cadence, a);
    if (!rs.terminal) {
      CHECK(rs.reward >= -1.0);
      CHECK(rs.reward <= cadence_max);
    }
  }
}

TEST_CASE("effort penalty strictly decreases reward in each intensity") {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < 2000; ++i) {
    Action a;
    for (auto &s : a) {
      s = u(rng);
    }
    const std::size_t k = i % a.size();
    auto b = a;
    b[k] = std::min(1.0, a[k] + 0.01 + 0.5 * u(rng));
    if (b[k] == a[k]) {
      continue;
    }
    CHECK(reward_tracker(4.0, 5.0, b) < reward_tracker(4.0, 5.0, a));
    CHECK(reward_starter(2.0, b).reward < reward_starter(2.0, a).reward);
    CHECK(reward_starter(6.0, b).reward < reward_starter(6.0, a).reward);
  }
}

TEST_CASE("observation layout round-trips") {
  mech::RigState s;
  s.theta = 2.5;
  s.theta_dot = 4.0;
  s.muscles[3].m_rest = 0.5;
  s.muscles[3].m_active = 0.1;
  s.muscles[3].m_fatigued = 0.4;
  for (Mode mode : {Mode::Starter, Mode::Tracker}) {
    const auto obs = Observation::build(mode, s, 7.0);
    const auto v = obs.to_vector();
    REQUIRE(v.size() == Observation::dim(mode));
    CHECK(v[0] == doctest::Approx(2.5 / mech::kTwoPi));
    CHECK(v[1] == doctest::Approx(0.4));
    const std::size_t f0 = mode == Mode::Tracker ? 3 : 2;
    if (mode == Mode::Tracker) {
      CHECK(v[2] == doctest::Approx(0.7));
    }
    CHECK(v[f0 + 3] == doctest::Approx(0.6));
    CHECK(v[f0] == 1.0);
    const auto back = Observation::from_vector(mode, v);
    CHECK(back.to_vector() == v);
  }
  CHECK(Observation::dim(Mode::Starter) == 8);
  CHECK(Observation::dim(Mode::Tracker) == 9);
  const std::vector<double> wrong(5, 0.0);
  CHECK_THROWS_AS(Observation::from_vector(Mode::Tracker, wrong), ContractError);
}

TEST_CASE("observation entries stay within the normalized range") {
  mech::RigState s;
  s.theta = 6.2;
  s.theta_dot = 40.0;
  const auto v = Observation::build(Mode::Tracker, s, 30.0).to_vector();
  for (double x : v) {
    CHECK(x >= 0.0);
    CHECK(x <= 1.2);
  }
  s.theta_dot = -3.0;
  CHECK(Observation::build(Mode::Starter, s, 0.0).cadence_norm == 0.0);
}

TEST_CASE("reset is deterministic and starts fresh") {
  CyclingEnv env(Plant{}, EpisodeConfig{});
  const auto a = env.reset(42).to_vector();
  const double theta = env.state().theta;
  const auto b = env.reset(42).to_vector();
  CHECK(a == b);
  CHECK(env.state().theta == theta);
  CHECK(env.state().theta_dot == 0.0);
  for (const auto &m : env.state().muscles) {
    CHECK(m.m_rest == 1.0);
  }
  for (double f : env.state().fatigue_factors()) {
    CHECK(f == 1.0);
  }
  CHECK(env.reset(43).theta_norm != a[0]);
}

TEST_CASE("reset angles are uniform on the circle") {
  CyclingEnv env(Plant{}, EpisodeConfig{});
  const int n = 10000;
  std::vector<double> x;
  x.reserve(n);
  for (int i = 0; i < n; ++i) {
    env.reset(static_cast<std::uint64_t>(i));
    const double th = env.state().theta;
    REQUIRE(th >= 0.0);
    REQUIRE(th < mech::kTwoPi);
    x.push_back(th / mech::kTwoPi);
  }
  std::sort(x.begin(), x.end());
  double d = 0.0;
  for (int i = 0; i < n; ++i) {
    d = std::max({d, (i + 1.0) / n - x[static_cast<std::size_t>(i)],
                  x[static_cast<std::size_t>(i)] - static_cast<double>(i) / n});
  }
  // Asymptotic Kolmogorov critical value for p = 0.01.
  CHECK(d < 1.628 / std::sqrt(static_cast<double>(n)));
}

TEST_CASE("tracker reset draws the desired cadence from the range") {
  auto cfg = tracker_config();
  CyclingEnv env(Plant{}, cfg);
  double lo = 1e9, hi = -1e9;
  for (std::uint64_t seed = 0; seed < 500; ++seed) {
    env.reset(seed);
    lo = std::min(lo, env.desired());
    hi = std::max(hi, env.desired());
  }
  CHECK(lo >= 3.0);
  CHECK(hi <= 8.0);
  CHECK(hi - lo > 4.5);

  cfg.desired_lo = 9.0;
  cfg.desired_hi = 2.0;
  CHECK_THROWS_AS(CyclingEnv(Plant{}, cfg), ContractError);
}

TEST_CASE("episode configuration is validated") {
  EpisodeConfig c;
  c.max_steps = 0;
  CHECK_THROWS_AS(c.validate(), ContractError);
  c = EpisodeConfig{};
  c.dt = 0.0;
  CHECK_THROWS_AS(c.validate(), ContractError);
}

TEST_CASE("max_steps of one makes every step terminal") {
  EpisodeConfig c;
  c.max_steps = 1;
  for (Mode mode : {Mode::Starter, Mode::Tracker}) {
    c.mode = mode;
    CyclingEnv env(Plant{}, c);
    env.reset(3);
    const auto r = env.step(uniform_action(0.3));
    CHECK(r.terminal);
    CHECK(r.truncated);
    CHECK_THROWS_AS(env.step(Action{}), ContractError);
  }
}

TEST_CASE("starter episodes end at the first crossing of the target cadence") {
  Plant plant;
  CyclingEnv env(plant, EpisodeConfig{});
  const auto policy = scripted_starter(plant.geometry);
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    auto obs = env.reset(seed);
    StepResult r;
    do {
      const double before = env.state().theta_dot;
      CHECK(before < kStarterTarget);
      r = env.step(policy(obs));
      obs = r.observation;
    } while (!r.terminal);
    CHECK(env.steps() <= env.config().max_steps);
    CHECK(env.state().theta_dot >= kStarterTarget);
    CHECK_FALSE(r.truncated);
    CHECK(r.reward > 90.0);
  }
}

TEST_CASE("tracker step reward matches the logged quantities") {
  auto cfg = tracker_config();
  cfg.max_steps = 30;
  Plant plant;
  CyclingEnv env(plant, cfg);
  env.set_starter(scripted_starter(plant.geometry));
  std::vector<StepRecord> log;
  env.set_observer([&](const StepRecord &r) { log.push_back(r); });
  env.reset(9);
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> rewards;
  while (!env.terminal()) {
    Action a;
    for (auto &s : a) {
      s = u(rng);
    }
    rewards.push_back(env.step(a).reward);
  }
  REQUIRE(log.size() == 30);
  for (std::size_t k = 0; k < log.size(); ++k) {
    CHECK(rewards[k] == reward_tracker(log[k].theta_dot, log[k].desired, log[k].action));
    CHECK(log[k].t == doctest::Approx((k + 1) * cfg.dt));
  }
}

TEST_CASE("handoff with a competent starter") {
  Plant plant;
  auto cfg = tracker_config();
  mech::RigState initial;
  initial.theta = 1.0;
  const auto policy = scripted_starter(plant.geometry);
  const auto h = starter_handoff(policy, initial, plant, cfg);
  CHECK(h.success);
  CHECK(h.state.theta_dot >= kStarterTarget);
  CHECK(h.steps <= cfg.max_steps);
  const auto ff = h.state.fatigue_factors();
  CHECK(*std::min_element(ff.begin(), ff.end()) < 1.0);

  CyclingEnv env(plant, cfg);
  env.set_starter(policy);
  const auto obs = env.reset(5);
  CHECK(env.last_handoff_ok());
  CHECK(env.state().theta_dot >= kStarterTarget);
  CHECK(env.steps() == 0);
  CHECK(obs.desired_norm == doctest::Approx(env.desired() / 10.0));
}

TEST_CASE("handoff with a zero policy fails after the step budget") {
  Plant plant;
  const auto cfg = tracker_config();
  mech::RigState initial;
  initial.theta = 2.0;
  const auto h = starter_handoff(zero_policy(), initial, plant, cfg);
  CHECK_FALSE(h.success);
  CHECK(h.steps == cfg.max_steps);

  CyclingEnv env(plant, cfg);
  env.set_starter(zero_policy());
  env.reset(1);
  CHECK_FALSE(env.last_handoff_ok());
}

TEST_CASE("step csv has one column per logged quantity") {
  std::ostringstream os;
  write_step_csv_header(os);
  StepRecord r{0.1, 1.0, 2.0, 5.0, uniform_action(0.5), {}, -1.0};
  write_step_csv(os, r);
  std::istringstream is(os.str());
  std::string header, row;
  std::getline(is, header);
  std::getline(is, row);
  CHECK(std::count(header.begin(), header.end(), ',') == 16);
  CHECK(std::count(row.begin(), row.end(), ',') == 16);
  CHECK(header.rfind("t,theta,theta_dot,theta_dot_desired,s1", 0) == 0);
}

TEST_CASE("mode names") {
  CHECK(parse_mode("starter") == Mode::Starter);
  CHECK(parse_mode(mode_name(Mode::Tracker)) == Mode::Tracker);
  CHECK_THROWS_AS(parse_mode("walker"), ContractError);
}
