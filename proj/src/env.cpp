#include "fescycle/env.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "fescycle/error.hpp"

namespace fes::env {

const char *mode_name(Mode mode) {
  return mode == Mode::Starter ? "starter" : "tracker";
}

Mode parse_mode(std::string_view name) {
  if (name == "starter") {
    return Mode::Starter;
  }
  if (name == "tracker") {
    return Mode::Tracker;
  }
  throw ContractError("unknown agent mode '" + std::string(name) + "'");
}

Observation Observation::build(Mode mode, const mech::RigState &state,
                               double desired, const Normalization &norm) {
  auto clip = [&](double x) { return std::clamp(x, 0.0, norm.max_entry); };
  Observation obs;
  obs.mode = mode;
  obs.theta_norm = clip(state.theta / norm.theta_scale);
  obs.cadence_norm = clip(state.theta_dot / norm.cadence_scale);
  obs.desired_norm = mode == Mode::Tracker ? clip(desired / norm.desired_scale) : 0.0;
  obs.fatigue = state.fatigue_factors();
  return obs;
}

std::vector<double> Observation::to_vector() const {
  std::vector<double> v;
  v.reserve(dim(mode));
  v.push_back(theta_norm);
  v.push_back(cadence_norm);
  if (mode == Mode::Tracker) {
    v.push_back(desired_norm);
  }
  v.insert(v.end(), fatigue.begin(), fatigue.end());
  return v;
}

Observation Observation::from_vector(Mode mode, std::span<const double> values) {
  require(values.size() == dim(mode), "observation length does not match mode");
  Observation obs;
  obs.mode = mode;
  std::size_t k = 0;
  obs.theta_norm = values[k++];
  obs.cadence_norm = values[k++];
  if (mode == Mode::Tracker) {
    obs.desired_norm = values[k++];
  }
  for (auto &f : obs.fatigue) {
    f = values[k++];
  }
  return obs;
}

double effort(const Action &action) {
  double sum = 0.0;
  for (double s : action) {
    sum += s * s;
  }
  return sum / static_cast<double>(action.size());
}

StarterReward reward_starter(double theta_dot, const Action &action) {
  if (theta_dot < kStarterTarget) {
    return {theta_dot - effort(action), false};
  }
  return {kStarterBonus - effort(action), true};
}

double reward_tracker(double theta_dot, double desired, const Action &action) {
  return -std::abs(theta_dot - desired) - effort(action);
}

void EpisodeConfig::validate() const {
  require(max_steps >= 1, "max_steps must be at least 1");
  require(dt > 0, "episode dt must be positive");
  require(desired_hi >= desired_lo, "desired cadence range is empty");
  require(fatigue_rate_multiplier > 0, "fatigue_rate_multiplier must be positive");
}

mech::MuscleParamSet Plant::scaled_muscles(double multiplier) const {
  mech::MuscleParamSet out = muscles;
  for (auto &p : out) {
    p = p.with_fatigue_multiplier(multiplier);
  }
  return out;
}

HandoffResult starter_handoff(const Policy &starter, const mech::RigState &initial,
                              const Plant &plant, const EpisodeConfig &config,
                              const Normalization &norm) {
  require(static_cast<bool>(starter), "starter_handoff: no starter policy");
  const auto params = plant.scaled_muscles(config.fatigue_rate_multiplier);
  HandoffResult result{initial, 0, initial.theta_dot >= kStarterTarget};
  while (!result.success && result.steps < config.max_steps) {
    const auto obs = Observation::build(Mode::Starter, result.state, 0.0, norm);
    result.state =
        mech::crank_step(result.state, starter(obs), config.dt, plant.geometry, params);
    ++result.steps;
    result.success = result.state.theta_dot >= kStarterTarget;
  }
  return result;
}

Policy scripted_starter(const mech::RigGeometry &geometry) {
  return [geometry](const Observation &obs) {
    const double theta = obs.theta_norm * mech::kTwoPi;
    Action a{};
    for (std::size_t i = 0; i < mech::kMuscles; ++i) {
      a[i] = mech::moment_arm(theta, i, geometry) > 0 ? 1.0 : 0.0;
    }
    return a;
  };
}

void write_step_csv_header(std::ostream &os) {
  os << "t,theta,theta_dot,theta_dot_desired";
  for (std::size_t i = 1; i <= mech::kMuscles; ++i) {
    os << ",s" << i;
  }
  for (std::size_t i = 1; i <= mech::kMuscles; ++i) {
    os << ",f" << i;
  }
  os << ",reward\n";
}

void write_step_csv(std::ostream &os, const StepRecord &r) {
  os << r.t << ',' << r.theta << ',' << r.theta_dot << ',' << r.desired;
  for (double s : r.action) {
    os << ',' << s;
  }
  for (double f : r.fatigue) {
    os << ',' << f;
  }
  os << ',' << r.reward << '\n';
}

CyclingEnv::CyclingEnv(Plant plant, EpisodeConfig config, Normalization norm)
    : plant_(std::move(plant)), config_(config), norm_(norm) {
  config_.validate();
  plant_.geometry.validate();
  for (const auto &p : plant_.muscles) {
    p.validate();
  }
  scaled_ = plant_.scaled_muscles(config_.fatigue_rate_multiplier);
}

Observation CyclingEnv::reset(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> angle(0.0, mech::kTwoPi);
  state_ = mech::RigState{};
  state_.theta = mech::wrap_angle(angle(rng));
  desired_ = kStarterTarget;
  if (config_.mode == Mode::Tracker) {
    std::uniform_real_distribution<double> cadence(config_.desired_lo,
                                                   config_.desired_hi);
    desired_ = cadence(rng);
    handoff_ok_ = true;
    if (starter_) {
      const auto handoff = starter_handoff(starter_, state_, plant_, config_, norm_);
      state_ = handoff.state;
      handoff_ok_ = handoff.success;
    }
  }
  steps_ = 0;
  terminal_ = false;
  return Observation::build(config_.mode, state_, desired_, norm_);
}

StepResult CyclingEnv::step(const Action &action) {
  require(!terminal_, "step called on a terminal episode");
  state_ = mech::crank_step(state_, action, config_.dt, plant_.geometry, scaled_);
  ++steps_;

  StepResult out;
  if (config_.mode == Mode::Starter) {
    const auto r = reward_starter(state_.theta_dot, action);
    out.reward = r.reward;
    out.terminal = r.terminal;
  } else {
    out.reward = reward_tracker(state_.theta_dot, desired_, action);
  }
  out.truncated = !out.terminal && steps_ >= config_.max_steps;
  out.terminal = out.terminal || out.truncated;
  terminal_ = out.terminal;
  out.observation = Observation::build(config_.mode, state_, desired_, norm_);

  if (observer_) {
    observer_({time(), state_.theta, state_.theta_dot, desired_, action,
               state_.fatigue_factors(), out.reward});
  }
  return out;
}

} // namespace fes::env
