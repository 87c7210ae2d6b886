#pragma once

/**
 * @file env.hpp
 * @brief Episodic cycling MDP: observations, Starter/Tracker rewards, episode
 *        lifecycle and the Starter -> Tracker handoff.
 */

#include <cstdint>
#include <functional>
#include <optional>
#include <ostream>
#include <random>
#include <span>
#include <vector>

#include "fescycle/mech.hpp"

namespace fes::env {

enum class Mode : std::uint8_t { Starter = 0, Tracker = 1 };

const char *mode_name(Mode mode);
Mode parse_mode(std::string_view name);

/// Cadence at which the Starter hands over and its episode terminates.
inline constexpr double kStarterTarget = 5.0; // rad/s
inline constexpr double kStarterBonus = 100.0;

/// Scales mapping raw quantities into the observation vector.
struct Normalization {
  double theta_scale = mech::kTwoPi;
  double cadence_scale = 10.0;
  double desired_scale = 10.0;
  double max_entry = 1.2;
};

/// Agent-facing state. Element order: theta, cadence, [desired], fatigue 1..6.
struct Observation {
  Mode mode = Mode::Starter;
  double theta_norm = 0.0;
  double cadence_norm = 0.0;
  double desired_norm = 0.0; // Tracker only
  std::array<double, mech::kMuscles> fatigue{};

  static std::size_t dim(Mode mode) { return mode == Mode::Starter ? 8 : 9; }

  static Observation build(Mode mode, const mech::RigState &state,
                           double desired, const Normalization &norm = {});
  std::vector<double> to_vector() const;
  static Observation from_vector(Mode mode, std::span<const double> values);
};

using Action = mech::Stimulation;

/// Deterministic mapping from observation to stimulation.
using Policy = std::function<Action(const Observation &)>;

/// Mean of squared intensities (the effort term shared by both rewards).
double effort(const Action &action);

struct StarterReward {
  double reward;
  bool terminal;
};

StarterReward reward_starter(double theta_dot, const Action &action);
double reward_tracker(double theta_dot, double desired, const Action &action);

struct EpisodeConfig {
  int max_steps = 100;
  double dt = 0.1;
  Mode mode = Mode::Starter;
  double desired_lo = 3.0;
  double desired_hi = 8.0;
  double fatigue_rate_multiplier = 5.0;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Everything needed to simulate the plant.
struct Plant {
  mech::RigGeometry geometry = mech::RigGeometry::standard();
  mech::MuscleParamSet muscles{};

  /// Muscle parameters with fatigue/recovery scaled by `multiplier`.
  mech::MuscleParamSet scaled_muscles(double multiplier) const;
};

struct HandoffResult {
  mech::RigState state;
  int steps = 0;
  bool success = false;
};

/// Run `starter` greedily from `initial` until the cadence reaches the Starter
/// target or `max_steps` elapse. Fatigue carries over into the returned state.
HandoffResult starter_handoff(const Policy &starter, const mech::RigState &initial,
                              const Plant &plant, const EpisodeConfig &config,
                              const Normalization &norm = {});

/// Scripted spin-up surrogate: full stimulation of every muscle whose moment
/// arm is positive at the current angle.
Policy scripted_starter(const mech::RigGeometry &geometry);

struct StepResult {
  Observation observation;
  double reward = 0.0;
  bool terminal = false;
  /// Ended only because the step budget ran out (not a true terminal state).
  bool truncated = false;
};

/// One row of the per-step log.
struct StepRecord {
  double t;
  double theta;
  double theta_dot;
  double desired;
  Action action;
  std::array<double, mech::kMuscles> fatigue;
  double reward;
};

void write_step_csv_header(std::ostream &os);
void write_step_csv(std::ostream &os, const StepRecord &record);

class CyclingEnv {
public:
  CyclingEnv(Plant plant, EpisodeConfig config, Normalization norm = {});

  /// Tracker episodes start from the state left behind by this policy.
  void set_starter(Policy starter) { starter_ = std::move(starter); }

  Observation reset(std::uint64_t seed);
  StepResult step(const Action &action);

  const mech::RigState &state() const { return state_; }
  double desired() const { return desired_; }
  int steps() const { return steps_; }
  bool terminal() const { return terminal_; }
  double time() const { return steps_ * config_.dt; }
  const EpisodeConfig &config() const { return config_; }
  const Plant &plant() const { return plant_; }
  const Normalization &normalization() const { return norm_; }
  /// Whether the last Tracker reset had a competent Starter spin-up.
  bool last_handoff_ok() const { return handoff_ok_; }

  void set_observer(std::function<void(const StepRecord &)> observer) {
    observer_ = std::move(observer);
  }

private:
  Plant plant_;
  EpisodeConfig config_;
  Normalization norm_;
  mech::MuscleParamSet scaled_;
  Policy starter_;
  std::function<void(const StepRecord &)> observer_;

  mech::RigState state_;
  double desired_ = kStarterTarget;
  int steps_ = 0;
  bool terminal_ = true;
  bool handoff_ok_ = true;
};

} // namespace fes::env
