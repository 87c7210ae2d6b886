#pragma once

/**
 * @file bench.hpp
 * @brief Evaluation protocol: 120 s closed-loop sessions with a setpoint change
 *        at 60 s, tracking RMSE over the second half, response time to the new
 *        setpoint, multi-seed controller comparison and the seat-shift
 *        transfer experiment.
 */

#include <cstdint>
#include <functional>
#include <limits>
#include <memory>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "fescycle/baselines.hpp"
#include "fescycle/checkpoint.hpp"
#include "fescycle/ddpg.hpp"
#include "fescycle/env.hpp"

namespace fes::bench {

inline constexpr double kNever = std::numeric_limits<double>::infinity();

struct Scenario {
  std::string name;
  double duration = 120.0;
  double first_target = 5.0;
  double second_target = 5.0;
  double switch_time = 60.0;
  double fatigue_multiplier = 1.0;

  double target_at(double t) const { return t < switch_time ? first_target : second_target; }
  void validate() const;

  /// case1: 5 -> 5, case2: 5 -> 8, case3: 5 -> 3 rad/s.
  static std::vector<Scenario> standard();
};

struct Trajectory {
  std::string controller;
  std::string scenario;
  std::uint64_t seed = 0;
  std::vector<env::StepRecord> records;
  /// Cadence at t = 0 and at every control step; records hold the rest.
  double initial_theta_dot = 0.0;
  bool aborted = false;
};

/// Closed-loop controller for a bench session.
class Controller {
public:
  virtual ~Controller() = default;
  virtual void reset() = 0;
  virtual env::Action act(const mech::RigState &state, double desired, double dt) = 0;
};

/// Starter until the cadence first reaches 5 rad/s, Tracker from then on.
class RlController : public Controller {
public:
  RlController(env::Policy starter, env::Policy tracker, env::Normalization norm = {});
  void reset() override { tracking_ = false; }
  env::Action act(const mech::RigState &state, double desired, double dt) override;
  bool tracking() const { return tracking_; }

private:
  env::Policy starter_, tracker_;
  env::Normalization norm_;
  bool tracking_ = false;
};

class BaselineAdapter : public Controller {
public:
  explicit BaselineAdapter(baselines::BaselineController controller)
      : controller_(std::move(controller)) {}
  void reset() override { controller_.reset(); }
  env::Action act(const mech::RigState &state, double desired, double dt) override {
    return controller_.act(state.theta, state.theta_dot, desired, dt);
  }

private:
  baselines::BaselineController controller_;
};

class ZeroController : public Controller {
public:
  void reset() override {}
  env::Action act(const mech::RigState &, double, double) override { return {}; }
};

/// Run one session from rest at a seed-drawn crank angle with fresh muscles.
/// A non-finite state ends the session early with `aborted` set.
Trajectory run_session(Controller &controller, const Scenario &scenario,
                       const env::Plant &plant, std::uint64_t seed, double dt = 0.1);

/// RMS of (cadence - desired) over steps that start at or after the switch.
double rmse(const Trajectory &trajectory, const Scenario &scenario);

/// Seconds from the switch until the cadence enters the +-band window around
/// the new target and stays there for `dwell` seconds; kNever if it never does.
double response_time(const Trajectory &trajectory, const Scenario &scenario,
                     double band = 0.05, double dwell = 1.0);

struct RunMetrics {
  std::string controller;
  std::string scenario;
  std::uint64_t seed = 0;
  double rmse = 0.0;
  double response_time = kNever;
  bool aborted = false;
};

struct Cell {
  std::string controller;
  std::string scenario;
  double rmse_mean = 0.0;
  double rmse_sd = 0.0;
  /// kNever when any seed failed to settle.
  double response_mean = kNever;
  double response_sd = 0.0;
  int response_failures = 0;
  int runs = 0;
};

struct BenchReport {
  std::vector<std::string> controllers;
  std::vector<Scenario> scenarios;
  std::vector<std::uint64_t> seeds;
  std::vector<RunMetrics> runs;
  std::vector<Cell> cells;

  const Cell &cell(const std::string &controller, const std::string &scenario) const;

  std::string to_json() const;
  /// Two tables: (A) RMSE and (B) response time, controllers x scenarios.
  std::string to_table() const;
};

inline constexpr const char *kReportSchema = "fescycle.bench/1";

using ControllerFactory = std::function<std::unique_ptr<Controller>()>;

struct NamedController {
  std::string name;
  ControllerFactory make;
};

using TrajectorySink = std::function<void(const Trajectory &)>;

/// Cross product of controllers x scenarios x seeds. Sessions run on `jobs`
/// threads; results do not depend on the thread count.
BenchReport compare(const std::vector<NamedController> &controllers,
                    const std::vector<Scenario> &scenarios, const env::Plant &plant,
                    const std::vector<std::uint64_t> &seeds, unsigned jobs = 1,
                    const TrajectorySink &sink = {});

void write_trajectory_csv(std::ostream &os, const Trajectory &trajectory);
void write_long_csv_header(std::ostream &os);
/// controller,scenario,seed,t,theta_dot,desired rows for plotting.
void write_long_csv(std::ostream &os, const Trajectory &trajectory);

struct TransferOptions {
  double seat_shift = 0.15;
  double budget_seconds = 600.0; // environment time spent fine-tuning
  ddpg::TrainConfig train{};
  env::EpisodeConfig episode{}; // mode is forced to Tracker
  std::vector<std::uint64_t> seeds = {0, 1, 2, 3, 4};
  std::vector<Scenario> scenarios = Scenario::standard();
  unsigned jobs = 1;
};

struct TransferReport {
  double seat_shift = 0.0;
  double budget_seconds = 0.0;
  long env_steps = 0;
  BenchReport zero_shot;
  BenchReport adapted;
  PolicyCheckpoint adapted_checkpoint;
  /// Lowest cadence after the Tracker took over, over all zero-shot sessions.
  double zero_shot_min_cadence = 0.0;

  std::string to_json() const;
};

/// Zero-shot evaluation on the seat-shifted rig, fine-tuning of the Tracker
/// for the given environment-time budget, then re-evaluation.
TransferReport transfer_experiment(const PolicyCheckpoint &starter,
                                   const PolicyCheckpoint &tracker,
                                   const env::Plant &plant,
                                   const TransferOptions &options);

/// Candidate values for the PID grid search.
struct PidGrid {
  std::vector<double> kp;
  std::vector<double> ki;
  std::vector<double> kd;
  std::vector<double> integral_limit;

  std::size_t size() const { return kp.size() * ki.size() * kd.size() * integral_limit.size(); }
  void validate() const;
  static PidGrid standard();
};

struct PidCandidate {
  baselines::PidGains gains;
  double rmse = 0.0; // mean over seeds
};

struct PidCalibration {
  PidCandidate best;
  std::vector<PidCandidate> candidates; // grid order
};

/// Exhaustive search for the PID gains with the lowest mean RMSE on
/// `scenario` with fresh muscles. Ties keep the earlier grid point.
PidCalibration calibrate_pid(const env::Plant &plant, const baselines::StimPattern &pattern,
                             const PidGrid &grid, const Scenario &scenario,
                             const std::vector<std::uint64_t> &seeds, unsigned jobs = 1);

} // namespace fes::bench
