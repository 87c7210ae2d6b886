#include "fescycle/bench.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <iomanip>
#include <set>
#include <sstream>
#include <thread>

#include <nlohmann/json.hpp>

#include "fescycle/error.hpp"

namespace fes::bench {

namespace {

using json = nlohmann::ordered_json;

// Records whose control step started at or after the switch.
bool after_switch(const env::StepRecord &r, const Scenario &s, double dt) {
  return r.t - dt >= s.switch_time - 1e-9;
}

double record_dt(const Trajectory &traj) {
  return traj.records.size() >= 2 ? traj.records[1].t - traj.records[0].t
                                  : (traj.records.empty() ? 0.1 : traj.records[0].t);
}

double mean(const std::vector<double> &v) {
  double s = 0.0;
  for (double x : v) {
    s += x;
  }
  return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

double sample_sd(const std::vector<double> &v) {
  if (v.size() < 2) {
    return 0.0;
  }
  const double m = mean(v);
  double s = 0.0;
  for (double x : v) {
    s += (x - m) * (x - m);
  }
  return std::sqrt(s / static_cast<double>(v.size() - 1));
}

json finite_or_null(double x) { return std::isfinite(x) ? json(x) : json(nullptr); }

} // namespace

void Scenario::validate() const {
  require(duration > 0 && switch_time > 0 && switch_time < duration,
          "scenario switch_time must lie strictly inside the session");
  require(first_target >= 0 && second_target >= 0, "targets must be non-negative");
  require(fatigue_multiplier > 0, "scenario fatigue multiplier must be positive");
}

std::vector<Scenario> Scenario::standard() {
  return {{"case1", 120.0, 5.0, 5.0, 60.0, 1.0},
          {"case2", 120.0, 5.0, 8.0, 60.0, 1.0},
          {"case3", 120.0, 5.0, 3.0, 60.0, 1.0}};
}

RlController::RlController(env::Policy starter, env::Policy tracker,
                           env::Normalization norm)
    : starter_(std::move(starter)), tracker_(std::move(tracker)), norm_(norm) {
  require(static_cast<bool>(starter_) && static_cast<bool>(tracker_),
          "RL controller needs both a Starter and a Tracker policy");
}

env::Action RlController::act(const mech::RigState &state, double desired, double) {
  if (!tracking_ && state.theta_dot >= env::kStarterTarget) {
    tracking_ = true;
  }
  if (!tracking_) {
    return starter_(env::Observation::build(env::Mode::Starter, state, 0.0, norm_));
  }
  return tracker_(env::Observation::build(env::Mode::Tracker, state, desired, norm_));
}

Trajectory run_session(Controller &controller, const Scenario &scenario,
                       const env::Plant &plant, std::uint64_t seed, double dt) {
  scenario.validate();
  require(dt > 0, "session dt must be positive");
  const auto params = plant.scaled_muscles(scenario.fatigue_multiplier);

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> angle(0.0, mech::kTwoPi);
  mech::RigState state;
  state.theta = mech::wrap_angle(angle(rng));

  Trajectory traj;
  traj.scenario = scenario.name;
  traj.seed = seed;
  traj.initial_theta_dot = state.theta_dot;
  controller.reset();

  const auto steps = static_cast<long>(std::llround(scenario.duration / dt));
  traj.records.reserve(static_cast<std::size_t>(steps));
  for (long k = 0; k < steps; ++k) {
    const double t0 = static_cast<double>(k) * dt;
    const double desired = scenario.target_at(t0 + 1e-9);
    const env::Action action = controller.act(state, desired, dt);
    try {
      state = mech::crank_step(state, action, dt, plant.geometry, params);
    } catch (const NumericalError &) {
      traj.aborted = true;
      break;
    }
    traj.records.push_back({static_cast<double>(k + 1) * dt, state.theta,
                            state.theta_dot, desired, action, state.fatigue_factors(),
                            env::reward_tracker(state.theta_dot, desired, action)});
  }
  return traj;
}

double rmse(const Trajectory &traj, const Scenario &scenario) {
  const double dt = record_dt(traj);
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto &r : traj.records) {
    if (after_switch(r, scenario, dt)) {
      const double e = r.theta_dot - r.desired;
      sum += e * e;
      ++n;
    }
  }
  require(n > 0, "rmse: trajectory has no samples after the switch");
  return std::sqrt(sum / static_cast<double>(n));
}

double response_time(const Trajectory &traj, const Scenario &scenario, double band,
                     double dwell) {
  const double target = scenario.second_target;
  const double tol = band * target + 1e-9;
  // Candidate entry points: the state at the switch instant, then every record.
  struct Sample {
    double t, v;
  };
  std::vector<Sample> samples;
  const double dt = record_dt(traj);
  for (const auto &r : traj.records) {
    if (r.t >= scenario.switch_time - 1e-9) {
      samples.push_back({r.t, r.theta_dot});
    }
  }
  if (scenario.switch_time < dt / 2) {
    samples.insert(samples.begin(), {0.0, traj.initial_theta_dot});
  }
  std::size_t k = 0;
  while (k < samples.size()) {
    if (std::abs(samples[k].v - target) > tol) {
      ++k;
      continue;
    }
    const double entry = samples[k].t;
    std::size_t j = k;
    while (j + 1 < samples.size() && std::abs(samples[j + 1].v - target) <= tol) {
      ++j;
    }
    if (samples[j].t - entry >= dwell - 1e-9) {
      return std::max(0.0, entry - scenario.switch_time);
    }
    k = j + 1;
  }
  return kNever;
}

const Cell &BenchReport::cell(const std::string &controller,
                              const std::string &scenario) const {
  for (const auto &c : cells) {
    if (c.controller == controller && c.scenario == scenario) {
      return c;
    }
  }
  throw ContractError("no bench cell for " + controller + " / " + scenario);
}

std::string BenchReport::to_json() const {
  json j;
  j["schema"] = kReportSchema;
  j["controllers"] = controllers;
  j["seeds"] = seeds;
  json sc = json::array();
  for (const auto &s : scenarios) {
    sc.push_back({{"name", s.name},
                  {"duration", s.duration},
                  {"first_target", s.first_target},
                  {"second_target", s.second_target},
                  {"switch_time", s.switch_time},
                  {"fatigue_multiplier", s.fatigue_multiplier}});
  }
  j["scenarios"] = sc;
  json cj = json::array();
  for (const auto &c : cells) {
    json rmse_values = json::array();
    json rt_values = json::array();
    for (const auto &r : runs) {
      if (r.controller == c.controller && r.scenario == c.scenario) {
        rmse_values.push_back(r.rmse);
        rt_values.push_back(finite_or_null(r.response_time));
      }
    }
    cj.push_back({{"controller", c.controller},
                  {"scenario", c.scenario},
                  {"runs", c.runs},
                  {"rmse", {{"mean", c.rmse_mean}, {"sd", c.rmse_sd}, {"values", rmse_values}}},
                  {"response_time",
                   {{"mean", finite_or_null(c.response_mean)},
                    {"sd", c.response_sd},
                    {"failures", c.response_failures},
                    {"values", rt_values}}}});
  }
  j["cells"] = cj;
  return j.dump(2) + "\n";
}

std::string BenchReport::to_table() const {
  std::ostringstream os;
  os << std::fixed << std::setprecision(3);
  auto header = [&](const char *title) {
    os << title << '\n' << std::left << std::setw(12) << "controller";
    for (const auto &s : scenarios) {
      std::ostringstream label;
      label << s.name << " (" << s.second_target << ")";
      os << std::setw(24) << label.str();
    }
    os << '\n';
  };
  header("(A) RMSE, rad/s, second half, mean +- sd");
  for (const auto &c : controllers) {
    os << std::left << std::setw(12) << c;
    for (const auto &s : scenarios) {
      const auto &cl = cell(c, s.name);
      std::ostringstream v;
      v << std::fixed << std::setprecision(3) << cl.rmse_mean << " +- " << cl.rmse_sd;
      os << std::setw(24) << v.str();
    }
    os << '\n';
  }
  os << '\n';
  header("(B) response time, s, +-5% band held 1 s, mean +- sd");
  for (const auto &c : controllers) {
    os << std::left << std::setw(12) << c;
    for (const auto &s : scenarios) {
      const auto &cl = cell(c, s.name);
      std::ostringstream v;
      if (std::isfinite(cl.response_mean)) {
        v << std::fixed << std::setprecision(2) << cl.response_mean << " +- "
          << cl.response_sd;
      } else {
        v << "fail (" << cl.response_failures << "/" << cl.runs << ")";
      }
      os << std::setw(24) << v.str();
    }
    os << '\n';
  }
  return os.str();
}

BenchReport compare(const std::vector<NamedController> &controllers,
                    const std::vector<Scenario> &scenarios, const env::Plant &plant,
                    const std::vector<std::uint64_t> &seeds, unsigned jobs,
                    const TrajectorySink &sink) {
  require(!controllers.empty() && !scenarios.empty() && !seeds.empty(),
          "compare needs at least one controller, scenario and seed");
  std::set<std::string> names;
  for (const auto &c : controllers) {
    require(names.insert(c.name).second, "duplicate controller name '" + c.name + "'");
  }
  names.clear();
  for (const auto &sc : scenarios) {
    require(names.insert(sc.name).second, "duplicate scenario name '" + sc.name + "'");
  }
  struct Job {
    std::size_t controller, scenario, seed;
  };
  std::vector<Job> work;
  for (std::size_t c = 0; c < controllers.size(); ++c) {
    for (std::size_t s = 0; s < scenarios.size(); ++s) {
      for (std::size_t k = 0; k < seeds.size(); ++k) {
        work.push_back({c, s, k});
      }
    }
  }
  std::vector<Trajectory> trajectories(work.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < work.size(); i = next++) {
      const auto &w = work[i];
      auto ctrl = controllers[w.controller].make();
      trajectories[i] = run_session(*ctrl, scenarios[w.scenario], plant, seeds[w.seed]);
      trajectories[i].controller = controllers[w.controller].name;
    }
  };
  jobs = std::max(1u, std::min<unsigned>(jobs, static_cast<unsigned>(work.size())));
  if (jobs == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (unsigned t = 0; t < jobs; ++t) {
      pool.emplace_back(worker);
    }
  }

  BenchReport report;
  report.scenarios = scenarios;
  report.seeds = seeds;
  for (const auto &c : controllers) {
    report.controllers.push_back(c.name);
  }
  for (std::size_t i = 0; i < work.size(); ++i) {
    const auto &traj = trajectories[i];
    const auto &sc = scenarios[work[i].scenario];
    if (sink) {
      sink(traj);
    }
    RunMetrics m;
    m.controller = traj.controller;
    m.scenario = sc.name;
    m.seed = traj.seed;
    m.aborted = traj.aborted;
    const bool covered = !traj.records.empty() &&
                         traj.records.back().t >= sc.duration - 1e-6;
    m.rmse = covered ? rmse(traj, sc) : kNever;
    m.response_time = covered ? response_time(traj, sc) : kNever;
    report.runs.push_back(m);
  }
  for (const auto &c : controllers) {
    for (const auto &s : scenarios) {
      Cell cell;
      cell.controller = c.name;
      cell.scenario = s.name;
      std::vector<double> rm, rt;
      for (const auto &r : report.runs) {
        if (r.controller == c.name && r.scenario == s.name) {
          rm.push_back(r.rmse);
          if (std::isfinite(r.response_time)) {
            rt.push_back(r.response_time);
          } else {
            ++cell.response_failures;
          }
          ++cell.runs;
        }
      }
      cell.rmse_mean = mean(rm);
      cell.rmse_sd = sample_sd(rm);
      cell.response_mean = cell.response_failures > 0 ? kNever : mean(rt);
      cell.response_sd = sample_sd(rt);
      report.cells.push_back(cell);
    }
  }
  return report;
}

void write_trajectory_csv(std::ostream &os, const Trajectory &traj) {
  env::write_step_csv_header(os);
  for (const auto &r : traj.records) {
    env::write_step_csv(os, r);
  }
}

void write_long_csv_header(std::ostream &os) {
  os << "controller,scenario,seed,t,theta_dot,desired\n";
}

void write_long_csv(std::ostream &os, const Trajectory &traj) {
  for (const auto &r : traj.records) {
    os << traj.controller << ',' << traj.scenario << ',' << traj.seed << ',' << r.t << ','
       << r.theta_dot << ',' << r.desired << '\n';
  }
}

std::string TransferReport::to_json() const {
  json j;
  j["schema"] = "fescycle.transfer/1";
  j["seat_shift"] = seat_shift;
  j["budget_seconds"] = budget_seconds;
  j["env_steps"] = env_steps;
  j["zero_shot_min_cadence"] = zero_shot_min_cadence;
  j["zero_shot"] = json::parse(zero_shot.to_json());
  j["adapted"] = json::parse(adapted.to_json());
  return j.dump(2) + "\n";
}

TransferReport transfer_experiment(const PolicyCheckpoint &starter,
                                   const PolicyCheckpoint &tracker,
                                   const env::Plant &plant,
                                   const TransferOptions &options) {
  require(options.budget_seconds >= 0, "transfer budget must be non-negative");
  env::Plant shifted = plant;
  shifted.geometry = plant.geometry.with_seat_shift(options.seat_shift);

  auto rl_entry = [&](const PolicyCheckpoint &trk) {
    return NamedController{"rl", [s = starter, t = trk] {
                             return std::make_unique<RlController>(
                                 s.policy(), t.policy(), t.normalization);
                           }};
  };

  TransferReport report;
  report.seat_shift = options.seat_shift;
  report.budget_seconds = options.budget_seconds;
  double min_cadence = std::numeric_limits<double>::infinity();
  report.zero_shot = compare({rl_entry(tracker)}, options.scenarios, shifted,
                             options.seeds, options.jobs, [&](const Trajectory &t) {
                               bool handed_over = false;
                               for (const auto &r : t.records) {
                                 handed_over = handed_over ||
                                               r.theta_dot >= env::kStarterTarget;
                                 if (handed_over) {
                                   min_cadence = std::min(min_cadence, r.theta_dot);
                                 }
                               }
                               if (!handed_over) {
                                 min_cadence = 0.0;
                               }
                             });
  report.zero_shot_min_cadence = min_cadence;

  env::EpisodeConfig episode = options.episode;
  episode.mode = env::Mode::Tracker;
  const auto budget_steps =
      static_cast<long>(std::llround(options.budget_seconds / episode.dt));
  report.adapted_checkpoint = tracker;
  if (budget_steps > 0) {
    env::CyclingEnv cycling(shifted, episode, tracker.normalization);
    cycling.set_starter(starter.policy());
    ddpg::CyclingTask task(std::move(cycling));
    ddpg::TrainConfig cfg = options.train;
    cfg.max_env_steps = budget_steps;
    cfg.episodes = static_cast<int>(budget_steps / episode.max_steps + 1);
    auto result = ddpg::train(task, env::Mode::Tracker, tracker.normalization, cfg,
                              ddpg::Agent::from_checkpoint(tracker, cfg));
    report.env_steps = result.env_steps;
    report.adapted_checkpoint = std::move(result.final_checkpoint);
  }
  report.adapted = compare({rl_entry(report.adapted_checkpoint)}, options.scenarios,
                           shifted, options.seeds, options.jobs);
  return report;
}

void PidGrid::validate() const {
  require(size() > 0, "pid grid must have at least one value per axis");
  for (const auto *axis : {&kp, &ki, &kd, &integral_limit}) {
    for (double v : *axis) {
      require(std::isfinite(v) && v >= 0, "pid grid values must be finite and non-negative");
    }
  }
}

PidGrid PidGrid::standard() {
  return {{0.05, 0.1, 0.2, 0.3, 0.5, 0.8, 1.2},
          {0.0, 0.05, 0.1, 0.2, 0.4, 0.8},
          {0.0, 0.02, 0.05, 0.1, 0.2},
          {2.0}};
}

PidCalibration calibrate_pid(const env::Plant &plant, const baselines::StimPattern &pattern,
                             const PidGrid &grid, const Scenario &scenario,
                             const std::vector<std::uint64_t> &seeds, unsigned jobs) {
  grid.validate();
  pattern.validate();
  Scenario fresh = scenario;
  fresh.fatigue_multiplier = 1.0;

  std::vector<NamedController> entries;
  PidCalibration out;
  for (double kp : grid.kp) {
    for (double ki : grid.ki) {
      for (double kd : grid.kd) {
        for (double lim : grid.integral_limit) {
          baselines::PidGains g{kp, ki, kd, lim};
          out.candidates.push_back({g, 0.0});
          entries.push_back({std::to_string(entries.size()), [g, &pattern] {
                               return std::make_unique<BaselineAdapter>(
                                   baselines::BaselineController(
                                       baselines::Kind::Pid, pattern, g,
                                       baselines::FuzzyRuleBase::standard()));
                             }});
        }
      }
    }
  }
  const auto report = compare(entries, {fresh}, plant, seeds, jobs);
  for (std::size_t i = 0; i < out.candidates.size(); ++i) {
    out.candidates[i].rmse = report.cells[i].rmse_mean;
    if (i == 0 || out.candidates[i].rmse < out.best.rmse) {
      out.best = out.candidates[i];
    }
  }
  return out;
}

} // namespace fes::bench
