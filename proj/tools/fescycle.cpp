// Command-line front end: training, benchmarking, pattern export, transfer
// and baseline calibration.

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "fescycle/bench.hpp"
#include "fescycle/checkpoint.hpp"
#include "fescycle/config.hpp"
#include "fescycle/ddpg.hpp"
#include "fescycle/error.hpp"
#include "fescycle/pattern.hpp"

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;
using namespace fes;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitRuntime = 2;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Common {
  std::string config_path;
  std::string out;
  bool force = false;
  std::string log_level;
  std::vector<std::string> argv;
};

struct Run {
  config::WorkbenchConfig cfg;
  fs::path out;
  std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();
  bool verbose = true;
  bool debug = false;

  void info(const std::string &msg) const {
    if (verbose) {
      std::cerr << msg << '\n';
    }
  }
};

unsigned hardware_jobs() { return std::max(1u, std::thread::hardware_concurrency()); }

Run open_run(const Common &common, const std::string &default_out) {
  Run run;
  run.cfg = common.config_path.empty() ? config::WorkbenchConfig{}
                                       : config::load(common.config_path);
  if (!common.log_level.empty()) {
    run.cfg.log_level = common.log_level;
  }
  run.verbose = run.cfg.log_level != "quiet";
  run.debug = run.cfg.log_level == "debug";
  run.out = common.out.empty() ? fs::path(run.cfg.output_dir) / default_out : fs::path(common.out);
  if (fs::exists(run.out) && !fs::is_empty(run.out) && !common.force) {
    throw UsageError("output directory " + run.out.string() +
                     " is not empty; pass --force to overwrite");
  }
  fs::create_directories(run.out);
  return run;
}

void write_text(const fs::path &path, const std::string &text) {
  std::ofstream os(path, std::ios::binary);
  os << text;
  if (!os) {
    throw std::runtime_error("cannot write " + path.string());
  }
}

void write_manifest(const Run &run, const Common &common, const std::string &command,
                    json extra) {
  json m;
  m["command"] = command;
  m["argv"] = common.argv;
  m["version"] = FESCYCLE_VERSION;
  m["config_hash"] = config::hash(run.cfg);
  m["config_file"] = "config.yaml";
  for (auto &[k, v] : extra.items()) {
    m[k] = v;
  }
  m["wall_time_s"] =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - run.start).count();
  write_text(run.out / "config.yaml", config::serialize(run.cfg));
  write_text(run.out / "manifest.json", m.dump(2) + "\n");
}

PolicyCheckpoint load_policy(const std::string &path, env::Mode mode, const char *flag) {
  if (path.empty()) {
    throw UsageError(std::string(flag) + " is required");
  }
  if (!fs::exists(path)) {
    throw UsageError(std::string(flag) + ": no such file " + path);
  }
  return PolicyCheckpoint::load(path, mode);
}

// ---------------------------------------------------------------- train

struct TrainArgs {
  std::string mode = "starter";
  std::optional<std::uint64_t> seed;
  std::optional<int> episodes;
  std::string starter;
};

int cmd_train(const Common &common, const TrainArgs &args) {
  const auto mode = env::parse_mode(args.mode);
  if (mode == env::Mode::Tracker && args.starter.empty()) {
    throw UsageError("tracker training requires --starter");
  }
  Run run = open_run(common, std::string("train-") + env::mode_name(mode));
  auto &cfg = run.cfg;
  if (args.seed) {
    cfg.train.seed = *args.seed;
  }
  if (args.episodes) {
    cfg.train.episodes = *args.episodes;
  }
  cfg.episode.mode = mode;

  env::CyclingEnv cycling(cfg.plant(), cfg.episode, cfg.normalization);
  std::string starter_hash;
  if (mode == env::Mode::Tracker) {
    const auto starter = load_policy(args.starter, env::Mode::Starter, "--starter");
    cycling.set_starter(starter.policy());
    char buf[9];
    const auto bytes = starter.serialize();
    std::snprintf(buf, sizeof buf, "%08x", crc32(bytes.data(), bytes.size()));
    starter_hash = buf;
  }
  ddpg::CyclingTask task(std::move(cycling));

  const int every = std::max(1, cfg.train.moving_average);
  double acc_len = 0.0, acc_err = 0.0;
  int acc_n = 0;
  auto result = ddpg::train(task, mode, cfg.normalization, cfg.train, {},
                            [&](const ddpg::EpisodeLog &log) {
                              acc_len += log.length;
                              acc_err += log.mean_abs_error;
                              if (++acc_n == every || run.debug) {
                                std::ostringstream os;
                                os << "episode " << log.episode + 1 << "/" << cfg.train.episodes
                                   << "  length " << acc_len / acc_n << "  |error| "
                                   << acc_err / acc_n << "  sigma " << log.sigma;
                                run.info(os.str());
                                acc_len = acc_err = 0.0;
                                acc_n = 0;
                              }
                            });

  result.final_checkpoint.save(run.out / "policy.bin");
  result.best_checkpoint.save(run.out / "policy_best.bin");
  {
    std::ofstream os(run.out / "curve.csv");
    ddpg::write_curve_csv(os, result.curve);
  }
  json extra;
  extra["mode"] = env::mode_name(mode);
  extra["seed"] = cfg.train.seed;
  extra["episodes"] = cfg.train.episodes;
  extra["env_steps"] = result.env_steps;
  extra["updates"] = result.updates;
  if (!starter_hash.empty()) {
    extra["starter"] = args.starter;
    extra["starter_crc32"] = starter_hash;
  }
  write_manifest(run, common, "train", extra);
  run.info("wrote " + (run.out / "policy.bin").string());
  return kExitOk;
}

// ---------------------------------------------------------------- bench

struct BenchArgs {
  std::vector<std::string> controllers = {"rl", "pid", "fuzzy"};
  std::string starter;
  std::string tracker;
  unsigned jobs = 0;
  bool trajectories = true;
};

std::vector<bench::NamedController> make_controllers(const config::WorkbenchConfig &cfg,
                                                     const std::vector<std::string> &names,
                                                     const std::string &starter_path,
                                                     const std::string &tracker_path) {
  std::vector<bench::NamedController> out;
  const auto pattern = cfg.stim_pattern();
  for (const auto &name : names) {
    if (name == "rl") {
      auto starter = load_policy(starter_path, env::Mode::Starter, "--starter");
      auto tracker = load_policy(tracker_path, env::Mode::Tracker, "--tracker");
      out.push_back({"rl", [starter, tracker] {
                       return std::make_unique<bench::RlController>(
                           starter.policy(), tracker.policy(), tracker.normalization);
                     }});
    } else if (name == "pid" || name == "fuzzy") {
      const auto kind = name == "pid" ? baselines::Kind::Pid : baselines::Kind::Fuzzy;
      out.push_back({name, [kind, pattern, gains = cfg.pid, rules = cfg.fuzzy] {
                       return std::make_unique<bench::BaselineAdapter>(
                           baselines::BaselineController(kind, pattern, gains, rules));
                     }});
    } else if (name == "zero") {
      out.push_back({"zero", [] { return std::make_unique<bench::ZeroController>(); }});
    } else {
      throw UsageError("unknown controller '" + name + "' (rl, pid, fuzzy, zero)");
    }
  }
  return out;
}

void write_bench_outputs(const fs::path &dir, const bench::BenchReport &report,
                         const std::vector<bench::Trajectory> &trajectories) {
  write_text(dir / "report.json", report.to_json());
  write_text(dir / "report.txt", report.to_table());
  std::ofstream long_csv(dir / "cadence_long.csv");
  bench::write_long_csv_header(long_csv);
  if (!trajectories.empty()) {
    fs::create_directories(dir / "trajectories");
  }
  for (const auto &t : trajectories) {
    bench::write_long_csv(long_csv, t);
    std::ofstream os(dir / "trajectories" /
                     (t.controller + "_" + t.scenario + "_" + std::to_string(t.seed) + ".csv"));
    bench::write_trajectory_csv(os, t);
  }
}

int cmd_bench(const Common &common, const BenchArgs &args) {
  Run run = open_run(common, "bench");
  const auto controllers =
      make_controllers(run.cfg, args.controllers, args.starter, args.tracker);
  std::vector<bench::Trajectory> trajectories;
  const unsigned jobs = args.jobs ? args.jobs : hardware_jobs();
  const auto report = bench::compare(controllers, run.cfg.scenarios, run.cfg.plant(),
                                     run.cfg.seeds, jobs, [&](const bench::Trajectory &t) {
                                       if (args.trajectories) {
                                         trajectories.push_back(t);
                                       }
                                     });
  write_bench_outputs(run.out, report, trajectories);
  json extra;
  extra["controllers"] = args.controllers;
  extra["seeds"] = run.cfg.seeds;
  extra["starter"] = args.starter;
  extra["tracker"] = args.tracker;
  extra["jobs"] = jobs;
  write_manifest(run, common, "bench", extra);
  if (run.verbose) {
    std::cout << report.to_table();
  }
  return kExitOk;
}

// ------------------------------------------------------- export-pattern

struct ExportArgs {
  std::string tracker;
  pattern::ExportOptions options;
};

int cmd_export(const Common &common, const ExportArgs &args) {
  const auto tracker = load_policy(args.tracker, env::Mode::Tracker, "--tracker");
  try {
    args.options.validate();
  } catch (const ContractError &e) {
    throw UsageError(e.what());
  }
  Run run = open_run(common, "pattern");
  const auto exported = pattern::export_pattern(tracker, args.options);
  write_text(run.out / "pattern.json", exported.to_json());
  {
    std::ofstream os(run.out / "pattern.csv");
    exported.write_csv(os);
  }
  json extra;
  extra["tracker"] = args.tracker;
  extra["cadence"] = args.options.cadence;
  extra["fatigue_level"] = args.options.fatigue_level;
  extra["threshold"] = args.options.threshold;
  extra["resolution_deg"] = args.options.resolution_deg;
  write_manifest(run, common, "export-pattern", extra);
  if (run.verbose) {
    for (std::size_t i = 0; i < mech::kMuscles; ++i) {
      std::cout << mech::kMuscleNames[i] << ':';
      for (const auto &a : exported.arcs[i]) {
        std::cout << " [" << a.on_deg << ", " << a.off_deg << ")";
      }
      std::cout << '\n';
    }
  }
  return kExitOk;
}

// ------------------------------------------------------------- transfer

struct TransferArgs {
  std::string starter;
  std::string tracker;
  std::optional<double> seat_shift;
  std::optional<double> budget;
  unsigned jobs = 0;
};

int cmd_transfer(const Common &common, const TransferArgs &args) {
  const auto starter = load_policy(args.starter, env::Mode::Starter, "--starter");
  const auto tracker = load_policy(args.tracker, env::Mode::Tracker, "--tracker");
  Run run = open_run(common, "transfer");
  auto &cfg = run.cfg;
  if (args.seat_shift) {
    cfg.transfer.seat_shift = *args.seat_shift;
  }
  if (args.budget) {
    if (*args.budget < 0) {
      throw UsageError("--budget must be non-negative");
    }
    cfg.transfer.budget_seconds = *args.budget;
  }
  bench::TransferOptions opt;
  opt.seat_shift = cfg.transfer.seat_shift;
  opt.budget_seconds = cfg.transfer.budget_seconds;
  opt.train = cfg.train;
  opt.train.sigma_start = cfg.train.sigma_end;
  opt.episode = cfg.episode;
  opt.seeds = cfg.seeds;
  opt.scenarios = cfg.scenarios;
  opt.jobs = args.jobs ? args.jobs : hardware_jobs();
  const auto report = bench::transfer_experiment(starter, tracker, cfg.plant(), opt);
  write_text(run.out / "transfer.json", report.to_json());
  write_text(run.out / "zero_shot.txt", report.zero_shot.to_table());
  write_text(run.out / "adapted.txt", report.adapted.to_table());
  report.adapted_checkpoint.save(run.out / "tracker_adapted.bin");
  json extra;
  extra["starter"] = args.starter;
  extra["tracker"] = args.tracker;
  extra["seat_shift"] = opt.seat_shift;
  extra["budget_seconds"] = opt.budget_seconds;
  extra["seeds"] = opt.seeds;
  extra["train_seed"] = opt.train.seed;
  write_manifest(run, common, "transfer", extra);
  if (run.verbose) {
    std::cout << "zero-shot\n" << report.zero_shot.to_table() << "\nadapted\n"
              << report.adapted.to_table();
  }
  return kExitOk;
}

// -------------------------------------------------- calibrate-baselines

int cmd_calibrate(const Common &common, unsigned jobs) {
  Run run = open_run(common, "calibration");
  const auto &cfg = run.cfg;
  const auto scenario = cfg.scenarios.front();
  jobs = jobs ? jobs : hardware_jobs();
  run.info("searching " + std::to_string(cfg.calibration.grid.size()) + " PID candidates on " +
           scenario.name);
  const auto result = bench::calibrate_pid(cfg.plant(), cfg.stim_pattern(),
                                           cfg.calibration.grid, scenario,
                                           cfg.calibration.seeds, jobs);
  json j;
  j["schema"] = "fescycle.calibration/1";
  j["scenario"] = scenario.name;
  j["seeds"] = cfg.calibration.seeds;
  auto gains = [](const baselines::PidGains &g) {
    return json{{"kp", g.kp}, {"ki", g.ki}, {"kd", g.kd}, {"integral_limit", g.integral_limit}};
  };
  j["best"] = {{"gains", gains(result.best.gains)}, {"rmse", result.best.rmse}};
  json all = json::array();
  for (const auto &c : result.candidates) {
    all.push_back({{"gains", gains(c.gains)}, {"rmse", c.rmse}});
  }
  j["candidates"] = all;
  write_text(run.out / "calibration.json", j.dump(2) + "\n");
  write_manifest(run, common, "calibrate-baselines", json{{"jobs", jobs}});
  if (run.verbose) {
    std::cout << "best kp=" << result.best.gains.kp << " ki=" << result.best.gains.ki
              << " kd=" << result.best.gains.kd
              << " integral_limit=" << result.best.gains.integral_limit
              << "  rmse=" << result.best.rmse << '\n';
  }
  return kExitOk;
}

} // namespace

int main(int argc, char **argv) {
  CLI::App app{"FES cycling controller workbench"};
  app.require_subcommand(1);
  Common common;
  common.argv.assign(argv, argv + argc);
  app.add_option("-c,--config", common.config_path, "YAML config file")->check(CLI::ExistingFile);
  app.add_option("--log-level", common.log_level, "quiet, info or debug")
      ->check(CLI::IsMember({"quiet", "info", "debug"}));

  auto add_out = [&](CLI::App *sub) {
    sub->add_option("-o,--out", common.out, "output directory");
    sub->add_flag("--force", common.force, "overwrite a non-empty output directory");
  };

  TrainArgs train;
  auto *train_cmd = app.add_subcommand("train", "train a Starter or Tracker agent");
  train_cmd->add_option("--mode", train.mode, "starter or tracker")
      ->check(CLI::IsMember({"starter", "tracker"}));
  train_cmd->add_option("--seed", train.seed, "training seed (overrides ddpg.seed)");
  train_cmd->add_option("--episodes", train.episodes, "episode count (overrides ddpg.episodes)");
  train_cmd->add_option("--starter", train.starter, "Starter checkpoint (tracker mode)");
  add_out(train_cmd);

  BenchArgs bench_args;
  auto *bench_cmd = app.add_subcommand("bench", "compare controllers on the bench scenarios");
  bench_cmd->add_option("--controllers", bench_args.controllers, "rl, pid, fuzzy, zero")
      ->delimiter(',');
  bench_cmd->add_option("--starter", bench_args.starter, "Starter checkpoint");
  bench_cmd->add_option("--tracker", bench_args.tracker, "Tracker checkpoint");
  bench_cmd->add_option("-j,--jobs", bench_args.jobs, "worker threads (0 = all cores)");
  bench_cmd->add_flag("!--no-trajectories", bench_args.trajectories,
                      "skip the per-run trajectory CSVs");
  add_out(bench_cmd);

  ExportArgs export_args;
  auto *export_cmd =
      app.add_subcommand("export-pattern", "convert a Tracker policy to a stimulation pattern");
  export_cmd->add_option("--tracker", export_args.tracker, "Tracker checkpoint")->required();
  export_cmd->add_option("--cadence", export_args.options.cadence, "rad/s");
  export_cmd->add_option("--fatigue-level", export_args.options.fatigue_level,
                         "fatigue factor of every muscle");
  export_cmd->add_option("--threshold", export_args.options.threshold, "ON threshold");
  export_cmd->add_option("--resolution", export_args.options.resolution_deg, "grid step, deg");
  add_out(export_cmd);

  TransferArgs transfer_args;
  auto *transfer_cmd =
      app.add_subcommand("transfer", "zero-shot and fine-tuned evaluation on a shifted seat");
  transfer_cmd->add_option("--starter", transfer_args.starter, "Starter checkpoint")->required();
  transfer_cmd->add_option("--tracker", transfer_args.tracker, "Tracker checkpoint")->required();
  transfer_cmd->add_option("--seat-shift", transfer_args.seat_shift, "rad");
  transfer_cmd->add_option("--budget", transfer_args.budget, "fine-tuning env-seconds");
  transfer_cmd->add_option("-j,--jobs", transfer_args.jobs, "worker threads (0 = all cores)");
  add_out(transfer_cmd);

  unsigned calibrate_jobs = 0;
  auto *calibrate_cmd =
      app.add_subcommand("calibrate-baselines", "grid search for the PID gains");
  calibrate_cmd->add_option("-j,--jobs", calibrate_jobs, "worker threads (0 = all cores)");
  add_out(calibrate_cmd);

  auto *dump_cmd = app.add_subcommand("dump-config", "print the effective config as YAML");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp &e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp &e) {
    return app.exit(e);
  } catch (const CLI::ParseError &e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (*train_cmd) {
      return cmd_train(common, train);
    }
    if (*bench_cmd) {
      return cmd_bench(common, bench_args);
    }
    if (*export_cmd) {
      return cmd_export(common, export_args);
    }
    if (*transfer_cmd) {
      return cmd_transfer(common, transfer_args);
    }
    if (*calibrate_cmd) {
      return cmd_calibrate(common, calibrate_jobs);
    }
    if (*dump_cmd) {
      const auto cfg = common.config_path.empty() ? config::WorkbenchConfig{}
                                                  : config::load(common.config_path);
      std::cout << config::serialize(cfg);
      return kExitOk;
    }
  } catch (const UsageError &e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const config::ConfigError &e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const CheckpointError &e) {
    std::cerr << "checkpoint error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const ContractError &e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception &e) {
    std::cerr << "runtime failure: " << e.what() << '\n';
    return kExitRuntime;
  }
  return kExitUsage;
}
