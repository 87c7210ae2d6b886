#include <doctest.h>

#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <sys/wait.h>
#include <unistd.h>

#include <nlohmann/json.hpp>

#include "fescycle/checkpoint.hpp"
#include "fescycle/config.hpp"

namespace fs = std::filesystem;
using namespace fes;

namespace {

struct Result {
  int code = -1;
  std::string output;
};

Result run(const std::string &args) {
  const std::string cmd = std::string(FESCYCLE_CLI) + " " + args + " 2>&1";
  Result r;
  FILE *pipe = popen(cmd.c_str(), "r");
  REQUIRE(pipe != nullptr);
  std::array<char, 4096> buf{};
  std::size_t n = 0;
  while ((n = fread(buf.data(), 1, buf.size(), pipe)) > 0) {
    r.output.append(buf.data(), n);
  }
  const int status = pclose(pipe);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

std::string slurp(const fs::path &p) {
  std::ifstream is(p, std::ios::binary);
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

class Workspace {
public:
  Workspace() : root_(fs::temp_directory_path() / ("fescycle_cli_" + std::to_string(getpid()))) {
    fs::remove_all(root_);
    fs::create_directories(root_);
    std::ofstream(root_ / "fast.yaml") << R"(
ddpg:
  hidden: 16
  batch_size: 8
  warmup: 20
  moving_average: 2
env:
  max_steps: 20
bench:
  scenarios:
    - {name: case1, duration: 4.0, first_target: 5.0, second_target: 5.0, switch_time: 2.0}
    - {name: case2, duration: 4.0, first_target: 5.0, second_target: 8.0, switch_time: 2.0}
    - {name: case3, duration: 4.0, first_target: 5.0, second_target: 3.0, switch_time: 2.0}
  seeds: [0, 1]
calibration:
  kp: [0.1, 0.2]
  ki: [0.0]
  kd: [0.0]
  seeds: [0]
log_level: quiet
)";
  }
  ~Workspace() { fs::remove_all(root_); }

  fs::path operator/(const std::string &name) const { return root_ / name; }
  std::string config() const { return "-c " + (root_ / "fast.yaml").string(); }

  // Untrained Starter and Tracker checkpoints, created once.
  void checkpoints() {
    if (fs::exists(root_ / "starter/policy.bin")) {
      return;
    }
    REQUIRE(run(config() + " train --mode starter --episodes 0 -o " + (root_ / "starter").string())
                .code == 0);
    REQUIRE(run(config() + " train --mode tracker --episodes 0 --starter " +
                (root_ / "starter/policy.bin").string() + " -o " + (root_ / "tracker").string())
                .code == 0);
  }
  std::string starter() const { return (root_ / "starter/policy.bin").string(); }
  std::string tracker() const { return (root_ / "tracker/policy.bin").string(); }

private:
  fs::path root_;
};

Workspace &workspace() {
  static Workspace w;
  return w;
}

} // namespace

TEST_CASE("help and usage errors") {
  CHECK(run("--help").code == 0);
  CHECK(run("").code == 1);
  CHECK(run("frobnicate").code == 1);
  CHECK(run("train --mode walker").code == 1);
}

TEST_CASE("dump-config prints the canonical defaults") {
  const auto r = run("dump-config");
  CHECK(r.code == 0);
  CHECK(config::parse(r.output) == config::WorkbenchConfig{});
}

TEST_CASE("invalid config exits 1 with a line-anchored diagnostic") {
  auto &w = workspace();
  std::ofstream(w / "bad.yaml") << "mech:\n  crank_inertia: 0.5\n  leg_dampng: 0.4\n";
  const auto r = run("-c " + (w / "bad.yaml").string() + " dump-config");
  CHECK(r.code == 1);
  CHECK(r.output.find("bad.yaml:3:3") != std::string::npos);
  CHECK(r.output.find("unknown key") != std::string::npos);
}

TEST_CASE("train with zero episodes writes an untrained checkpoint") {
  auto &w = workspace();
  const auto out = w / "train0";
  const auto r = run(w.config() + " train --mode starter --episodes 0 -o " + out.string());
  CHECK(r.code == 0);
  CHECK(fs::exists(out / "policy.bin"));
  CHECK(fs::exists(out / "policy_best.bin"));
  CHECK(fs::exists(out / "config.yaml"));
  const auto curve = slurp(out / "curve.csv");
  CHECK(std::count(curve.begin(), curve.end(), '\n') == 1);
  const auto ckpt = PolicyCheckpoint::load(out / "policy.bin", env::Mode::Starter);
  CHECK(ckpt.actor.input_dim() == 8);

  const auto m = nlohmann::json::parse(slurp(out / "manifest.json"));
  CHECK(m["command"] == "train");
  CHECK(m.contains("config_hash"));
  CHECK(m.contains("wall_time_s"));
  CHECK(m.contains("seed"));
  CHECK(m.contains("version"));
  CHECK(config::hash(config::load((out / "config.yaml").string())) == m["config_hash"]);
}

TEST_CASE("tracker training requires a starter") {
  auto &w = workspace();
  const auto r = run(w.config() + " train --mode tracker --episodes 0 -o " +
                     (w / "nostarter").string());
  CHECK(r.code == 1);
  CHECK(r.output.find("--starter") != std::string::npos);
}

TEST_CASE("same seed gives identical learning curves") {
  auto &w = workspace();
  const std::string common = w.config() + " train --mode starter --episodes 4 --seed 3 -o ";
  REQUIRE(run(common + (w / "seed_a").string()).code == 0);
  REQUIRE(run(common + (w / "seed_b").string()).code == 0);
  const auto a = slurp(w / "seed_a/curve.csv");
  CHECK(std::count(a.begin(), a.end(), '\n') == 5);
  CHECK(a == slurp(w / "seed_b/curve.csv"));
  CHECK(slurp(w / "seed_a/policy.bin") == slurp(w / "seed_b/policy.bin"));
}

TEST_CASE("output directories are not clobbered") {
  auto &w = workspace();
  const auto out = (w / "clobber").string();
  const std::string cmd = w.config() + " bench --controllers zero -o " + out;
  REQUIRE(run(cmd).code == 0);
  const auto again = run(cmd);
  CHECK(again.code == 1);
  CHECK(again.output.find("--force") != std::string::npos);
  CHECK(run(cmd + " --force").code == 0);
}

TEST_CASE("bench filters controllers") {
  auto &w = workspace();
  const auto out = w / "bench_pid";
  REQUIRE(run(w.config() + " bench --controllers pid -o " + out.string()).code == 0);
  const auto j = nlohmann::json::parse(slurp(out / "report.json"));
  CHECK(j["controllers"].size() == 1);
  CHECK(j["cells"].size() == 3);
  CHECK(fs::exists(out / "report.txt"));
  CHECK(fs::exists(out / "cadence_long.csv"));
  CHECK(fs::exists(out / "trajectories/pid_case2_1.csv"));
}

TEST_CASE("full bench report has every controller, scenario and metric") {
  auto &w = workspace();
  w.checkpoints();
  const auto out = w / "bench_full";
  const auto r = run(w.config() + " bench --starter " + w.starter() + " --tracker " +
                     w.tracker() + " --no-trajectories -o " + out.string());
  REQUIRE(r.code == 0);
  const auto j = nlohmann::json::parse(slurp(out / "report.json"));
  CHECK(j["controllers"] == nlohmann::json({"rl", "pid", "fuzzy"}));
  REQUIRE(j["cells"].size() == 9);
  for (const auto &c : j["cells"]) {
    CHECK(c.contains("rmse"));
    CHECK(c.contains("response_time"));
  }
  CHECK_FALSE(fs::exists(out / "trajectories"));
}

TEST_CASE("bench reports missing checkpoints") {
  auto &w = workspace();
  const auto r = run(w.config() + " bench --controllers rl --starter /nonexistent.bin -o " +
                     (w / "bench_missing").string());
  CHECK(r.code == 1);
  CHECK(r.output.find("nonexistent") != std::string::npos);
}

TEST_CASE("export-pattern writes json and csv") {
  auto &w = workspace();
  w.checkpoints();
  const auto out = w / "pattern";
  const auto r = run(w.config() + " export-pattern --tracker " + w.tracker() +
                     " --cadence 6 --fatigue-level 0.8 --threshold 0.2 --resolution 5 -o " +
                     out.string());
  REQUIRE(r.code == 0);
  const auto j = nlohmann::json::parse(slurp(out / "pattern.json"));
  CHECK(j["angles_deg"].size() == 72);
  CHECK(j["cadence"] == 6.0);
  CHECK(fs::exists(out / "pattern.csv"));
  CHECK(run(w.config() + " export-pattern --tracker " + w.starter() + " -o " +
            (w / "pattern_bad").string())
            .code == 1);
}

TEST_CASE("transfer with zero budget keeps the checkpoint") {
  auto &w = workspace();
  w.checkpoints();
  const auto out = w / "transfer0";
  const auto r = run(w.config() + " transfer --starter " + w.starter() + " --tracker " +
                     w.tracker() + " --seat-shift 0 --budget 0 -o " + out.string());
  REQUIRE(r.code == 0);
  CHECK(slurp(out / "tracker_adapted.bin") == slurp(w.tracker()));
  const auto j = nlohmann::json::parse(slurp(out / "transfer.json"));
  CHECK(j["zero_shot"] == j["adapted"]);
  CHECK(fs::exists(out / "zero_shot.txt"));
  CHECK(fs::exists(out / "adapted.txt"));
}

TEST_CASE("transfer fine-tunes within the budget") {
  auto &w = workspace();
  w.checkpoints();
  const auto out = w / "transfer";
  const auto r = run(w.config() + " transfer --starter " + w.starter() + " --tracker " +
                     w.tracker() + " --budget 4 -o " + out.string());
  REQUIRE(r.code == 0);
  const auto j = nlohmann::json::parse(slurp(out / "transfer.json"));
  CHECK(j["seat_shift"] == 0.15);
  CHECK(j["env_steps"] == 40);
  CHECK(j.contains("zero_shot"));
  CHECK(j.contains("adapted"));
  CHECK(slurp(out / "tracker_adapted.bin") != slurp(w.tracker()));
}

TEST_CASE("calibrate-baselines searches the configured grid") {
  auto &w = workspace();
  const auto out = w / "calibrate";
  REQUIRE(run(w.config() + " calibrate-baselines -o " + out.string()).code == 0);
  const auto j = nlohmann::json::parse(slurp(out / "calibration.json"));
  CHECK(j["candidates"].size() == 2);
  CHECK(j["best"].contains("gains"));
  CHECK(fs::exists(out / "manifest.json"));
}

TEST_CASE("runtime failures exit 2") {
  auto &w = workspace();
  std::ofstream(w / "plainfile").close();
  const auto r = run(w.config() + " bench --controllers zero -o " + (w / "plainfile").string());
  CHECK(r.code == 2);
}
