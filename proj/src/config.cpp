#include "fescycle/config.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <set>
#include <sstream>

#include <yaml-cpp/yaml.h>

#include "fescycle/checkpoint.hpp"
#include "fescycle/error.hpp"

namespace fes::config {

namespace {

constexpr double kDeg = std::numbers::pi / 180.0;

struct Context {
  std::string source;

  [[noreturn]] void fail(const YAML::Node &node, const std::string &path,
                         const std::string &message) const {
    std::ostringstream os;
    os << source;
    const auto mark = node.Mark();
    if (!mark.is_null()) {
      os << ':' << mark.line + 1 << ':' << mark.column + 1;
    }
    os << ": " << path << ": " << message;
    throw ConfigError(os.str());
  }

  void expect_map(const YAML::Node &node, const std::string &path) const {
    if (!node.IsMap()) {
      fail(node, path, "expected a mapping");
    }
  }

  void check_keys(const YAML::Node &node, const std::string &path,
                  std::initializer_list<std::string_view> allowed) const {
    expect_map(node, path);
    for (const auto &kv : node) {
      const auto key = kv.first.as<std::string>();
      bool known = false;
      for (auto a : allowed) {
        known = known || a == key;
      }
      if (!known) {
        fail(kv.first, join(path, key), "unknown key");
      }
    }
  }

  template <typename T>
  T convert(const YAML::Node &node, const std::string &path) const {
    if (!node.IsScalar()) {
      fail(node, path, "expected a scalar");
    }
    try {
      return node.as<T>();
    } catch (const YAML::BadConversion &) {
      fail(node, path, "cannot convert '" + node.Scalar() + "'");
    }
  }

  template <typename T>
  void get(const YAML::Node &map, const std::string &path, const char *key, T &out) const {
    const YAML::Node node = map[key];
    if (node) {
      out = convert<T>(node, join(path, key));
    }
  }

  template <typename T>
  void get_list(const YAML::Node &map, const std::string &path, const char *key,
                std::vector<T> &out) const {
    const YAML::Node node = map[key];
    if (!node) {
      return;
    }
    const auto p = join(path, key);
    if (!node.IsSequence()) {
      fail(node, p, "expected a sequence");
    }
    out.clear();
    for (std::size_t i = 0; i < node.size(); ++i) {
      out.push_back(convert<T>(node[i], p + "[" + std::to_string(i) + "]"));
    }
  }

  /// Run a struct's own validation and anchor any failure at `node`.
  template <typename F>
  void validated(const YAML::Node &node, const std::string &path, F &&check) const {
    try {
      check();
    } catch (const ContractError &e) {
      fail(node, path, e.what());
    }
  }

  static std::string join(const std::string &path, std::string_view key) {
    return path.empty() ? std::string(key) : path + "." + std::string(key);
  }
};

std::size_t muscle_index(const Context &ctx, const YAML::Node &key, const std::string &path) {
  const auto name = key.as<std::string>();
  for (std::size_t i = 0; i < mech::kMuscles; ++i) {
    if (mech::kMuscleNames[i] == name) {
      return i;
    }
  }
  ctx.fail(key, Context::join(path, name), "unknown muscle");
}

void read_muscle(const Context &ctx, const YAML::Node &n, const std::string &path,
                 physio::MuscleParams &p) {
  ctx.check_keys(n, path,
                 {"max_isometric_force", "tau_act", "tau_deact", "fatigue_rate",
                  "recovery_rate", "fl_width", "v_max", "passive_scale"});
  ctx.get(n, path, "max_isometric_force", p.max_isometric_force);
  ctx.get(n, path, "tau_act", p.tau_act);
  ctx.get(n, path, "tau_deact", p.tau_deact);
  ctx.get(n, path, "fatigue_rate", p.fatigue_rate);
  ctx.get(n, path, "recovery_rate", p.recovery_rate);
  ctx.get(n, path, "fl_width", p.fl_width);
  ctx.get(n, path, "v_max", p.v_max);
  ctx.get(n, path, "passive_scale", p.passive_scale);
}

void read_physio(const Context &ctx, const YAML::Node &n, WorkbenchConfig &c) {
  const std::string path = "physio";
  ctx.check_keys(n, path, {"defaults", "overrides"});
  physio::MuscleParams defaults = c.muscles[0];
  if (const YAML::Node d = n["defaults"]) {
    read_muscle(ctx, d, "physio.defaults", defaults);
  }
  c.muscles.fill(defaults);
  if (const YAML::Node o = n["overrides"]) {
    ctx.expect_map(o, "physio.overrides");
    for (const auto &kv : o) {
      const auto i = muscle_index(ctx, kv.first, "physio.overrides");
      read_muscle(ctx, kv.second, "physio.overrides." + kv.first.as<std::string>(),
                  c.muscles[i]);
    }
  }
  ctx.validated(n, path, [&] {
    for (const auto &m : c.muscles) {
      m.validate();
    }
  });
}

void read_mech(const Context &ctx, const YAML::Node &n, WorkbenchConfig &c) {
  const std::string path = "mech";
  ctx.check_keys(n, path, {"crank_inertia", "leg_damping", "paths"});
  ctx.get(n, path, "crank_inertia", c.geometry.crank_inertia);
  ctx.get(n, path, "leg_damping", c.geometry.leg_damping);
  if (const YAML::Node paths = n["paths"]) {
    ctx.expect_map(paths, "mech.paths");
    for (const auto &kv : paths) {
      const auto i = muscle_index(ctx, kv.first, "mech.paths");
      const auto p = "mech.paths." + kv.first.as<std::string>();
      ctx.check_keys(kv.second, p,
                     {"moment_arm_peak", "phase_offset", "slack_norm_length", "length_gain"});
      auto &mp = c.geometry.paths[i];
      ctx.get(kv.second, p, "moment_arm_peak", mp.moment_arm_peak);
      ctx.get(kv.second, p, "phase_offset", mp.phase_offset);
      ctx.get(kv.second, p, "slack_norm_length", mp.slack_norm_length);
      ctx.get(kv.second, p, "length_gain", mp.length_gain);
    }
  }
  ctx.validated(n, path, [&] { c.geometry.validate(); });
}

void read_env(const Context &ctx, const YAML::Node &n, WorkbenchConfig &c) {
  const std::string path = "env";
  ctx.check_keys(n, path,
                 {"max_steps", "dt", "desired_lo", "desired_hi", "fatigue_rate_multiplier",
                  "normalization"});
  ctx.get(n, path, "max_steps", c.episode.max_steps);
  ctx.get(n, path, "dt", c.episode.dt);
  ctx.get(n, path, "desired_lo", c.episode.desired_lo);
  ctx.get(n, path, "desired_hi", c.episode.desired_hi);
  ctx.get(n, path, "fatigue_rate_multiplier", c.episode.fatigue_rate_multiplier);
  if (const YAML::Node norm = n["normalization"]) {
    const std::string p = "env.normalization";
    ctx.check_keys(norm, p, {"theta_scale", "cadence_scale", "desired_scale", "max_entry"});
    ctx.get(norm, p, "theta_scale", c.normalization.theta_scale);
    ctx.get(norm, p, "cadence_scale", c.normalization.cadence_scale);
    ctx.get(norm, p, "desired_scale", c.normalization.desired_scale);
    ctx.get(norm, p, "max_entry", c.normalization.max_entry);
    ctx.validated(norm, p, [&] {
      const auto &z = c.normalization;
      require(z.theta_scale > 0 && z.cadence_scale > 0 && z.desired_scale > 0 &&
                  z.max_entry > 0,
              "normalization scales must be positive");
    });
  }
  ctx.validated(n, path, [&] { c.episode.validate(); });
}

void read_ddpg(const Context &ctx, const YAML::Node &n, WorkbenchConfig &c) {
  const std::string path = "ddpg";
  ctx.check_keys(n, path,
                 {"episodes", "batch_size", "gamma", "tau", "actor_lr", "critic_lr",
                  "buffer_capacity", "warmup", "sigma_start", "sigma_end", "noise",
                  "ou_theta", "grad_clip", "hidden", "moving_average", "max_env_steps",
                  "seed"});
  auto &t = c.train;
  ctx.get(n, path, "episodes", t.episodes);
  ctx.get(n, path, "batch_size", t.batch_size);
  ctx.get(n, path, "gamma", t.gamma);
  ctx.get(n, path, "tau", t.tau);
  ctx.get(n, path, "actor_lr", t.actor_lr);
  ctx.get(n, path, "critic_lr", t.critic_lr);
  ctx.get(n, path, "buffer_capacity", t.buffer_capacity);
  ctx.get(n, path, "warmup", t.warmup);
  ctx.get(n, path, "sigma_start", t.sigma_start);
  ctx.get(n, path, "sigma_end", t.sigma_end);
  if (const YAML::Node noise = n["noise"]) {
    const auto v = ctx.convert<std::string>(noise, "ddpg.noise");
    if (v == "gaussian") {
      t.noise = ddpg::NoiseKind::Gaussian;
    } else if (v == "ou") {
      t.noise = ddpg::NoiseKind::OrnsteinUhlenbeck;
    } else {
      ctx.fail(noise, "ddpg.noise", "expected 'gaussian' or 'ou'");
    }
  }
  ctx.get(n, path, "ou_theta", t.ou_theta);
  ctx.get(n, path, "grad_clip", t.grad_clip);
  ctx.get(n, path, "hidden", t.hidden);
  ctx.get(n, path, "moving_average", t.moving_average);
  ctx.get(n, path, "max_env_steps", t.max_env_steps);
  ctx.get(n, path, "seed", t.seed);
  ctx.validated(n, path, [&] { t.validate(); });
}

void read_baselines(const Context &ctx, const YAML::Node &n, WorkbenchConfig &c) {
  const std::string path = "baselines";
  ctx.check_keys(n, path, {"pattern", "pid", "fuzzy"});
  if (const YAML::Node p = n["pattern"]) {
    const std::string pp = "baselines.pattern";
    ctx.check_keys(p, pp, {"arc_width_deg", "lead_time", "arcs_deg"});
    ctx.get(p, pp, "arc_width_deg", c.pattern.arc_width_deg);
    ctx.get(p, pp, "lead_time", c.pattern.lead_time);
    if (const YAML::Node arcs = p["arcs_deg"]; arcs && !arcs.IsNull()) {
      ctx.expect_map(arcs, pp + ".arcs_deg");
      std::array<std::array<double, 2>, mech::kMuscles> values{};
      std::array<bool, mech::kMuscles> seen{};
      for (const auto &kv : arcs) {
        const auto i = muscle_index(ctx, kv.first, pp + ".arcs_deg");
        const auto ap = pp + ".arcs_deg." + kv.first.as<std::string>();
        if (!kv.second.IsSequence() || kv.second.size() != 2) {
          ctx.fail(kv.second, ap, "expected [on, off] in degrees");
        }
        values[i] = {ctx.convert<double>(kv.second[0], ap + "[0]"),
                     ctx.convert<double>(kv.second[1], ap + "[1]")};
        seen[i] = true;
      }
      for (std::size_t i = 0; i < mech::kMuscles; ++i) {
        if (!seen[i]) {
          ctx.fail(arcs, pp + ".arcs_deg",
                   "missing arc for " + std::string(mech::kMuscleNames[i]));
        }
      }
      c.pattern.arcs_deg = values;
    }
    ctx.validated(p, pp, [&] {
      require(c.pattern.arc_width_deg > 0 && c.pattern.arc_width_deg < 360,
              "arc_width_deg must lie in (0, 360)");
      c.stim_pattern().validate();
    });
  }
  if (const YAML::Node p = n["pid"]) {
    const std::string pp = "baselines.pid";
    ctx.check_keys(p, pp, {"kp", "ki", "kd", "integral_limit"});
    ctx.get(p, pp, "kp", c.pid.kp);
    ctx.get(p, pp, "ki", c.pid.ki);
    ctx.get(p, pp, "kd", c.pid.kd);
    ctx.get(p, pp, "integral_limit", c.pid.integral_limit);
    ctx.validated(p, pp, [&] { c.pid.validate(); });
  }
  if (const YAML::Node f = n["fuzzy"]) {
    const std::string fp = "baselines.fuzzy";
    ctx.check_keys(f, fp, {"error_range", "rate_range", "singletons", "rules"});
    ctx.get(f, fp, "error_range", c.fuzzy.error_range);
    ctx.get(f, fp, "rate_range", c.fuzzy.rate_range);
    constexpr int k = baselines::FuzzyRuleBase::kSets;
    if (const YAML::Node s = f["singletons"]) {
      if (!s.IsSequence() || s.size() != k) {
        ctx.fail(s, fp + ".singletons", "expected 5 values");
      }
      for (int i = 0; i < k; ++i) {
        c.fuzzy.singletons[i] =
            ctx.convert<double>(s[i], fp + ".singletons[" + std::to_string(i) + "]");
      }
    }
    if (const YAML::Node r = f["rules"]) {
      if (!r.IsSequence() || r.size() != k) {
        ctx.fail(r, fp + ".rules", "expected 5 rows");
      }
      for (int e = 0; e < k; ++e) {
        const auto rp = fp + ".rules[" + std::to_string(e) + "]";
        if (!r[e].IsSequence() || r[e].size() != k) {
          ctx.fail(r[e], rp, "expected 5 entries");
        }
        for (int de = 0; de < k; ++de) {
          c.fuzzy.rules[e][de] =
              ctx.convert<int>(r[e][de], rp + "[" + std::to_string(de) + "]");
        }
      }
    }
    ctx.validated(f, fp, [&] { c.fuzzy.validate(); });
  }
}

void read_bench(const Context &ctx, const YAML::Node &n, WorkbenchConfig &c) {
  const std::string path = "bench";
  ctx.check_keys(n, path, {"scenarios", "seeds"});
  if (const YAML::Node s = n["scenarios"]) {
    if (!s.IsSequence() || s.size() == 0) {
      ctx.fail(s, "bench.scenarios", "expected a non-empty sequence");
    }
    c.scenarios.clear();
    for (std::size_t i = 0; i < s.size(); ++i) {
      const auto sp = "bench.scenarios[" + std::to_string(i) + "]";
      ctx.check_keys(s[i], sp,
                     {"name", "duration", "first_target", "second_target", "switch_time",
                      "fatigue_multiplier"});
      bench::Scenario sc;
      sc.name = "case" + std::to_string(i + 1);
      ctx.get(s[i], sp, "name", sc.name);
      ctx.get(s[i], sp, "duration", sc.duration);
      ctx.get(s[i], sp, "first_target", sc.first_target);
      ctx.get(s[i], sp, "second_target", sc.second_target);
      ctx.get(s[i], sp, "switch_time", sc.switch_time);
      ctx.get(s[i], sp, "fatigue_multiplier", sc.fatigue_multiplier);
      ctx.validated(s[i], sp, [&] { sc.validate(); });
      c.scenarios.push_back(sc);
    }
  }
  ctx.get_list(n, path, "seeds", c.seeds);
  if (c.seeds.empty()) {
    ctx.fail(n, "bench.seeds", "at least one seed is required");
  }
}

void read_transfer(const Context &ctx, const YAML::Node &n, WorkbenchConfig &c) {
  const std::string path = "transfer";
  ctx.check_keys(n, path, {"seat_shift", "budget_seconds"});
  ctx.get(n, path, "seat_shift", c.transfer.seat_shift);
  ctx.get(n, path, "budget_seconds", c.transfer.budget_seconds);
  if (!(c.transfer.budget_seconds >= 0)) {
    ctx.fail(n, "transfer.budget_seconds", "must be non-negative");
  }
}

void read_calibration(const Context &ctx, const YAML::Node &n, WorkbenchConfig &c) {
  const std::string path = "calibration";
  ctx.check_keys(n, path, {"kp", "ki", "kd", "integral_limit", "seeds"});
  auto &g = c.calibration.grid;
  ctx.get_list(n, path, "kp", g.kp);
  ctx.get_list(n, path, "ki", g.ki);
  ctx.get_list(n, path, "kd", g.kd);
  ctx.get_list(n, path, "integral_limit", g.integral_limit);
  ctx.get_list(n, path, "seeds", c.calibration.seeds);
  ctx.validated(n, path, [&] {
    g.validate();
    require(!c.calibration.seeds.empty(), "at least one calibration seed is required");
  });
}

std::string number(double v) {
  char buf[64];
  const auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  std::string s(buf, end);
  // Keep integral doubles visibly floating so they read back as the same type.
  if (s.find_first_of(".eEn") == std::string::npos) {
    s += ".0";
  }
  return s;
}

template <typename T>
void emit_list(YAML::Emitter &out, const std::vector<T> &values) {
  out << YAML::Flow << YAML::BeginSeq;
  for (const auto &v : values) {
    if constexpr (std::is_floating_point_v<T>) {
      out << number(v);
    } else {
      out << v;
    }
  }
  out << YAML::EndSeq;
}

void emit_muscle(YAML::Emitter &out, const physio::MuscleParams &p,
                 const physio::MuscleParams *base) {
  out << YAML::BeginMap;
  auto field = [&](const char *key, double v, double b) {
    if (!base || v != b) {
      out << YAML::Key << key << YAML::Value << number(v);
    }
  };
  const physio::MuscleParams &b = base ? *base : p;
  field("max_isometric_force", p.max_isometric_force, b.max_isometric_force);
  field("tau_act", p.tau_act, b.tau_act);
  field("tau_deact", p.tau_deact, b.tau_deact);
  field("fatigue_rate", p.fatigue_rate, b.fatigue_rate);
  field("recovery_rate", p.recovery_rate, b.recovery_rate);
  field("fl_width", p.fl_width, b.fl_width);
  field("v_max", p.v_max, b.v_max);
  field("passive_scale", p.passive_scale, b.passive_scale);
  out << YAML::EndMap;
}

bool same_muscle(const physio::MuscleParams &a, const physio::MuscleParams &b) {
  return a.max_isometric_force == b.max_isometric_force && a.tau_act == b.tau_act &&
         a.tau_deact == b.tau_deact && a.fatigue_rate == b.fatigue_rate &&
         a.recovery_rate == b.recovery_rate && a.fl_width == b.fl_width &&
         a.v_max == b.v_max && a.passive_scale == b.passive_scale;
}

} // namespace

baselines::StimPattern WorkbenchConfig::stim_pattern() const {
  if (!pattern.arcs_deg) {
    return baselines::StimPattern::from_geometry(geometry, pattern.arc_width_deg * kDeg,
                                                 pattern.lead_time);
  }
  baselines::StimPattern p;
  p.lead_time = pattern.lead_time;
  for (std::size_t i = 0; i < mech::kMuscles; ++i) {
    p.arcs[i] = {mech::wrap_angle((*pattern.arcs_deg)[i][0] * kDeg),
                 mech::wrap_angle((*pattern.arcs_deg)[i][1] * kDeg)};
  }
  return p;
}

void WorkbenchConfig::validate() const {
  try {
    for (const auto &m : muscles) {
      m.validate();
    }
    geometry.validate();
    episode.validate();
    train.validate();
    stim_pattern().validate();
    pid.validate();
    fuzzy.validate();
    require(!scenarios.empty() && !seeds.empty(), "bench needs scenarios and seeds");
    for (const auto &s : scenarios) {
      s.validate();
    }
    require(transfer.budget_seconds >= 0, "transfer budget must be non-negative");
    calibration.grid.validate();
    require(!calibration.seeds.empty(), "calibration needs at least one seed");
  } catch (const ContractError &e) {
    throw ConfigError(e.what());
  }
}

WorkbenchConfig parse(const std::string &text, const std::string &source) {
  const Context ctx{source};
  YAML::Node root;
  try {
    root = YAML::Load(text);
  } catch (const YAML::ParserException &e) {
    std::ostringstream os;
    os << source << ':' << e.mark.line + 1 << ':' << e.mark.column + 1 << ": " << e.msg;
    throw ConfigError(os.str());
  }
  WorkbenchConfig c;
  if (root.IsNull()) {
    return c;
  }
  ctx.check_keys(root, "",
                 {"physio", "mech", "env", "ddpg", "baselines", "bench", "transfer",
                  "calibration", "output_dir", "log_level"});
  if (const YAML::Node n = root["physio"]) {
    read_physio(ctx, n, c);
  }
  if (const YAML::Node n = root["mech"]) {
    read_mech(ctx, n, c);
  }
  if (const YAML::Node n = root["env"]) {
    read_env(ctx, n, c);
  }
  if (const YAML::Node n = root["ddpg"]) {
    read_ddpg(ctx, n, c);
  }
  if (const YAML::Node n = root["baselines"]) {
    read_baselines(ctx, n, c);
  }
  if (const YAML::Node n = root["bench"]) {
    read_bench(ctx, n, c);
  }
  if (const YAML::Node n = root["transfer"]) {
    read_transfer(ctx, n, c);
  }
  if (const YAML::Node n = root["calibration"]) {
    read_calibration(ctx, n, c);
  }
  ctx.get(root, "", "output_dir", c.output_dir);
  if (const YAML::Node n = root["log_level"]) {
    c.log_level = ctx.convert<std::string>(n, "log_level");
    if (c.log_level != "quiet" && c.log_level != "info" && c.log_level != "debug") {
      ctx.fail(n, "log_level", "expected quiet, info or debug");
    }
  }
  try {
    c.validate();
  } catch (const ConfigError &e) {
    ctx.fail(root, "config", e.what());
  }
  return c;
}

WorkbenchConfig load(const std::string &path) {
  std::ifstream in(path);
  if (!in) {
    throw ConfigError(path + ": cannot open config file");
  }
  std::ostringstream text;
  text << in.rdbuf();
  return parse(text.str(), path);
}

std::string serialize(const WorkbenchConfig &c) {
  YAML::Emitter out;
  out << YAML::BeginMap;

  out << YAML::Key << "physio" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "defaults" << YAML::Value;
  emit_muscle(out, c.muscles[0], nullptr);
  bool any_override = false;
  for (std::size_t i = 1; i < mech::kMuscles; ++i) {
    any_override = any_override || !same_muscle(c.muscles[i], c.muscles[0]);
  }
  if (any_override) {
    out << YAML::Key << "overrides" << YAML::Value << YAML::BeginMap;
    for (std::size_t i = 1; i < mech::kMuscles; ++i) {
      if (!same_muscle(c.muscles[i], c.muscles[0])) {
        out << YAML::Key << std::string(mech::kMuscleNames[i]) << YAML::Value;
        emit_muscle(out, c.muscles[i], &c.muscles[0]);
      }
    }
    out << YAML::EndMap;
  }
  out << YAML::EndMap;

  out << YAML::Key << "mech" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "crank_inertia" << YAML::Value << number(c.geometry.crank_inertia);
  out << YAML::Key << "leg_damping" << YAML::Value << number(c.geometry.leg_damping);
  out << YAML::Key << "paths" << YAML::Value << YAML::BeginMap;
  for (std::size_t i = 0; i < mech::kMuscles; ++i) {
    const auto &p = c.geometry.paths[i];
    out << YAML::Key << std::string(mech::kMuscleNames[i]) << YAML::Value << YAML::Flow
        << YAML::BeginMap;
    out << YAML::Key << "moment_arm_peak" << YAML::Value << number(p.moment_arm_peak);
    out << YAML::Key << "phase_offset" << YAML::Value << number(p.phase_offset);
    out << YAML::Key << "slack_norm_length" << YAML::Value << number(p.slack_norm_length);
    out << YAML::Key << "length_gain" << YAML::Value << number(p.length_gain);
    out << YAML::EndMap;
  }
  out << YAML::EndMap << YAML::EndMap;

  const auto &e = c.episode;
  const auto &z = c.normalization;
  out << YAML::Key << "env" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "max_steps" << YAML::Value << e.max_steps;
  out << YAML::Key << "dt" << YAML::Value << number(e.dt);
  out << YAML::Key << "desired_lo" << YAML::Value << number(e.desired_lo);
  out << YAML::Key << "desired_hi" << YAML::Value << number(e.desired_hi);
  out << YAML::Key << "fatigue_rate_multiplier" << YAML::Value
      << number(e.fatigue_rate_multiplier);
  out << YAML::Key << "normalization" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "theta_scale" << YAML::Value << number(z.theta_scale);
  out << YAML::Key << "cadence_scale" << YAML::Value << number(z.cadence_scale);
  out << YAML::Key << "desired_scale" << YAML::Value << number(z.desired_scale);
  out << YAML::Key << "max_entry" << YAML::Value << number(z.max_entry);
  out << YAML::EndMap << YAML::EndMap;

  const auto &t = c.train;
  out << YAML::Key << "ddpg" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "episodes" << YAML::Value << t.episodes;
  out << YAML::Key << "batch_size" << YAML::Value << t.batch_size;
  out << YAML::Key << "gamma" << YAML::Value << number(t.gamma);
  out << YAML::Key << "tau" << YAML::Value << number(t.tau);
  out << YAML::Key << "actor_lr" << YAML::Value << number(t.actor_lr);
  out << YAML::Key << "critic_lr" << YAML::Value << number(t.critic_lr);
  out << YAML::Key << "buffer_capacity" << YAML::Value << t.buffer_capacity;
  out << YAML::Key << "warmup" << YAML::Value << t.warmup;
  out << YAML::Key << "sigma_start" << YAML::Value << number(t.sigma_start);
  out << YAML::Key << "sigma_end" << YAML::Value << number(t.sigma_end);
  out << YAML::Key << "noise" << YAML::Value
      << (t.noise == ddpg::NoiseKind::Gaussian ? "gaussian" : "ou");
  out << YAML::Key << "ou_theta" << YAML::Value << number(t.ou_theta);
  out << YAML::Key << "grad_clip" << YAML::Value << number(t.grad_clip);
  out << YAML::Key << "hidden" << YAML::Value << t.hidden;
  out << YAML::Key << "moving_average" << YAML::Value << t.moving_average;
  out << YAML::Key << "max_env_steps" << YAML::Value << t.max_env_steps;
  out << YAML::Key << "seed" << YAML::Value << t.seed;
  out << YAML::EndMap;

  out << YAML::Key << "baselines" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "pattern" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "arc_width_deg" << YAML::Value << number(c.pattern.arc_width_deg);
  out << YAML::Key << "lead_time" << YAML::Value << number(c.pattern.lead_time);
  if (c.pattern.arcs_deg) {
    out << YAML::Key << "arcs_deg" << YAML::Value << YAML::BeginMap;
    for (std::size_t i = 0; i < mech::kMuscles; ++i) {
      out << YAML::Key << std::string(mech::kMuscleNames[i]) << YAML::Value;
      emit_list(out, std::vector<double>{(*c.pattern.arcs_deg)[i][0],
                                         (*c.pattern.arcs_deg)[i][1]});
    }
    out << YAML::EndMap;
  }
  out << YAML::EndMap;
  out << YAML::Key << "pid" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "kp" << YAML::Value << number(c.pid.kp);
  out << YAML::Key << "ki" << YAML::Value << number(c.pid.ki);
  out << YAML::Key << "kd" << YAML::Value << number(c.pid.kd);
  out << YAML::Key << "integral_limit" << YAML::Value << number(c.pid.integral_limit);
  out << YAML::EndMap;
  out << YAML::Key << "fuzzy" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "error_range" << YAML::Value << number(c.fuzzy.error_range);
  out << YAML::Key << "rate_range" << YAML::Value << number(c.fuzzy.rate_range);
  out << YAML::Key << "singletons" << YAML::Value;
  emit_list(out, std::vector<double>(c.fuzzy.singletons.begin(), c.fuzzy.singletons.end()));
  out << YAML::Key << "rules" << YAML::Value << YAML::BeginSeq;
  for (const auto &row : c.fuzzy.rules) {
    emit_list(out, std::vector<int>(row.begin(), row.end()));
  }
  out << YAML::EndSeq << YAML::EndMap << YAML::EndMap;

  out << YAML::Key << "bench" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "scenarios" << YAML::Value << YAML::BeginSeq;
  for (const auto &s : c.scenarios) {
    out << YAML::Flow << YAML::BeginMap;
    out << YAML::Key << "name" << YAML::Value << s.name;
    out << YAML::Key << "duration" << YAML::Value << number(s.duration);
    out << YAML::Key << "first_target" << YAML::Value << number(s.first_target);
    out << YAML::Key << "second_target" << YAML::Value << number(s.second_target);
    out << YAML::Key << "switch_time" << YAML::Value << number(s.switch_time);
    out << YAML::Key << "fatigue_multiplier" << YAML::Value << number(s.fatigue_multiplier);
    out << YAML::EndMap;
  }
  out << YAML::EndSeq;
  out << YAML::Key << "seeds" << YAML::Value;
  emit_list(out, c.seeds);
  out << YAML::EndMap;

  out << YAML::Key << "transfer" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "seat_shift" << YAML::Value << number(c.transfer.seat_shift);
  out << YAML::Key << "budget_seconds" << YAML::Value << number(c.transfer.budget_seconds);
  out << YAML::EndMap;

  const auto &g = c.calibration.grid;
  out << YAML::Key << "calibration" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "kp" << YAML::Value;
  emit_list(out, g.kp);
  out << YAML::Key << "ki" << YAML::Value;
  emit_list(out, g.ki);
  out << YAML::Key << "kd" << YAML::Value;
  emit_list(out, g.kd);
  out << YAML::Key << "integral_limit" << YAML::Value;
  emit_list(out, g.integral_limit);
  out << YAML::Key << "seeds" << YAML::Value;
  emit_list(out, c.calibration.seeds);
  out << YAML::EndMap;

  out << YAML::Key << "output_dir" << YAML::Value << c.output_dir;
  out << YAML::Key << "log_level" << YAML::Value << c.log_level;
  out << YAML::EndMap;
  return std::string(out.c_str()) + "\n";
}

std::string hash(const WorkbenchConfig &config) {
  const auto text = serialize(config);
  char buf[9];
  std::snprintf(buf, sizeof buf, "%08x",
                crc32(reinterpret_cast<const std::uint8_t *>(text.data()), text.size()));
  return buf;
}

bool operator==(const WorkbenchConfig &a, const WorkbenchConfig &b) {
  return serialize(a) == serialize(b);
}

} // namespace fes::config
