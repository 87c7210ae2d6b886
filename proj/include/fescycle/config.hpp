#pragma once

/**
 * @file config.hpp
 * @brief Workbench configuration: one YAML document holding every tunable of
 *        the plant, the environment, the trainer, the baselines and the bench.
 *
 * Loading validates everything and rejects unknown keys. Errors carry the
 * source name, line and column of the offending node.
 */

#include <array>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "fescycle/baselines.hpp"
#include "fescycle/bench.hpp"
#include "fescycle/ddpg.hpp"
#include "fescycle/env.hpp"
#include "fescycle/mech.hpp"

namespace fes::config {

class ConfigError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

struct PatternConfig {
  double arc_width_deg = 110.0;
  double lead_time = 0.1;
  /// Explicit ON arcs in degrees; derived from the geometry when absent.
  std::optional<std::array<std::array<double, 2>, mech::kMuscles>> arcs_deg;
};

struct TransferConfig {
  double seat_shift = 0.15;
  double budget_seconds = 600.0;
};

struct CalibrationConfig {
  bench::PidGrid grid = bench::PidGrid::standard();
  std::vector<std::uint64_t> seeds = {0, 1, 2};
};

struct WorkbenchConfig {
  mech::MuscleParamSet muscles{};
  mech::RigGeometry geometry = mech::RigGeometry::standard();
  env::EpisodeConfig episode{};
  env::Normalization normalization{};
  ddpg::TrainConfig train{};
  PatternConfig pattern{};
  baselines::PidGains pid{};
  baselines::FuzzyRuleBase fuzzy = baselines::FuzzyRuleBase::standard();
  std::vector<bench::Scenario> scenarios = bench::Scenario::standard();
  std::vector<std::uint64_t> seeds = {0, 1, 2, 3, 4};
  TransferConfig transfer{};
  CalibrationConfig calibration{};
  std::string output_dir = "runs";
  std::string log_level = "info";

  env::Plant plant() const { return {geometry, muscles}; }
  baselines::StimPattern stim_pattern() const;

  /// Throws ConfigError describing the first invalid field.
  void validate() const;
};

/// Parse and validate a YAML document. `source` names it in diagnostics.
WorkbenchConfig parse(const std::string &text, const std::string &source = "<config>");
WorkbenchConfig load(const std::string &path);

/// Canonical YAML. parse(serialize(c)) == c field for field.
std::string serialize(const WorkbenchConfig &config);

/// CRC-32 of the canonical serialization, as 8 hex digits.
std::string hash(const WorkbenchConfig &config);

bool operator==(const WorkbenchConfig &a, const WorkbenchConfig &b);

} // namespace fes::config
