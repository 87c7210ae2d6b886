#include "fescycle/pattern.hpp"

#include <cmath>
#include <numbers>

#include <nlohmann/json.hpp>

#include "fescycle/error.hpp"

namespace fes::pattern {

namespace {

int bin_count(double resolution_deg) {
  return static_cast<int>(std::llround(360.0 / resolution_deg));
}

} // namespace

void ExportOptions::validate() const {
  require(std::isfinite(cadence) && cadence >= 0, "cadence must be finite and non-negative");
  require(fatigue_level >= 0 && fatigue_level <= 1, "fatigue_level must lie in [0, 1]");
  require(threshold > 0 && threshold <= 1, "threshold must lie in (0, 1]");
  require(resolution_deg > 0 && resolution_deg <= 180, "resolution must lie in (0, 180]");
  const int n = bin_count(resolution_deg);
  require(std::abs(n * resolution_deg - 360.0) < 1e-9, "resolution must divide 360");
}

std::vector<ArcDeg> threshold_arcs(const std::vector<double> &intensity,
                                   double resolution_deg, double threshold) {
  const int n = static_cast<int>(intensity.size());
  std::vector<ArcDeg> arcs;
  auto on = [&](int k) { return intensity[static_cast<std::size_t>(k)] >= threshold; };
  int k = 0;
  while (k < n) {
    if (!on(k)) {
      ++k;
      continue;
    }
    int end = k;
    while (end < n && on(end)) {
      ++end;
    }
    arcs.push_back({k * resolution_deg, end * resolution_deg});
    k = end;
  }
  if (arcs.size() >= 2 && arcs.front().on_deg == 0.0 && arcs.back().off_deg == 360.0) {
    arcs.front().on_deg = arcs.back().on_deg;
    arcs.front().off_deg += 360.0;
    arcs.pop_back();
  }
  return arcs;
}

PatternExport export_pattern(const PolicyCheckpoint &tracker, const ExportOptions &options) {
  options.validate();
  require(tracker.mode == env::Mode::Tracker, "pattern export needs a Tracker checkpoint");
  const auto policy = tracker.policy();

  mech::RigState state;
  state.theta_dot = options.cadence;
  for (auto &m : state.muscles) {
    m.m_rest = options.fatigue_level;
    m.m_active = 0.0;
    m.m_fatigued = 1.0 - options.fatigue_level;
  }

  PatternExport out;
  out.options = options;
  const int n = bin_count(options.resolution_deg);
  for (auto &column : out.intensity) {
    column.reserve(static_cast<std::size_t>(n));
  }
  for (int k = 0; k < n; ++k) {
    const double deg = k * options.resolution_deg;
    state.theta = deg * std::numbers::pi / 180.0;
    const auto action = policy(
        env::Observation::build(env::Mode::Tracker, state, options.cadence, tracker.normalization));
    out.angles_deg.push_back(deg);
    for (std::size_t i = 0; i < mech::kMuscles; ++i) {
      out.intensity[i].push_back(action[i]);
    }
  }
  for (std::size_t i = 0; i < mech::kMuscles; ++i) {
    out.arcs[i] = threshold_arcs(out.intensity[i], options.resolution_deg, options.threshold);
  }
  return out;
}

std::string PatternExport::to_json() const {
  nlohmann::ordered_json j;
  j["schema"] = "fescycle.pattern/1";
  j["cadence"] = options.cadence;
  j["fatigue_level"] = options.fatigue_level;
  j["threshold"] = options.threshold;
  j["resolution_deg"] = options.resolution_deg;
  j["angles_deg"] = angles_deg;
  nlohmann::ordered_json muscles = nlohmann::ordered_json::object();
  for (std::size_t i = 0; i < mech::kMuscles; ++i) {
    nlohmann::ordered_json arcs_json = nlohmann::ordered_json::array();
    for (const auto &a : arcs[i]) {
      arcs_json.push_back({{"on_deg", a.on_deg}, {"off_deg", a.off_deg}});
    }
    muscles[std::string(mech::kMuscleNames[i])] = {{"intensity", intensity[i]},
                                                   {"arcs", arcs_json}};
  }
  j["muscles"] = muscles;
  return j.dump(2) + "\n";
}

void PatternExport::write_csv(std::ostream &os) const {
  os << "angle_deg";
  for (auto name : mech::kMuscleNames) {
    os << ',' << name;
  }
  os << '\n';
  const auto precision = os.precision(17);
  for (std::size_t k = 0; k < angles_deg.size(); ++k) {
    os << angles_deg[k];
    for (const auto &column : intensity) {
      os << ',' << column[k];
    }
    os << '\n';
  }
  os.precision(precision);
}

} // namespace fes::pattern
