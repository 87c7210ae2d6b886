#pragma once

/**
 * @file pattern.hpp
 * @brief Conversion of a Tracker policy into a crank-angle stimulation
 *        pattern: per-muscle intensity over an angular grid and the ON arcs
 *        where the intensity reaches a threshold.
 */

#include <array>
#include <ostream>
#include <string>
#include <vector>

#include "fescycle/checkpoint.hpp"
#include "fescycle/mech.hpp"

namespace fes::pattern {

struct ExportOptions {
  double cadence = 5.0;       // rad/s, also used as the desired cadence
  double fatigue_level = 1.0; // fatigue factor applied to every muscle
  double threshold = 0.1;
  double resolution_deg = 2.0; // must divide 360

  void validate() const;
};

/// Half-open arc [on_deg, off_deg) in degrees; off_deg may exceed 360 when
/// the arc wraps through zero.
struct ArcDeg {
  double on_deg = 0.0;
  double off_deg = 0.0;
};

struct PatternExport {
  ExportOptions options;
  std::vector<double> angles_deg; // bin start angles
  std::array<std::vector<double>, mech::kMuscles> intensity;
  std::array<std::vector<ArcDeg>, mech::kMuscles> arcs;

  std::string to_json() const;
  /// angle_deg followed by one intensity column per muscle.
  void write_csv(std::ostream &os) const;
};

/// Runs of bins at or above `threshold`, merged across 360 -> 0.
std::vector<ArcDeg> threshold_arcs(const std::vector<double> &intensity,
                                   double resolution_deg, double threshold);

/// Sweep a Tracker checkpoint's actor over the grid.
PatternExport export_pattern(const PolicyCheckpoint &tracker, const ExportOptions &options);

} // namespace fes::pattern
