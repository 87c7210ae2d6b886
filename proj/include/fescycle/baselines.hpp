#pragma once

/**
 * @file baselines.hpp
 * @brief Conventional FES-cycling controllers: a crank-angle ON/OFF pattern
 *        gating one shared intensity computed by PID or fuzzy logic.
 *
 * The controllers see only crank angle, cadence and the setpoint. There is no
 * fatigue input anywhere in this interface.
 */

#include <array>

#include "fescycle/mech.hpp"

namespace fes::baselines {

struct MuscleArc {
  double on_angle = 0.0;  // rad
  double off_angle = 0.0; // rad; the arc runs counter-clockwise on -> off
};

struct StimPattern {
  std::array<MuscleArc, mech::kMuscles> arcs{};
  double lead_time = 0.1; // s

  /// 110 degree arcs centred on each muscle's peak positive moment arm.
  static StimPattern from_geometry(const mech::RigGeometry &geom,
                                   double arc_width = 110.0 * std::numbers::pi / 180.0,
                                   double lead_time = 0.1);
  void validate() const;
};

using Gate = std::array<bool, mech::kMuscles>;

/// True iff `angle` lies on the arc [on, off] taken counter-clockwise mod 2pi.
bool angle_in_arc(double angle, const MuscleArc &arc);

/// A muscle is ON iff (theta + theta_dot * lead_time) mod 2pi is on its arc.
Gate pattern_gate(double theta, double theta_dot, const StimPattern &pattern);

struct PidGains {
  double kp = 0.1;
  double ki = 0.2;
  double kd = 0.1;
  double integral_limit = 2.0;
  void validate() const;
};

struct PidState {
  double integral = 0.0;
  double prev_error = 0.0;
  bool primed = false;
};

/// u = clip(kp e + ki integral(e) + kd de/dt, 0, 1) with the integral clamped
/// to +-integral_limit. The first call has no derivative term.
double pid_intensity(double error, double dt, const PidGains &gains,
                     PidState &state);

/// Unclipped PID output for the given state, without updating it.
double pid_raw_output(double error, double error_rate, double integral,
                      const PidGains &gains);

struct FuzzyRuleBase {
  static constexpr int kSets = 5;
  double error_range = 5.0; // rad/s, centres at -r, -r/2, 0, r/2, r
  double rate_range = 5.0;  // rad/s^2
  std::array<double, kSets> singletons = {-0.8, -0.3, 0.0, 0.3, 0.8}; // 1/s
  /// rules[e][de] indexes `singletons`; e and de run from negative big (0)
  /// to positive big (4).
  std::array<std::array<int, kSets>, kSets> rules{};

  static FuzzyRuleBase standard();
  void validate() const;
};

/// Triangular memberships of `x` over 5 evenly spaced sets spanning
/// [-range, range]; inputs beyond the range saturate in the outer sets.
std::array<double, FuzzyRuleBase::kSets> memberships(double x, double range);

/// Centroid of the singleton outputs weighted by min(mu_e, mu_de).
double fuzzy_delta(double error, double error_rate, const FuzzyRuleBase &rules);

struct FuzzyState {
  double intensity = 0.0;
  double prev_error = 0.0;
  bool primed = false;
};

/// u' = clip(u + delta * dt, 0, 1).
double fuzzy_intensity(double error, double error_rate, double dt,
                       const FuzzyRuleBase &rules, FuzzyState &state);

enum class Kind { Pid, Fuzzy };

/// Stateful pattern-gated controller session.
class BaselineController {
public:
  BaselineController(Kind kind, StimPattern pattern, PidGains gains,
                     FuzzyRuleBase rules);

  void reset();

  /// Stimulation for the next control period. Error is desired - cadence.
  mech::Stimulation act(double theta, double theta_dot, double desired,
                        double dt);

  Kind kind() const { return kind_; }
  double last_intensity() const { return last_intensity_; }

private:
  Kind kind_;
  StimPattern pattern_;
  PidGains gains_;
  FuzzyRuleBase rules_;
  PidState pid_;
  FuzzyState fuzzy_;
  double last_intensity_ = 0.0;
};

} // namespace fes::baselines
