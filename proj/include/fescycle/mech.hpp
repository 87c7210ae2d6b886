#pragma once

/**
 * @file mech.hpp
 * @brief Reduced planar recumbent-cycling mechanics: six crank-angle dependent
 *        muscle paths driving a single crank degree of freedom.
 */

#include <array>
#include <cstddef>
#include <functional>
#include <numbers>
#include <string_view>

#include "fescycle/physio.hpp"

namespace fes::mech {

inline constexpr std::size_t kMuscles = 6;
inline constexpr double kTwoPi = 2.0 * std::numbers::pi;
inline constexpr double kInnerStep = 1e-3; // s

/// Muscle order used by every 6-vector in the workbench.
enum class Muscle : std::size_t {
  RightGluteus = 0,
  RightRectusFemoris,
  RightHamstrings,
  LeftGluteus,
  LeftRectusFemoris,
  LeftHamstrings,
};

inline constexpr std::array<std::string_view, kMuscles> kMuscleNames = {
    "r_glut", "r_rf", "r_hams", "l_glut", "l_rf", "l_hams"};

/// Index of the same muscle on the other leg.
constexpr std::size_t contralateral(std::size_t i) { return (i + 3) % kMuscles; }

using MuscleParamSet = std::array<physio::MuscleParams, kMuscles>;
using Stimulation = std::array<double, kMuscles>;

struct MusclePath {
  double moment_arm_peak = 0.05; // m
  double phase_offset = 0.0;     // rad
  double slack_norm_length = 0.85;
  double length_gain = 0.3;
};

struct RigGeometry {
  std::array<MusclePath, kMuscles> paths{};
  double crank_inertia = 0.5; // kg m^2
  /// Lumped viscous loss of the legs (passive tissue and joints), N m s/rad.
  /// The crank bearing itself is frictionless.
  double leg_damping = 0.5;
  double seat_shift = 0.0; // rad, already folded into the paths

  /// Default right-leg phases; the left leg is offset by pi.
  static RigGeometry standard();

  /// Geometry with the seat moved: every phase offset shifts by `shift` and
  /// length gains scale by 5% per 0.15 rad of shift.
  RigGeometry with_seat_shift(double shift) const;

  void validate() const;
};

struct RigState {
  double theta = 0.0;     // rad, wrapped to [0, 2pi)
  double theta_dot = 0.0; // rad/s
  std::array<physio::MuscleState, kMuscles> muscles{};

  std::array<double, kMuscles> fatigue_factors() const;
  void validate() const;
};

double wrap_angle(double theta);

double moment_arm(double theta, std::size_t muscle, const RigGeometry &geom);

struct Kinematics {
  double norm_length;
  double norm_velocity;
};

Kinematics muscle_kinematics(double theta, double theta_dot, std::size_t muscle,
                             const RigGeometry &geom);

/// Net crank torque produced by the muscles in `state` (N m), excluding
/// leg damping.
double muscle_torque(const RigState &state, const RigGeometry &geom,
                     const MuscleParamSet &params);

/// Optional per-inner-step observer (time within the outer step, state).
using InnerObserver = std::function<void(double, const RigState &)>;

/// Advance the rig by one control period. The period is split into 1 ms inner
/// steps: forces come from the state at the start of each inner step, muscles
/// advance (activation Euler, compartments RK4), then the crank integrates
/// semi-implicitly. Throws NumericalError on a non-finite state.
RigState crank_step(const RigState &state, const Stimulation &action,
                    double dt_outer, const RigGeometry &geom,
                    const MuscleParamSet &params,
                    const InnerObserver &observer = {});

} // namespace fes::mech
