#pragma once

/**
 * @file physio.hpp
 * @brief Hill-type muscle force with first-order activation dynamics and a
 *        three-compartment (resting / active / fatigued) fatigue model.
 */

namespace fes::physio {

struct MuscleParams {
  double max_isometric_force = 200.0;  // N
  double tau_act = 0.05;               // s
  double tau_deact = 0.06;             // s
  double fatigue_rate = 0.01;          // 1/s
  double recovery_rate = 0.002;        // 1/s
  double fl_width = 0.45;              // Gaussian width of active force-length
  double v_max = 10.0;                 // optimal lengths / s
  double passive_scale = 1.0;

  /// Throws ContractError if a field is non-positive (passive_scale may be
  /// zero) or the ordering
  /// constraints (tau_act <= tau_deact, fatigue > recovery) are violated.
  void validate() const;

  /// Copy with fatigue and recovery rates multiplied by `factor`.
  MuscleParams with_fatigue_multiplier(double factor) const;
};

struct MuscleState {
  double activation = 0.0;
  double m_rest = 1.0;
  double m_active = 0.0;
  double m_fatigued = 0.0;

  static MuscleState fresh() { return {}; }

  double compartment_sum() const { return m_rest + m_active + m_fatigued; }
  double fatigue_factor() const { return 1.0 - m_fatigued; }

  void validate() const;
};

struct ForceFactors {
  double length = 1.0;
  double velocity = 1.0;
  double passive = 0.0;
};

/// Curvature of the concentric Hill hyperbola (a / F0).
inline constexpr double kHillCurvature = 0.25;
/// Eccentric force plateau, reached asymptotically for fast lengthening.
inline constexpr double kEccentricPlateau = 1.5;

double activation_step(double a, double s, double dt, const MuscleParams &params);

/// Activation-deactivation drive C moving fibres between the resting and
/// active compartments. The tie s == a takes the activating branch.
double activation_drive(double s, double a, const MuscleState &state);

/// One explicit Euler step of the compartment ODEs with the drive held fixed:
///   dM_R/dt = -C + R M_F,  dM_A/dt = C - F M_A,  dM_F/dt = F M_A - R M_F
/// A positive drive is capped at M_R: recruitment cannot exceed the resting pool.
MuscleState fatigue_step(const MuscleState &state, double drive, double dt,
                         const MuscleParams &params);

/// Classical RK4 step of the compartment ODEs with the drive re-evaluated from
/// (s, a, stage state) at every stage. Activation is carried through unchanged.
MuscleState fatigue_step_rk4(const MuscleState &state, double s, double a,
                             double dt, const MuscleParams &params);

double fatigue_factor(const MuscleState &state);

ForceFactors force_factors(double norm_length, double norm_velocity,
                           const MuscleParams &params);

double muscle_force(double a, const ForceFactors &factors, double fatigue,
                    const MuscleParams &params);

} // namespace fes::physio
