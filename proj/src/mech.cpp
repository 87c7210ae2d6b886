#include "fescycle/mech.hpp"

#include <cmath>

#include "fescycle/error.hpp"

namespace fes::mech {

RigGeometry RigGeometry::standard() {
  RigGeometry g;
  constexpr std::array<double, 3> right_phases = {0.61, 5.93, 2.27};
  for (std::size_t i = 0; i < 3; ++i) {
    g.paths[i].phase_offset = right_phases[i];
    g.paths[i + 3].phase_offset = wrap_angle(right_phases[i] + std::numbers::pi);
  }
  return g;
}

RigGeometry RigGeometry::with_seat_shift(double shift) const {
  RigGeometry g = *this;
  const double gain_scale = 1.0 + 0.05 * shift / 0.15;
  for (auto &p : g.paths) {
    p.phase_offset = wrap_angle(p.phase_offset + shift);
    p.length_gain *= gain_scale;
  }
  g.seat_shift += shift;
  return g;
}

void RigGeometry::validate() const {
  require(crank_inertia > 0, "crank_inertia must be positive");
  require(leg_damping >= 0, "leg_damping must be non-negative");
  for (std::size_t i = 0; i < kMuscles; ++i) {
    const auto &p = paths[i];
    require(p.moment_arm_peak > 0, "moment_arm_peak must be positive");
    require(p.slack_norm_length > 0 && p.length_gain >= 0,
            "muscle path lengths must be positive");
  }
  for (std::size_t i = 0; i < 3; ++i) {
    const double d = std::remainder(paths[i + 3].phase_offset -
                                        paths[i].phase_offset - std::numbers::pi,
                                    kTwoPi);
    require(std::abs(d) < 1e-9,
            "left-leg phase offsets must equal right-leg offsets + pi");
  }
}

std::array<double, kMuscles> RigState::fatigue_factors() const {
  std::array<double, kMuscles> f{};
  for (std::size_t i = 0; i < kMuscles; ++i) {
    f[i] = muscles[i].fatigue_factor();
  }
  return f;
}

void RigState::validate() const {
  require(theta >= 0 && theta < kTwoPi, "theta must lie in [0, 2pi)");
  require(std::isfinite(theta_dot), "theta_dot must be finite");
  for (const auto &m : muscles) {
    m.validate();
  }
}

double wrap_angle(double theta) {
  double w = std::fmod(theta, kTwoPi);
  if (w < 0) {
    w += kTwoPi;
  }
  // fmod of a tiny negative number can round up to exactly 2pi
  return w >= kTwoPi ? 0.0 : w;
}

double moment_arm(double theta, std::size_t muscle, const RigGeometry &geom) {
  require(muscle < kMuscles, "muscle index out of range");
  const auto &p = geom.paths[muscle];
  return p.moment_arm_peak * std::sin(theta - p.phase_offset);
}

Kinematics muscle_kinematics(double theta, double theta_dot, std::size_t muscle,
                             const RigGeometry &geom) {
  require(muscle < kMuscles, "muscle index out of range");
  const auto &p = geom.paths[muscle];
  const double phase = theta - p.phase_offset;
  return {p.slack_norm_length + p.length_gain * (1.0 + std::cos(phase)) / 2.0,
          -p.length_gain * std::sin(phase) * theta_dot / 2.0};
}

double muscle_torque(const RigState &state, const RigGeometry &geom,
                     const MuscleParamSet &params) {
  double torque = 0.0;
  for (std::size_t i = 0; i < kMuscles; ++i) {
    const auto kin = muscle_kinematics(state.theta, state.theta_dot, i, geom);
    const auto factors =
        physio::force_factors(kin.norm_length, kin.norm_velocity, params[i]);
    const auto &m = state.muscles[i];
    const double force =
        physio::muscle_force(m.activation, factors, m.fatigue_factor(), params[i]);
    torque += force * moment_arm(state.theta, i, geom);
  }
  return torque;
}

RigState crank_step(const RigState &state, const Stimulation &action,
                    double dt_outer, const RigGeometry &geom,
                    const MuscleParamSet &params, const InnerObserver &observer) {
  require(dt_outer > 0, "crank_step: dt must be positive");
  for (double s : action) {
    require(s >= 0.0 && s <= 1.0, "crank_step: stimulation must lie in [0, 1]");
  }
  const auto steps = std::max<long>(1, std::lround(dt_outer / kInnerStep));
  const double h = dt_outer / static_cast<double>(steps);

  RigState x = state;
  for (long k = 0; k < steps; ++k) {
    const double torque = muscle_torque(x, geom, params) -
                          geom.leg_damping * x.theta_dot;
    for (std::size_t i = 0; i < kMuscles; ++i) {
      auto &m = x.muscles[i];
      const double a = m.activation;
      m = physio::fatigue_step_rk4(m, action[i], a, h, params[i]);
      m.activation = physio::activation_step(a, action[i], h, params[i]);
    }
    x.theta_dot += h * torque / geom.crank_inertia;
    x.theta = wrap_angle(x.theta + h * x.theta_dot);
    if (!std::isfinite(x.theta_dot) || !std::isfinite(x.theta)) {
      throw NumericalError("crank state became non-finite");
    }
    if (observer) {
      observer(h * static_cast<double>(k + 1), x);
    }
  }
  return x;
}

} // namespace fes::mech
