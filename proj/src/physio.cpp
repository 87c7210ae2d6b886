#include "fescycle/physio.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "fescycle/error.hpp"

namespace fes::physio {

namespace {

bool in_unit(double x) { return x >= 0.0 && x <= 1.0; }

struct Rates {
  double rest, active, fatigued;
};

// Recruitment is limited to the resting pool, so a positive drive never
// exceeds M_R.
Rates compartment_rates(const MuscleState &m, double drive,
                        const MuscleParams &p) {
  drive = std::min(drive, std::max(m.m_rest, 0.0));
  return {-drive + p.recovery_rate * m.m_fatigued,
          drive - p.fatigue_rate * m.m_active,
          p.fatigue_rate * m.m_active - p.recovery_rate * m.m_fatigued};
}

MuscleState advance(const MuscleState &m, const Rates &r, double h) {
  MuscleState out = m;
  out.m_rest += h * r.rest;
  out.m_active += h * r.active;
  out.m_fatigued += h * r.fatigued;
  return out;
}

// Clamp round-off excursions and renormalize; anything beyond round-off is a
// broken invariant.
MuscleState settle(MuscleState m) {
  if (!std::isfinite(m.m_rest) || !std::isfinite(m.m_active) ||
      !std::isfinite(m.m_fatigued)) {
    throw NumericalError("fatigue compartments became non-finite");
  }
  const bool clamped = !in_unit(m.m_rest) || !in_unit(m.m_active) ||
                       !in_unit(m.m_fatigued);
  if (clamped) {
    m.m_rest = std::clamp(m.m_rest, 0.0, 1.0);
    m.m_active = std::clamp(m.m_active, 0.0, 1.0);
    m.m_fatigued = std::clamp(m.m_fatigued, 0.0, 1.0);
  }
  const double sum = m.compartment_sum();
  if (std::abs(sum - 1.0) > 1e-6) {
    std::ostringstream os;
    os << "fatigue compartments sum to " << sum << " after step";
    throw NumericalError(os.str());
  }
  if (clamped) {
    m.m_rest /= sum;
    m.m_active /= sum;
    m.m_fatigued /= sum;
  }
  return m;
}

} // namespace

void MuscleParams::validate() const {
  require(max_isometric_force > 0 && tau_act > 0 && tau_deact > 0 &&
              fatigue_rate > 0 && recovery_rate > 0 && fl_width > 0 &&
              v_max > 0,
          "muscle parameters must be strictly positive");
  require(passive_scale >= 0, "passive_scale must be non-negative");
  require(tau_act <= tau_deact, "tau_act must not exceed tau_deact");
  require(fatigue_rate > recovery_rate,
          "fatigue_rate must exceed recovery_rate");
}

MuscleParams MuscleParams::with_fatigue_multiplier(double factor) const {
  require(factor > 0, "fatigue multiplier must be positive");
  MuscleParams out = *this;
  out.fatigue_rate *= factor;
  out.recovery_rate *= factor;
  return out;
}

void MuscleState::validate() const {
  require(in_unit(activation) && in_unit(m_rest) && in_unit(m_active) &&
              in_unit(m_fatigued),
          "muscle state fields must lie in [0, 1]");
  require(std::abs(compartment_sum() - 1.0) <= 1e-9,
          "muscle compartments must sum to 1");
}

double activation_step(double a, double s, double dt,
                       const MuscleParams &params) {
  require(dt > 0, "activation_step: dt must be positive");
  require(in_unit(a) && in_unit(s),
          "activation_step: activation and stimulation must lie in [0, 1]");
  const double tau = s >= a ? params.tau_act : params.tau_deact;
  return std::clamp(a + dt * (s - a) / tau, 0.0, 1.0);
}

double activation_drive(double s, double a, const MuscleState &state) {
  if (s >= a) {
    const double wanted = s - state.m_active;
    return wanted <= state.m_rest ? wanted : state.m_rest;
  }
  return s - state.m_active;
}

MuscleState fatigue_step(const MuscleState &state, double drive, double dt,
                         const MuscleParams &params) {
  require(dt > 0, "fatigue_step: dt must be positive");
  return settle(advance(state, compartment_rates(state, drive, params), dt));
}

MuscleState fatigue_step_rk4(const MuscleState &state, double s, double a,
                             double dt, const MuscleParams &params) {
  require(dt > 0, "fatigue_step_rk4: dt must be positive");
  auto rates_at = [&](const MuscleState &m) {
    return compartment_rates(m, activation_drive(s, a, m), params);
  };
  const Rates k1 = rates_at(state);
  const Rates k2 = rates_at(advance(state, k1, dt / 2));
  const Rates k3 = rates_at(advance(state, k2, dt / 2));
  const Rates k4 = rates_at(advance(state, k3, dt));
  const Rates combined{
      (k1.rest + 2 * k2.rest + 2 * k3.rest + k4.rest) / 6,
      (k1.active + 2 * k2.active + 2 * k3.active + k4.active) / 6,
      (k1.fatigued + 2 * k2.fatigued + 2 * k3.fatigued + k4.fatigued) / 6};
  return settle(advance(state, combined, dt));
}

double fatigue_factor(const MuscleState &state) {
  return state.fatigue_factor();
}

ForceFactors force_factors(double norm_length, double norm_velocity,
                           const MuscleParams &params) {
  require(norm_length > 0, "force_factors: normalized length must be positive");
  ForceFactors f;
  const double z = (norm_length - 1.0) / params.fl_width;
  f.length = std::exp(-z * z);

  const double v = norm_velocity / params.v_max;
  if (v <= -1.0) {
    f.velocity = 0.0;
  } else if (v <= 0.0) {
    f.velocity = (1.0 + v) / (1.0 - v / kHillCurvature);
  } else {
    // Eccentric branch; slope at v = 0 matches the concentric hyperbola.
    const double c = (kEccentricPlateau - 1.0) /
                     (1.0 + 1.0 / kHillCurvature);
    f.velocity = 1.0 + (kEccentricPlateau - 1.0) * v / (v + c);
  }

  const double stretch = std::max(0.0, norm_length - 1.0);
  f.passive = params.passive_scale * stretch * stretch;
  return f;
}

double muscle_force(double a, const ForceFactors &factors, double fatigue,
                    const MuscleParams &params) {
  require(in_unit(a) && in_unit(fatigue),
          "muscle_force: activation and fatigue factor must lie in [0, 1]");
  const double active = a * factors.length * factors.velocity * fatigue;
  return std::max(0.0, params.max_isometric_force * (active + factors.passive));
}

} // namespace fes::physio
