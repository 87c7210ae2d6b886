#include "fescycle/baselines.hpp"

#include <algorithm>
#include <cmath>

#include "fescycle/error.hpp"

namespace fes::baselines {

StimPattern StimPattern::from_geometry(const mech::RigGeometry &geom,
                                       double arc_width, double lead_time) {
  StimPattern p;
  p.lead_time = lead_time;
  for (std::size_t i = 0; i < mech::kMuscles; ++i) {
    // moment arm peaks a quarter turn past the phase offset
    const double centre = geom.paths[i].phase_offset + std::numbers::pi / 2;
    p.arcs[i].on_angle = mech::wrap_angle(centre - arc_width / 2);
    p.arcs[i].off_angle = mech::wrap_angle(centre + arc_width / 2);
  }
  return p;
}

void StimPattern::validate() const {
  require(lead_time >= 0, "pattern lead_time must be non-negative");
  for (const auto &arc : arcs) {
    require(std::isfinite(arc.on_angle) && std::isfinite(arc.off_angle),
            "pattern angles must be finite");
    require(std::abs(mech::wrap_angle(arc.off_angle) -
                     mech::wrap_angle(arc.on_angle)) > 1e-9,
            "pattern arcs must be non-degenerate");
  }
}

bool angle_in_arc(double angle, const MuscleArc &arc) {
  const double a = mech::wrap_angle(angle);
  const double on = mech::wrap_angle(arc.on_angle);
  const double off = mech::wrap_angle(arc.off_angle);
  if (on <= off) {
    return a >= on && a <= off;
  }
  return a >= on || a <= off;
}

Gate pattern_gate(double theta, double theta_dot, const StimPattern &pattern) {
  const double effective = mech::wrap_angle(theta + theta_dot * pattern.lead_time);
  Gate gate{};
  for (std::size_t i = 0; i < mech::kMuscles; ++i) {
    gate[i] = angle_in_arc(effective, pattern.arcs[i]);
  }
  return gate;
}

void PidGains::validate() const {
  require(kp >= 0 && ki >= 0 && kd >= 0, "PID gains must be non-negative");
  require(integral_limit > 0, "PID integral_limit must be positive");
}

double pid_raw_output(double error, double error_rate, double integral,
                      const PidGains &gains) {
  return gains.kp * error + gains.ki * integral + gains.kd * error_rate;
}

double pid_intensity(double error, double dt, const PidGains &gains,
                     PidState &state) {
  require(dt > 0, "pid_intensity: dt must be positive");
  const double rate = state.primed ? (error - state.prev_error) / dt : 0.0;
  state.integral = std::clamp(state.integral + error * dt,
                              -gains.integral_limit, gains.integral_limit);
  state.prev_error = error;
  state.primed = true;
  return std::clamp(pid_raw_output(error, rate, state.integral, gains), 0.0, 1.0);
}

FuzzyRuleBase FuzzyRuleBase::standard() {
  FuzzyRuleBase r;
  for (int e = 0; e < kSets; ++e) {
    for (int de = 0; de < kSets; ++de) {
      r.rules[e][de] = std::clamp(e + de - 2, 0, kSets - 1);
    }
  }
  return r;
}

void FuzzyRuleBase::validate() const {
  require(error_range > 0 && rate_range > 0, "fuzzy ranges must be positive");
  for (int e = 0; e < kSets; ++e) {
    for (int de = 0; de < kSets; ++de) {
      const int out = rules[e][de];
      require(out >= 0 && out < kSets, "fuzzy rule index out of range");
      const int mirrored = rules[kSets - 1 - e][kSets - 1 - de];
      require(singletons[out] == -singletons[mirrored],
              "fuzzy rule table must be antisymmetric under input sign flip");
    }
  }
}

std::array<double, FuzzyRuleBase::kSets> memberships(double x, double range) {
  constexpr int n = FuzzyRuleBase::kSets;
  const double spacing = 2.0 * range / (n - 1);
  const double clamped = std::clamp(x, -range, range);
  std::array<double, n> mu{};
  for (int k = 0; k < n; ++k) {
    const double centre = -range + spacing * k;
    mu[k] = std::max(0.0, 1.0 - std::abs(clamped - centre) / spacing);
  }
  return mu;
}

double fuzzy_delta(double error, double error_rate, const FuzzyRuleBase &rules) {
  const auto mu_e = memberships(error, rules.error_range);
  const auto mu_de = memberships(error_rate, rules.rate_range);
  double weighted = 0.0;
  double total = 0.0;
  for (int e = 0; e < FuzzyRuleBase::kSets; ++e) {
    for (int de = 0; de < FuzzyRuleBase::kSets; ++de) {
      const double w = std::min(mu_e[e], mu_de[de]);
      weighted += w * rules.singletons[rules.rules[e][de]];
      total += w;
    }
  }
  if (total <= 0) {
    return 0.0;
  }
  const auto [lo, hi] = std::minmax_element(rules.singletons.begin(), rules.singletons.end());
  return std::clamp(weighted / total, *lo, *hi);
}

double fuzzy_intensity(double error, double error_rate, double dt,
                       const FuzzyRuleBase &rules, FuzzyState &state) {
  require(dt > 0, "fuzzy_intensity: dt must be positive");
  state.intensity = std::clamp(
      state.intensity + fuzzy_delta(error, error_rate, rules) * dt, 0.0, 1.0);
  state.prev_error = error;
  state.primed = true;
  return state.intensity;
}

BaselineController::BaselineController(Kind kind, StimPattern pattern,
                                       PidGains gains, FuzzyRuleBase rules)
    : kind_(kind), pattern_(pattern), gains_(gains), rules_(rules) {
  pattern_.validate();
  gains_.validate();
  rules_.validate();
}

void BaselineController::reset() {
  pid_ = {};
  fuzzy_ = {};
  last_intensity_ = 0.0;
}

mech::Stimulation BaselineController::act(double theta, double theta_dot,
                                          double desired, double dt) {
  const double error = desired - theta_dot;
  if (kind_ == Kind::Pid) {
    last_intensity_ = pid_intensity(error, dt, gains_, pid_);
  } else {
    const double rate =
        fuzzy_.primed ? (error - fuzzy_.prev_error) / dt : 0.0;
    last_intensity_ = fuzzy_intensity(error, rate, dt, rules_, fuzzy_);
  }
  const Gate gate = pattern_gate(theta, theta_dot, pattern_);
  mech::Stimulation s{};
  for (std::size_t i = 0; i < mech::kMuscles; ++i) {
    s[i] = gate[i] ? last_intensity_ : 0.0;
  }
  return s;
}

} // namespace fes::baselines
