#include "slide/estimation.hpp"

#include <algorithm>
#include <cmath>
#include <functional>

#include "slide/error.hpp"

namespace slide {
namespace {

double sgn(double x) { return (x > 0.0) - (x < 0.0); }

RelativeState interpolate(const RelativeTrace& tr, double t) {
  if (tr.size() == 0) throw SlideError(ErrorCode::DegenerateTrace, "empty trace");
  if (t <= tr.t.front()) return {tr.x_rel.front(), tr.v_rel.front(), true};
  if (t >= tr.t.back()) return {tr.x_rel.back(), tr.v_rel.back(), true};
  const auto hi = static_cast<std::size_t>(std::upper_bound(tr.t.begin(), tr.t.end(), t) - tr.t.begin());
  const std::size_t lo = hi - 1;
  const double w = (t - tr.t[lo]) / (tr.t[hi] - tr.t[lo]);
  return {tr.x_rel[lo] + w * (tr.x_rel[hi] - tr.x_rel[lo]),
          tr.v_rel[lo] + w * (tr.v_rel[hi] - tr.v_rel[lo]), false};
}

EstimateInput assemble(const ManeuverAction& action, double duration,
                       const std::function<RelativeState(double)>& state_at, double rate,
                       double window) {
  const double t_i = action.t_i();
  EstimateInput in{action, {}, {}, false};
  in.samples.x_at_ti = state_at(t_i).x_rel;
  in.samples.v_at_ti = state_at(t_i).v_rel;
  in.samples.x_at_ti_tm = state_at(t_i + action.t_m()).x_rel;
  in.series.rate = rate;
  if (duration <= window) {
    const VelocityProfile profile(action);
    const auto n = static_cast<std::size_t>(std::llround(rate * window));
    in.series.accel.assign(n, 0.0);
    in.series.v_rel.assign(n, 0.0);
    for (std::size_t k = 0; k < n; ++k) {
      const double t = static_cast<double>(k) / rate;
      if (t >= duration) break;
      in.series.accel[k] = profile.accel_at(t);
      in.series.v_rel[k] = state_at(t).v_rel;
    }
  }
  return in;
}

}  // namespace

EstimateInput make_estimate_input(const SlideResult& result, double rate, double window) {
  EstimateInput in = assemble(
      result.action(), result.duration, [&](double t) { return result.state_at(t); }, rate, window);
  const double t_lo = result.action().t_i();
  const double t_hi = t_lo + result.action().t_m();
  in.reversal_in_middle = std::any_of(result.events.begin(), result.events.end(), [&](const SlideEvent& e) {
    return e.kind == EventKind::Reversal && e.t > t_lo && e.t < t_hi;
  });
  return in;
}

EstimateInput make_estimate_input(const RelativeTrace& trace, const ManeuverAction& action,
                                  double rate, double window) {
  const double duration = trace.size() ? trace.t.back() : 0.0;
  EstimateInput in = assemble(
      action, duration, [&](double t) { return interpolate(trace, t); }, rate, window);
  const double t_lo = action.t_i();
  const double t_hi = t_lo + action.t_m();
  double prev = 0.0;
  for (std::size_t k = 0; k < trace.size(); ++k) {
    if (trace.t[k] <= t_lo || trace.t[k] >= t_hi) continue;
    const double s = sgn(trace.v_rel[k]);
    if (s != 0.0 && prev != 0.0 && s != prev) in.reversal_in_middle = true;
    if (s != 0.0) prev = s;
  }
  return in;
}

ManeuverAction infer_action(const RelativeTrace& trace) {
  if (trace.size() < 2) throw SlideError(ErrorCode::DegenerateTrace, "trace too short");
  const double a_i = trace.plat_accel.front();
  for (std::size_t k = 1; k < trace.size(); ++k) {
    if (trace.plat_accel[k] == a_i) continue;
    const double a_m = trace.plat_accel[k];
    const double t_i = trace.t[k] - trace.t.front();
    if (a_m == 0.0 || !(t_i > 0.0)) break;
    return validate_action({a_i, a_m, 2.0 * t_i * std::abs(a_i / a_m)});
  }
  throw SlideError(ErrorCode::DegenerateTrace, "no phase switch in the platform acceleration");
}

std::string_view to_string(EstimateBranch b) {
  switch (b) {
    case EstimateBranch::InitialPhase: return "initial-phase";
    case EstimateBranch::MiddlePhases: return "middle-phases";
    case EstimateBranch::Fallback: return "fallback";
  }
  return "fallback";
}

AnalyticalEstimate estimate_analytical(const EstimateInput& input, double g) {
  const ManeuverAction& a = input.action;
  const PhaseSamples& s = input.samples;
  if (!(a.t_i() > 0.0) || !std::isfinite(a.t_i())) {
    throw SlideError(ErrorCode::DegenerateTrace, "switch time t_i must be positive");
  }
  if (!std::isfinite(s.x_at_ti) || !std::isfinite(s.x_at_ti_tm) || !std::isfinite(s.v_at_ti)) {
    throw SlideError(ErrorCode::DegenerateTrace, "non-finite kinematic samples");
  }
  AnalyticalEstimate est;
  const double middle = s.x_at_ti_tm - s.x_at_ti;
  if (std::abs(s.x_at_ti) > kSlipEvidence) {
    const double t_i = a.t_i();
    est.mu = (std::abs(a.a_i()) - 2.0 * std::abs(s.x_at_ti) / (t_i * t_i)) / g;
    est.branch = EstimateBranch::InitialPhase;
  } else if (std::abs(middle) > kSlipEvidence) {
    const double t_m = a.t_m();
    const double dir = a.a_m() != 0.0 ? sgn(-a.a_m()) : sgn(middle);
    const double dx = dir * middle;
    const double v0 = dir * s.v_at_ti;
    est.mu = (std::abs(a.a_m()) - 2.0 * (dx - v0 * t_m) / (t_m * t_m)) / g;
    est.branch = EstimateBranch::MiddlePhases;
    est.low_confidence = input.reversal_in_middle;
  } else {
    est.mu = 1.1 * std::abs(a.a_m()) / g;
    est.branch = EstimateBranch::Fallback;
    est.low_confidence = true;
  }
  est.mu = std::clamp(est.mu, kEstimateFloor, kEstimateCeil);
  return est;
}

double correction_metric(double mu_k, double mu_e, double mu_e_prime) {
  if (mu_e == mu_k) {
    throw SlideError(ErrorCode::DivisionByZero, "correction metric undefined when mu_e == mu_k");
  }
  return 1.0 - std::abs(mu_k - mu_e_prime) / std::abs(mu_k - mu_e);
}

}  // namespace slide
