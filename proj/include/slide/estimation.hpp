#pragma once

#include <string_view>

#include "slide/dynamics.hpp"
#include "slide/maneuver.hpp"

namespace slide {

inline constexpr double kDefaultSeriesRate = 50.0;  // Hz
inline constexpr double kSeriesWindow = 2.0;        // s
inline constexpr double kEstimateFloor = 0.01;
inline constexpr double kEstimateCeil = 0.6;

/// Relative displacement and velocity at the phase boundaries used by the
/// analytical estimator.
struct PhaseSamples {
  double x_at_ti = 0.0;
  double x_at_ti_tm = 0.0;
  double v_at_ti = 0.0;
};

/// Everything an estimator sees after one maneuver.
struct EstimateInput {
  ManeuverAction action;
  PhaseSamples samples;
  /// Fixed-length series for the recurrent estimator; left empty when the
  /// slide outlasts the window.
  TwoChannelSeries series;
  /// v_rel changed sign strictly inside phases 2-3.
  bool reversal_in_middle = false;
};

EstimateInput make_estimate_input(const SlideResult& result, double rate = kDefaultSeriesRate,
                                  double window = kSeriesWindow);

/// Same as above from a sampled relative trace (e.g. a CSV export); values
/// between samples are linearly interpolated.
EstimateInput make_estimate_input(const RelativeTrace& trace, const ManeuverAction& action,
                                  double rate = kDefaultSeriesRate, double window = kSeriesWindow);

/// Recovers (a_i, a_m, t_m) from the platform acceleration column: a_i is
/// the first sample, t_i the first sample with a different value.
/// Throws DegenerateTrace when no switch is visible.
ManeuverAction infer_action(const RelativeTrace& trace);

enum class EstimateBranch { InitialPhase = 1, MiddlePhases = 2, Fallback = 3 };
std::string_view to_string(EstimateBranch b);

struct AnalyticalEstimate {
  double mu = 0.0;
  EstimateBranch branch = EstimateBranch::Fallback;
  bool low_confidence = false;
};

inline constexpr double kSlipEvidence = 0.01;  // m

/// Inverts constant-acceleration kinematics for mu_k:
///  1. |x(t_i)| > 1 cm: phase-1 slide, 1/2 (|a_i| - mu g) t_i^2 = |x(t_i)|.
///  2. |x(t_i+t_m) - x(t_i)| > 1 cm: phases 2-3 slide,
///     v t_m + 1/2 (|a_m| - mu g) t_m^2 = dx, both projected on the
///     direction a_m drives the object.
///  3. otherwise no slide: mu = 1.1 |a_m| / g.
/// The result is clamped to [0.01, 0.6]. Throws DegenerateTrace when t_i <= 0
/// or the samples are not finite.
AnalyticalEstimate estimate_analytical(const EstimateInput& input, double g = 9.81);

/// 1 - |mu_k - mu_e'| / |mu_k - mu_e|. Throws DivisionByZero when mu_e == mu_k.
double correction_metric(double mu_k, double mu_e, double mu_e_prime);

}  // namespace slide
