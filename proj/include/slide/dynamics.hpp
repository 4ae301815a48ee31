#pragma once

#include <iosfwd>
#include <string_view>
#include <vector>

#include "slide/maneuver.hpp"

namespace slide {

/// Coulomb friction between object and platform, per unit mass.
struct FrictionModel {
  double mu_s = 0.2;
  double mu_k = 0.2;
  double g = 9.81;

  /// Equal static and kinetic coefficients scaled by `static_ratio`.
  static FrictionModel coulomb(double mu_k, double static_ratio = 1.0, double g = 9.81);
  /// Throws InvalidArgument unless 0 < mu_k <= mu_s <= 2 and g > 0.
  void validate() const;
};

bool slip_condition(double platform_accel, const FrictionModel& f);

/// Object acceleration relative to the platform while slipping. With
/// v_rel == 0 the friction direction follows the inertial lag, sign(-accel).
double relative_accel(double v_rel, double platform_accel, const FrictionModel& f);

struct RelativeState {
  double x_rel = 0.0;
  double v_rel = 0.0;
  bool sticking = true;
};

enum class EventKind { SlipStart, Stick, Reversal, PhaseBoundary };
std::string_view to_string(EventKind kind);

struct SlideEvent {
  double t = 0.0;
  EventKind kind = EventKind::PhaseBoundary;
};

/// Interval of constant platform and relative acceleration.
struct MotionPiece {
  double t_start = 0.0;
  double duration = 0.0;
  double plat_accel = 0.0;
  double rel_accel = 0.0;
  double x0 = 0.0;
  double v0 = 0.0;
  bool sticking = true;
};

struct RelativeTrace {
  std::vector<double> t;
  std::vector<double> plat_accel;
  std::vector<double> plat_vel;
  std::vector<double> x_rel;
  std::vector<double> v_rel;
  std::vector<char> sticking;
  /// Cumulative kinetic-friction dissipation per unit mass, J/kg.
  std::vector<double> dissipated;

  std::size_t size() const { return t.size(); }
};

class SlideResult {
 public:
  explicit SlideResult(const VelocityProfile& profile) : profile_(profile) {}

  double delta_x_rel = 0.0;
  double rom = 0.0;
  /// Maneuver time plus any post-maneuver coasting until the object rests.
  double duration = 0.0;
  RelativeTrace trace;
  std::vector<SlideEvent> events;
  /// Exact piecewise solution; empty for the numeric integrator.
  std::vector<MotionPiece> pieces;

  const VelocityProfile& profile() const noexcept { return profile_; }
  const ManeuverAction& action() const noexcept { return profile_.action(); }

  /// Relative state at t: exact from pieces, otherwise interpolated from the
  /// trace. Clamped to the final rest state past `duration`.
  RelativeState state_at(double t) const;
  bool has_event(EventKind kind) const;

 private:
  VelocityProfile profile_;
};

inline constexpr double kDefaultTraceRate = 1000.0;

/// Event-driven exact integration. A non-positive `trace_rate` skips trace
/// sampling; `pieces` always hold the exact solution.
SlideResult simulate_closed_form(const VelocityProfile& profile, const FrictionModel& f,
                                 double trace_rate = kDefaultTraceRate);

/// Fixed-step explicit integration with a velocity deadband of dt*mu_k*g.
SlideResult simulate_numeric(const VelocityProfile& profile, const FrictionModel& f, double dt,
                             double trace_rate = kDefaultTraceRate);

/// Fixed-length (platform accel, v_rel) series sampled at k/rate, zero from
/// the end of the slide onwards.
struct TwoChannelSeries {
  double rate = 0.0;
  std::vector<double> accel;
  std::vector<double> v_rel;

  std::size_t length() const { return accel.size(); }
};

TwoChannelSeries sample_relative_trace(const SlideResult& result, double rate,
                                       double pad_to = 2.0);

void write_csv(std::ostream& out, const RelativeTrace& trace);
/// Inverse of write_csv; `sticking` is derived from v_rel == 0 and
/// `dissipated` is left at zero.
RelativeTrace read_trace_csv(std::istream& in);
void write_events_jsonl(std::ostream& out, const std::vector<SlideEvent>& events);

}  // namespace slide
