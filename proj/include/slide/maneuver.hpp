#pragma once

#include <array>
#include <iosfwd>
#include <vector>

namespace slide {

inline constexpr double kMaxAccel = 4.2;     // m/s^2, per-axis platform limit
inline constexpr double kMaxDuration = 2.0;  // s, exclusive bound on t_m
inline constexpr double kDefaultRomMax = 0.5;

/// Unvalidated actor output in physical units.
struct RawAction {
  double a_i = 0.0;
  double a_m = 0.0;
  double t_m = 0.0;
};

/// A maneuver that satisfies the platform limits. Only obtainable through
/// validate_action(), so every instance carries a consistent switch time.
class ManeuverAction {
 public:
  double a_i() const noexcept { return a_i_; }
  double a_m() const noexcept { return a_m_; }
  double t_m() const noexcept { return t_m_; }
  /// Duration of phases 1 and 4.
  double t_i() const noexcept { return t_i_; }
  double duration() const noexcept { return 2.0 * t_i_ + t_m_; }
  RawAction raw() const noexcept { return {a_i_, a_m_, t_m_}; }

  friend ManeuverAction validate_action(const RawAction& raw);

 private:
  ManeuverAction(double a_i, double a_m, double t_m, double t_i)
      : a_i_(a_i), a_m_(a_m), t_m_(t_m), t_i_(t_i) {}

  double a_i_;
  double a_m_;
  double t_m_;
  double t_i_;
};

/// Throws SlideError with AccelOutOfRange, DurationOutOfRange, SameSignAccels
/// or ZeroInitialAccel.
ManeuverAction validate_action(const RawAction& raw);

struct PhaseSegment {
  double t_start = 0.0;
  double duration = 0.0;
  double accel = 0.0;
  double v_start = 0.0;
  double x_start = 0.0;

  double t_end() const { return t_start + duration; }
  double velocity_at(double t) const { return v_start + accel * (t - t_start); }
  double position_at(double t) const {
    const double dt = t - t_start;
    return x_start + v_start * dt + 0.5 * accel * dt * dt;
  }
};

/// Piecewise-constant-acceleration platform motion: accelerations
/// (a_i, a_m, a_m, a_i) over durations (t_i, t_m/2, t_m/2, t_i).
class VelocityProfile {
 public:
  explicit VelocityProfile(const ManeuverAction& action);

  const ManeuverAction& action() const noexcept { return action_; }
  const std::array<PhaseSegment, 4>& segments() const noexcept { return segments_; }
  double duration() const noexcept { return segments_.back().t_end(); }

  /// Index of the segment active at t (right-continuous); -1 outside [0, T).
  int segment_index(double t) const;
  double accel_at(double t) const;
  double velocity_at(double t) const;
  double position_at(double t) const;

 private:
  ManeuverAction action_;
  std::array<PhaseSegment, 4> segments_;
};

VelocityProfile build_velocity_profile(const ManeuverAction& action);

/// Maximum platform excursion, reached at t_i + t_m/2.
double range_of_motion(const ManeuverAction& action);

struct PlatformTrace {
  std::vector<double> t;
  std::vector<double> accel;
  std::vector<double> vel;
  std::vector<double> pos;

  std::size_t size() const { return t.size(); }
};

/// Uniform samples at `rate` Hz merged with the exact segment boundaries and
/// the maneuver end.
PlatformTrace sample_profile(const VelocityProfile& profile, double rate);

/// CSV with header `t,accel,vel,pos`, 9 significant digits.
void write_csv(std::ostream& out, const PlatformTrace& trace);

/// Sorted union of uniform sample times and `extra` knots within [0, end].
std::vector<double> merged_sample_times(double end, double rate,
                                        const std::vector<double>& extra);

}  // namespace slide
