#include "slide/maneuver.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <string>

#include "slide/error.hpp"

namespace slide {

ManeuverAction validate_action(const RawAction& raw) {
  if (!(std::abs(raw.a_i) <= kMaxAccel) || !(std::abs(raw.a_m) <= kMaxAccel)) {
    throw SlideError(ErrorCode::AccelOutOfRange,
                     "acceleration magnitude exceeds 4.2 m/s^2 (a_i=" + std::to_string(raw.a_i) +
                         ", a_m=" + std::to_string(raw.a_m) + ")");
  }
  if (!(raw.t_m > 0.0) || !(raw.t_m < kMaxDuration)) {
    throw SlideError(ErrorCode::DurationOutOfRange,
                     "t_m must lie in (0, 2.0) s, got " + std::to_string(raw.t_m));
  }
  if (raw.a_i == 0.0) {
    throw SlideError(ErrorCode::ZeroInitialAccel, "a_i must be nonzero");
  }
  if (raw.a_i * raw.a_m > 0.0) {
    throw SlideError(ErrorCode::SameSignAccels, "a_i and a_m must have opposite signs");
  }
  const double t_i = 0.5 * raw.t_m * std::abs(raw.a_m / raw.a_i);
  return ManeuverAction(raw.a_i, raw.a_m, raw.t_m, t_i);
}

VelocityProfile::VelocityProfile(const ManeuverAction& action) : action_(action) {
  const double half = 0.5 * action.t_m();
  const std::array<double, 4> accels{action.a_i(), action.a_m(), action.a_m(), action.a_i()};
  const std::array<double, 4> durations{action.t_i(), half, half, action.t_i()};
  double t = 0.0, v = 0.0, x = 0.0;
  for (std::size_t k = 0; k < 4; ++k) {
    PhaseSegment& seg = segments_[k];
    seg.t_start = t;
    seg.duration = durations[k];
    seg.accel = accels[k];
    seg.v_start = v;
    seg.x_start = x;
    t = seg.t_end();
    v = seg.velocity_at(t);
    x = seg.position_at(t);
  }
}

int VelocityProfile::segment_index(double t) const {
  if (t < 0.0 || t >= duration()) return -1;
  for (int k = 3; k >= 0; --k) {
    if (segments_[k].duration > 0.0 && t >= segments_[k].t_start) return k;
  }
  return 0;
}

double VelocityProfile::accel_at(double t) const {
  const int k = segment_index(t);
  return k < 0 ? 0.0 : segments_[k].accel;
}

double VelocityProfile::velocity_at(double t) const {
  if (t <= 0.0) return 0.0;
  const int k = segment_index(t);
  if (k < 0) {
    const auto& last = segments_.back();
    return last.velocity_at(last.t_end());
  }
  return segments_[k].velocity_at(t);
}

double VelocityProfile::position_at(double t) const {
  if (t <= 0.0) return 0.0;
  const int k = segment_index(t);
  if (k < 0) {
    const auto& last = segments_.back();
    return last.position_at(last.t_end());
  }
  return segments_[k].position_at(t);
}

VelocityProfile build_velocity_profile(const ManeuverAction& action) {
  return VelocityProfile(action);
}

double range_of_motion(const ManeuverAction& action) {
  const double a_i = action.a_i(), a_m = action.a_m();
  const double t_i = action.t_i(), t_m = action.t_m();
  return std::abs(0.5 * a_i * t_i * t_i + 0.5 * a_i * t_i * t_m + a_m * t_m * t_m / 8.0);
}

std::vector<double> merged_sample_times(double end, double rate,
                                        const std::vector<double>& extra) {
  std::vector<double> times;
  const auto n = static_cast<long>(std::floor(end * rate)) + 1;
  times.reserve(static_cast<std::size_t>(n) + extra.size() + 2);
  for (long k = 0; k <= n; ++k) {
    const double t = static_cast<double>(k) / rate;
    if (t <= end) times.push_back(t);
  }
  for (double t : extra) {
    if (t >= 0.0 && t <= end) times.push_back(t);
  }
  times.push_back(end);
  std::sort(times.begin(), times.end());
  std::vector<double> unique;
  unique.reserve(times.size());
  for (double t : times) {
    if (unique.empty() || t - unique.back() > 1e-12) unique.push_back(t);
  }
  if (unique.back() != end) {
    if (end - unique.back() <= 1e-12) unique.back() = end;
    else unique.push_back(end);
  }
  return unique;
}

PlatformTrace sample_profile(const VelocityProfile& profile, double rate) {
  if (!(rate > 0.0)) throw SlideError(ErrorCode::InvalidArgument, "sample rate must be positive");
  std::vector<double> knots;
  for (const auto& seg : profile.segments()) knots.push_back(seg.t_start);
  PlatformTrace trace;
  trace.t = merged_sample_times(profile.duration(), rate, knots);
  for (double t : trace.t) {
    trace.accel.push_back(profile.accel_at(t));
    trace.vel.push_back(profile.velocity_at(t));
    trace.pos.push_back(profile.position_at(t));
  }
  return trace;
}

void write_csv(std::ostream& out, const PlatformTrace& trace) {
  out << "t,accel,vel,pos\n";
  char buf[160];
  for (std::size_t k = 0; k < trace.size(); ++k) {
    std::snprintf(buf, sizeof buf, "%.9g,%.9g,%.9g,%.9g\n", trace.t[k], trace.accel[k],
                  trace.vel[k], trace.pos[k]);
    out << buf;
  }
}

}  // namespace slide
