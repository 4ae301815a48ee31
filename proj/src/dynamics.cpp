#include "slide/dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <ostream>
#include <string>

#include <json.hpp>

#include "slide/error.hpp"

namespace slide {
namespace {

double sgn(double x) { return (x > 0.0) - (x < 0.0); }

std::vector<double> piece_starts(const std::vector<MotionPiece>& pieces) {
  std::vector<double> out;
  out.reserve(pieces.size());
  for (const auto& p : pieces) out.push_back(p.t_start);
  return out;
}

void push_platform(RelativeTrace& tr, const VelocityProfile& profile, double t) {
  tr.t.push_back(t);
  tr.plat_accel.push_back(profile.accel_at(t));
  tr.plat_vel.push_back(profile.velocity_at(t));
}

}  // namespace

FrictionModel FrictionModel::coulomb(double mu_k, double static_ratio, double g) {
  return FrictionModel{mu_k * static_ratio, mu_k, g};
}

void FrictionModel::validate() const {
  if (!(mu_k > 0.0 && mu_k <= mu_s && mu_s <= 2.0)) {
    throw SlideError(ErrorCode::InvalidArgument,
                     "friction coefficients must satisfy 0 < mu_k <= mu_s <= 2");
  }
  if (!(g > 0.0)) throw SlideError(ErrorCode::InvalidArgument, "gravity must be positive");
}

bool slip_condition(double platform_accel, const FrictionModel& f) {
  return std::abs(platform_accel) > f.mu_s * f.g;
}

double relative_accel(double v_rel, double platform_accel, const FrictionModel& f) {
  const double dir = v_rel != 0.0 ? sgn(v_rel) : sgn(-platform_accel);
  return -platform_accel - dir * f.mu_k * f.g;
}

std::string_view to_string(EventKind kind) {
  switch (kind) {
    case EventKind::SlipStart: return "slip-start";
    case EventKind::Stick: return "stick";
    case EventKind::Reversal: return "reversal";
    case EventKind::PhaseBoundary: return "phase-boundary";
  }
  return "unknown";
}

RelativeState SlideResult::state_at(double t) const {
  if (t <= 0.0) return {};
  if (t >= duration) return {delta_x_rel, 0.0, true};
  if (!pieces.empty()) {
    auto it = std::upper_bound(pieces.begin(), pieces.end(), t,
                               [](double tt, const MotionPiece& p) { return tt < p.t_start; });
    const MotionPiece& p = *std::prev(it);
    const double dt = t - p.t_start;
    return {p.x0 + p.v0 * dt + 0.5 * p.rel_accel * dt * dt, p.v0 + p.rel_accel * dt, p.sticking};
  }
  auto it = std::upper_bound(trace.t.begin(), trace.t.end(), t);
  const auto hi = static_cast<std::size_t>(it - trace.t.begin());
  if (hi >= trace.size()) return {trace.x_rel.back(), trace.v_rel.back(), true};
  const std::size_t lo = hi - 1;
  const double w = (t - trace.t[lo]) / (trace.t[hi] - trace.t[lo]);
  return {trace.x_rel[lo] + w * (trace.x_rel[hi] - trace.x_rel[lo]),
          trace.v_rel[lo] + w * (trace.v_rel[hi] - trace.v_rel[lo]), trace.sticking[lo] != 0};
}

bool SlideResult::has_event(EventKind kind) const {
  return std::any_of(events.begin(), events.end(),
                     [kind](const SlideEvent& e) { return e.kind == kind; });
}

SlideResult simulate_closed_form(const VelocityProfile& profile, const FrictionModel& f,
                                 double trace_rate) {
  SlideResult result(profile);
  const double kinetic = f.mu_k * f.g;

  double t = 0.0, x = 0.0, v = 0.0;
  bool stuck = true;
  auto emit = [&](double dur, double a, double rel) {
    result.pieces.push_back({t, dur, a, rel, x, v, stuck});
    x += v * dur + 0.5 * rel * dur * dur;
    v += rel * dur;
    t += dur;
  };
  auto log = [&](EventKind kind) { result.events.push_back({t, kind}); };

  auto integrate = [&](double a, double t_end) {
    while (t < t_end) {
      const double remaining = t_end - t;
      if (!stuck && v == 0.0 && !slip_condition(a, f)) {
        stuck = true;
        log(EventKind::Stick);
      }
      if (stuck) {
        if (!slip_condition(a, f)) {
          emit(remaining, a, 0.0);
          break;
        }
        stuck = false;
        log(EventKind::SlipStart);
      }
      const double rel = relative_accel(v, a, f);
      if (v != 0.0 && rel * v < 0.0) {
        const double t_zero = -v / rel;
        if (t_zero < remaining) {
          emit(t_zero, a, rel);
          v = 0.0;
          if (slip_condition(a, f)) {
            log(EventKind::Reversal);
          } else {
            stuck = true;
            log(EventKind::Stick);
          }
          continue;
        }
      }
      emit(remaining, a, rel);
      break;
    }
    t = t_end;
  };

  const auto& segments = profile.segments();
  for (std::size_t k = 0; k < segments.size(); ++k) {
    const PhaseSegment& seg = segments[k];
    if (k > 0) {
      t = seg.t_start;
      log(EventKind::PhaseBoundary);
    }
    if (seg.duration > 0.0) integrate(seg.accel, seg.t_end());
  }
  t = profile.duration();

  // Platform at rest: residual sliding decays under kinetic friction.
  if (!stuck) {
    if (v != 0.0 && kinetic > 0.0) {
      const double rel = -sgn(v) * kinetic;
      emit(std::abs(v) / kinetic, 0.0, rel);
      v = 0.0;
    }
    if (kinetic > 0.0 || v == 0.0) {
      stuck = true;
      log(EventKind::Stick);
    }
  }

  result.delta_x_rel = x;
  result.rom = range_of_motion(profile.action());
  result.duration = t;

  if (trace_rate <= 0.0) return result;

  std::vector<double> dissipated_at_start;
  double acc = 0.0;
  for (const auto& p : result.pieces) {
    dissipated_at_start.push_back(acc);
    if (!p.sticking) {
      const double dx = p.v0 * p.duration + 0.5 * p.rel_accel * p.duration * p.duration;
      acc += kinetic * std::abs(dx);
    }
  }

  RelativeTrace& tr = result.trace;
  for (double ts : merged_sample_times(result.duration, trace_rate, piece_starts(result.pieces))) {
    push_platform(tr, profile, ts);
    auto it = std::upper_bound(result.pieces.begin(), result.pieces.end(), ts,
                               [](double tt, const MotionPiece& p) { return tt < p.t_start; });
    if (it == result.pieces.begin() || ts >= result.duration) {
      const bool at_end = ts >= result.duration && ts > 0.0;
      tr.x_rel.push_back(at_end ? x : 0.0);
      tr.v_rel.push_back(0.0);
      tr.sticking.push_back(1);
      tr.dissipated.push_back(at_end ? acc : 0.0);
      continue;
    }
    const auto idx = static_cast<std::size_t>(it - result.pieces.begin()) - 1;
    const MotionPiece& p = result.pieces[idx];
    const double dt = ts - p.t_start;
    const double dx = p.v0 * dt + 0.5 * p.rel_accel * dt * dt;
    tr.x_rel.push_back(p.x0 + dx);
    tr.v_rel.push_back(p.v0 + p.rel_accel * dt);
    tr.sticking.push_back(p.sticking ? 1 : 0);
    tr.dissipated.push_back(dissipated_at_start[idx] + (p.sticking ? 0.0 : kinetic * std::abs(dx)));
  }
  return result;
}

SlideResult simulate_numeric(const VelocityProfile& profile, const FrictionModel& f, double dt,
                             double trace_rate) {
  if (!(dt > 0.0)) throw SlideError(ErrorCode::InvalidArgument, "dt must be positive");
  if (!(trace_rate > 0.0)) throw SlideError(ErrorCode::InvalidArgument, "trace rate must be positive");
  SlideResult result(profile);
  const double stick_limit = f.mu_s * f.g;
  const double kinetic = f.mu_k * f.g;
  const double deadband = dt * kinetic;
  const double maneuver_end = profile.duration();

  std::array<double, 4> seg_end{};
  std::array<double, 4> seg_accel{};
  for (std::size_t k = 0; k < 4; ++k) {
    seg_end[k] = profile.segments()[k].t_end();
    seg_accel[k] = profile.segments()[k].accel;
    if (k > 0) result.events.push_back({profile.segments()[k].t_start, EventKind::PhaseBoundary});
  }

  double x = 0.0, v = 0.0, dissipated = 0.0;
  bool stuck = true;
  std::size_t seg = 0;
  long next_sample = 0;
  RelativeTrace& tr = result.trace;
  auto record = [&](double ts) {
    push_platform(tr, profile, ts);
    tr.x_rel.push_back(x);
    tr.v_rel.push_back(v);
    tr.sticking.push_back(stuck ? 1 : 0);
    tr.dissipated.push_back(dissipated);
  };

  for (long n = 0;; ++n) {
    const double t = static_cast<double>(n) * dt;
    for (double ts = static_cast<double>(next_sample) / trace_rate; t >= ts - 0.5 * dt;
         ts = static_cast<double>(next_sample) / trace_rate) {
      record(ts);
      ++next_sample;
    }
    if (t >= maneuver_end && (stuck || kinetic == 0.0)) {
      result.duration = std::max(t, maneuver_end);
      break;
    }

    const double mid = t + 0.5 * dt;
    while (seg < 4 && mid >= seg_end[seg]) ++seg;
    const double a = seg < 4 ? seg_accel[seg] : 0.0;

    if (stuck) {
      if (std::abs(a) <= stick_limit) continue;
      stuck = false;
      result.events.push_back({t, EventKind::SlipStart});
    }
    if (v == 0.0 && std::abs(a) <= stick_limit) {
      stuck = true;
      result.events.push_back({t, EventKind::Stick});
      continue;
    }
    const double rel = relative_accel(v, a, f);
    const double v_new = v + rel * dt;
    const bool crossed = v != 0.0 && v_new * v <= 0.0;
    const bool settling = std::abs(v_new) < deadband && rel * v < 0.0;
    if ((crossed || settling) && std::abs(a) <= stick_limit) {
      const double t_zero = std::min(dt, std::abs(v / rel));
      const double x_new = x + 0.5 * v * t_zero;
      dissipated += kinetic * std::abs(x_new - x);
      x = x_new;
      v = 0.0;
      stuck = true;
      result.events.push_back({t + t_zero, EventKind::Stick});
      continue;
    }
    if (crossed) result.events.push_back({t, EventKind::Reversal});
    const double x_new = x + 0.5 * (v + v_new) * dt;
    dissipated += kinetic * std::abs(x_new - x);
    x = x_new;
    v = v_new;
  }
  if (tr.t.back() > result.duration) {
    tr.t.back() = result.duration;
  } else if (tr.t.back() < result.duration) {
    record(result.duration);
  }
  result.delta_x_rel = x;
  result.rom = range_of_motion(profile.action());
  std::stable_sort(result.events.begin(), result.events.end(),
                   [](const SlideEvent& a, const SlideEvent& b) { return a.t < b.t; });
  return result;
}

TwoChannelSeries sample_relative_trace(const SlideResult& result, double rate, double pad_to) {
  if (!(rate > 0.0)) throw SlideError(ErrorCode::InvalidArgument, "sample rate must be positive");
  if (pad_to < result.duration) {
    throw SlideError(ErrorCode::PadTooShort, "pad window " + std::to_string(pad_to) +
                                                 " s is shorter than the slide duration " +
                                                 std::to_string(result.duration) + " s");
  }
  const auto n = static_cast<std::size_t>(std::llround(rate * pad_to));
  TwoChannelSeries out;
  out.rate = rate;
  out.accel.assign(n, 0.0);
  out.v_rel.assign(n, 0.0);
  for (std::size_t k = 0; k < n; ++k) {
    const double t = static_cast<double>(k) / rate;
    if (t >= result.duration) break;
    out.accel[k] = result.profile().accel_at(t);
    out.v_rel[k] = result.state_at(t).v_rel;
  }
  return out;
}

void write_csv(std::ostream& out, const RelativeTrace& trace) {
  out << "t,plat_accel,plat_vel,x_rel,v_rel\n";
  char buf[200];
  for (std::size_t k = 0; k < trace.size(); ++k) {
    std::snprintf(buf, sizeof buf, "%.9g,%.9g,%.9g,%.9g,%.9g\n", trace.t[k], trace.plat_accel[k],
                  trace.plat_vel[k], trace.x_rel[k], trace.v_rel[k]);
    out << buf;
  }
}

RelativeTrace read_trace_csv(std::istream& in) {
  RelativeTrace tr;
  std::string line;
  if (!std::getline(in, line) || line.rfind("t,plat_accel,plat_vel,x_rel,v_rel", 0) != 0) {
    throw SlideError(ErrorCode::Io, "trace csv: expected header t,plat_accel,plat_vel,x_rel,v_rel");
  }
  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty()) continue;
    double v[5];
    if (std::sscanf(line.c_str(), "%lf,%lf,%lf,%lf,%lf", &v[0], &v[1], &v[2], &v[3], &v[4]) != 5) {
      throw SlideError(ErrorCode::Io, "trace csv: malformed row " + std::to_string(row));
    }
    if (!tr.t.empty() && !(v[0] >= tr.t.back())) {
      throw SlideError(ErrorCode::DegenerateTrace, "trace csv: time goes backwards at row " + std::to_string(row));
    }
    tr.t.push_back(v[0]);
    tr.plat_accel.push_back(v[1]);
    tr.plat_vel.push_back(v[2]);
    tr.x_rel.push_back(v[3]);
    tr.v_rel.push_back(v[4]);
    tr.sticking.push_back(v[4] == 0.0);
    tr.dissipated.push_back(0.0);
  }
  if (tr.size() < 2) throw SlideError(ErrorCode::DegenerateTrace, "trace csv: fewer than two rows");
  return tr;
}

void write_events_jsonl(std::ostream& out, const std::vector<SlideEvent>& events) {
  for (const auto& e : events) {
    out << nlohmann::json{{"t", e.t}, {"kind", to_string(e.kind)}}.dump() << '\n';
  }
}

}  // namespace slide
