#include "slide/optimal.hpp"

#include <cmath>
#include <optional>

#include "slide/error.hpp"

namespace slide {
namespace {

constexpr double kTmLow = 1e-6;
constexpr double kTmHigh = kMaxDuration - 1e-9;

struct Family {
  double a_i;
  double a_m;
};

std::optional<Family> optimal_family(double d_des, const FrictionModel& f) {
  const double a_i = f.mu_s * f.g * (1.0 + kStickMargin);
  if (a_i > kMaxAccel) return std::nullopt;
  const double dir = d_des >= 0.0 ? 1.0 : -1.0;
  return Family{dir * a_i, -dir * kMaxAccel};
}

double slide_for(const Family& fam, double t_m, const FrictionModel& f) {
  const auto action = validate_action({fam.a_i, fam.a_m, t_m});
  return std::abs(simulate_closed_form(build_velocity_profile(action), f, 0.0).delta_x_rel);
}

// Smallest t_m whose slide reaches `target`, assuming a monotone response.
double bisect(const Family& fam, double target, const FrictionModel& f, double tol) {
  double lo = kTmLow, hi = kTmHigh;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    const double dx = slide_for(fam, mid, f);
    if (std::abs(dx - target) < 0.01 * tol) return mid;
    (dx < target ? lo : hi) = mid;
    if (hi - lo < 1e-15) break;
  }
  return 0.5 * (lo + hi);
}

}  // namespace

OptimalSolution optimal_action(double d_des, const FrictionModel& f, double rom_max, double tol) {
  if (d_des == 0.0 || !std::isfinite(d_des)) {
    throw SlideError(ErrorCode::InvalidArgument, "optimal_action needs a nonzero distance");
  }
  const auto fam = optimal_family(d_des, f);
  if (!fam) {
    throw SlideError(ErrorCode::Unreachable,
                     "stick limit mu_s*g exceeds the platform acceleration limit");
  }
  const double target = std::abs(d_des);
  if (slide_for(*fam, kTmHigh, f) < target - tol) {
    throw SlideError(ErrorCode::Unreachable, "no t_m < 2 s reaches d_des=" + std::to_string(d_des));
  }
  const double t_m = bisect(*fam, target, f, tol);
  const auto action = validate_action({fam->a_i, fam->a_m, t_m});
  const auto result = simulate_closed_form(build_velocity_profile(action), f, 0.0);
  if (std::abs(std::abs(result.delta_x_rel) - target) >= tol) {
    throw SlideError(ErrorCode::Unreachable, "bisection did not reach tolerance");
  }
  if (result.rom > rom_max) {
    throw SlideError(ErrorCode::RomExceeded, "optimal maneuver needs range of motion " +
                                                 std::to_string(result.rom) + " m > " +
                                                 std::to_string(rom_max) + " m");
  }
  return {action, result.delta_x_rel, result.rom};
}

double optimal_t_m(double d_des, const FrictionModel& f) {
  const auto fam = optimal_family(d_des, f);
  if (!fam || d_des == 0.0) return 0.0;
  const double target = std::abs(d_des);
  if (slide_for(*fam, kTmHigh, f) <= target) return kTmHigh;
  return bisect(*fam, target, f, 1e-6);
}

}  // namespace slide
