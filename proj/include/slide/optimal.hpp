#pragma once

#include "slide/dynamics.hpp"
#include "slide/maneuver.hpp"

namespace slide {

/// Analytical baseline: a_i just above the stick limit so phases 1 and 4
/// carry the object, |a_m| at the platform limit, and t_m bisected on the
/// exact simulator.
struct OptimalSolution {
  ManeuverAction action;
  double achieved = 0.0;
  double rom = 0.0;
};

inline constexpr double kStickMargin = 1e-6;

/// The sign of `d_des` selects the sliding direction. Throws Unreachable when
/// no t_m < 2 s attains |d_des| and RomExceeded when the solution needs more
/// than `rom_max` of platform travel.
OptimalSolution optimal_action(double d_des, const FrictionModel& f,
                               double rom_max = kDefaultRomMax, double tol = 1e-5);

/// Best-effort t_m for the optimal family: the bisection result, clamped to
/// the reachable interval. Never throws; returns 0 when a_i would exceed the
/// platform limit.
double optimal_t_m(double d_des, const FrictionModel& f);

}  // namespace slide
