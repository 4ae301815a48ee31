#pragma once

#include <array>
#include <deque>
#include <optional>
#include <random>
#include <span>
#include <string_view>
#include <utility>

#include "slide/dynamics.hpp"
#include "slide/error.hpp"
#include "slide/maneuver.hpp"
#include "slide/replay_buffer.hpp"

namespace slide {

enum class Stage : int { Imitation = 0, PerfFixed, PerfDistances, PerfFrictions, DR1, DR2 };
inline constexpr int kNumStages = 6;

std::string_view to_string(Stage s);
Stage stage_from_string(std::string_view s);

struct Range {
  double lo = 0.0;
  double hi = 0.0;
};

struct RewardWeights {
  double accuracy = 2.0;
  /// When true the accuracy term rewards the error reduction of the step,
  /// accuracy * (|err_before| - |err_after|) / scale, which equals the
  /// absolute form accuracy * (1 - |err_after| / scale) on the first step.
  bool accuracy_progress = true;
  double step = 0.1;
  double time = 0.05;
  double rom = 2.0;
  double success = 5.0;
  /// Lower clamp on the performance reward.
  double floor = -10.0;
  double imitation_accel = 1.0;
  double imitation_time = 1.0;
  double invalid_action = -1.0;
};

struct EnvParams {
  double rom_max = kDefaultRomMax;
  double success_tol = 0.005;
  int max_steps = 5;
  double fixed_distance = 0.08;
  double fixed_mu = 0.24;
  Range distance{0.02, 0.2};
  Range mu{0.05, 0.45};
  Range dr1_eta{0.05, 0.1};
  Range dr2_eta{0.05, 0.15};
  double static_ratio = 1.0;
  double g = 9.81;
  RewardWeights reward;
  int promotion_window = 200;
  double promotion_accuracy = 0.85;
  double promotion_imitation = -0.05;
};

struct EpisodeConfig {
  double d_des = 0.08;
  double mu_k_true = 0.24;
  double mu_e_given = 0.24;
  int max_steps = 5;
  double success_tol = 0.005;
};

struct HistoryEntry {
  RawAction action;
  double displacement = 0.0;
};

/// Policy input before normalization. history[0] is the most recent step.
struct EnvState {
  double d_remaining = 0.0;
  std::array<HistoryEntry, 3> history{};
  int history_len = 0;
  double mu_e = 0.0;
  int steps_taken = 0;

  /// Feature layout, 14 entries:
  ///   [0]      d_remaining * 10
  ///   [1..9]   (a_i/4.2, a_m/4.2, t_m/2) for slots 1..3
  ///   [10..12] displacement * 10 for slots 1..3
  ///   [13]     mu_e * 2
  StateVec normalized() const;
  void push(const HistoryEntry& entry);
};

StateVec assemble_state(double d_remaining, std::span<const HistoryEntry> history, double mu_e);

/// mu + s * eta with s = +-1 equiprobable and eta ~ U(eta_range), clamped to
/// [0.01, 0.6].
double randomize_mu(double mu, Range eta_range, std::mt19937_64& rng);

/// 1 - |dx - d|/|d|, clamped to [0, 1].
double accuracy(double achieved, double d_des);

double reward_imitation(const RawAction& action, const FrictionModel& f, double t_m_star,
                        const RewardWeights& w = {});

/// `previous` and `remaining` are the signed distances left before and after
/// the step; `step_index` counts from 1; `elapsed` is the maneuver duration.
double reward_performance(const SlideResult& result, const EpisodeConfig& cfg, double previous,
                          double remaining, int step_index, double elapsed, bool success, double rom_max,
                          const RewardWeights& w = {});

struct StepOutcome {
  EnvState next;
  double reward = 0.0;
  bool done = false;
  bool success = false;
  double achieved = 0.0;
  std::optional<SlideResult> info;
  std::optional<ErrorCode> error;
};

class Environment {
 public:
  explicit Environment(EnvParams params = {}) : params_(params) {}

  const EnvParams& params() const { return params_; }
  FrictionModel friction(double mu_k) const {
    return FrictionModel::coulomb(mu_k, params_.static_ratio, params_.g);
  }

  std::pair<EnvState, EpisodeConfig> reset(Stage stage, std::mt19937_64& rng) const;
  EnvState initial_state(const EpisodeConfig& cfg) const;

  /// Simulates with cfg.mu_k_true; the state only ever sees mu_e. Invalid
  /// actions become a penalized no-op step.
  StepOutcome step(const EpisodeConfig& cfg, const EnvState& state, const RawAction& action,
                   Stage stage) const;

 private:
  EnvParams params_;
};

/// Rolling per-episode statistics used for stage promotion.
struct EpisodeStats {
  double accuracy = 0.0;
  double imitation_reward = 0.0;
};

/// Next stage given the statistics window; stays put until the window holds
/// at least params.promotion_window episodes.
Stage curriculum_advance(Stage current, std::span<const EpisodeStats> window,
                         const EnvParams& params);

class Curriculum {
 public:
  explicit Curriculum(const EnvParams& params, Stage start = Stage::Imitation)
      : params_(params), stage_(start) {}

  Stage stage() const { return stage_; }
  /// Records an episode; returns true when this promoted the stage.
  bool record(const EpisodeStats& stats);
  /// Moves to the next stage unconditionally; false when already last.
  bool promote();

 private:
  EnvParams params_;
  Stage stage_;
  std::deque<EpisodeStats> window_;
};

}  // namespace slide
