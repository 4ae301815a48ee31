#include "slide/environment.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "slide/optimal.hpp"

namespace slide {

std::string_view to_string(Stage s) {
  switch (s) {
    case Stage::Imitation: return "imitation";
    case Stage::PerfFixed: return "perf-fixed";
    case Stage::PerfDistances: return "perf-distances";
    case Stage::PerfFrictions: return "perf-frictions";
    case Stage::DR1: return "dr1";
    case Stage::DR2: return "dr2";
  }
  return "imitation";
}

Stage stage_from_string(std::string_view s) {
  for (int k = 0; k < kNumStages; ++k) {
    if (to_string(static_cast<Stage>(k)) == s) return static_cast<Stage>(k);
  }
  throw SlideError(ErrorCode::InvalidArgument, "unknown stage " + std::string(s));
}

StateVec assemble_state(double d_remaining, std::span<const HistoryEntry> history, double mu_e) {
  if (history.size() > 3) {
    throw SlideError(ErrorCode::DimensionMismatch, "history holds at most three steps");
  }
  auto clip = [](double v) { return std::clamp(v, -2.0, 2.0); };
  StateVec s{};
  s[0] = clip(d_remaining * 10.0);
  for (std::size_t k = 0; k < history.size(); ++k) {
    s[1 + 3 * k] = clip(history[k].action.a_i / kMaxAccel);
    s[2 + 3 * k] = clip(history[k].action.a_m / kMaxAccel);
    s[3 + 3 * k] = clip(history[k].action.t_m / kMaxDuration);
    s[10 + k] = clip(history[k].displacement * 10.0);
  }
  s[13] = clip(mu_e * 2.0);
  return s;
}

StateVec EnvState::normalized() const {
  return assemble_state(d_remaining,
                        std::span<const HistoryEntry>(history.data(),
                                                      static_cast<std::size_t>(history_len)),
                        mu_e);
}

void EnvState::push(const HistoryEntry& entry) {
  for (int k = 2; k > 0; --k) history[k] = history[k - 1];
  history[0] = entry;
  history_len = std::min(history_len + 1, 3);
}

double randomize_mu(double mu, Range eta_range, std::mt19937_64& rng) {
  const double sign = std::bernoulli_distribution(0.5)(rng) ? 1.0 : -1.0;
  const double eta = std::uniform_real_distribution<double>(eta_range.lo, eta_range.hi)(rng);
  return std::clamp(mu + sign * eta, 0.01, 0.6);
}

double accuracy(double achieved, double d_des) {
  return std::clamp(1.0 - std::abs(achieved - d_des) / std::abs(d_des), 0.0, 1.0);
}

double reward_imitation(const RawAction& action, const FrictionModel& f, double t_m_star,
                        const RewardWeights& w) {
  const double da_i = (std::abs(action.a_i) - f.mu_s * f.g) / kMaxAccel;
  const double da_m = (std::abs(action.a_m) - kMaxAccel) / kMaxAccel;
  const double dt = action.t_m - t_m_star;
  return -(w.imitation_accel * (da_i * da_i + da_m * da_m) + w.imitation_time * dt * dt / 4.0);
}

double reward_performance(const SlideResult& result, const EpisodeConfig& cfg, double previous,
                          double remaining, int step_index, double elapsed, bool success, double rom_max,
                          const RewardWeights& w) {
  const double scale = std::max(std::abs(cfg.d_des), 0.02);
  const double before = w.accuracy_progress ? std::abs(previous) / scale : 1.0;
  double r = w.accuracy * (before - std::abs(remaining) / scale) - w.step * step_index -
             w.time * elapsed - w.rom * std::max(0.0, result.rom - rom_max) / rom_max;
  if (success) r += w.success;
  return std::max(r, w.floor);
}

std::pair<EnvState, EpisodeConfig> Environment::reset(Stage stage, std::mt19937_64& rng) const {
  EpisodeConfig cfg;
  cfg.max_steps = params_.max_steps;
  cfg.success_tol = params_.success_tol;
  cfg.d_des = params_.fixed_distance;
  cfg.mu_k_true = params_.fixed_mu;
  if (stage >= Stage::PerfDistances) {
    cfg.d_des = std::uniform_real_distribution<double>(params_.distance.lo, params_.distance.hi)(rng);
  }
  if (stage >= Stage::PerfFrictions) {
    cfg.mu_k_true = std::uniform_real_distribution<double>(params_.mu.lo, params_.mu.hi)(rng);
  }
  cfg.mu_e_given = cfg.mu_k_true;
  if (stage == Stage::DR1) cfg.mu_e_given = randomize_mu(cfg.mu_k_true, params_.dr1_eta, rng);
  if (stage == Stage::DR2) cfg.mu_e_given = randomize_mu(cfg.mu_k_true, params_.dr2_eta, rng);
  return {initial_state(cfg), cfg};
}

EnvState Environment::initial_state(const EpisodeConfig& cfg) const {
  EnvState s;
  s.d_remaining = cfg.d_des;
  s.mu_e = cfg.mu_e_given;
  return s;
}

StepOutcome Environment::step(const EpisodeConfig& cfg, const EnvState& state,
                              const RawAction& raw, Stage stage) const {
  StepOutcome out;
  out.next = state;
  out.next.steps_taken = state.steps_taken + 1;
  const int step_index = out.next.steps_taken;

  std::optional<ManeuverAction> action;
  try {
    action = validate_action(raw);
  } catch (const SlideError& e) {
    out.error = e.code();
  }
  if (!action) {
    out.next.push({raw, 0.0});
    out.reward = params_.reward.invalid_action;
    out.done = step_index >= cfg.max_steps;
    return out;
  }

  SlideResult result = simulate_closed_form(build_velocity_profile(*action), friction(cfg.mu_k_true), 0.0);
  out.achieved = result.delta_x_rel;
  out.next.d_remaining = state.d_remaining - out.achieved;
  out.next.push({raw, out.achieved});
  out.success = std::abs(out.next.d_remaining) <= cfg.success_tol;
  out.done = out.success || step_index >= cfg.max_steps;

  if (stage == Stage::Imitation) {
    const FrictionModel assumed = friction(cfg.mu_e_given);
    out.reward = reward_imitation(raw, assumed, optimal_t_m(state.d_remaining, assumed),
                                  params_.reward);
  } else {
    out.reward = reward_performance(result, cfg, state.d_remaining, out.next.d_remaining, step_index,
                                    action->duration(), out.success, params_.rom_max,
                                    params_.reward);
  }
  out.info = std::move(result);
  return out;
}

Stage curriculum_advance(Stage current, std::span<const EpisodeStats> window,
                         const EnvParams& params) {
  if (current == Stage::DR2) return current;
  if (window.size() < static_cast<std::size_t>(params.promotion_window)) return current;
  const auto recent = window.last(static_cast<std::size_t>(params.promotion_window));
  const double n = static_cast<double>(recent.size());
  if (current == Stage::Imitation) {
    const double mean = std::accumulate(recent.begin(), recent.end(), 0.0,
                                        [](double acc, const EpisodeStats& s) {
                                          return acc + s.imitation_reward;
                                        }) / n;
    return mean > params.promotion_imitation ? Stage::PerfFixed : current;
  }
  const double mean = std::accumulate(recent.begin(), recent.end(), 0.0,
                                      [](double acc, const EpisodeStats& s) {
                                        return acc + s.accuracy;
                                      }) / n;
  return mean > params.promotion_accuracy ? static_cast<Stage>(static_cast<int>(current) + 1)
                                          : current;
}

bool Curriculum::record(const EpisodeStats& stats) {
  window_.push_back(stats);
  while (window_.size() > static_cast<std::size_t>(params_.promotion_window)) window_.pop_front();
  std::vector<EpisodeStats> snapshot(window_.begin(), window_.end());
  const Stage next = curriculum_advance(stage_, snapshot, params_);
  if (next == stage_) return false;
  stage_ = next;
  window_.clear();
  return true;
}

bool Curriculum::promote() {
  if (stage_ == Stage::DR2) return false;
  stage_ = static_cast<Stage>(static_cast<int>(stage_) + 1);
  window_.clear();
  return true;
}

}  // namespace slide
