#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <span>
#include <vector>

#include "slide/maneuver.hpp"
#include "slide/mlp.hpp"
#include "slide/replay_buffer.hpp"

namespace slide {

struct DdpgConfig {
  double gamma = 0.98;
  double tau = 0.005;
  double actor_lr = 1e-4;
  double critic_lr = 1e-3;
  int batch_size = 128;
  int buffer_capacity = 100000;
  double noise_sigma = 0.15;
  double noise_decay = 0.999;  // per episode
  double noise_min = 0.05;
  int warmup_steps = 1000;
  std::vector<int> actor_hidden{256, 256};
  std::vector<int> critic_hidden{256, 256};
  double final_layer_scale = 1e-3;
  std::uint64_t seed = 0;

  /// Throws InvalidConfig unless 0 <= gamma <= 1 and 0 < tau <= 1.
  void validate() const;
};

/// Maps a normalized action in [-1, 1]^3 to physical units. The sign of
/// `d_remaining` picks the sliding direction: a_i follows it and a_m opposes
/// it, so a_i * a_m <= 0 holds by construction.
RawAction denormalize_action(const ActionVec& u, double d_remaining);

/// Column-major batch views of transitions.
struct TransitionBatch {
  Matrix states;
  Matrix actions;
  Vector rewards;
  Matrix next_states;
  Vector done;

  static TransitionBatch from(std::span<const Transition> transitions);
  Eigen::Index size() const { return states.cols(); }
};

Mlp make_actor(const DdpgConfig& cfg);
Mlp make_critic(const DdpgConfig& cfg);

/// Actor output with optional Gaussian noise injected before the tanh squash,
/// clamped so the denormalized action always validates.
ActionVec policy_action(const Mlp& actor, const StateVec& state, double sigma,
                        std::mt19937_64* rng);

/// Deterministic (sigma = 0) or exploratory action in physical units.
RawAction select_action(const Mlp& actor, const StateVec& state, double d_remaining,
                        double sigma, std::mt19937_64* rng);

/// One critic step on the Bellman target r + gamma (1 - done) Q'(s', pi'(s')).
/// Returns the mean squared error before the step.
double critic_update(const TransitionBatch& batch, const Mlp& actor_target, Mlp& critic,
                     const Mlp& critic_target, double gamma, AdamState& opt);

/// One deterministic policy-gradient ascent step on mean Q(s, pi(s)); only
/// the actor changes. Returns the objective before the step.
double actor_update(const TransitionBatch& batch, Mlp& actor, const Mlp& critic, AdamState& opt);

class DdpgAgent {
 public:
  explicit DdpgAgent(const DdpgConfig& cfg);

  const DdpgConfig& config() const { return cfg_; }
  Mlp& actor() { return actor_; }
  const Mlp& actor() const { return actor_; }
  Mlp& critic() { return critic_; }
  const Mlp& critic() const { return critic_; }
  const Mlp& actor_target() const { return actor_target_; }
  const Mlp& critic_target() const { return critic_target_; }

  struct UpdateStats {
    double critic_loss = 0.0;
    double actor_objective = 0.0;
  };
  /// Critic step, actor step, then soft target updates.
  UpdateStats update(std::span<const Transition> batch);

  /// Writes actor, critic and their targets as one tensor file.
  void save(const std::filesystem::path& manifest, const nlohmann::json& meta = {}) const;
  void load(const std::filesystem::path& manifest);

 private:
  DdpgConfig cfg_;
  Mlp actor_, critic_, actor_target_, critic_target_;
  AdamState actor_opt_, critic_opt_;
};

/// Loads only the actor ("actor/..." arrays) from a checkpoint.
Mlp load_actor(const std::filesystem::path& manifest);

}  // namespace slide
