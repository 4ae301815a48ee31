#pragma once

#include <functional>
#include <ostream>
#include <vector>

#include "slide/ddpg.hpp"
#include "slide/environment.hpp"

namespace slide {

struct TrainOptions {
  DdpgConfig ddpg;
  EnvParams env;
  long total_steps = 50000;
  Stage start_stage = Stage::Imitation;
  /// Gradient updates per environment step once warmup is over.
  int updates_per_step = 1;
  /// Environment steps after which a stage is promoted even if its accuracy
  /// threshold was not reached; 0 disables.
  long stage_step_budget = 6000;
};

struct EpisodeRecord {
  long episode = 0;
  Stage stage = Stage::Imitation;
  double reward = 0.0;
  double final_error_m = 0.0;
  double first_step_error_m = 0.0;
  int steps = 0;
  double sigma = 0.0;
};

struct StageChange {
  long episode = 0;
  long env_step = 0;
  Stage stage = Stage::Imitation;
};

struct TrainSummary {
  long episodes = 0;
  long env_steps = 0;
  Stage final_stage = Stage::Imitation;
  std::vector<StageChange> stage_changes;
};

/// Single-threaded curriculum training. Each finished episode is written to
/// `log` (when given) as one JSON line
/// {episode, stage, reward, final_error_m, steps, sigma}.
class DdpgTrainer {
 public:
  explicit DdpgTrainer(TrainOptions options);

  DdpgAgent& agent() { return agent_; }
  const TrainOptions& options() const { return options_; }
  Stage stage() const { return curriculum_.stage(); }

  TrainSummary run(std::ostream* log = nullptr,
                   const std::function<void(const EpisodeRecord&)>& on_episode = {});

 private:
  TrainOptions options_;
  DdpgAgent agent_;
  Environment env_;
  Curriculum curriculum_;
  ReplayBuffer buffer_;
  std::mt19937_64 rng_;
  double sigma_;
};

}  // namespace slide
