#include "slide/trainer.hpp"

#include <algorithm>
#include <cmath>

#include <json.hpp>
#include <malloc.h>

namespace slide {

DdpgTrainer::DdpgTrainer(TrainOptions options)
    : options_(std::move(options)),
      agent_(options_.ddpg),
      env_(options_.env),
      curriculum_(options_.env, options_.start_stage),
      buffer_(static_cast<std::size_t>(options_.ddpg.buffer_capacity)),
      rng_(options_.ddpg.seed ^ 0x9e3779b97f4a7c15ULL),
      sigma_(options_.ddpg.noise_sigma) {
#ifdef __GLIBC__
  // Batch matrices exceed the default mmap threshold; keep them on the heap.
  mallopt(M_MMAP_THRESHOLD, 256 * 1024 * 1024);
  mallopt(M_TRIM_THRESHOLD, 512 * 1024 * 1024);
#endif
}

TrainSummary DdpgTrainer::run(std::ostream* log,
                              const std::function<void(const EpisodeRecord&)>& on_episode) {
  const DdpgConfig& cfg = options_.ddpg;
  TrainSummary summary;
  std::uniform_real_distribution<double> uniform(-1.0, 1.0);
  long env_steps = 0;
  long episode = 0;
  long stage_start = 0;

  while (env_steps < options_.total_steps) {
    const Stage stage = curriculum_.stage();
    auto [state, ep_cfg] = env_.reset(stage, rng_);
    double episode_reward = 0.0;
    double first_error = 0.0;
    double first_imitation = 0.0;
    bool done = false;
    while (!done) {
      ActionVec u{};
      if (env_steps < cfg.warmup_steps) {
        for (auto& x : u) x = uniform(rng_);
      } else {
        u = policy_action(agent_.actor(), state.normalized(), sigma_, &rng_);
      }
      const RawAction raw = denormalize_action(u, state.d_remaining);
      StepOutcome out = env_.step(ep_cfg, state, raw, stage);
      buffer_.push({state.normalized(), u, out.reward, out.next.normalized(), out.done});
      if (state.steps_taken == 0) {
        first_error = std::abs(out.next.d_remaining);
        first_imitation = out.reward;
      }
      episode_reward += out.reward;
      done = out.done;
      state = out.next;
      ++env_steps;

      if (env_steps >= cfg.warmup_steps && buffer_.size() >= static_cast<std::size_t>(cfg.batch_size)) {
        for (int k = 0; k < options_.updates_per_step; ++k) {
          const auto batch = buffer_.sample(static_cast<std::size_t>(cfg.batch_size), rng_);
          agent_.update(batch);
        }
      }
    }

    EpisodeRecord rec;
    rec.episode = episode;
    rec.stage = stage;
    rec.reward = episode_reward;
    rec.final_error_m = std::abs(state.d_remaining);
    rec.first_step_error_m = first_error;
    rec.steps = state.steps_taken;
    rec.sigma = sigma_;
    if (log) {
      *log << nlohmann::json{{"episode", rec.episode},
                             {"stage", to_string(rec.stage)},
                             {"reward", rec.reward},
                             {"final_error_m", rec.final_error_m},
                             {"steps", rec.steps},
                             {"sigma", rec.sigma}}
                  .dump()
           << '\n';
    }
    if (on_episode) on_episode(rec);

    const double first_accuracy = std::clamp(1.0 - first_error / std::abs(ep_cfg.d_des), 0.0, 1.0);
    bool promoted = curriculum_.record({first_accuracy, first_imitation});
    if (!promoted && options_.stage_step_budget > 0 &&
        env_steps - stage_start >= options_.stage_step_budget) {
      promoted = curriculum_.promote();
    }
    if (promoted) {
      stage_start = env_steps;
      summary.stage_changes.push_back({episode, env_steps, curriculum_.stage()});
    }
    if (env_steps >= cfg.warmup_steps) sigma_ = std::max(cfg.noise_min, sigma_ * cfg.noise_decay);
    ++episode;
  }
  summary.episodes = episode;
  summary.env_steps = env_steps;
  summary.final_stage = curriculum_.stage();
  return summary;
}

}  // namespace slide
