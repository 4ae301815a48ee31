#include "slide/config.hpp"

#include <fstream>

#include "slide/error.hpp"

namespace slide {

NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(Range, lo, hi)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(RewardWeights, accuracy, accuracy_progress, step, time,
                                                rom, success, floor, imitation_accel,
                                                imitation_time, invalid_action)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(EnvParams, rom_max, success_tol, max_steps,
                                                fixed_distance, fixed_mu, distance, mu, dr1_eta,
                                                dr2_eta, reward, promotion_window,
                                                promotion_accuracy, promotion_imitation)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(DdpgConfig, gamma, tau, actor_lr, critic_lr,
                                                batch_size, buffer_capacity, noise_sigma,
                                                noise_decay, noise_min, warmup_steps, actor_hidden,
                                                critic_hidden, final_layer_scale)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(DynamicsConfig, static_ratio, g, numeric_dt,
                                                trace_rate)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(TrainingConfig, total_steps, updates_per_step,
                                                stage_step_budget, start_stage, checkpoint_every)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(LstmShape, layers, head, rate, window, accel_scale,
                                                vel_scale)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(LstmTrainOptions, epochs, batch, lr, lr_decay,
                                                grad_clip)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(DatasetOptions, mu_lo, mu_hi, slip_fraction)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(EstimationConfig, lstm, train, dataset, split_train,
                                                split_val)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(HarnessConfig, mu_surfaces, mu_e_lo, mu_e_hi,
                                                mu_e_step, sweep_distance, distances, mu_k,
                                                mu_offsets, error_grid, trials_per_bin,
                                                estimator_mu_lo, estimator_mu_hi, closed_loop_mu_e,
                                                closed_loop_distance, closed_loop_tol,
                                                closed_loop_episodes, noise_x, noise_v, dead_zone,
                                                solver_tol)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(RunConfig, seed, output_dir, dynamics, agent,
                                                environment, training, estimation, harness)

namespace {

bool same_kind(const nlohmann::json& a, const nlohmann::json& b) {
  if (a.is_number() && b.is_number()) {
    return !(a.is_number_float() && b.is_number_integer());
  }
  return a.type() == b.type();
}

void check_keys(const nlohmann::json& defaults, const nlohmann::json& given, const std::string& path) {
  if (!given.is_object()) {
    throw SlideError(ErrorCode::InvalidConfig,
                     (path.empty() ? std::string("config") : path) + ": expected an object");
  }
  for (const auto& [key, value] : given.items()) {
    const std::string here = path.empty() ? key : path + "." + key;
    if (!defaults.contains(key)) {
      throw SlideError(ErrorCode::InvalidConfig, "unknown config key '" + here + "'");
    }
    const nlohmann::json& ref = defaults.at(key);
    if (ref.is_object()) {
      check_keys(ref, value, here);
    } else if (!same_kind(value, ref)) {
      throw SlideError(ErrorCode::InvalidConfig, "config key '" + here + "' expects a " +
                                                     std::string(ref.type_name()) + ", got " +
                                                     value.type_name());
    }
  }
}

}  // namespace

void RunConfig::resolve() {
  agent.seed = seed;
  environment.static_ratio = dynamics.static_ratio;
  environment.g = dynamics.g;
  estimation.train.seed = seed;
  estimation.dataset.rate = estimation.lstm.rate;
  estimation.dataset.window = estimation.lstm.window;
  estimation.dataset.static_ratio = dynamics.static_ratio;
  estimation.dataset.g = dynamics.g;

  agent.validate();
  estimation.lstm.validate();
  stage_from_string(training.start_stage);
  const auto fail = [](const std::string& msg) { throw SlideError(ErrorCode::InvalidConfig, msg); };
  if (!(dynamics.g > 0.0) || !(dynamics.static_ratio >= 1.0)) fail("dynamics: need g > 0 and static_ratio >= 1");
  if (!(dynamics.numeric_dt > 0.0)) fail("dynamics.numeric_dt must be positive");
  if (training.total_steps < 0 || training.updates_per_step < 0) fail("training: counts must be non-negative");
  if (environment.max_steps < 1) fail("environment.max_steps must be >= 1");
  if (!(harness.mu_e_step > 0.0) || harness.mu_e_hi < harness.mu_e_lo) fail("harness: bad mu_e grid");
  if (harness.trials_per_bin < 1 || harness.closed_loop_episodes < 1) fail("harness: trial counts must be >= 1");
  for (double d : harness.distances) {
    if (!(d > 0.0)) fail("harness.distances must be positive");
  }
}

nlohmann::json to_json(const RunConfig& cfg) {
  nlohmann::json j;
  slide::to_json(j, cfg);
  return j;
}

RunConfig config_from_json(const nlohmann::json& overrides) {
  const nlohmann::json defaults = to_json(RunConfig{});
  check_keys(defaults, overrides, "");
  nlohmann::json merged = defaults;
  merged.merge_patch(overrides);
  RunConfig cfg;
  try {
    merged.get_to(cfg);
  } catch (const nlohmann::json::exception& e) {
    throw SlideError(ErrorCode::InvalidConfig, std::string("config: ") + e.what());
  }
  cfg.resolve();
  return cfg;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw SlideError(ErrorCode::Io, "cannot open config " + path.string());
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in, nullptr, true, true);
  } catch (const nlohmann::json::parse_error& e) {
    throw SlideError(ErrorCode::InvalidConfig, "config " + path.string() + ": " + e.what());
  }
  return config_from_json(doc);
}

}  // namespace slide
