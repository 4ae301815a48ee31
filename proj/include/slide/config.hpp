#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "slide/ddpg.hpp"
#include "slide/environment.hpp"
#include "slide/lstm.hpp"

namespace slide {

struct DynamicsConfig {
  double static_ratio = 1.0;
  double g = 9.81;
  double numeric_dt = 1e-5;
  double trace_rate = 1000.0;
};

struct TrainingConfig {
  long total_steps = 50000;
  int updates_per_step = 1;
  long stage_step_budget = 6000;
  std::string start_stage = "imitation";
  long checkpoint_every = 10000;
};

struct EstimationConfig {
  LstmShape lstm;
  LstmTrainOptions train;
  DatasetOptions dataset;
  double split_train = 0.8;
  double split_val = 0.1;
};

struct HarnessConfig {
  std::vector<double> mu_surfaces{0.16, 0.24, 0.32};
  double mu_e_lo = 0.04;
  double mu_e_hi = 0.32;
  double mu_e_step = 0.02;
  double sweep_distance = 0.08;
  std::vector<double> distances{0.02, 0.04, 0.06, 0.08, 0.1, 0.12, 0.14, 0.16, 0.18, 0.2};
  double mu_k = 0.24;
  std::vector<double> mu_offsets{0.0, -0.05, 0.05};
  std::vector<double> error_grid{0.07, 0.09, 0.11, 0.13, 0.15};
  int trials_per_bin = 40;
  double estimator_mu_lo = 0.15;
  double estimator_mu_hi = 0.35;
  double closed_loop_mu_e = 0.13;
  double closed_loop_distance = 0.08;
  double closed_loop_tol = 0.005;
  int closed_loop_episodes = 20;
  /// Gaussian noise on the kinematics handed to the estimators.
  double noise_x = 2e-4;  // m
  double noise_v = 2e-3;  // m/s
  double dead_zone = 0.001;
  double solver_tol = 1e-5;
};

/// Every tunable of a run in one layered document.
struct RunConfig {
  std::uint64_t seed = 0;
  std::string output_dir = "runs";
  DynamicsConfig dynamics;
  DdpgConfig agent;
  EnvParams environment;
  TrainingConfig training;
  EstimationConfig estimation;
  HarnessConfig harness;

  /// Copies shared values (seed, gravity, static ratio) into the module
  /// configs and validates them. Throws InvalidConfig.
  void resolve();
};

nlohmann::json to_json(const RunConfig& cfg);

/// Overlays `overrides` on the defaults. Unknown keys and wrongly typed
/// values throw InvalidConfig naming the dotted key path.
RunConfig config_from_json(const nlohmann::json& overrides);
RunConfig load_config(const std::filesystem::path& path);

}  // namespace slide
