#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "slide/config.hpp"
#include "slide/estimation.hpp"
#include "slide/lstm.hpp"
#include "slide/mlp.hpp"

namespace slide {

enum class EstimatorKind { None, Analytical, Lstm };
std::string_view to_string(EstimatorKind k);
EstimatorKind estimator_from_string(std::string_view s);

/// Deterministic action of a trained actor for a policy state.
RawAction policy_act(const Mlp& actor, const EnvState& state);

/// Gaussian sensor noise applied to estimator inputs.
struct MeasurementNoise {
  double x = 0.0;  // m
  double v = 0.0;  // m/s
};

/// Adds noise to the boundary samples and to the series while the object
/// is still moving.
void perturb(EstimateInput& input, double slide_duration, const MeasurementNoise& noise,
             std::mt19937_64& rng);

struct StepRecord {
  int step = 0;
  RawAction action;
  double mu_e_before = 0.0;
  double mu_e_after = 0.0;
  double achieved = 0.0;
  double remaining = 0.0;
  double rom = 0.0;
  std::string branch;  // empty unless the analytical estimator ran
  bool estimator_skipped = false;
};

struct EpisodeReport {
  std::vector<StepRecord> steps;
  bool success = false;
  double final_error = 0.0;

  /// Steps needed to succeed, or max_steps + 1 when the episode failed.
  int steps_to_success(int max_steps) const;
  /// |remaining| after step k (1-based), or after the last step taken.
  double error_after(int k) const;
};

struct ClosedLoopOptions {
  EstimatorKind estimator = EstimatorKind::None;
  const LstmNetwork* lstm = nullptr;
  MeasurementNoise noise;
};

/// Runs the policy until success or max_steps; with an estimator attached
/// mu_e in the state is replaced after every step by the estimate from that
/// step's motion. Throws InvalidArgument when the LSTM estimator is requested
/// without a network.
EpisodeReport run_closed_loop(const Mlp& actor, const EpisodeConfig& cfg, const EnvParams& env,
                              const ClosedLoopOptions& opt, std::mt19937_64& rng);

/// Per-trial table plus summary. The CSV holds only reproducible values; the
/// wall-clock runtime goes to the JSON summary.
struct ExperimentReport {
  std::string id;
  std::vector<std::string> columns;
  std::vector<std::vector<nlohmann::json>> rows;
  nlohmann::json summary = nlohmann::json::object();
  nlohmann::json config = nlohmann::json::object();
  nlohmann::json checkpoints = nlohmann::json::object();
  double runtime_s = 0.0;

  void add_row(std::vector<nlohmann::json> row);
  std::string csv() const;
  nlohmann::json to_json() const;
  /// Writes <dir>/<id>.csv and <dir>/<id>.json.
  void write(const std::filesystem::path& dir) const;
};

/// Records a checkpoint path and its git blob hash in the report.
void add_checkpoint(ExperimentReport& report, const std::string& role,
                    const std::filesystem::path& manifest);

/// Inclusive arithmetic grid with values rounded to 1e-9.
std::vector<double> make_grid(double lo, double hi, double step);

/// Median of a copy; 0 for an empty input.
double median(std::vector<double> values);

/// First-step displacement of the policy and of the optimal controller fed
/// mu_e, for every (mu_k surface, mu_e) pair at harness.sweep_distance.
ExperimentReport experiment_mu_sweep(const Mlp& actor, const RunConfig& cfg);

/// First-step error of the policy over harness.distances at harness.mu_k
/// for each offset in harness.mu_offsets.
ExperimentReport experiment_distance_sweep(const Mlp& actor, const RunConfig& cfg);

/// One policy step with a wrong mu_e per trial, then every available
/// estimator's correction metric. `lstm` may be null.
ExperimentReport experiment_estimator_accuracy(const Mlp& actor, const LstmNetwork* lstm,
                                               const RunConfig& cfg);

/// harness.closed_loop_episodes seeded episodes for each estimator
/// (none, analytical, and lstm when given).
ExperimentReport experiment_closed_loop(const Mlp& actor, const LstmNetwork* lstm,
                                        const RunConfig& cfg);

}  // namespace slide
