#include "slide/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>

#include "slide/ddpg.hpp"
#include "slide/error.hpp"
#include "slide/optimal.hpp"

namespace slide {
namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

double mean(const std::vector<double>& v) {
  return v.empty() ? 0.0 : std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

nlohmann::json error_stats(const std::vector<double>& errors) {
  return {{"n", errors.size()},
          {"median_error", median(errors)},
          {"mean_error", mean(errors)},
          {"max_error", errors.empty() ? 0.0 : *std::max_element(errors.begin(), errors.end())}};
}

std::string format_cell(const nlohmann::json& v) {
  if (v.is_string()) return v.get<std::string>();
  if (v.is_boolean()) return v.get<bool>() ? "1" : "0";
  if (v.is_number_integer()) return std::to_string(v.get<long long>());
  if (v.is_number_unsigned()) return std::to_string(v.get<unsigned long long>());
  if (v.is_number_float()) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.9g", v.get<double>());
    return buf;
  }
  if (v.is_null()) return "";
  return v.dump();
}

EnvParams env_params(const RunConfig& cfg) { return cfg.environment; }

}  // namespace

std::string_view to_string(EstimatorKind k) {
  switch (k) {
    case EstimatorKind::None: return "none";
    case EstimatorKind::Analytical: return "analytical";
    case EstimatorKind::Lstm: return "lstm";
  }
  return "none";
}

EstimatorKind estimator_from_string(std::string_view s) {
  if (s == "none") return EstimatorKind::None;
  if (s == "analytical") return EstimatorKind::Analytical;
  if (s == "lstm") return EstimatorKind::Lstm;
  throw SlideError(ErrorCode::InvalidArgument, "unknown estimator '" + std::string(s) + "'");
}

RawAction policy_act(const Mlp& actor, const EnvState& state) {
  return select_action(actor, state.normalized(), state.d_remaining, 0.0, nullptr);
}

void perturb(EstimateInput& input, double slide_duration, const MeasurementNoise& noise,
             std::mt19937_64& rng) {
  std::normal_distribution<double> nx(0.0, 1.0);
  input.samples.x_at_ti += noise.x * nx(rng);
  input.samples.x_at_ti_tm += noise.x * nx(rng);
  input.samples.v_at_ti += noise.v * nx(rng);
  const double rate = input.series.rate;
  for (std::size_t k = 0; k < input.series.v_rel.size(); ++k) {
    if (static_cast<double>(k) / rate >= slide_duration) break;
    input.series.v_rel[k] += noise.v * nx(rng);
  }
}

int EpisodeReport::steps_to_success(int max_steps) const {
  return success ? static_cast<int>(steps.size()) : max_steps + 1;
}

double EpisodeReport::error_after(int k) const {
  if (steps.empty()) return 0.0;
  const std::size_t idx = std::min<std::size_t>(static_cast<std::size_t>(k), steps.size()) - 1;
  return std::abs(steps[idx].remaining);
}

EpisodeReport run_closed_loop(const Mlp& actor, const EpisodeConfig& cfg, const EnvParams& params,
                              const ClosedLoopOptions& opt, std::mt19937_64& rng) {
  if (opt.estimator == EstimatorKind::Lstm && !opt.lstm) {
    throw SlideError(ErrorCode::InvalidArgument, "lstm estimator requested without a network");
  }
  const Environment env(params);
  EnvState state = env.initial_state(cfg);
  EpisodeReport report;
  bool done = false;
  while (!done) {
    const RawAction raw = policy_act(actor, state);
    StepOutcome out = env.step(cfg, state, raw, Stage::DR2);
    StepRecord rec;
    rec.step = out.next.steps_taken;
    rec.action = raw;
    rec.mu_e_before = state.mu_e;
    rec.achieved = out.achieved;
    rec.remaining = out.next.d_remaining;
    if (out.info) rec.rom = out.info->rom;
    if (out.info && opt.estimator != EstimatorKind::None) {
      const double rate = opt.lstm ? opt.lstm->shape().rate : kDefaultSeriesRate;
      const double window = opt.lstm ? opt.lstm->shape().window : kSeriesWindow;
      EstimateInput input = make_estimate_input(*out.info, rate, window);
      perturb(input, out.info->duration, opt.noise, rng);
      if (opt.estimator == EstimatorKind::Analytical) {
        const AnalyticalEstimate est = estimate_analytical(input, params.g);
        out.next.mu_e = est.mu;
        rec.branch = std::string(to_string(est.branch));
      } else if (input.series.length() == 0) {
        rec.estimator_skipped = true;
      } else {
        out.next.mu_e = estimate_lstm(*opt.lstm, input.series);
      }
    }
    rec.mu_e_after = out.next.mu_e;
    report.steps.push_back(rec);
    report.success = out.success;
    done = out.done;
    state = out.next;
  }
  report.final_error = std::abs(state.d_remaining);
  return report;
}

void ExperimentReport::add_row(std::vector<nlohmann::json> row) {
  if (row.size() != columns.size()) {
    throw SlideError(ErrorCode::DimensionMismatch, "report row width differs from header");
  }
  rows.push_back(std::move(row));
}

std::string ExperimentReport::csv() const {
  std::ostringstream out;
  for (std::size_t c = 0; c < columns.size(); ++c) out << (c ? "," : "") << columns[c];
  out << '\n';
  for (const auto& row : rows) {
    for (std::size_t c = 0; c < row.size(); ++c) out << (c ? "," : "") << format_cell(row[c]);
    out << '\n';
  }
  return out.str();
}

nlohmann::json ExperimentReport::to_json() const {
  return {{"experiment", id},     {"columns", columns},         {"trials", rows.size()},
          {"summary", summary},   {"config", config},           {"checkpoints", checkpoints},
          {"runtime_s", runtime_s}};
}

void ExperimentReport::write(const std::filesystem::path& dir) const {
  std::filesystem::create_directories(dir);
  {
    std::ofstream out(dir / (id + ".csv"), std::ios::binary);
    if (!out) throw SlideError(ErrorCode::Io, "cannot write " + (dir / (id + ".csv")).string());
    out << csv();
  }
  std::ofstream out(dir / (id + ".json"), std::ios::binary);
  if (!out) throw SlideError(ErrorCode::Io, "cannot write " + (dir / (id + ".json")).string());
  out << to_json().dump(2) << '\n';
}

void add_checkpoint(ExperimentReport& report, const std::string& role,
                    const std::filesystem::path& manifest) {
  report.checkpoints[role] = {{"manifest", manifest.string()},
                              {"manifest_hash", git_blob_hash(manifest)},
                              {"payload_hash", git_blob_hash(payload_path(manifest))}};
}

std::vector<double> make_grid(double lo, double hi, double step) {
  if (!(step > 0.0) || hi < lo) throw SlideError(ErrorCode::InvalidArgument, "bad grid bounds");
  std::vector<double> out;
  const auto n = static_cast<long>(std::floor((hi - lo) / step + 1e-9));
  for (long k = 0; k <= n; ++k) out.push_back(std::round((lo + k * step) * 1e9) / 1e9);
  return out;
}

double median(std::vector<double> values) {
  if (values.empty()) return 0.0;
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  return n % 2 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

ExperimentReport experiment_mu_sweep(const Mlp& actor, const RunConfig& cfg) {
  const auto t0 = Clock::now();
  const HarnessConfig& h = cfg.harness;
  const Environment env(env_params(cfg));
  ExperimentReport rep;
  rep.id = "sweep_mu";
  rep.config = to_json(cfg);
  rep.columns = {"mu_k", "mu_e", "delta_mu", "controller", "status", "a_i", "a_m", "t_m",
                 "achieved", "error", "dead_zone", "rom"};
  const double d = h.sweep_distance;
  const std::vector<double> grid = make_grid(h.mu_e_lo, h.mu_e_hi, h.mu_e_step);
  std::vector<double> errors[2], band[2];
  int dead[2] = {0, 0}, dead_near_policy = 0;
  bool optimal_bounds_policy = true;
  double optimal_exact_max = 0.0;
  for (double mu_k : h.mu_surfaces) {
    const FrictionModel truth = env.friction(mu_k);
    for (double mu_e : grid) {
      const double delta = std::round((mu_e - mu_k) * 1e9) / 1e9;
      double err_ctrl[2] = {0.0, 0.0};
      for (int ctrl = 0; ctrl < 2; ++ctrl) {
        std::string status = "ok";
        std::optional<ManeuverAction> action;
        if (ctrl == 0) {
          EpisodeConfig ec;
          ec.d_des = d;
          ec.mu_k_true = mu_k;
          ec.mu_e_given = mu_e;
          action = validate_action(policy_act(actor, env.initial_state(ec)));
        } else {
          try {
            action = optimal_action(d, env.friction(mu_e), cfg.environment.rom_max, h.solver_tol).action;
          } catch (const SlideError& e) {
            status = std::string(to_string(e.code()));
          }
        }
        double achieved = 0.0, rom = 0.0;
        RawAction raw{};
        if (action) {
          const SlideResult res = simulate_closed_form(build_velocity_profile(*action), truth, 0.0);
          achieved = res.delta_x_rel;
          rom = res.rom;
          raw = action->raw();
        }
        const double err = std::abs(achieved - d);
        const bool is_dead = std::abs(achieved) < h.dead_zone;
        err_ctrl[ctrl] = err;
        errors[ctrl].push_back(err);
        dead[ctrl] += is_dead;
        if (std::abs(delta) >= 0.05 - 1e-9 && std::abs(delta) <= 0.08 + 1e-9) band[ctrl].push_back(err);
        if (ctrl == 0 && is_dead && std::abs(delta) <= 0.05 + 1e-9) ++dead_near_policy;
        rep.add_row({mu_k, mu_e, delta, ctrl == 0 ? "policy" : "optimal", status, raw.a_i, raw.a_m,
                     raw.t_m, achieved, err, is_dead, rom});
      }
      if (std::abs(delta) < 1e-9) {
        optimal_exact_max = std::max(optimal_exact_max, err_ctrl[1]);
        if (err_ctrl[1] > err_ctrl[0]) optimal_bounds_policy = false;
      }
    }
  }
  for (int ctrl = 0; ctrl < 2; ++ctrl) {
    nlohmann::json s = error_stats(errors[ctrl]);
    s["dead_zones"] = dead[ctrl];
    s["mean_error_band_0.05_0.08"] = mean(band[ctrl]);
    rep.summary[ctrl == 0 ? "policy" : "optimal"] = s;
  }
  rep.summary["policy"]["dead_zones_within_0.05"] = dead_near_policy;
  rep.summary["optimal_exact_max_error"] = optimal_exact_max;
  rep.summary["optimal_bounds_policy_at_exact_mu"] = optimal_bounds_policy;
  rep.summary["distance"] = d;
  rep.runtime_s = seconds_since(t0);
  return rep;
}

ExperimentReport experiment_distance_sweep(const Mlp& actor, const RunConfig& cfg) {
  const auto t0 = Clock::now();
  const HarnessConfig& h = cfg.harness;
  const Environment env(env_params(cfg));
  ExperimentReport rep;
  rep.id = "sweep_distance";
  rep.config = to_json(cfg);
  rep.columns = {"d_des", "mu_k", "mu_offset", "mu_e", "a_i", "a_m", "t_m",
                 "achieved", "error", "accuracy", "rom"};
  const FrictionModel truth = env.friction(h.mu_k);
  nlohmann::json per_offset = nlohmann::json::array();
  for (double offset : h.mu_offsets) {
    const double mu_e = std::clamp(h.mu_k + offset, 0.01, 0.6);
    std::vector<double> errors, accs;
    for (double d : h.distances) {
      EpisodeConfig ec;
      ec.d_des = d;
      ec.mu_k_true = h.mu_k;
      ec.mu_e_given = mu_e;
      const RawAction raw = policy_act(actor, env.initial_state(ec));
      const SlideResult res = simulate_closed_form(build_velocity_profile(validate_action(raw)), truth, 0.0);
      const double err = std::abs(res.delta_x_rel - d);
      const double acc = accuracy(res.delta_x_rel, d);
      errors.push_back(err);
      accs.push_back(acc);
      rep.add_row({d, h.mu_k, offset, mu_e, raw.a_i, raw.a_m, raw.t_m, res.delta_x_rel, err, acc, res.rom});
    }
    nlohmann::json s = error_stats(errors);
    s["mu_offset"] = offset;
    s["mean_accuracy"] = mean(accs);
    per_offset.push_back(s);
  }
  rep.summary["offsets"] = per_offset;
  rep.summary["mu_k"] = h.mu_k;
  rep.runtime_s = seconds_since(t0);
  return rep;
}

ExperimentReport experiment_estimator_accuracy(const Mlp& actor, const LstmNetwork* lstm,
                                               const RunConfig& cfg) {
  const auto t0 = Clock::now();
  const HarnessConfig& h = cfg.harness;
  const Environment env(env_params(cfg));
  ExperimentReport rep;
  rep.id = "estimators";
  rep.config = to_json(cfg);
  rep.columns = {"bin", "trial", "mu_k", "mu_e", "d_des", "achieved", "estimator",
                 "mu_e_prime", "correction", "branch", "low_confidence", "skipped"};
  std::mt19937_64 rng(cfg.seed ^ 0x5eed0e57ULL);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double rate = lstm ? lstm->shape().rate : cfg.estimation.lstm.rate;
  const double window = lstm ? lstm->shape().window : cfg.estimation.lstm.window;
  std::vector<EstimatorKind> kinds{EstimatorKind::Analytical};
  if (lstm) kinds.push_back(EstimatorKind::Lstm);
  nlohmann::json bins = nlohmann::json::array();
  std::vector<double> overall[3];
  int fallbacks = 0, skipped = 0;
  for (double bin : h.error_grid) {
    std::vector<double> per_kind[3];
    for (int trial = 0; trial < h.trials_per_bin; ++trial) {
      const double mu_k = h.estimator_mu_lo + u(rng) * (h.estimator_mu_hi - h.estimator_mu_lo);
      double mu_e = mu_k + (u(rng) < 0.5 ? -bin : bin);
      if (mu_e < 0.01) mu_e = mu_k + bin;
      const double d = cfg.environment.distance.lo +
                       u(rng) * (cfg.environment.distance.hi - cfg.environment.distance.lo);
      EpisodeConfig ec;
      ec.d_des = d;
      ec.mu_k_true = mu_k;
      ec.mu_e_given = mu_e;
      const RawAction raw = policy_act(actor, env.initial_state(ec));
      const SlideResult res = simulate_closed_form(build_velocity_profile(validate_action(raw)), env.friction(mu_k), 0.0);
      const EstimateInput input = make_estimate_input(res, rate, window);
      for (EstimatorKind kind : kinds) {
        double est = mu_e;
        std::string branch;
        bool low = false, skip = false;
        if (kind == EstimatorKind::Analytical) {
          const AnalyticalEstimate a = estimate_analytical(input, cfg.dynamics.g);
          est = a.mu;
          branch = std::string(to_string(a.branch));
          low = a.low_confidence;
          fallbacks += a.branch == EstimateBranch::Fallback;
        } else if (input.series.length() == 0) {
          skip = true;
          ++skipped;
        } else {
          est = estimate_lstm(*lstm, input.series);
        }
        const double corr = correction_metric(mu_k, mu_e, est);
        if (!skip) {
          per_kind[static_cast<int>(kind)].push_back(corr);
          overall[static_cast<int>(kind)].push_back(corr);
        }
        rep.add_row({bin, trial, mu_k, mu_e, d, res.delta_x_rel, std::string(to_string(kind)), est,
                     corr, branch, low, skip});
      }
    }
    nlohmann::json b{{"bin", bin}};
    for (EstimatorKind kind : kinds) {
      b[std::string(to_string(kind))] = mean(per_kind[static_cast<int>(kind)]);
    }
    bins.push_back(b);
  }
  rep.summary["bins"] = bins;
  for (EstimatorKind kind : kinds) {
    rep.summary["mean_correction"][std::string(to_string(kind))] = mean(overall[static_cast<int>(kind)]);
  }
  rep.summary["analytical_fallbacks"] = fallbacks;
  rep.summary["lstm_skipped"] = skipped;
  rep.runtime_s = seconds_since(t0);
  return rep;
}

ExperimentReport experiment_closed_loop(const Mlp& actor, const LstmNetwork* lstm,
                                        const RunConfig& cfg) {
  const auto t0 = Clock::now();
  const HarnessConfig& h = cfg.harness;
  ExperimentReport rep;
  rep.id = "closed_loop";
  rep.config = to_json(cfg);
  rep.columns = {"estimator", "episode", "step", "a_i", "a_m", "t_m", "mu_e_before",
                 "mu_e_after", "achieved", "remaining", "rom", "branch", "estimator_skipped",
                 "success"};
  EpisodeConfig ec;
  ec.d_des = h.closed_loop_distance;
  ec.mu_k_true = h.mu_k;
  ec.mu_e_given = h.closed_loop_mu_e;
  ec.success_tol = h.closed_loop_tol;
  ec.max_steps = cfg.environment.max_steps;
  std::vector<EstimatorKind> kinds{EstimatorKind::None, EstimatorKind::Analytical};
  if (lstm) kinds.push_back(EstimatorKind::Lstm);
  for (EstimatorKind kind : kinds) {
    ClosedLoopOptions opt{kind, lstm, {h.noise_x, h.noise_v}};
    std::vector<double> steps, second, final_err;
    int successes = 0;
    for (int ep = 0; ep < h.closed_loop_episodes; ++ep) {
      std::seed_seq seq{static_cast<std::uint64_t>(cfg.seed), static_cast<std::uint64_t>(ep)};
      std::mt19937_64 rng(seq);
      const EpisodeReport r = run_closed_loop(actor, ec, cfg.environment, opt, rng);
      for (const StepRecord& s : r.steps) {
        rep.add_row({std::string(to_string(kind)), ep, s.step, s.action.a_i, s.action.a_m,
                     s.action.t_m, s.mu_e_before, s.mu_e_after, s.achieved, s.remaining, s.rom,
                     s.branch, s.estimator_skipped, r.success && s.step == static_cast<int>(r.steps.size())});
      }
      steps.push_back(r.steps_to_success(ec.max_steps));
      second.push_back(r.error_after(2));
      final_err.push_back(r.final_error);
      successes += r.success;
    }
    rep.summary[std::string(to_string(kind))] = {
        {"median_steps_to_success", median(steps)},
        {"median_second_step_error", median(second)},
        {"median_final_error", median(final_err)},
        {"success_rate", static_cast<double>(successes) / h.closed_loop_episodes}};
  }
  rep.summary["episodes"] = h.closed_loop_episodes;
  rep.runtime_s = seconds_since(t0);
  return rep;
}

}  // namespace slide
