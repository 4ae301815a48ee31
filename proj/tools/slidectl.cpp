#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "slide/config.hpp"
#include "slide/ddpg.hpp"
#include "slide/dynamics.hpp"
#include "slide/error.hpp"
#include "slide/estimation.hpp"
#include "slide/harness.hpp"
#include "slide/lstm.hpp"
#include "slide/trainer.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace slide;

namespace {

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
};

RunConfig resolve_config(const Common& c) {
  RunConfig cfg = c.config.empty() ? config_from_json(json::object()) : load_config(c.config);
  if (c.seed) {
    cfg.seed = *c.seed;
    cfg.resolve();
  }
  if (!c.out.empty()) cfg.output_dir = c.out;
  return cfg;
}

void emit(const json& j) { std::cout << j.dump(2) << std::endl; }

int fail(std::string_view code, const std::string& message, int status) {
  std::cout << json{{"error", code}, {"message", message}}.dump() << std::endl;
  return status;
}

void add_common(CLI::App* cmd, Common& c, bool with_out = true) {
  cmd->add_option("--config", c.config, "Run config (JSON)");
  cmd->add_option("--seed", c.seed, "Seed overriding the config");
  if (with_out) cmd->add_option("--out", c.out, "Output directory overriding the config");
}

int train_ddpg(const Common& c, const std::string& resume) {
  RunConfig cfg = resolve_config(c);
  TrainOptions opt;
  opt.ddpg = cfg.agent;
  opt.env = cfg.environment;
  opt.total_steps = cfg.training.total_steps;
  opt.updates_per_step = cfg.training.updates_per_step;
  opt.stage_step_budget = cfg.training.stage_step_budget;
  opt.start_stage = stage_from_string(cfg.training.start_stage);
  json resume_info = nullptr;
  if (!resume.empty()) {
    const TensorFile head = TensorFile::load(resume);
    if (head.meta.contains("stage")) opt.start_stage = stage_from_string(head.meta["stage"].get<std::string>());
    resume_info = {{"checkpoint", resume}, {"hash", git_blob_hash(payload_path(resume))}};
  }
  DdpgTrainer trainer(opt);
  if (!resume.empty()) trainer.agent().load(resume);

  const fs::path dir = cfg.output_dir;
  fs::create_directories(dir);
  std::ofstream log(dir / "train_log.jsonl", std::ios::binary);
  if (!log) throw SlideError(ErrorCode::Io, "cannot write " + (dir / "train_log.jsonl").string());
  const json resolved = to_json(cfg);
  long steps = 0, next_ckpt = cfg.training.checkpoint_every;
  const auto meta = [&](Stage stage) {
    return json{{"stage", to_string(stage)}, {"env_steps", steps}, {"config", resolved}, {"resumed_from", resume_info}};
  };
  const TrainSummary summary = trainer.run(&log, [&](const EpisodeRecord& rec) {
    steps += rec.steps;
    if (cfg.training.checkpoint_every > 0 && steps >= next_ckpt) {
      trainer.agent().save(dir / ("agent_step" + std::to_string(next_ckpt) + ".json"), meta(trainer.stage()));
      next_ckpt += cfg.training.checkpoint_every;
    }
  });
  const fs::path ckpt = dir / "agent.json";
  trainer.agent().save(ckpt, meta(summary.final_stage));
  json changes = json::array();
  for (const auto& ch : summary.stage_changes) {
    changes.push_back({{"episode", ch.episode}, {"env_step", ch.env_step}, {"stage", to_string(ch.stage)}});
  }
  emit({{"checkpoint", ckpt.string()},
        {"checkpoint_hash", git_blob_hash(payload_path(ckpt))},
        {"episodes", summary.episodes},
        {"env_steps", summary.env_steps},
        {"final_stage", to_string(summary.final_stage)},
        {"stage_changes", changes}});
  return 0;
}

int gen_dataset_cmd(const Common& c, std::size_t n, const std::string& out) {
  const RunConfig cfg = resolve_config(c);
  const FrictionDataset data = gen_dataset(n, cfg.seed, cfg.estimation.dataset);
  const fs::path path = out;
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  data.save(path);
  emit({{"dataset", path.string()},
        {"samples", data.size()},
        {"length", data.length},
        {"rate", data.rate},
        {"slip_fraction", slip_fraction(data)},
        {"hash", git_blob_hash(payload_path(path))}});
  return 0;
}

int train_lstm_cmd(const Common& c, const std::string& dataset_path) {
  const RunConfig cfg = resolve_config(c);
  const FrictionDataset data = FrictionDataset::load(dataset_path);
  if (data.length != cfg.estimation.lstm.length()) {
    throw SlideError(ErrorCode::DimensionMismatch, "dataset series length " + std::to_string(data.length) +
                                                       " does not match lstm rate*window");
  }
  const DatasetSplit split = split_dataset(data.size(), cfg.seed, cfg.estimation.split_train, cfg.estimation.split_val);
  LstmNetwork net(cfg.estimation.lstm);
  std::mt19937_64 rng(cfg.seed);
  double label_mean = 0.0;
  for (std::size_t k : split.train) label_mean += data.labels[k];
  net.init(rng, split.train.empty() ? 0.0 : label_mean / static_cast<double>(split.train.size()));

  const fs::path dir = cfg.output_dir;
  fs::create_directories(dir);
  std::ofstream log(dir / "lstm_log.jsonl", std::ios::binary);
  const auto history = lstm_train(net, data, split, cfg.estimation.train, [&](const EpochMetrics& m) {
    log << json{{"epoch", m.epoch}, {"train_mae", m.train_mae}, {"val_mae", m.val_mae}}.dump() << std::endl;
  });
  const fs::path ckpt = dir / "lstm.json";
  net.save(ckpt, {{"dataset", dataset_path},
                  {"dataset_hash", git_blob_hash(payload_path(dataset_path))},
                  {"config", to_json(cfg)}});
  emit({{"checkpoint", ckpt.string()},
        {"checkpoint_hash", git_blob_hash(payload_path(ckpt))},
        {"epochs", history.size()},
        {"val_mae", history.empty() ? 0.0 : history.back().val_mae},
        {"test_mae", evaluate_mae(net, data, split.test)}});
  return 0;
}

int simulate_cmd(const Common& c, double a_i, double a_m, double t_m, double mu, bool oracle,
                 const std::string& trace_path, const std::string& events_path) {
  const RunConfig cfg = resolve_config(c);
  const ManeuverAction action = validate_action({a_i, a_m, t_m});
  const FrictionModel f = FrictionModel::coulomb(mu, cfg.dynamics.static_ratio, cfg.dynamics.g);
  const VelocityProfile profile = build_velocity_profile(action);
  const SlideResult res = oracle ? simulate_numeric(profile, f, cfg.dynamics.numeric_dt, cfg.dynamics.trace_rate)
                                 : simulate_closed_form(profile, f, cfg.dynamics.trace_rate);
  std::ofstream trace(trace_path, std::ios::binary);
  if (!trace) throw SlideError(ErrorCode::Io, "cannot write " + trace_path);
  write_csv(trace, res.trace);
  if (!events_path.empty()) {
    std::ofstream ev(events_path, std::ios::binary);
    if (!ev) throw SlideError(ErrorCode::Io, "cannot write " + events_path);
    write_events_jsonl(ev, res.events);
  }
  json events = json::array();
  for (const auto& e : res.events) events.push_back({{"t", e.t}, {"kind", to_string(e.kind)}});
  emit({{"method", oracle ? "numeric" : "closed-form"},
        {"a_i", action.a_i()},
        {"a_m", action.a_m()},
        {"t_m", action.t_m()},
        {"t_i", action.t_i()},
        {"mu_k", mu},
        {"delta_x_rel", res.delta_x_rel},
        {"rom", res.rom},
        {"duration", res.duration},
        {"events", events},
        {"trace", trace_path}});
  return 0;
}

int estimate_cmd(const Common& c, const std::string& trace_path, const std::string& method,
                 const std::string& ckpt) {
  const RunConfig cfg = resolve_config(c);
  std::ifstream in(trace_path);
  if (!in) throw SlideError(ErrorCode::Io, "cannot open " + trace_path);
  const RelativeTrace trace = read_trace_csv(in);
  const ManeuverAction action = infer_action(trace);
  json out{{"trace", trace_path}, {"method", method}, {"a_i", action.a_i()}, {"a_m", action.a_m()}, {"t_m", action.t_m()}};
  if (method == "analytical") {
    const AnalyticalEstimate est = estimate_analytical(make_estimate_input(trace, action), cfg.dynamics.g);
    out["mu"] = est.mu;
    out["branch"] = to_string(est.branch);
    out["low_confidence"] = est.low_confidence;
  } else if (method == "lstm") {
    if (ckpt.empty()) throw SlideError(ErrorCode::InvalidArgument, "--ckpt is required for the lstm method");
    const LstmNetwork net = LstmNetwork::load(ckpt);
    const EstimateInput input = make_estimate_input(trace, action, net.shape().rate, net.shape().window);
    if (input.series.length() == 0) {
      throw SlideError(ErrorCode::DimensionMismatch, "slide outlasts the lstm input window");
    }
    out["mu"] = estimate_lstm(net, input.series);
    out["checkpoint_hash"] = git_blob_hash(payload_path(ckpt));
  } else {
    throw SlideError(ErrorCode::InvalidArgument, "unknown method '" + method + "'");
  }
  emit(out);
  return 0;
}

int eval_cmd(const Common& c, const std::string& kind, const std::string& policy_path,
             const std::string& lstm_path) {
  const RunConfig cfg = resolve_config(c);
  const Mlp actor = load_actor(policy_path);
  std::optional<LstmNetwork> lstm;
  if (!lstm_path.empty()) lstm = LstmNetwork::load(lstm_path);
  const LstmNetwork* net = lstm ? &*lstm : nullptr;
  ExperimentReport rep;
  if (kind == "sweep-mu") {
    rep = experiment_mu_sweep(actor, cfg);
  } else if (kind == "sweep-distance") {
    rep = experiment_distance_sweep(actor, cfg);
  } else if (kind == "estimators") {
    rep = experiment_estimator_accuracy(actor, net, cfg);
  } else {
    rep = experiment_closed_loop(actor, net, cfg);
  }
  add_checkpoint(rep, "policy", policy_path);
  if (net) add_checkpoint(rep, "lstm", lstm_path);
  rep.write(cfg.output_dir);
  emit({{"experiment", rep.id},
        {"csv", (fs::path(cfg.output_dir) / (rep.id + ".csv")).string()},
        {"json", (fs::path(cfg.output_dir) / (rep.id + ".json")).string()},
        {"summary", rep.summary}});
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Sliding-manipulation simulator, agents and estimators"};
  app.require_subcommand(0, 1);
  bool print_config = false;
  std::string print_config_path;
  app.add_flag("--print-config", print_config, "Print the resolved configuration and exit");
  app.add_option("--config", print_config_path, "Config to resolve with --print-config");

  Common c;
  std::string resume, dataset, out_path, trace_path = "trace.csv", events_path, method, ckpt, policy, lstm;
  std::size_t n = 0;
  double a_i = 0, a_m = 0, t_m = 0, mu = 0;
  bool oracle = false;

  auto* train = app.add_subcommand("train-ddpg", "Run the DDPG curriculum");
  add_common(train, c);
  train->add_option("--resume", resume, "Checkpoint to continue from")->check(CLI::ExistingFile);

  auto* gen = app.add_subcommand("gen-dataset", "Simulate a friction dataset");
  add_common(gen, c, false);
  gen->add_option("--n", n, "Number of samples")->required()->check(CLI::PositiveNumber);
  gen->add_option("--out", out_path, "Dataset manifest path")->required();

  auto* tl = app.add_subcommand("train-lstm", "Train the recurrent friction estimator");
  add_common(tl, c);
  tl->add_option("--dataset", dataset, "Dataset manifest")->required()->check(CLI::ExistingFile);

  auto* sim = app.add_subcommand("simulate", "Simulate one maneuver");
  add_common(sim, c, false);
  sim->add_option("--a-i", a_i, "Initial acceleration, m/s^2")->required();
  sim->add_option("--a-m", a_m, "Middle acceleration, m/s^2")->required();
  sim->add_option("--t-m", t_m, "Middle duration, s")->required();
  sim->add_option("--mu", mu, "Kinetic friction coefficient")->required();
  sim->add_flag("--oracle", oracle, "Use the fixed-step integrator");
  sim->add_option("--trace", trace_path, "Trace CSV path");
  sim->add_option("--events", events_path, "Event JSONL path");

  auto* est = app.add_subcommand("estimate", "Estimate friction from a trace CSV");
  add_common(est, c, false);
  est->add_option("--trace", trace_path, "Trace CSV")->required()->check(CLI::ExistingFile);
  est->add_option("--method", method, "analytical or lstm")->required()->check(CLI::IsMember({"analytical", "lstm"}));
  est->add_option("--ckpt", ckpt, "LSTM checkpoint");

  auto* ev = app.add_subcommand("eval", "Run an experiment and write a report");
  std::string kind;
  ev->add_option("kind", kind, "sweep-mu, sweep-distance, estimators or closed-loop")
      ->required()
      ->check(CLI::IsMember({"sweep-mu", "sweep-distance", "estimators", "closed-loop"}));
  add_common(ev, c);
  ev->add_option("--policy", policy, "Actor checkpoint")->required()->check(CLI::ExistingFile);
  ev->add_option("--lstm", lstm, "LSTM checkpoint")->check(CLI::ExistingFile);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return fail("usage", e.what(), 1);
  }

  try {
    if (print_config) {
      Common pc;
      pc.config = print_config_path;
      emit(to_json(resolve_config(pc)));
      return 0;
    }
    if (*train) return train_ddpg(c, resume);
    if (*gen) return gen_dataset_cmd(c, n, out_path);
    if (*tl) return train_lstm_cmd(c, dataset);
    if (*sim) return simulate_cmd(c, a_i, a_m, t_m, mu, oracle, trace_path, events_path);
    if (*est) return estimate_cmd(c, trace_path, method, ckpt);
    if (*ev) return eval_cmd(c, kind, policy, lstm);
    std::cout << app.help();
    return 1;
  } catch (const SlideError& e) {
    return fail(to_string(e.code()), e.what(), 2);
  } catch (const std::exception& e) {
    return fail("internal", e.what(), 3);
  }
}
