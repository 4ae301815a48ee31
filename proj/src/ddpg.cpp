#include "slide/ddpg.hpp"

#include <algorithm>
#include <cmath>

#include "slide/error.hpp"

namespace slide {
namespace {

constexpr double kSquashLimit = 1.0 - 1e-6;

std::vector<int> layer_sizes(int in, const std::vector<int>& hidden, int out) {
  std::vector<int> sizes{in};
  sizes.insert(sizes.end(), hidden.begin(), hidden.end());
  sizes.push_back(out);
  return sizes;
}

Matrix stack(const Matrix& top, const Matrix& bottom) {
  Matrix out(top.rows() + bottom.rows(), top.cols());
  out << top, bottom;
  return out;
}

}  // namespace

void DdpgConfig::validate() const {
  if (!(gamma >= 0.0 && gamma <= 1.0)) throw SlideError(ErrorCode::InvalidConfig, "gamma must be in [0, 1]");
  if (!(tau > 0.0 && tau <= 1.0)) throw SlideError(ErrorCode::InvalidConfig, "tau must be in (0, 1]");
  if (batch_size <= 0 || buffer_capacity < batch_size) {
    throw SlideError(ErrorCode::InvalidConfig, "buffer_capacity must be >= batch_size > 0");
  }
}

RawAction denormalize_action(const ActionVec& u, double d_remaining) {
  auto unit = [](double x) { return 0.5 * (std::clamp(x, -kSquashLimit, kSquashLimit) + 1.0); };
  const double dir = d_remaining >= 0.0 ? 1.0 : -1.0;
  return {dir * kMaxAccel * unit(u[0]), -dir * kMaxAccel * unit(u[1]), kMaxDuration * unit(u[2])};
}

TransitionBatch TransitionBatch::from(std::span<const Transition> transitions) {
  const auto n = static_cast<Eigen::Index>(transitions.size());
  TransitionBatch b{Matrix(kStateDim, n), Matrix(kActionDim, n), Vector(n), Matrix(kStateDim, n),
                    Vector(n)};
  for (Eigen::Index j = 0; j < n; ++j) {
    const Transition& t = transitions[static_cast<std::size_t>(j)];
    for (int k = 0; k < kStateDim; ++k) {
      b.states(k, j) = t.state[k];
      b.next_states(k, j) = t.next_state[k];
    }
    for (int k = 0; k < kActionDim; ++k) b.actions(k, j) = t.action[k];
    b.rewards(j) = t.reward;
    b.done(j) = t.done ? 1.0 : 0.0;
  }
  return b;
}

Mlp make_actor(const DdpgConfig& cfg) {
  return Mlp(layer_sizes(kStateDim, cfg.actor_hidden, kActionDim), Activation::Relu,
             Activation::Tanh, "actor");
}

Mlp make_critic(const DdpgConfig& cfg) {
  return Mlp(layer_sizes(kStateDim + kActionDim, cfg.critic_hidden, 1), Activation::Relu,
             Activation::Identity, "critic");
}

ActionVec policy_action(const Mlp& actor, const StateVec& state, double sigma,
                        std::mt19937_64* rng) {
  Mlp::Cache cache;
  actor.forward(Eigen::Map<const Matrix>(state.data(), kStateDim, 1), &cache);
  const Matrix& pre = cache.pre.back();
  ActionVec u{};
  std::normal_distribution<double> noise(0.0, 1.0);
  for (int k = 0; k < kActionDim; ++k) {
    double z = pre(k, 0);
    if (sigma > 0.0 && rng) z += sigma * noise(*rng);
    u[k] = std::clamp(std::tanh(z), -kSquashLimit, kSquashLimit);
  }
  return u;
}

RawAction select_action(const Mlp& actor, const StateVec& state, double d_remaining,
                        double sigma, std::mt19937_64* rng) {
  return denormalize_action(policy_action(actor, state, sigma, rng), d_remaining);
}

double critic_update(const TransitionBatch& batch, const Mlp& actor_target, Mlp& critic,
                     const Mlp& critic_target, double gamma, AdamState& opt) {
  const Eigen::Index n = batch.size();
  if (n == 0) throw SlideError(ErrorCode::InvalidArgument, "empty batch");
  const Matrix next_actions = actor_target.forward(batch.next_states);
  const Matrix q_next = critic_target.forward(stack(batch.next_states, next_actions));
  const Vector y =
      batch.rewards.array() + gamma * (1.0 - batch.done.array()) * q_next.row(0).transpose().array();

  Mlp::Cache cache;
  const Matrix q = critic.forward(stack(batch.states, batch.actions), &cache);
  const Vector diff = q.row(0).transpose() - y;
  const double loss = diff.squaredNorm() / static_cast<double>(n);

  ParamVector grad(critic.params().size(), 0.0);
  const Matrix dq = (2.0 / static_cast<double>(n)) * diff.transpose();
  critic.backward(cache, dq, grad);
  adam_step(critic.params(), grad, opt);
  return loss;
}

double actor_update(const TransitionBatch& batch, Mlp& actor, const Mlp& critic, AdamState& opt) {
  const Eigen::Index n = batch.size();
  if (n == 0) throw SlideError(ErrorCode::InvalidArgument, "empty batch");
  Mlp::Cache actor_cache, critic_cache;
  const Matrix actions = actor.forward(batch.states, &actor_cache);
  const Matrix q = critic.forward(stack(batch.states, actions), &critic_cache);
  const double objective = q.mean();

  // Descend on -J: dL/dQ = -1/n per sample.
  ParamVector critic_scratch(critic.params().size(), 0.0);
  const Matrix dq = Matrix::Constant(1, n, -1.0 / static_cast<double>(n));
  const Matrix d_input = critic.backward(critic_cache, dq, critic_scratch);
  const Matrix d_actions = d_input.bottomRows(kActionDim);

  ParamVector grad(actor.params().size(), 0.0);
  actor.backward(actor_cache, d_actions, grad);
  adam_step(actor.params(), grad, opt);
  return objective;
}

DdpgAgent::DdpgAgent(const DdpgConfig& cfg)
    : cfg_(cfg), actor_(make_actor(cfg)), critic_(make_critic(cfg)) {
  cfg_.validate();
  std::mt19937_64 rng(cfg.seed);
  actor_.init_fan_in(rng, cfg.final_layer_scale);
  critic_.init_fan_in(rng, cfg.final_layer_scale);
  actor_target_ = actor_;
  critic_target_ = critic_;
  actor_opt_ = AdamState(actor_.params().size(), cfg.actor_lr);
  critic_opt_ = AdamState(critic_.params().size(), cfg.critic_lr);
}

DdpgAgent::UpdateStats DdpgAgent::update(std::span<const Transition> transitions) {
  const auto batch = TransitionBatch::from(transitions);
  UpdateStats stats;
  stats.critic_loss = critic_update(batch, actor_target_, critic_, critic_target_, cfg_.gamma, critic_opt_);
  stats.actor_objective = actor_update(batch, actor_, critic_, actor_opt_);
  soft_update(critic_target_.params(), critic_.params(), cfg_.tau);
  soft_update(actor_target_.params(), actor_.params(), cfg_.tau);
  return stats;
}

void DdpgAgent::save(const std::filesystem::path& manifest, const nlohmann::json& meta) const {
  TensorFile file;
  actor_.export_to(file);
  critic_.export_to(file);
  TensorFile targets;
  actor_target_.export_to(targets);
  critic_target_.export_to(targets);
  for (auto& a : targets.arrays) file.add("target/" + a.name, a.shape, std::move(a.data));
  file.meta = meta;
  file.meta["actor_sizes"] = actor_.sizes();
  file.meta["critic_sizes"] = critic_.sizes();
  file.meta["actor_output"] = to_string(actor_.output_activation());
  file.save(manifest);
}

void DdpgAgent::load(const std::filesystem::path& manifest) {
  const TensorFile file = TensorFile::load(manifest);
  actor_.import_from(file);
  critic_.import_from(file);
  TensorFile targets;
  for (const auto& a : file.arrays) {
    if (a.name.rfind("target/", 0) == 0) targets.arrays.push_back({a.name.substr(7), a.shape, a.data});
  }
  if (targets.arrays.empty()) {
    actor_target_ = actor_;
    critic_target_ = critic_;
  } else {
    actor_target_.import_from(targets);
    critic_target_.import_from(targets);
  }
}

Mlp load_actor(const std::filesystem::path& manifest) {
  const TensorFile file = TensorFile::load(manifest);
  if (!file.meta.contains("actor_sizes")) {
    throw SlideError(ErrorCode::Io, manifest.string() + " is not a policy checkpoint");
  }
  Mlp actor(file.meta.at("actor_sizes").get<std::vector<int>>(), Activation::Relu,
            Activation::Tanh, "actor");
  actor.import_from(file);
  return actor;
}

}  // namespace slide
