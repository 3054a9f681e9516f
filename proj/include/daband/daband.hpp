#pragma once

// Neural-LinUCB and its domain-adaptive extension: LinUCB over a learned,
// unit-normalized encoding, with the encoder periodically refit on buffered
// source rounds and (for the adaptive agent) pushed to confuse a domain
// discriminator trained on unlabeled target contexts.

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "daband/env.hpp"
#include "daband/linucb.hpp"
#include "daband/metrics.hpp"
#include "daband/mlp.hpp"
#include "json.hpp"

namespace daband {

struct LossFlags {
  bool use_regression_error = true;
  bool use_predicted_reward = true;

  friend bool operator==(const LossFlags&, const LossFlags&) = default;
};

struct AgentConfig {
  double alpha = 0.05;
  std::optional<double> alpha_eval;  // zero-shot exploration weight; defaults to alpha
  double gamma = 1.0;
  std::size_t episode_len = 64;  // H
  double lambda = 5.0;
  SgdConfig sgd;
  std::optional<double> discriminator_lr;  // defaults to sgd.learning_rate
  LossFlags flags;
  std::vector<std::size_t> encoder_hidden{64, 32};
  Activation encoder_activation = Activation::Tanh;
  std::size_t discriminator_hidden = 32;
  std::size_t latent_dim = 10;
  std::uint64_t seed = 0;

  void validate() const;
  double eval_alpha() const { return alpha_eval.value_or(alpha); }
  std::size_t inner_steps() const { return sgd.inner_steps.value_or(episode_len); }
  double disc_lr() const { return discriminator_lr.value_or(sgd.learning_rate); }
};

nlohmann::json to_json(const AgentConfig& cfg);
AgentConfig agent_config_from_json(const nlohmann::json& j);

/// One source round as stored for the next optimization block.
struct BufferedRound {
  Round round;
  std::size_t chosen_arm = 0;
  double reward = 0.0;
  std::vector<double> rewards_all;  // per-arm rewards of the round
};

struct EpisodeBuffer {
  std::vector<BufferedRound> source;
  std::vector<Round> target;  // contexts only; rewards are never read

  std::size_t size() const noexcept { return source.size(); }
  void clear() {
    source.clear();
    target.clear();
  }
};

struct DABandAgent {
  MlpParams encoder;
  MlpParams discriminator;
  LinUcbState linucb;
  AgentConfig config;
  EpisodeBuffer buffer;
};

/// Fresh agent for `input_dim`-dimensional contexts. Encoder and
/// discriminator initializations come from separate seed streams.
DABandAgent make_agent(std::size_t input_dim, const AgentConfig& cfg);

struct LossBreakdown {
  double l_rs = 0.0;
  double l_eps = 0.0;
  double l_reg = 0.0;
  double l_div = 0.0;
  double lambda = 0.0;
  double total = 0.0;
};

/// Σ_a (θ̂ᵀφ̂(x_a) − r_a)².
double loss_source_regret(const Vector& theta_hat, const MlpParams& encoder, const Round& round,
                          std::span<const double> rewards_all_arms);
/// |r − θ̂ᵀφ̂(x)|.
double loss_regression_error(const Vector& theta_hat, const MlpParams& encoder, const Vector& chosen_context,
                             double observed_reward);
/// |θ̂ᵀφ̂(x)|.
double loss_predicted_reward(const Vector& theta_hat, const MlpParams& encoder, const Vector& chosen_context);
/// Balanced cross-entropy of g∘φ̂: source labeled 0, target 1, each domain
/// averaged over its batch and weighted ½.
double loss_divergence(const MlpParams& discriminator, const MlpParams& encoder, std::span<const Vector> source_batch,
                       std::span<const Vector> target_batch);

/// Binary cross-entropy from a logit, computed without cancellation.
double cross_entropy_from_logit(double logit, bool target_label);

/// Episode objective: per-round L_RS (+ L_eps, L_reg when enabled) summed over
/// the buffer, plus λ·l_div where l_div is the buffer's round count times the
/// divergence loss over all buffered arm contexts.
LossBreakdown total_loss(const DABandAgent& agent, const EpisodeBuffer& buffer);

/// One discriminator descent step on a divergence batch (raw contexts).
void discriminator_step(DABandAgent& agent, std::span<const Vector> source_contexts,
                        std::span<const Vector> target_contexts);

/// One encoder descent step on buffered round `source` (and `target` when
/// λ > 0): L_RS + [L_eps] + [L_reg] − λ·L_div.
void encoder_step(DABandAgent& agent, const BufferedRound& source, const Round* target);

/// Gradient of the encoder objective used by encoder_step.
GradientBundle encoder_gradient(const DABandAgent& agent, const BufferedRound& source, const Round* target);

struct TrainResult {
  DABandAgent agent;
  RegretTrace trace;
  std::vector<LossBreakdown> episodes;  // logged before each optimization block
};

/// Algorithm 1 over the first `n_rounds` rounds of each stream. Target
/// rewards are never read.
TrainResult run_daband(std::span<const Round> source, std::span<const Round> target, const AgentConfig& cfg,
                       std::size_t n_rounds);

/// Backbone: the same loop with λ = 0, only L_RS, and no target data.
TrainResult run_nlinucb(std::span<const Round> source, const AgentConfig& cfg, std::size_t n_rounds);
/// Backbone loop starting from a given agent (e.g. a hand-set encoder).
TrainResult run_nlinucb(DABandAgent initial, std::span<const Round> source, std::size_t n_rounds);

/// argmax_a θ̂ᵀφ̂(x_a) + α_eval·‖φ̂(x_a)‖_{A⁻¹}; ties go to the lowest index.
std::size_t zero_shot_policy(const DABandAgent& agent, const Round& target_round);

/// Fixed-policy evaluation on `rounds` scored against their optimal arms.
RegretTrace evaluate_zero_shot(const DABandAgent& agent, std::span<const Round> rounds);

/// Resumes the loop on target rounds with feedback; encoder updates use L_RS
/// only and the discriminator is idle.
RegretTrace continued_training(const DABandAgent& agent, std::span<const Round> target,
                               std::vector<LossBreakdown>* episodes = nullptr);

nlohmann::json agent_to_json(const DABandAgent& agent);
DABandAgent agent_from_json(const nlohmann::json& j);

}  // namespace daband
