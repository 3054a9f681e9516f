#include "daband/daband.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "daband/kernels.hpp"

namespace daband {

namespace {

double sign(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

double clamp_logit(double f) { return std::clamp(f, -kLogitClamp, kLogitClamp); }

bool clamped(double f) { return f < -kLogitClamp || f > kLogitClamp; }

// dCE/dlogit; flipping the label and negating the logit negates it exactly.
double ce_gradient(double logit, bool target_label) {
  return target_label ? -sigmoid(-logit) : sigmoid(logit);
}

void check_theta(const Vector& theta_hat, const MlpParams& encoder) {
  if (theta_hat.dim() != encoder.output_dim())
    fail(ErrorKind::DimensionError, "theta dim " + std::to_string(theta_hat.dim()) + " != encoder output dim " +
                                        std::to_string(encoder.output_dim()));
}

// dL_div/dφ for each encoding, scaled by `weight`, via backprop through g.
void divergence_input_gradients(const MlpParams& discriminator, std::span<const Vector> encodings,
                                std::span<Vector> grads, bool target_label, double weight, double& loss_sum) {
  GradientBundle scratch = GradientBundle::zeros_like(discriminator);
  for (std::size_t i = 0; i < encodings.size(); ++i) {
    ForwardCache cache;
    const double f = forward(discriminator, encodings[i], &cache)[0];
    loss_sum += cross_entropy_from_logit(clamp_logit(f), target_label);
    if (clamped(f)) continue;
    const Vector g_in = backprop(discriminator, cache, Vector{weight * ce_gradient(f, target_label)}, scratch);
    grads[i] += g_in;
  }
}

std::vector<Vector> all_contexts(std::span<const Round> rounds) {
  std::vector<Vector> out;
  for (const Round& r : rounds)
    for (const Vector& x : r.contexts) out.push_back(x);
  return out;
}

}  // namespace

void AgentConfig::validate() const {
  require(std::isfinite(alpha) && alpha >= 0.0, ErrorKind::ConfigError, "alpha must be >= 0");
  require(!alpha_eval || (std::isfinite(*alpha_eval) && *alpha_eval >= 0.0), ErrorKind::ConfigError,
          "alpha_eval must be >= 0");
  require(std::isfinite(gamma) && gamma > 0.0, ErrorKind::ConfigError, "gamma must be > 0");
  require(episode_len >= 1, ErrorKind::ConfigError, "H must be >= 1");
  require(std::isfinite(lambda) && lambda >= 0.0, ErrorKind::ConfigError, "lambda must be >= 0");
  require(!discriminator_lr || (std::isfinite(*discriminator_lr) && *discriminator_lr > 0.0), ErrorKind::ConfigError,
          "discriminator_lr must be > 0");
  require(latent_dim >= 1, ErrorKind::ConfigError, "latent_dim must be >= 1");
  require(discriminator_hidden >= 1, ErrorKind::ConfigError, "discriminator_hidden must be >= 1");
  for (std::size_t w : encoder_hidden) require(w >= 1, ErrorKind::ConfigError, "encoder widths must be >= 1");
  sgd.validate();
}

nlohmann::json to_json(const AgentConfig& cfg) {
  nlohmann::json j;
  j["alpha"] = cfg.alpha;
  j["alpha_eval"] = cfg.alpha_eval ? nlohmann::json(*cfg.alpha_eval) : nlohmann::json(nullptr);
  j["gamma"] = cfg.gamma;
  j["H"] = cfg.episode_len;
  j["lambda"] = cfg.lambda;
  j["sgd"] = {{"lr", cfg.sgd.learning_rate},
              {"inner_steps", cfg.sgd.inner_steps ? nlohmann::json(*cfg.sgd.inner_steps) : nlohmann::json(nullptr)}};
  j["discriminator_lr"] = cfg.discriminator_lr ? nlohmann::json(*cfg.discriminator_lr) : nlohmann::json(nullptr);
  j["ablation"] = {{"use_regression_error", cfg.flags.use_regression_error},
                   {"use_predicted_reward", cfg.flags.use_predicted_reward}};
  j["encoder_hidden"] = cfg.encoder_hidden;
  j["encoder_activation"] = cfg.encoder_activation == Activation::Tanh ? "tanh" : "relu";
  j["discriminator_hidden"] = cfg.discriminator_hidden;
  j["latent_dim"] = cfg.latent_dim;
  j["seed"] = cfg.seed;
  return j;
}

AgentConfig agent_config_from_json(const nlohmann::json& j) {
  try {
    AgentConfig c;
    c.alpha = j.at("alpha").get<double>();
    if (!j.at("alpha_eval").is_null()) c.alpha_eval = j.at("alpha_eval").get<double>();
    c.gamma = j.at("gamma").get<double>();
    c.episode_len = j.at("H").get<std::size_t>();
    c.lambda = j.at("lambda").get<double>();
    c.sgd.learning_rate = j.at("sgd").at("lr").get<double>();
    if (!j.at("sgd").at("inner_steps").is_null()) c.sgd.inner_steps = j.at("sgd").at("inner_steps").get<std::size_t>();
    if (j.contains("discriminator_lr") && !j.at("discriminator_lr").is_null())
      c.discriminator_lr = j.at("discriminator_lr").get<double>();
    c.flags.use_regression_error = j.at("ablation").at("use_regression_error").get<bool>();
    c.flags.use_predicted_reward = j.at("ablation").at("use_predicted_reward").get<bool>();
    c.encoder_hidden = j.at("encoder_hidden").get<std::vector<std::size_t>>();
    const std::string act = j.at("encoder_activation").get<std::string>();
    require(act == "tanh" || act == "relu", ErrorKind::FormatError, "unknown activation '" + act + "'");
    c.encoder_activation = act == "tanh" ? Activation::Tanh : Activation::Relu;
    c.discriminator_hidden = j.at("discriminator_hidden").get<std::size_t>();
    c.latent_dim = j.at("latent_dim").get<std::size_t>();
    c.seed = j.at("seed").get<std::uint64_t>();
    c.validate();
    return c;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::FormatError, std::string("malformed agent config: ") + e.what());
  }
}

DABandAgent make_agent(std::size_t input_dim, const AgentConfig& cfg) {
  cfg.validate();
  DABandAgent agent;
  agent.config = cfg;
  std::vector<std::size_t> dims{input_dim};
  dims.insert(dims.end(), cfg.encoder_hidden.begin(), cfg.encoder_hidden.end());
  dims.push_back(cfg.latent_dim);
  Rng enc_rng(derive_seed(cfg.seed, streams::kEncoderInit));
  agent.encoder = MlpParams::glorot(dims, cfg.encoder_activation, enc_rng);
  Rng disc_rng(derive_seed(cfg.seed, streams::kDiscriminatorInit));
  agent.discriminator = MlpParams::glorot({cfg.latent_dim, cfg.discriminator_hidden, 1}, Activation::Tanh, disc_rng);
  agent.linucb = LinUcbState::fresh(cfg.latent_dim, cfg.alpha, cfg.gamma);
  return agent;
}

double cross_entropy_from_logit(double logit, bool target_label) {
  // label 1: −log σ(f) = softplus(−f); label 0: −log(1 − σ(f)) = softplus(f)
  const double z = target_label ? -logit : logit;
  return z > 0.0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z));
}

double loss_source_regret(const Vector& theta_hat, const MlpParams& encoder, const Round& round,
                          std::span<const double> rewards_all_arms) {
  check_theta(theta_hat, encoder);
  if (rewards_all_arms.size() != round.arms())
    fail(ErrorKind::DimensionError, "reward count " + std::to_string(rewards_all_arms.size()) + " != arm count " + std::to_string(round.arms()));
  double total = 0.0;
  for (std::size_t a = 0; a < round.arms(); ++a) {
    const double e = dot(theta_hat, encode(encoder, round.contexts[a])) - rewards_all_arms[a];
    total += e * e;
  }
  return total;
}

double loss_regression_error(const Vector& theta_hat, const MlpParams& encoder, const Vector& chosen_context,
                             double observed_reward) {
  check_theta(theta_hat, encoder);
  require(observed_reward >= 0.0 && observed_reward <= 1.0, ErrorKind::RangeError, "reward outside [0, 1]");
  return std::abs(observed_reward - dot(theta_hat, encode(encoder, chosen_context)));
}

double loss_predicted_reward(const Vector& theta_hat, const MlpParams& encoder, const Vector& chosen_context) {
  check_theta(theta_hat, encoder);
  return std::abs(dot(theta_hat, encode(encoder, chosen_context)));
}

double loss_divergence(const MlpParams& discriminator, const MlpParams& encoder, std::span<const Vector> source_batch,
                       std::span<const Vector> target_batch) {
  require(!source_batch.empty() && !target_batch.empty(), ErrorKind::EmptyBatch, "divergence loss on an empty batch");
  auto mean_ce = [&](std::span<const Vector> batch, bool label) {
    double s = 0.0;
    for (const Vector& x : batch) s += cross_entropy_from_logit(discriminator_logit(discriminator, encode(encoder, x)), label);
    return s / static_cast<double>(batch.size());
  };
  return 0.5 * mean_ce(source_batch, false) + 0.5 * mean_ce(target_batch, true);
}

LossBreakdown total_loss(const DABandAgent& agent, const EpisodeBuffer& buffer) {
  require(!buffer.source.empty(), ErrorKind::EmptyBatch, "total_loss on an empty episode");
  const Vector& theta = agent.linucb.theta_hat;
  LossBreakdown out;
  out.lambda = agent.config.lambda;
  for (const BufferedRound& b : buffer.source) {
    out.l_rs += loss_source_regret(theta, agent.encoder, b.round, b.rewards_all);
    const Vector& x = b.round.contexts[b.chosen_arm];
    if (agent.config.flags.use_regression_error) out.l_eps += loss_regression_error(theta, agent.encoder, x, b.reward);
    if (agent.config.flags.use_predicted_reward) out.l_reg += loss_predicted_reward(theta, agent.encoder, x);
  }
  if (!buffer.target.empty()) {
    std::vector<Round> src;
    src.reserve(buffer.source.size());
    for (const BufferedRound& b : buffer.source) src.push_back(b.round);
    const std::vector<Vector> s = all_contexts(src);
    const std::vector<Vector> t = all_contexts(buffer.target);
    out.l_div = static_cast<double>(buffer.source.size()) * loss_divergence(agent.discriminator, agent.encoder, s, t);
  }
  out.total = out.l_rs + out.l_eps + out.l_reg + out.lambda * out.l_div;
  return out;
}

void discriminator_step(DABandAgent& agent, std::span<const Vector> source_contexts,
                        std::span<const Vector> target_contexts) {
  require(!source_contexts.empty() && !target_contexts.empty(), ErrorKind::EmptyBatch,
          "discriminator step on an empty batch");
  std::vector<Vector> batch = kernels::encode_batch(agent.encoder, source_contexts);
  const std::size_t n_source = batch.size();
  for (Vector& z : kernels::encode_batch(agent.encoder, target_contexts)) batch.push_back(std::move(z));
  const double ws = 0.5 / static_cast<double>(n_source);
  const double wt = 0.5 / static_cast<double>(batch.size() - n_source);

  const OutputLoss loss = [&](std::span<const Vector> out, std::span<Vector> grads) {
    double s = 0.0;
    double t = 0.0;
    for (std::size_t i = 0; i < out.size(); ++i) {
      const bool label = i >= n_source;
      const double f = out[i][0];
      (label ? t : s) += cross_entropy_from_logit(clamp_logit(f), label);
      grads[i][0] = clamped(f) ? 0.0 : (label ? wt : ws) * ce_gradient(f, label);
    }
    return ws * s + wt * t;
  };
  const GradientBundle g = backward(agent.discriminator, batch, OutputHead::Linear, loss);
  sgd_step_inplace(agent.discriminator, g, agent.config.disc_lr());
}

GradientBundle encoder_gradient(const DABandAgent& agent, const BufferedRound& source, const Round* target) {
  const Vector& theta = agent.linucb.theta_hat;
  check_theta(theta, agent.encoder);
  const std::size_t k = source.round.arms();
  require(source.rewards_all.size() == k, ErrorKind::DimensionError, "buffered round lacks per-arm rewards");
  const double lambda = agent.config.lambda;
  const bool adversarial = target != nullptr && lambda > 0.0;

  std::vector<Vector> batch(source.round.contexts.begin(), source.round.contexts.end());
  if (adversarial) batch.insert(batch.end(), target->contexts.begin(), target->contexts.end());
  const std::size_t n_target = batch.size() - k;

  const OutputLoss loss = [&](std::span<const Vector> phi, std::span<Vector> grads) {
    double total = 0.0;
    for (std::size_t a = 0; a < k; ++a) {
      const double e = dot(theta, phi[a]) - source.rewards_all[a];
      total += e * e;
      grads[a] += (2.0 * e) * theta;
    }
    const std::size_t c = source.chosen_arm;
    const double pred = dot(theta, phi[c]);
    if (agent.config.flags.use_regression_error) {
      const double d = source.reward - pred;
      total += std::abs(d);
      grads[c] += (-sign(d)) * theta;
    }
    if (agent.config.flags.use_predicted_reward) {
      total += std::abs(pred);
      grads[c] += sign(pred) * theta;
    }
    if (adversarial) {
      // The encoder ascends the discriminator's loss.
      double ce_s = 0.0;
      double ce_t = 0.0;
      const double ws = -lambda * 0.5 / static_cast<double>(k);
      const double wt = -lambda * 0.5 / static_cast<double>(n_target);
      divergence_input_gradients(agent.discriminator, phi.subspan(0, k), grads.subspan(0, k), false, ws, ce_s);
      divergence_input_gradients(agent.discriminator, phi.subspan(k), grads.subspan(k), true, wt, ce_t);
      total += ws * ce_s + wt * ce_t;
    }
    return total;
  };
  return backward(agent.encoder, batch, OutputHead::UnitNormalized, loss);
}

void encoder_step(DABandAgent& agent, const BufferedRound& source, const Round* target) {
  const GradientBundle g = encoder_gradient(agent, source, target);
  sgd_step_inplace(agent.encoder, g, agent.config.sgd.learning_rate);
}

namespace {

void optimize_episode(DABandAgent& agent, bool adversarial) {
  const EpisodeBuffer& buf = agent.buffer;
  const std::size_t steps = agent.config.inner_steps();
  for (std::size_t j = 0; j < steps; ++j) {
    const std::size_t idx = j % buf.size();
    const Round* target = adversarial ? &buf.target[idx] : nullptr;
    if (adversarial) discriminator_step(agent, buf.source[idx].round.contexts, target->contexts);
    encoder_step(agent, buf.source[idx], target);
  }
}

// The shared bandit loop. With `target` non-empty the agent is adversarial:
// the target buffer is filled round by round and the discriminator trains.
RegretTrace play(DABandAgent& agent, std::span<const Round> stream, std::span<const Round> target,
                 std::size_t n_rounds, std::vector<LossBreakdown>* episodes) {
  if (stream.size() < n_rounds)
    fail(ErrorKind::StreamExhausted, "stream has " + std::to_string(stream.size()) + " rounds, " + std::to_string(n_rounds) + " requested");
  const bool adversarial = !target.empty();
  if (adversarial && target.size() < n_rounds)
    fail(ErrorKind::StreamExhausted, "target stream has " + std::to_string(target.size()) + " rounds, " + std::to_string(n_rounds) + " requested");

  RegretTrace trace;
  trace.domain = n_rounds > 0 ? stream.front().domain : Domain::Source;
  trace.seed = agent.config.seed;
  agent.buffer.clear();
  const std::size_t h = agent.config.episode_len;
  for (std::size_t i = 0; i < n_rounds; ++i) {
    const Round& round = stream[i];
    const std::vector<Vector> phi = kernels::encode_batch(agent.encoder, round.contexts);
    const std::size_t arm = select_arm(agent.linucb, phi);
    const double r = reward(round, arm);
    update_inplace(agent.linucb, phi[arm], r);
    trace.push(arm, reward(round, round.optimal_arm), r);

    agent.buffer.source.push_back({round, arm, r, all_rewards(round)});
    if (adversarial) agent.buffer.target.push_back(target[i]);
    if ((i + 1) % h == 0) {
      if (episodes) episodes->push_back(total_loss(agent, agent.buffer));
      optimize_episode(agent, adversarial);
      agent.buffer.clear();
    }
  }
  return trace;
}

AgentConfig backbone_config(AgentConfig cfg) {
  cfg.lambda = 0.0;
  cfg.flags = {false, false};
  return cfg;
}

}  // namespace

TrainResult run_daband(std::span<const Round> source, std::span<const Round> target, const AgentConfig& cfg,
                       std::size_t n_rounds) {
  require(!source.empty(), ErrorKind::StreamExhausted, "empty source stream");
  if (target.empty() || target.size() < n_rounds)
    fail(ErrorKind::StreamExhausted, "target stream has " + std::to_string(target.size()) + " rounds, " + std::to_string(n_rounds) + " requested");
  TargetFeedbackFirewall firewall;
  TrainResult out;
  out.agent = make_agent(source.front().dim(), cfg);
  out.trace = play(out.agent, source, target, n_rounds, &out.episodes);
  return out;
}

TrainResult run_nlinucb(std::span<const Round> source, const AgentConfig& cfg, std::size_t n_rounds) {
  require(!source.empty(), ErrorKind::StreamExhausted, "empty source stream");
  TrainResult out;
  out.agent = make_agent(source.front().dim(), backbone_config(cfg));
  out.trace = play(out.agent, source, {}, n_rounds, &out.episodes);
  return out;
}

TrainResult run_nlinucb(DABandAgent initial, std::span<const Round> source, std::size_t n_rounds) {
  TrainResult out;
  out.agent = std::move(initial);
  out.agent.config = backbone_config(out.agent.config);
  out.trace = play(out.agent, source, {}, n_rounds, &out.episodes);
  return out;
}

std::size_t zero_shot_policy(const DABandAgent& agent, const Round& target_round) {
  const std::vector<Vector> phi = kernels::encode_batch(agent.encoder, target_round.contexts);
  return select_arm(agent.linucb, phi, agent.config.eval_alpha());
}

RegretTrace evaluate_zero_shot(const DABandAgent& agent, std::span<const Round> rounds) {
  RegretTrace trace;
  trace.domain = rounds.empty() ? Domain::Target : rounds.front().domain;
  trace.seed = agent.config.seed;
  for (const Round& round : rounds) {
    const std::size_t arm = zero_shot_policy(agent, round);
    trace.push(arm, 1.0, arm == round.optimal_arm ? 1.0 : 0.0);
  }
  return trace;
}

RegretTrace continued_training(const DABandAgent& agent, std::span<const Round> target,
                               std::vector<LossBreakdown>* episodes) {
  DABandAgent copy = agent;
  copy.config = backbone_config(copy.config);
  return play(copy, target, {}, target.size(), episodes);
}

nlohmann::json agent_to_json(const DABandAgent& agent) {
  nlohmann::json j;
  j["encoder"] = to_json(agent.encoder);
  j["discriminator"] = to_json(agent.discriminator);
  j["dim"] = agent.linucb.dim();
  j["a_inv"] = agent.linucb.a_inv.values();
  j["b"] = agent.linucb.b.values();
  j["theta_hat"] = agent.linucb.theta_hat.values();
  j["rounds_seen"] = agent.linucb.rounds_seen;
  j["config"] = to_json(agent.config);
  return j;
}

DABandAgent agent_from_json(const nlohmann::json& j) {
  try {
    DABandAgent agent;
    agent.config = agent_config_from_json(j.at("config"));
    agent.encoder = mlp_from_json(j.at("encoder"));
    agent.discriminator = mlp_from_json(j.at("discriminator"));
    const auto dim = j.at("dim").get<std::size_t>();
    auto a_inv = j.at("a_inv").get<std::vector<double>>();
    auto b = j.at("b").get<std::vector<double>>();
    auto theta = j.at("theta_hat").get<std::vector<double>>();
    require(a_inv.size() == dim * dim && b.size() == dim && theta.size() == dim, ErrorKind::FormatError,
            "agent checkpoint LinUCB state has the wrong size");
    require(agent.encoder.output_dim() == dim, ErrorKind::FormatError, "encoder output dim != LinUCB dim");
    agent.linucb.a_inv = Matrix(dim, dim, std::move(a_inv));
    agent.linucb.b = Vector(std::move(b));
    agent.linucb.theta_hat = Vector(std::move(theta));
    agent.linucb.alpha = agent.config.alpha;
    agent.linucb.gamma = agent.config.gamma;
    agent.linucb.rounds_seen = j.at("rounds_seen").get<std::size_t>();
    return agent;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::FormatError, std::string("malformed agent checkpoint: ") + e.what());
  }
}

}  // namespace daband
