#include "daband/linucb.hpp"

#include <cmath>
#include <string>

namespace daband {

LinUcbState LinUcbState::fresh(std::size_t dim, double alpha, double gamma) {
  require(gamma > 0.0, ErrorKind::ConfigError, "gamma must be > 0");
  require(alpha >= 0.0, ErrorKind::ConfigError, "alpha must be >= 0");
  LinUcbState s;
  s.a_inv = Matrix::identity(dim, 1.0 / gamma);
  s.b = Vector(dim);
  s.theta_hat = Vector(dim);
  s.alpha = alpha;
  s.gamma = gamma;
  return s;
}

double ucb_score(const LinUcbState& state, const Vector& x, double alpha) {
  if (x.dim() != state.dim())
    fail(ErrorKind::DimensionError,
         "context dim " + std::to_string(x.dim()) + " != state dim " + std::to_string(state.dim()));
  const double mean = dot(x, state.theta_hat);
  if (alpha == 0.0) return mean;
  return mean + alpha * mahalanobis_norm(x, state.a_inv);
}

std::size_t select_arm(const LinUcbState& state, std::span<const Vector> contexts, double alpha) {
  require(!contexts.empty(), ErrorKind::DimensionError, "select_arm: no arms");
  std::size_t best = 0;
  double best_score = ucb_score(state, contexts[0], alpha);
  for (std::size_t a = 1; a < contexts.size(); ++a) {
    const double s = ucb_score(state, contexts[a], alpha);
    if (s > best_score) {
      best = a;
      best_score = s;
    }
  }
  return best;
}

std::size_t select_arm(const LinUcbState& state, std::span<const Vector> contexts) {
  return select_arm(state, contexts, state.alpha);
}

void update_inplace(LinUcbState& state, const Vector& x, double r) {
  require(x.dim() == state.dim(), ErrorKind::DimensionError, "update: context dim mismatch");
  require(x.all_finite() && std::isfinite(r), ErrorKind::InvalidNumeric, "update: non-finite input");
  sherman_morrison_update_inplace(state.a_inv, x);
  for (std::size_t i = 0; i < x.dim(); ++i) state.b[i] += r * x[i];
  state.theta_hat = matvec(state.a_inv, state.b);
  ++state.rounds_seen;
}

LinUcbState update(const LinUcbState& state, const Vector& x, double r) {
  LinUcbState next = state;
  update_inplace(next, x, r);
  return next;
}

PcaModel fit_unlabeled_pca(std::span<const std::span<const Round>> pools, std::size_t fit_rounds,
                           std::size_t k) {
  std::vector<Vector> samples;
  for (std::span<const Round> pool : pools) {
    if (pool.size() < fit_rounds)
      fail(ErrorKind::InsufficientData, "PCA fit needs " + std::to_string(fit_rounds) + " rounds, pool has " +
                std::to_string(pool.size()));
    for (std::size_t i = 0; i < fit_rounds; ++i)
      for (const Vector& x : pool[i].contexts) samples.push_back(x);
  }
  return pca_fit(samples, k);
}

std::vector<Round> transform_rounds(const PcaModel& model, std::span<const Round> rounds) {
  std::vector<Round> out;
  out.reserve(rounds.size());
  for (const Round& r : rounds) {
    Round t{{}, r.optimal_arm, r.domain};
    t.contexts.reserve(r.arms());
    for (const Vector& x : r.contexts) t.contexts.push_back(pca_transform(model, x));
    out.push_back(std::move(t));
  }
  return out;
}

LinUcbRun run_linucb(std::span<const Round> env, double alpha, double gamma, std::optional<PcaOption> pca,
                     std::span<const std::span<const Round>> unlabeled_pools) {
  LinUcbRun run;
  std::vector<Round> projected;
  std::span<const Round> stream = env;
  if (pca) {
    const std::span<const Round> self[] = {env};
    run.pca = fit_unlabeled_pca(unlabeled_pools.empty() ? std::span<const std::span<const Round>>(self)
                                                        : unlabeled_pools,
                                pca->fit_sample_count, pca->k);
    projected = transform_rounds(*run.pca, env);
    stream = projected;
  }
  const std::size_t dim = stream.empty() ? (pca ? pca->k : 0) : stream.front().dim();
  run.state = LinUcbState::fresh(dim, alpha, gamma);
  run.trace.domain = env.empty() ? Domain::Source : env.front().domain;

  for (const Round& round : stream) {
    const std::size_t arm = select_arm(run.state, round.contexts);
    const double r = reward(round, arm);
    update_inplace(run.state, round.contexts[arm], r);
    run.trace.push(arm, reward(round, round.optimal_arm), r);
  }
  return run;
}

RegretTrace evaluate_linucb(const LinUcbRun& run, std::span<const Round> rounds, double alpha_eval) {
  RegretTrace trace;
  trace.domain = rounds.empty() ? Domain::Target : rounds.front().domain;
  for (const Round& round : rounds) {
    std::size_t arm;
    if (run.pca) {
      std::vector<Vector> projected;
      projected.reserve(round.arms());
      for (const Vector& x : round.contexts) projected.push_back(pca_transform(*run.pca, x));
      arm = select_arm(run.state, projected, alpha_eval);
    } else {
      arm = select_arm(run.state, round.contexts, alpha_eval);
    }
    trace.push(arm, 1.0, arm == round.optimal_arm ? 1.0 : 0.0);
  }
  return trace;
}

}  // namespace daband
