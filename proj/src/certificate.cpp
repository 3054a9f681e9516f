#include "daband/certificate.hpp"

#include <algorithm>
#include <cmath>

#include "daband/kernels.hpp"

namespace daband {

namespace {

struct PoolErrors {
  Matrix source;  // pairwise ε_S; the last row/column is the label f_S
  Matrix target;
  std::size_t size = 0;  // hypotheses, excluding the label row
  double max_gap = 0.0;
  double psi = 0.0;

  double eps_source(std::size_t h) const { return source(h, size); }
  double eps_target(std::size_t h) const { return target(h, size); }
};

std::vector<double> quantized_predictions(const Hypothesis& h, std::span<const Vector> contexts) {
  std::vector<double> out(contexts.size());
  if (h.encoder.empty()) {
    for (std::size_t i = 0; i < contexts.size(); ++i) out[i] = quantize(dot(h.theta, contexts[i]));
    return out;
  }
  const std::vector<Vector> phi = kernels::encode_batch(h.encoder, contexts);
  for (std::size_t i = 0; i < contexts.size(); ++i) out[i] = quantize(dot(h.theta, phi[i]));
  return out;
}

std::vector<double> quantized(std::vector<double> v) {
  for (double& x : v) x = quantize(x);
  return v;
}

PoolErrors pool_errors(std::span<const Hypothesis> pool, std::span<const Vector> source_contexts,
                       std::span<const Vector> target_contexts, const GroundTruth& truth) {
  require(!pool.empty(), ErrorKind::PoolError, "empty hypothesis pool");
  if (source_contexts.size() != target_contexts.size())
    fail(ErrorKind::ShapeError, "source and target context counts differ: " + std::to_string(source_contexts.size()) +
                                    " vs " + std::to_string(target_contexts.size()));
  std::vector<std::vector<double>> rows_s, rows_t;
  for (const Hypothesis& h : pool) {
    rows_s.push_back(quantized_predictions(h, source_contexts));
    rows_t.push_back(quantized_predictions(h, target_contexts));
  }
  rows_s.push_back(quantized(true_labels(truth, Domain::Source, source_contexts)));
  rows_t.push_back(quantized(true_labels(truth, Domain::Target, target_contexts)));

  PoolErrors e;
  e.size = pool.size();
  e.source = kernels::pairwise_l1_distances(rows_s);
  e.target = kernels::pairwise_l1_distances(rows_t);
  for (std::size_t p = 0; p < e.size; ++p)
    for (std::size_t q = 0; q < e.size; ++q)
      e.max_gap = std::max(e.max_gap, std::abs(e.source(p, q) - e.target(p, q)));
  e.psi = e.eps_source(0) + e.eps_target(0);
  for (std::size_t h = 1; h < e.size; ++h) e.psi = std::min(e.psi, e.eps_source(h) + e.eps_target(h));
  return e;
}

}  // namespace

double quantize(double v) {
  if (!(std::abs(v) < 256.0)) fail(ErrorKind::NumericOverflow, "value outside certificate range: " + std::to_string(v));
  return std::nearbyint(v / kCertificateGrid) * kCertificateGrid;
}

Hypothesis learned_hypothesis(const DABandAgent& agent) { return Hypothesis{agent.linucb.theta_hat, agent.encoder}; }

std::vector<Vector> selected_contexts(std::span<const Round> rounds, std::span<const std::size_t> arms) {
  require(rounds.size() >= arms.size(), ErrorKind::StreamExhausted, "fewer rounds than selections");
  std::vector<Vector> out;
  out.reserve(arms.size());
  for (std::size_t i = 0; i < arms.size(); ++i) {
    if (arms[i] >= rounds[i].arms())
      fail(ErrorKind::ArmIndexError, "arm " + std::to_string(arms[i]) + " out of range in round " + std::to_string(i));
    out.push_back(rounds[i].contexts[arms[i]]);
  }
  return out;
}

std::vector<double> true_labels(const GroundTruth& truth, Domain domain, std::span<const Vector> contexts) {
  std::vector<double> out;
  out.reserve(contexts.size());
  for (const Vector& x : contexts) out.push_back(truth.expected_reward(domain, x));
  return out;
}

std::vector<Hypothesis> build_pool(const DABandAgent& agent, std::span<const Vector> source_contexts,
                                   std::span<const Vector> target_contexts, const GroundTruth& truth,
                                   std::size_t pool_size, std::uint64_t seed) {
  require(pool_size >= 2, ErrorKind::PoolError, "pool needs the learned and the oracle hypothesis");
  std::vector<Hypothesis> pool;
  pool.push_back(learned_hypothesis(agent));

  const std::size_t k = agent.linucb.dim();
  Matrix a(k, k);
  for (std::size_t i = 0; i < k; ++i) a(i, i) = agent.config.gamma;
  Vector b(k);
  auto accumulate = [&](std::span<const Vector> contexts, Domain domain) {
    const std::vector<Vector> phi = kernels::encode_batch(agent.encoder, contexts);
    const std::vector<double> y = true_labels(truth, domain, contexts);
    for (std::size_t n = 0; n < phi.size(); ++n)
      for (std::size_t i = 0; i < k; ++i) {
        b[i] += y[n] * phi[n][i];
        for (std::size_t j = 0; j < k; ++j) a(i, j) += phi[n][i] * phi[n][j];
      }
  };
  accumulate(source_contexts, Domain::Source);
  accumulate(target_contexts, Domain::Target);
  pool.push_back(Hypothesis{matvec(spd_inverse(a), b), agent.encoder});

  Rng rng(derive_seed(seed, streams::kPool));
  while (pool.size() < pool_size) {
    MlpParams enc = MlpParams::glorot(agent.encoder.layer_dims, agent.encoder.activation, rng);
    Vector theta = rng.normal_vector(k);
    theta = (1.0 / norm2(theta)) * theta;
    pool.push_back(Hypothesis{std::move(theta), std::move(enc)});
  }
  return pool;
}

LemmaReport lemma_checks(std::span<const Hypothesis> pool, std::span<const Vector> source_contexts,
                         std::span<const Vector> target_contexts, const GroundTruth* truth) {
  if (!truth) fail(ErrorKind::GroundTruthUnavailable, "lemma checks need ground-truth labels");
  require(pool.size() >= 3, ErrorKind::PoolError, "lemma checks need at least 3 hypotheses");
  const PoolErrors e = pool_errors(pool, source_contexts, target_contexts, *truth);
  const std::size_t m = e.size;

  LemmaReport r;
  r.max_gap = e.max_gap;
  r.psi = e.psi;
  for (std::size_t p = 0; p < m; ++p)
    for (std::size_t q = 0; q < m; ++q) {
      ++r.pairs_checked;
      if (std::abs(e.source(p, q) - e.target(p, q)) > e.max_gap) ++r.a1_violations;
      for (std::size_t s = 0; s < m; ++s) {
        ++r.triples_checked;
        if (e.source(p, q) > e.source(p, s) + e.source(q, s)) ++r.a2_violations;
        if (e.target(p, q) > e.target(p, s) + e.target(q, s)) ++r.a2_violations;
      }
    }
  for (std::size_t h = 0; h < m; ++h)
    if (e.eps_target(h) > e.eps_source(h) + e.max_gap + e.psi) ++r.a3_violations;
  return r;
}

BoundReport bound_certificate(const DABandAgent& agent, std::span<const Round> source,
                              const RegretTrace& source_trace, std::span<const Round> target,
                              const GroundTruth* truth, std::span<const Hypothesis> pool) {
  if (!truth) fail(ErrorKind::GroundTruthUnavailable, "certificate needs a synthetic instance");
  const Hypothesis learned = learned_hypothesis(agent);
  const auto it = std::find(pool.begin(), pool.end(), learned);
  if (it == pool.end()) fail(ErrorKind::PoolError, "pool does not contain the learned hypothesis");
  const std::size_t n = source_trace.size();
  require(n > 0, ErrorKind::EmptyEvaluation, "empty source trace");
  if (target.size() != n)
    fail(ErrorKind::ShapeError,
         "target rounds " + std::to_string(target.size()) + " != source trace length " + std::to_string(n));

  std::vector<std::size_t> src_arms, tgt_arms, tgt_opt;
  for (const TraceRecord& rec : source_trace.records) src_arms.push_back(rec.chosen_arm);
  for (const Round& round : target) {
    tgt_arms.push_back(zero_shot_policy(agent, round));
    tgt_opt.push_back(round.optimal_arm);
  }
  const std::vector<Vector> xs = selected_contexts(source, src_arms);
  const std::vector<Vector> xt = selected_contexts(target, tgt_arms);
  const PoolErrors e = pool_errors(pool, xs, xt, *truth);
  const std::size_t h = static_cast<std::size_t>(it - pool.begin());

  BoundReport r;
  r.hypothesis_pool_size = pool.size();
  for (std::size_t i = 0; i < n; ++i) r.lhs_target_regret += tgt_arms[i] == tgt_opt[i] ? 0.0 : 1.0;
  r.source_regret = source_trace.total();
  r.regression_error = e.eps_source(h);
  r.divergence_term = 2.0 * e.max_gap;
  for (double v : quantized_predictions(learned, xs)) r.predicted_reward_sum += std::abs(v);
  r.psi_upper = e.psi;
  double c2 = 0.0;
  for (double v : quantized(true_labels(*truth, Domain::Target, selected_contexts(target, tgt_opt)))) c2 += v;
  r.c_constant = static_cast<double>(n) + c2;
  r.rhs_total = r.source_regret + r.regression_error + r.divergence_term + r.predicted_reward_sum + r.psi_upper +
                r.c_constant;
  r.holds = r.lhs_target_regret <= r.rhs_total;
  return r;
}

nlohmann::json to_json(const BoundReport& r) {
  return {{"lhs_target_regret", r.lhs_target_regret},
          {"source_regret", r.source_regret},
          {"regression_error", r.regression_error},
          {"divergence_term", r.divergence_term},
          {"predicted_reward_sum", r.predicted_reward_sum},
          {"psi_upper", r.psi_upper},
          {"c_constant", r.c_constant},
          {"rhs_total", r.rhs_total},
          {"holds", r.holds},
          {"hypothesis_pool_size", r.hypothesis_pool_size}};
}

nlohmann::json to_json(const LemmaReport& r) {
  return {{"pairs_checked", r.pairs_checked},     {"triples_checked", r.triples_checked},
          {"a1_violations", r.a1_violations},     {"a2_violations", r.a2_violations},
          {"a3_violations", r.a3_violations},     {"max_gap", r.max_gap},
          {"psi", r.psi},                         {"total_violations", r.total_violations()}};
}

}  // namespace daband
