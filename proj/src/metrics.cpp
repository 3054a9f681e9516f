#include "daband/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "daband/kernels.hpp"

namespace daband {

void RegretTrace::push(std::size_t chosen_arm, double optimal_reward, double received_reward) {
  require(optimal_reward >= 0.0 && optimal_reward <= 1.0 && received_reward >= 0.0 && received_reward <= 1.0,
          ErrorKind::RangeError, "rewards must lie in [0, 1]");
  TraceRecord rec;
  rec.round_index = records.size();
  rec.chosen_arm = chosen_arm;
  rec.reward = received_reward;
  rec.inst_regret = optimal_reward - received_reward;
  rec.cum_regret = total() + rec.inst_regret;
  records.push_back(rec);
}

std::vector<double> RegretTrace::cumulative() const {
  std::vector<double> out;
  out.reserve(records.size());
  for (const TraceRecord& r : records) out.push_back(r.cum_regret);
  return out;
}

std::vector<double> cumulative_regret(std::span<const std::pair<double, double>> optimal_and_received) {
  std::vector<double> out;
  out.reserve(optimal_and_received.size());
  double acc = 0.0;
  for (const auto& [opt, got] : optimal_and_received) {
    require(opt >= 0.0 && opt <= 1.0 && got >= 0.0 && got <= 1.0, ErrorKind::RangeError,
            "rewards must lie in [0, 1]");
    acc += opt - got;
    out.push_back(acc);
  }
  return out;
}

double zero_shot_accuracy(double target_regret_total, std::size_t n) {
  require(n > 0, ErrorKind::EmptyEvaluation, "zero-shot accuracy over zero rounds");
  return 1.0 - target_regret_total / static_cast<double>(n);
}

PerClassAccuracy per_class_accuracy(std::span<const std::pair<std::size_t, std::size_t>> true_and_chosen,
                                    std::size_t arms) {
  require(!true_and_chosen.empty(), ErrorKind::EmptyEvaluation, "per-class accuracy over zero rounds");
  PerClassAccuracy out;
  out.per_class.assign(arms, 0.0);
  out.counts.assign(arms, 0);
  std::vector<std::size_t> hits(arms, 0);
  std::size_t correct = 0;
  for (const auto& [truth, chosen] : true_and_chosen) {
    require(truth < arms && chosen < arms, ErrorKind::ArmIndexError, "arm index out of range");
    ++out.counts[truth];
    if (truth == chosen) {
      ++hits[truth];
      ++correct;
    }
  }
  std::size_t populated = 0;
  double sum = 0.0;
  for (std::size_t a = 0; a < arms; ++a) {
    if (out.counts[a] == 0) continue;
    out.per_class[a] = static_cast<double>(hits[a]) / static_cast<double>(out.counts[a]);
    sum += out.per_class[a];
    ++populated;
  }
  out.mean = sum / static_cast<double>(populated);
  out.overall = static_cast<double>(correct) / static_cast<double>(true_and_chosen.size());
  return out;
}

double Hypothesis::predict(const Vector& x) const {
  if (encoder.empty()) return dot(theta, x);
  return dot(theta, daband::encode(encoder, x));
}

double hypothesis_error(const Hypothesis& h1, const Hypothesis& h2, std::span<const Vector> contexts) {
  double total = 0.0;
  for (const Vector& x : contexts) total += std::abs(h1.predict(x) - h2.predict(x));
  return total;
}

namespace {

struct Split {
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
};

// The same seed drives both domains, so equally sized sets split identically.
Split seeded_split(std::size_t n, std::uint64_t seed) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  Rng rng(seed);
  std::shuffle(idx.begin(), idx.end(), rng.engine());
  const std::size_t half = n / 2;
  return {{idx.begin(), idx.begin() + half}, {idx.begin() + half, idx.end()}};
}

// dCE/dlogit for label y. Written so that flipping the label and negating
// the logit negates the result exactly.
double ce_logit_gradient(double logit, bool target) { return target ? -sigmoid(-logit) : sigmoid(logit); }

// Mean-gradient contribution of one domain's training rows.
GradientBundle domain_gradient(const MlpParams& probe, std::span<const Vector> xs,
                               const std::vector<std::size_t>& rows, bool target) {
  std::vector<Vector> batch;
  batch.reserve(rows.size());
  for (std::size_t i : rows) batch.push_back(xs[i]);
  std::vector<Vector> raw;
  std::vector<ForwardCache> caches;
  kernels::forward_batch(probe, batch, raw, caches);
  std::vector<Vector> grads;
  grads.reserve(raw.size());
  const double w = 0.5 / static_cast<double>(rows.size());
  for (const Vector& r : raw) {
    const double f = r[0];
    const bool clamped = f < -kLogitClamp || f > kLogitClamp;
    grads.push_back(Vector{clamped ? 0.0 : w * ce_logit_gradient(f, target)});
  }
  return kernels::backprop_batch(probe, caches, grads);
}

// Held-out accuracy; a logit of exactly 0 counts as half correct.
double heldout_accuracy(const MlpParams& probe, std::span<const Vector> source, const std::vector<std::size_t>& s_rows,
                        std::span<const Vector> target, const std::vector<std::size_t>& t_rows) {
  auto score = [](double f, bool is_target) {
    if (f == 0.0) return 0.5;
    return (f > 0.0) == is_target ? 1.0 : 0.0;
  };
  // Equal weight per domain, matching the training objective.
  double cs = 0.0;
  for (std::size_t i : s_rows) cs += score(forward(probe, source[i])[0], false);
  double ct = 0.0;
  for (std::size_t i : t_rows) ct += score(forward(probe, target[i])[0], true);
  return 0.5 * (cs / static_cast<double>(s_rows.size()) + ct / static_cast<double>(t_rows.size()));
}

}  // namespace

ProbeResult probe_domains(std::span<const Vector> source, std::span<const Vector> target, const ProbeConfig& cfg) {
  if (source.size() < cfg.min_samples || target.size() < cfg.min_samples)
    fail(ErrorKind::InsufficientData, "probe needs at least " + std::to_string(cfg.min_samples) + " samples per domain");
  const std::size_t d = source.front().dim();
  for (const Vector& x : source) require(x.dim() == d, ErrorKind::DimensionError, "probe inputs differ in dim");
  for (const Vector& x : target) require(x.dim() == d, ErrorKind::DimensionError, "probe inputs differ in dim");

  const Split s_split = seeded_split(source.size(), cfg.seed);
  const Split t_split = seeded_split(target.size(), cfg.seed);

  // Hidden layer random, output layer zero: the initial network is its own
  // label-flipped mirror.
  Rng rng(derive_seed(cfg.seed, streams::kProbe));
  MlpParams probe = MlpParams::glorot({d, cfg.hidden, 1}, Activation::Tanh, rng);
  for (double& w : probe.weights.back().values()) w = 0.0;

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    GradientBundle g = domain_gradient(probe, source, s_split.train, false);
    g += domain_gradient(probe, target, t_split.train, true);
    sgd_step_inplace(probe, g, cfg.learning_rate);
  }

  ProbeResult out;
  out.heldout_accuracy = heldout_accuracy(probe, source, s_split.test, target, t_split.test);
  out.proxy = 2.0 * std::abs(1.0 - 2.0 * (1.0 - out.heldout_accuracy));
  return out;
}

double divergence_proxy(const MlpParams* encoder, std::span<const Vector> source_contexts,
                        std::span<const Vector> target_contexts, const ProbeConfig& cfg) {
  if (encoder == nullptr || encoder->empty()) return probe_domains(source_contexts, target_contexts, cfg).proxy;
  const std::vector<Vector> s = kernels::encode_batch(*encoder, source_contexts);
  const std::vector<Vector> t = kernels::encode_batch(*encoder, target_contexts);
  return probe_domains(s, t, cfg).proxy;
}

}  // namespace daband
