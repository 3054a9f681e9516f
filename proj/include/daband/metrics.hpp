#pragma once

// Regret bookkeeping and the accuracy/error quantities used in evaluation.

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "daband/env.hpp"
#include "daband/mlp.hpp"

namespace daband {

struct TraceRecord {
  std::size_t round_index = 0;
  std::size_t chosen_arm = 0;
  double reward = 0.0;
  double inst_regret = 0.0;
  double cum_regret = 0.0;

  friend bool operator==(const TraceRecord&, const TraceRecord&) = default;
};

struct RegretTrace {
  Domain domain = Domain::Source;
  std::string fingerprint;
  std::uint64_t seed = 0;
  std::vector<TraceRecord> records;

  /// Append one round; rewards must lie in [0, 1].
  void push(std::size_t chosen_arm, double optimal_reward, double received_reward);

  std::size_t size() const noexcept { return records.size(); }
  double total() const noexcept { return records.empty() ? 0.0 : records.back().cum_regret; }
  std::vector<double> cumulative() const;

  friend bool operator==(const RegretTrace&, const RegretTrace&) = default;
};

/// Prefix sums of (optimal reward − received reward).
std::vector<double> cumulative_regret(std::span<const std::pair<double, double>> optimal_and_received);

/// ACC = 1 − R_T / n.
double zero_shot_accuracy(double target_regret_total, std::size_t n);

struct PerClassAccuracy {
  std::vector<double> per_class;   // 0 for classes without samples
  std::vector<std::size_t> counts;
  double mean = 0.0;               // over classes with ≥ 1 sample
  double overall = 0.0;            // fraction correct
};

PerClassAccuracy per_class_accuracy(std::span<const std::pair<std::size_t, std::size_t>> true_and_chosen,
                                    std::size_t arms);

/// A reward model x ↦ ⟨θ, φ(x)⟩.
struct Hypothesis {
  Vector theta;
  MlpParams encoder;

  double predict(const Vector& x) const;

  friend bool operator==(const Hypothesis&, const Hypothesis&) = default;
};

/// Σ_i |h1(x_i) − h2(x_i)|.
double hypothesis_error(const Hypothesis& h1, const Hypothesis& h2, std::span<const Vector> contexts);

struct ProbeConfig {
  std::size_t hidden = 32;
  std::size_t epochs = 300;
  double learning_rate = 0.5;
  std::uint64_t seed = 0;
  std::size_t min_samples = 20;
};

struct ProbeResult {
  double heldout_accuracy = 0.0;
  double proxy = 0.0;  // 2·|1 − 2·heldout_error|
};

/// Proxy A-distance from a freshly trained probe on a seeded 50/50 split. The
/// probe is label-symmetric: swapping the two sets yields the same value.
ProbeResult probe_domains(std::span<const Vector> source, std::span<const Vector> target,
                          const ProbeConfig& cfg);

/// probe_domains on encoder outputs; an empty encoder means raw contexts.
double divergence_proxy(const MlpParams* encoder, std::span<const Vector> source_contexts,
                        std::span<const Vector> target_contexts, const ProbeConfig& cfg);

}  // namespace daband
