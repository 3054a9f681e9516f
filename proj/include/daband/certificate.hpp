#pragma once

// Exact check of the target-regret bound and its supporting lemmas over a
// finite hypothesis pool on an instance with known ground truth.
//
// Every prediction and label is rounded to a 2^-24 grid before use, so all
// error sums are exact and the inequalities are compared with zero tolerance.

#include <cstdint>
#include <span>
#include <vector>

#include "daband/daband.hpp"
#include "json.hpp"

namespace daband {

struct BoundReport {
  double lhs_target_regret = 0.0;
  double source_regret = 0.0;
  double regression_error = 0.0;
  double divergence_term = 0.0;  // N·d̂ over the pool
  double predicted_reward_sum = 0.0;
  double psi_upper = 0.0;
  double c_constant = 0.0;  // C₁ + C₂
  double rhs_total = 0.0;
  bool holds = false;
  std::size_t hypothesis_pool_size = 0;
};

struct LemmaReport {
  std::size_t pairs_checked = 0;
  std::size_t triples_checked = 0;
  std::size_t a1_violations = 0;  // |ε_S(h,h′) − ε_T(h,h′)| ≤ (N/2)·d̂
  std::size_t a2_violations = 0;  // triangle inequality, both domains
  std::size_t a3_violations = 0;  // ε_T(h) ≤ ε_S(h) + (N/2)·d̂ + ψ
  double max_gap = 0.0;           // (N/2)·d̂
  double psi = 0.0;

  std::size_t total_violations() const noexcept { return a1_violations + a2_violations + a3_violations; }
};

inline constexpr double kCertificateGrid = 1.0 / 16777216.0;  // 2^-24

/// Value rounded to the certificate grid; |v| must stay below 2^8.
double quantize(double v);

/// The learned hypothesis: (θ̂, encoder) of the agent.
Hypothesis learned_hypothesis(const DABandAgent& agent);

/// Contexts of the arms chosen in each round.
std::vector<Vector> selected_contexts(std::span<const Round> rounds, std::span<const std::size_t> arms);

/// Ground-truth labels f_D at the given contexts.
std::vector<double> true_labels(const GroundTruth& truth, Domain domain, std::span<const Vector> contexts);

/// {learned, oracle, random...}: the oracle refits θ by ridge on the learned
/// encoder against pooled source and target labels; the random members use
/// fresh encoders of the same shape and unit-norm θ.
std::vector<Hypothesis> build_pool(const DABandAgent& agent, std::span<const Vector> source_contexts,
                                   std::span<const Vector> target_contexts, const GroundTruth& truth,
                                   std::size_t pool_size, std::uint64_t seed);

/// Lemma checks over every ordered pair and triple of the pool. Labels for
/// the third check come from `truth`; a null truth throws GroundTruthUnavailable.
LemmaReport lemma_checks(std::span<const Hypothesis> pool, std::span<const Vector> source_contexts,
                         std::span<const Vector> target_contexts, const GroundTruth* truth);

/// Evaluates both sides of the bound for a finished run. Source errors use the
/// arms recorded in `source_trace`; target quantities use the zero-shot
/// policy's selections on `target`.
BoundReport bound_certificate(const DABandAgent& agent, std::span<const Round> source,
                              const RegretTrace& source_trace, std::span<const Round> target,
                              const GroundTruth* truth, std::span<const Hypothesis> pool);

nlohmann::json to_json(const BoundReport& r);
nlohmann::json to_json(const LemmaReport& r);

}  // namespace daband
