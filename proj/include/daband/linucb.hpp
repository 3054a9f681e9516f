#pragma once

// LinUCB ridge/UCB state machine shared by the linear baselines and the
// neural agents (which run it over encoder outputs).

#include <optional>
#include <span>

#include "daband/env.hpp"
#include "daband/linalg.hpp"
#include "daband/metrics.hpp"

namespace daband {

struct LinUcbState {
  Matrix a_inv;  // (γI + Σ x xᵀ)⁻¹
  Vector b;
  Vector theta_hat;
  double alpha = 0.05;
  double gamma = 1.0;
  std::size_t rounds_seen = 0;

  static LinUcbState fresh(std::size_t dim, double alpha, double gamma = 1.0);
  std::size_t dim() const noexcept { return b.dim(); }

  friend bool operator==(const LinUcbState&, const LinUcbState&) = default;
};

/// xᵀθ̂ + α·‖x‖_{A⁻¹}.
double ucb_score(const LinUcbState& state, const Vector& x, double alpha);

/// Index maximizing the UCB score; ties go to the lowest index.
std::size_t select_arm(const LinUcbState& state, std::span<const Vector> contexts);
std::size_t select_arm(const LinUcbState& state, std::span<const Vector> contexts, double alpha);

LinUcbState update(const LinUcbState& state, const Vector& x, double r);
void update_inplace(LinUcbState& state, const Vector& x, double r);

struct PcaOption {
  std::size_t k = 0;
  std::size_t fit_sample_count = 0;  // rounds taken from the unlabeled pool
};

struct LinUcbRun {
  LinUcbState state;
  std::optional<PcaModel> pca;
  RegretTrace trace;
};

/// Fit PCA on every arm context of the first `fit_rounds` rounds of each pool.
PcaModel fit_unlabeled_pca(std::span<const std::span<const Round>> pools, std::size_t fit_rounds,
                           std::size_t k);

std::vector<Round> transform_rounds(const PcaModel& model, std::span<const Round> rounds);

/// Plays LinUCB over `env`. With `pca`, contexts are projected first; the
/// projection is fit on `unlabeled_pools` (defaults to `env` when empty).
LinUcbRun run_linucb(std::span<const Round> env, double alpha, double gamma,
                     std::optional<PcaOption> pca = std::nullopt,
                     std::span<const std::span<const Round>> unlabeled_pools = {});

/// Fixed-policy evaluation (no updates) of a LinUCB run on `rounds`.
RegretTrace evaluate_linucb(const LinUcbRun& run, std::span<const Round> rounds, double alpha_eval);

}  // namespace daband
