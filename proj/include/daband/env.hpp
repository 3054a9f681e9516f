#pragma once

// Bandit environments: a synthetic source/target generator with known ground
// truth, the binary reward rule, and the DABD featurized-dataset file format.

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "daband/linalg.hpp"
#include "daband/rng.hpp"

namespace daband {

enum class Domain { Source, Target };

const char* to_string(Domain d);

/// One bandit step: one context per arm plus the rewarded arm.
struct Round {
  std::vector<Vector> contexts;
  std::size_t optimal_arm = 0;
  Domain domain = Domain::Source;

  std::size_t arms() const noexcept { return contexts.size(); }
  std::size_t dim() const noexcept { return contexts.empty() ? 0 : contexts.front().dim(); }

  friend bool operator==(const Round&, const Round&) = default;
};

/// `Standard` uses a random nonlinear latent map and random mixing; `Linear`
/// uses identity for both (requires d_raw == d_latent).
enum class EnvKind { Standard, Linear };

struct SyntheticPairSpec {
  std::size_t d_latent = 10;
  std::size_t d_raw = 50;
  std::size_t arms = 10;
  double shift_strength = 1.0;
  double noise_sigma = 0.05;
  std::size_t n_rounds = 1920;
  std::uint64_t seed = 0;
  EnvKind kind = EnvKind::Standard;
  /// Arm latents come from an equal-weight Gaussian mixture with this many
  /// components (0: standard normal).
  std::size_t latent_clusters = 0;
  double cluster_spread = 0.3;

  void validate() const;
};

/// Residual two-layer map z ↦ z + W2·tanh(W1·z + b1).
struct LatentMap {
  Matrix w1;
  Vector b1;
  Matrix w2;
  bool identity = false;

  Vector apply(const Vector& z) const;
};

struct GroundTruth {
  Vector theta_star;  // unit norm
  LatentMap latent_map;
  Matrix mix_source;  // d_raw × d_latent
  Matrix mix_target;
  Matrix unmix_source;  // left inverses, d_latent × d_raw
  Matrix unmix_target;
  std::vector<Vector> cluster_centers;  // empty for standard-normal latents
  double cluster_spread = 0.0;

  /// One arm latent.
  Vector draw_latent(Rng& rng) const;

  /// ⟨θ*, ψ(z)⟩ ∈ [-1, 1] with ψ = unit-normalized latent map.
  double latent_score(const Vector& z) const;
  /// Expected reward (1 + ⟨θ*, ψ(z)⟩)/2 ∈ [0, 1] of a raw context from `domain`.
  double expected_reward(Domain domain, const Vector& x) const;
};

struct DomainPair {
  std::vector<Round> source;
  std::vector<Round> target;
  GroundTruth truth;
};

/// Ground truth fully determined by spec.seed.
GroundTruth make_ground_truth(const SyntheticPairSpec& spec);

/// Paired source/target rounds sharing latents; `stream_seed` selects the
/// sample stream independently of the ground truth.
DomainPair sample_rounds(const SyntheticPairSpec& spec, const GroundTruth& truth,
                         std::size_t n_rounds, std::uint64_t stream_seed);

DomainPair generate_domain_pair(const SyntheticPairSpec& spec);

/// Binary reward: 1 for the optimal arm. Reading a target-domain reward while
/// a TargetFeedbackFirewall is alive throws FirewallViolation.
double reward(const Round& round, std::size_t arm);

/// Rewards for every arm of a round (same firewall rule as reward()).
std::vector<double> all_rewards(const Round& round);

/// RAII guard marking a scope in which no target feedback may be read.
/// Guards nest; state is thread-local.
class TargetFeedbackFirewall {
 public:
  TargetFeedbackFirewall();
  ~TargetFeedbackFirewall();
  TargetFeedbackFirewall(const TargetFeedbackFirewall&) = delete;
  TargetFeedbackFirewall& operator=(const TargetFeedbackFirewall&) = delete;

  static bool active() noexcept;
  /// Number of blocked target-reward reads on this thread since start.
  static std::size_t trips() noexcept;
};

// ---- DABD file format ------------------------------------------------------
// Little-endian: "DABD", u32 version=1, u32 n_rounds, u32 K, u32 d; then per
// round K·d float32 (arm-major) followed by u32 optimal_arm.

std::vector<Round> load_featurized_dataset(const std::filesystem::path& path,
                                           Domain domain = Domain::Source);
void save_featurized_dataset(std::span<const Round> rounds, const std::filesystem::path& path);

/// Write `bytes` to `path` through a temporary file and rename.
void write_file_atomic(const std::filesystem::path& path, std::span<const char> bytes);

}  // namespace daband
