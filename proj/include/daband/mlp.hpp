#pragma once

// Multilayer perceptrons with hand-written backpropagation: the encoder
// (unit-normalized output) and the domain discriminator (sigmoid output).

#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "json.hpp"

#include "daband/linalg.hpp"
#include "daband/rng.hpp"

namespace daband {

enum class Activation { Tanh, Relu };

inline constexpr double kNormEpsilon = 1e-12;
/// Logits are clamped to ±27.6 so σ stays inside (1e-12, 1 − 1e-12).
inline constexpr double kLogitClamp = 27.6;

struct MlpParams {
  std::vector<std::size_t> layer_dims;
  Activation activation = Activation::Tanh;
  std::vector<Matrix> weights;  // weights[l]: layer_dims[l+1] × layer_dims[l]
  std::vector<Vector> biases;

  /// Weights uniform in ±sqrt(6/(fan_in+fan_out)), biases zero.
  static MlpParams glorot(std::vector<std::size_t> dims, Activation act, Rng& rng);
  static MlpParams zeros(std::vector<std::size_t> dims, Activation act);

  bool empty() const noexcept { return weights.empty(); }
  std::size_t layers() const noexcept { return weights.size(); }
  std::size_t input_dim() const noexcept { return layer_dims.empty() ? 0 : layer_dims.front(); }
  std::size_t output_dim() const noexcept { return layer_dims.empty() ? 0 : layer_dims.back(); }
  std::size_t parameter_count() const noexcept;

  void validate() const;

  friend bool operator==(const MlpParams&, const MlpParams&) = default;
};

struct GradientBundle {
  std::vector<Matrix> weights;
  std::vector<Vector> biases;
  double loss = 0.0;

  static GradientBundle zeros_like(const MlpParams& params);
  GradientBundle& operator+=(const GradientBundle& other);
  void scale(double s);
  bool all_finite() const noexcept;
  /// Flattened view order: layer by layer, weights row-major then biases.
  std::vector<double> flatten() const;
};

struct SgdConfig {
  double learning_rate = 1e-3;
  /// Optimization steps per episode; unset means one per buffered round.
  std::optional<std::size_t> inner_steps;

  void validate() const;
};

/// Per-sample activations kept for the backward pass. `post[0]` is the
/// input; `post[l+1]` is layer l's output (the last one is linear).
struct ForwardCache {
  std::vector<Vector> pre;
  std::vector<Vector> post;
};

enum class OutputHead {
  Linear,          // raw last-layer output
  UnitNormalized,  // y / (‖y‖ + ε)
  Sigmoid,         // σ(clamp(y)), single output
};

/// Raw last-layer output.
Vector forward(const MlpParams& params, const Vector& x, ForwardCache* cache = nullptr);
/// Applies the head to a raw output.
Vector apply_head(OutputHead head, const Vector& raw);
/// Gradient w.r.t. the raw output from a gradient w.r.t. the headed output.
Vector head_backward(OutputHead head, const Vector& raw, const Vector& grad_headed);

/// Encoder forward: unit-normalized output.
Vector encode(const MlpParams& params, const Vector& x);
/// Discriminator logit after clamping.
double discriminator_logit(const MlpParams& params, const Vector& z);
/// Discriminator probability of the target domain, in (0, 1).
double discriminate(const MlpParams& params, const Vector& z);
double sigmoid(double logit);

/// Accumulates parameter gradients for one sample into `acc` given
/// dL/d(raw output); returns dL/d(input).
Vector backprop(const MlpParams& params, const ForwardCache& cache, const Vector& grad_raw_output,
                GradientBundle& acc);

/// Loss over a batch of headed outputs. Fills `grads` (same shape as
/// `outputs`) with dL/d(output) and returns L.
using OutputLoss = std::function<double(std::span<const Vector> outputs, std::span<Vector> grads)>;

/// Exact gradients of `loss` composed with the network and its head over
/// `batch`. ReLU uses subgradient 0 at exactly 0.
GradientBundle backward(const MlpParams& params, std::span<const Vector> batch, OutputHead head,
                        const OutputLoss& loss);

/// p ← p − lr·∂L/∂p.
MlpParams sgd_step(const MlpParams& params, const GradientBundle& grads, const SgdConfig& cfg);
void sgd_step_inplace(MlpParams& params, const GradientBundle& grads, double learning_rate);

nlohmann::json to_json(const MlpParams& params);
MlpParams mlp_from_json(const nlohmann::json& j);

}  // namespace daband
