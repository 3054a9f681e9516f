#pragma once

// Batched hot loops. Each kernel has a serial reference and an OpenMP
// version. The parallel versions split work into fixed-size chunks and
// reduce chunk results in index order, so their output does not depend on the
// number of threads.

#include <span>
#include <vector>

#include "daband/linalg.hpp"
#include "daband/mlp.hpp"

namespace daband::kernels {

inline constexpr std::size_t kChunk = 16;

/// Forward pass over a batch, keeping per-sample caches.
void forward_batch(const MlpParams& params, std::span<const Vector> batch, std::vector<Vector>& raw_outputs,
                   std::vector<ForwardCache>& caches);

/// Unit-normalized encodings of a batch.
std::vector<Vector> encode_batch(const MlpParams& params, std::span<const Vector> batch);

/// Σ_i parameter gradients of sample i given dL/d(raw output_i).
GradientBundle backprop_batch(const MlpParams& params, std::span<const ForwardCache> caches,
                              std::span<const Vector> grad_raw_outputs);

/// Symmetric matrix of Σ_i |rows[p][i] − rows[q][i]| (zero diagonal). Each
/// entry is one sequential sum, so both versions agree bit for bit.
Matrix pairwise_l1_distances(std::span<const std::vector<double>> rows);

namespace serial {
void forward_batch(const MlpParams& params, std::span<const Vector> batch, std::vector<Vector>& raw_outputs,
                   std::vector<ForwardCache>& caches);
std::vector<Vector> encode_batch(const MlpParams& params, std::span<const Vector> batch);
GradientBundle backprop_batch(const MlpParams& params, std::span<const ForwardCache> caches,
                              std::span<const Vector> grad_raw_outputs);
Matrix pairwise_l1_distances(std::span<const std::vector<double>> rows);
}  // namespace serial

/// Worker count used by the parallel kernels (1 without OpenMP).
int max_threads();
void set_threads(int n);

}  // namespace daband::kernels
