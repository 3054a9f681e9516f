#include "daband/kernels.hpp"

#include <cmath>
#include <exception>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace daband::kernels {

namespace {

std::size_t chunk_count(std::size_t n) { return (n + kChunk - 1) / kChunk; }

// Runs body(c) for every chunk index; the first exception (by chunk order)
// is rethrown after the parallel region.
template <typename Body>
void for_each_chunk(std::size_t chunks, Body&& body) {
  std::vector<std::exception_ptr> errors(chunks);
  const auto count = static_cast<long long>(chunks);
#pragma omp parallel for schedule(static)
  for (long long c = 0; c < count; ++c) {
    try {
      body(static_cast<std::size_t>(c));
    } catch (...) {
      errors[static_cast<std::size_t>(c)] = std::current_exception();
    }
  }
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);
}

double l1_distance(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += std::abs(a[i] - b[i]);
  return s;
}

void check_rows(std::span<const std::vector<double>> rows) {
  for (const auto& r : rows)
    require(r.size() == rows[0].size(), ErrorKind::ShapeError, "prediction rows differ in length");
}

}  // namespace

void forward_batch(const MlpParams& params, std::span<const Vector> batch, std::vector<Vector>& raw_outputs,
                   std::vector<ForwardCache>& caches) {
  raw_outputs.assign(batch.size(), Vector());
  caches.assign(batch.size(), ForwardCache());
  for_each_chunk(chunk_count(batch.size()), [&](std::size_t c) {
    const std::size_t end = std::min(batch.size(), (c + 1) * kChunk);
    for (std::size_t i = c * kChunk; i < end; ++i) raw_outputs[i] = forward(params, batch[i], &caches[i]);
  });
}

std::vector<Vector> encode_batch(const MlpParams& params, std::span<const Vector> batch) {
  std::vector<Vector> out(batch.size());
  for_each_chunk(chunk_count(batch.size()), [&](std::size_t c) {
    const std::size_t end = std::min(batch.size(), (c + 1) * kChunk);
    for (std::size_t i = c * kChunk; i < end; ++i) out[i] = encode(params, batch[i]);
  });
  return out;
}

GradientBundle backprop_batch(const MlpParams& params, std::span<const ForwardCache> caches,
                              std::span<const Vector> grad_raw_outputs) {
  require(caches.size() == grad_raw_outputs.size(), ErrorKind::ShapeError, "cache/gradient count mismatch");
  const std::size_t chunks = chunk_count(caches.size());
  std::vector<GradientBundle> partial(chunks);
  for_each_chunk(chunks, [&](std::size_t c) {
    GradientBundle g = GradientBundle::zeros_like(params);
    const std::size_t end = std::min(caches.size(), (c + 1) * kChunk);
    for (std::size_t i = c * kChunk; i < end; ++i) backprop(params, caches[i], grad_raw_outputs[i], g);
    partial[c] = std::move(g);
  });
  GradientBundle total = GradientBundle::zeros_like(params);
  for (const GradientBundle& g : partial) total += g;
  return total;
}

Matrix pairwise_l1_distances(std::span<const std::vector<double>> rows) {
  check_rows(rows);
  const std::size_t h = rows.size();
  Matrix out(h, h);
  for_each_chunk(h, [&](std::size_t p) {
    for (std::size_t q = p + 1; q < h; ++q) out(p, q) = l1_distance(rows[p], rows[q]);
  });
  for (std::size_t p = 0; p < h; ++p)
    for (std::size_t q = 0; q < p; ++q) out(p, q) = out(q, p);
  return out;
}

namespace serial {

void forward_batch(const MlpParams& params, std::span<const Vector> batch, std::vector<Vector>& raw_outputs,
                   std::vector<ForwardCache>& caches) {
  raw_outputs.assign(batch.size(), Vector());
  caches.assign(batch.size(), ForwardCache());
  for (std::size_t i = 0; i < batch.size(); ++i) raw_outputs[i] = forward(params, batch[i], &caches[i]);
}

std::vector<Vector> encode_batch(const MlpParams& params, std::span<const Vector> batch) {
  std::vector<Vector> out;
  out.reserve(batch.size());
  for (const Vector& x : batch) out.push_back(encode(params, x));
  return out;
}

GradientBundle backprop_batch(const MlpParams& params, std::span<const ForwardCache> caches,
                              std::span<const Vector> grad_raw_outputs) {
  require(caches.size() == grad_raw_outputs.size(), ErrorKind::ShapeError, "cache/gradient count mismatch");
  GradientBundle g = GradientBundle::zeros_like(params);
  for (std::size_t i = 0; i < caches.size(); ++i) backprop(params, caches[i], grad_raw_outputs[i], g);
  return g;
}

Matrix pairwise_l1_distances(std::span<const std::vector<double>> rows) {
  check_rows(rows);
  const std::size_t h = rows.size();
  Matrix out(h, h);
  for (std::size_t p = 0; p < h; ++p)
    for (std::size_t q = 0; q < h; ++q)
      if (p != q) out(p, q) = p < q ? l1_distance(rows[p], rows[q]) : out(q, p);
  return out;
}

}  // namespace serial

int max_threads() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

void set_threads(int n) {
#ifdef _OPENMP
  omp_set_num_threads(n);
#else
  (void)n;
#endif
}

}  // namespace daband::kernels
