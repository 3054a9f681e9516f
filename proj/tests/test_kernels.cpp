#include "daband/kernels.hpp"
#include "doctest.h"
#include "oracles.hpp"

using namespace daband;

namespace {

std::vector<Vector> random_batch(std::uint64_t seed, std::size_t n, std::size_t d) {
  Rng rng(seed);
  std::vector<Vector> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back(oracle::random_vector(rng, d));
  return out;
}

}  // namespace

TEST_CASE("parallel kernels agree with the serial reference for every thread count") {
  Rng rng(4);
  const MlpParams p = MlpParams::glorot({12, 16, 8}, Activation::Tanh, rng);
  const std::vector<Vector> batch = random_batch(9, 103, 12);

  std::vector<Vector> raw_s;
  std::vector<ForwardCache> cache_s;
  kernels::serial::forward_batch(p, batch, raw_s, cache_s);
  std::vector<Vector> grads;
  for (std::size_t i = 0; i < batch.size(); ++i) grads.push_back(oracle::random_vector(rng, 8));
  const GradientBundle g_serial = kernels::serial::backprop_batch(p, cache_s, grads);
  const std::vector<Vector> enc_s = kernels::serial::encode_batch(p, batch);

  std::vector<std::vector<double>> rows;
  for (int r = 0; r < 9; ++r) rows.push_back(oracle::random_vector(rng, 40).values());
  const Matrix dist_s = kernels::serial::pairwise_l1_distances(rows);

  GradientBundle g_first;
  for (int threads : {1, 2, 3, 8}) {
    kernels::set_threads(threads);
    std::vector<Vector> raw_p;
    std::vector<ForwardCache> cache_p;
    kernels::forward_batch(p, batch, raw_p, cache_p);
    CHECK(raw_p == raw_s);
    CHECK(kernels::encode_batch(p, batch) == enc_s);
    CHECK(kernels::pairwise_l1_distances(rows) == dist_s);
    const GradientBundle g = kernels::backprop_batch(p, cache_p, grads);
    // Chunked reduction: identical across thread counts, and equal to the
    // serial sum up to reassociation.
    if (threads == 1) g_first = g;
    CHECK(g.flatten() == g_first.flatten());
    CHECK(oracle::relative_error(g.flatten(), g_serial.flatten()) <= 1e-13);
  }
  kernels::set_threads(1);
}

TEST_CASE("pairwise distances match the naive oracle") {
  Rng rng(1);
  std::vector<std::vector<double>> rows;
  for (int r = 0; r < 5; ++r) rows.push_back(oracle::random_vector(rng, 7).values());
  const Matrix d = kernels::pairwise_l1_distances(rows);
  for (std::size_t p = 0; p < 5; ++p)
    for (std::size_t q = 0; q < 5; ++q) {
      double s = 0.0;
      for (std::size_t i = 0; i < 7; ++i) s += std::abs(rows[p][i] - rows[q][i]);
      CHECK(d(p, q) == (p == q ? 0.0 : s));
    }
  rows[2].pop_back();
  CHECK_THROWS_AS(kernels::pairwise_l1_distances(rows), Error);
}

TEST_CASE("errors inside a parallel region surface after it") {
  Rng rng(2);
  const MlpParams p = MlpParams::glorot({3, 2}, Activation::Tanh, rng);
  std::vector<Vector> batch = random_batch(3, 40, 3);
  batch[37] = Vector{1.0, 2.0};
  CHECK_THROWS_AS(kernels::encode_batch(p, batch), Error);
}
