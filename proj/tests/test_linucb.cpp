#include <cmath>

#include "daband/linucb.hpp"
#include "doctest.h"
#include "oracles.hpp"

using namespace daband;

TEST_CASE("symmetric tie goes to the lowest arm") {
  const LinUcbState s = LinUcbState::fresh(2, 0.7);
  const std::vector<Vector> arms{Vector::unit(2, 0), Vector::unit(2, 1)};
  CHECK(select_arm(s, arms) == 0);
}

TEST_CASE("greedy selection with a known theta") {
  LinUcbState s = LinUcbState::fresh(2, 0.0);
  s.theta_hat = Vector::unit(2, 0);
  const std::vector<Vector> arms{Vector::unit(2, 0), Vector::unit(2, 1)};
  CHECK(select_arm(s, arms) == 0);
  s.theta_hat = Vector::unit(2, 1);
  CHECK(select_arm(s, arms) == 1);
}

TEST_CASE("selection matches exhaustive score enumeration") {
  Rng rng(17);
  for (int trial = 0; trial < 50; ++trial) {
    LinUcbState s = LinUcbState::fresh(5, 0.3);
    for (int u = 0; u < 10; ++u) update_inplace(s, oracle::random_vector(rng, 5), rng.uniform(0.0, 1.0));
    std::vector<Vector> arms;
    for (int a = 0; a < 8; ++a) arms.push_back(oracle::random_vector(rng, 5));
    std::size_t best = 0;
    double best_score = -1e300;
    for (std::size_t a = 0; a < arms.size(); ++a) {
      double q = 0.0;
      for (std::size_t i = 0; i < 5; ++i)
        for (std::size_t j = 0; j < 5; ++j) q += arms[a][i] * s.a_inv(i, j) * arms[a][j];
      const double score = dot(arms[a], s.theta_hat) + 0.3 * std::sqrt(q);
      if (score > best_score) {
        best = a;
        best_score = score;
      }
    }
    CHECK(select_arm(s, arms) == best);
  }
}

TEST_CASE("selection is permutation-equivariant") {
  Rng rng(23);
  LinUcbState s = LinUcbState::fresh(4, 0.5);
  for (int u = 0; u < 20; ++u) update_inplace(s, oracle::random_vector(rng, 4), rng.uniform(0.0, 1.0));
  std::vector<Vector> arms;
  for (int a = 0; a < 6; ++a) arms.push_back(oracle::random_vector(rng, 4));
  const std::size_t chosen = select_arm(s, arms);
  std::vector<std::size_t> perm{3, 5, 0, 1, 4, 2};
  std::vector<Vector> permuted;
  for (std::size_t p : perm) permuted.push_back(arms[p]);
  CHECK(perm[select_arm(s, permuted)] == chosen);
}

TEST_CASE("first update closed form") {
  const LinUcbState s = update(LinUcbState::fresh(3, 0.05), Vector::unit(3, 0), 1.0);
  CHECK(s.a_inv(0, 0) == 0.5);
  CHECK(s.a_inv(1, 1) == 1.0);
  CHECK(s.b == Vector{1.0, 0.0, 0.0});
  CHECK(s.theta_hat == Vector{0.5, 0.0, 0.0});
  CHECK(s.rounds_seen == 1);
}

TEST_CASE("zero context leaves the state unchanged") {
  Rng rng(2);
  LinUcbState s = LinUcbState::fresh(3, 0.05);
  for (int u = 0; u < 5; ++u) update_inplace(s, oracle::random_vector(rng, 3), 1.0);
  LinUcbState t = update(s, Vector(3), 0.7);
  CHECK(t.rounds_seen == s.rounds_seen + 1);
  t.rounds_seen = s.rounds_seen;
  CHECK(t == s);
}

TEST_CASE("theta matches the direct ridge solve after 200 updates") {
  Rng rng(31);
  const std::size_t d = 8;
  LinUcbState s = LinUcbState::fresh(d, 0.05, 1.0);
  Matrix a = Matrix::identity(d);
  Vector b(d);
  for (int t = 0; t < 200; ++t) {
    const Vector x = oracle::random_vector(rng, d);
    const double r = rng.uniform(0.0, 1.0);
    update_inplace(s, x, r);
    for (std::size_t i = 0; i < d; ++i) {
      b[i] += r * x[i];
      for (std::size_t j = 0; j < d; ++j) a(i, j) += x[i] * x[j];
    }
    CHECK(max_abs_diff(s.theta_hat, matvec(s.a_inv, s.b)) <= 1e-9);
  }
  CHECK(max_abs_diff(s.theta_hat, oracle::solve(a, b)) <= 1e-8);
}

TEST_CASE("single informative arm keeps regret bounded") {
  std::vector<Round> env;
  for (int i = 0; i < 500; ++i) {
    Round r;
    for (int a = 0; a < 4; ++a) r.contexts.push_back(Vector(3));
    r.contexts[2] = Vector{1.0, 0.0, 0.0};
    r.optimal_arm = 2;
    env.push_back(r);
  }
  const LinUcbRun run = run_linucb(env, 0.05, 1.0);
  CHECK(run.trace.total() <= 2.0);
  for (std::size_t i = 100; i < 500; ++i) CHECK(run.trace.records[i].inst_regret == 0.0);
}

TEST_CASE("greedy with an exact model has zero regret") {
  SyntheticPairSpec spec;
  spec.kind = EnvKind::Linear;
  spec.d_latent = spec.d_raw = 6;
  spec.noise_sigma = 0.0;
  spec.n_rounds = 200;
  const DomainPair p = generate_domain_pair(spec);
  // The linear environment scores unit-normalized contexts, so θ* is exact there.
  LinUcbState s = LinUcbState::fresh(6, 0.0);
  s.theta_hat = p.truth.theta_star;
  for (const Round& r : p.source) {
    std::vector<Vector> unit;
    for (const Vector& x : r.contexts) unit.push_back((1.0 / norm2(x)) * x);
    CHECK(select_arm(s, unit) == r.optimal_arm);
  }
}

TEST_CASE("pca with k = d is an orthonormal change of basis of centered contexts") {
  SyntheticPairSpec spec;
  spec.d_latent = 4;
  spec.d_raw = 8;
  spec.arms = 5;
  spec.n_rounds = 300;
  spec.seed = 4;
  const DomainPair p = generate_domain_pair(spec);
  const LinUcbRun pca = run_linucb(p.source, 0.05, 1.0, PcaOption{8, 300});
  // PCA subtracts the sample mean, so the paired run plays on centered contexts.
  std::vector<Round> centered = p.source;
  for (Round& r : centered)
    for (Vector& x : r.contexts) x -= pca.pca->mean;
  const LinUcbRun plain = run_linucb(centered, 0.05, 1.0);
  for (std::size_t i = 0; i < 300; ++i) CHECK(plain.trace.records[i].chosen_arm == pca.trace.records[i].chosen_arm);
  CHECK(plain.trace.cumulative() == pca.trace.cumulative());
}

TEST_CASE("evaluation never updates and scores by optimal arm") {
  SyntheticPairSpec spec;
  spec.d_latent = 4;
  spec.d_raw = 8;
  spec.n_rounds = 100;
  const DomainPair p = generate_domain_pair(spec);
  const LinUcbRun run = run_linucb(p.source, 0.05, 1.0);
  TargetFeedbackFirewall guard;
  const RegretTrace t = evaluate_linucb(run, p.target, 0.05);
  CHECK(t.size() == 100);
  for (std::size_t i = 0; i < 100; ++i)
    CHECK(t.records[i].inst_regret == (t.records[i].chosen_arm == p.target[i].optimal_arm ? 0.0 : 1.0));
}

TEST_CASE("same seed gives the same trace") {
  SyntheticPairSpec spec;
  spec.n_rounds = 200;
  const DomainPair p = generate_domain_pair(spec);
  CHECK(run_linucb(p.source, 0.05, 1.0).trace == run_linucb(p.source, 0.05, 1.0).trace);
}

TEST_CASE("regret grows sub-linearly on the linear environment") {
  SyntheticPairSpec spec;
  spec.kind = EnvKind::Linear;
  spec.d_latent = spec.d_raw = 20;
  spec.noise_sigma = 0.0;
  spec.n_rounds = 2000;
  double early = 0.0, late = 0.0;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    spec.seed = seed;
    const LinUcbRun run = run_linucb(generate_domain_pair(spec).source, 0.05, 1.0);
    early += run.trace.records[249].cum_regret / 250.0;
    late += run.trace.records[1999].cum_regret / 2000.0;
  }
  CHECK(late < 0.5 * early);
}
