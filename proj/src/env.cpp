#include "daband/env.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numbers>
#include <string>

#include "daband/rng.hpp"

namespace daband {

const char* to_string(Domain d) { return d == Domain::Source ? "source" : "target"; }

void SyntheticPairSpec::validate() const {
  require(d_latent >= 2, ErrorKind::ConfigError, "d_latent must be >= 2");
  require(d_raw >= d_latent, ErrorKind::ConfigError, "d_raw must be >= d_latent");
  require(arms >= 2, ErrorKind::ConfigError, "K must be >= 2");
  require(std::isfinite(shift_strength) && shift_strength >= 0.0, ErrorKind::ConfigError,
          "shift_strength must be finite and >= 0");
  require(std::isfinite(noise_sigma) && noise_sigma >= 0.0, ErrorKind::ConfigError,
          "noise_sigma must be finite and >= 0");
  require(std::isfinite(cluster_spread) && cluster_spread > 0.0, ErrorKind::ConfigError,
          "cluster_spread must be finite and > 0");
  if (kind == EnvKind::Linear) {
    require(d_raw == d_latent, ErrorKind::ConfigError, "linear environment needs d_raw == d_latent");
  }
}

Vector LatentMap::apply(const Vector& z) const {
  if (identity) return z;
  Vector hidden = matvec(w1, z);
  for (std::size_t i = 0; i < hidden.dim(); ++i) hidden[i] = std::tanh(hidden[i] + b1[i]);
  return z + matvec(w2, hidden);
}

double GroundTruth::latent_score(const Vector& z) const {
  const Vector mapped = latent_map.apply(z);
  const double n = norm2(mapped);
  if (n == 0.0) return 0.0;
  return dot(theta_star, mapped) / n;
}

Vector GroundTruth::draw_latent(Rng& rng) const {
  if (cluster_centers.empty()) return rng.normal_vector(theta_star.dim());
  const Vector& center = cluster_centers[rng.index(cluster_centers.size())];
  Vector z = rng.normal_vector(center.dim());
  z *= cluster_spread;
  z += center;
  return z;
}

double GroundTruth::expected_reward(Domain domain, const Vector& x) const {
  const Matrix& unmix = domain == Domain::Source ? unmix_source : unmix_target;
  return 0.5 * (1.0 + latent_score(matvec(unmix, x)));
}

namespace {

// Orthonormal columns from a random Gaussian matrix (modified Gram-Schmidt).
std::vector<Vector> random_orthonormal(Rng& rng, std::size_t dim, std::size_t count) {
  std::vector<Vector> basis;
  while (basis.size() < count) {
    Vector v = rng.normal_vector(dim);
    for (const Vector& b : basis) {
      const double p = dot(v, b);
      for (std::size_t i = 0; i < dim; ++i) v[i] -= p * b[i];
    }
    const double n = norm2(v);
    if (n < 1e-8) continue;
    v *= 1.0 / n;
    basis.push_back(std::move(v));
  }
  return basis;
}

Matrix left_inverse(const Matrix& m) {
  const Matrix mt = m.transpose();
  return matmul(spd_inverse(matmul(mt, m)), mt);
}

double smallest_singular_value(const Matrix& m) {
  const SymmetricEigen eig = symmetric_eigen(matmul(m.transpose(), m));
  return std::sqrt(std::max(0.0, eig.values.back()));
}

}  // namespace

GroundTruth make_ground_truth(const SyntheticPairSpec& spec) {
  spec.validate();
  Rng rng(derive_seed(spec.seed, 0));
  const std::size_t dl = spec.d_latent;
  const std::size_t dr = spec.d_raw;

  GroundTruth truth;
  truth.theta_star = rng.normal_vector(dl);
  truth.theta_star *= 1.0 / norm2(truth.theta_star);

  if (spec.kind == EnvKind::Linear) {
    truth.latent_map.identity = true;
    truth.mix_source = Matrix::identity(dl);
  } else {
    const std::size_t hidden = 2 * dl;
    truth.latent_map.w1 = Matrix(hidden, dl);
    truth.latent_map.w2 = Matrix(dl, hidden);
    truth.latent_map.b1 = Vector(hidden);
    for (double& w : truth.latent_map.w1.values()) w = rng.normal() / std::sqrt(double(dl));
    for (std::size_t i = 0; i < hidden; ++i) truth.latent_map.b1[i] = 0.5 * rng.normal();
    for (double& w : truth.latent_map.w2.values()) w = 1.5 * rng.normal() / std::sqrt(double(hidden));

    // mix_source = U · diag(σ) · Q with σ ∈ [1, 2]; U's orthogonal complement
    // partner columns V are kept for the target rotation.
    const std::size_t paired = std::min(dl, dr - dl);
    const std::vector<Vector> basis = random_orthonormal(rng, dr, dl + paired);
    const std::vector<Vector> q = random_orthonormal(rng, dl, dl);
    Matrix scaled_q(dl, dl);
    for (std::size_t i = 0; i < dl; ++i) {
      const double sigma = rng.uniform(1.0, 2.0);
      for (std::size_t j = 0; j < dl; ++j) scaled_q(i, j) = sigma * q[i][j];
    }
    const Matrix u = Matrix::from_columns(std::span(basis).first(dl));
    truth.mix_source = matmul(u, scaled_q);

    if (spec.shift_strength > 0.0) {
      // Rotate each (u_j, v_j) plane by an angle that saturates at π/2, then
      // scale latent axes anisotropically.
      const double angle = 0.5 * std::numbers::pi * (1.0 - std::exp(-spec.shift_strength));
      std::vector<Vector> rotated(basis.begin(), basis.begin() + dl);
      for (std::size_t j = 0; j < paired; ++j) {
        rotated[j] = std::cos(angle) * basis[j] + std::sin(angle) * basis[dl + j];
      }
      Matrix scale(dl, dl);
      for (std::size_t j = 0; j < dl; ++j) {
        scale(j, j) = 1.0 + 0.25 * std::tanh(spec.shift_strength) * rng.uniform(-1.0, 1.0);
      }
      truth.mix_target = matmul(matmul(Matrix::from_columns(rotated), scaled_q), scale);
    }
  }

  if (spec.kind == EnvKind::Linear && spec.shift_strength > 0.0) {
    truth.mix_target = Matrix::identity(dl);
    for (std::size_t j = 0; j < dl; ++j) {
      truth.mix_target(j, j) = 1.0 + 0.25 * std::tanh(spec.shift_strength) * rng.uniform(-1.0, 1.0);
    }
  }
  if (spec.shift_strength == 0.0) truth.mix_target = truth.mix_source;
  for (std::size_t c = 0; c < spec.latent_clusters; ++c) truth.cluster_centers.push_back(rng.normal_vector(dl));
  truth.cluster_spread = spec.cluster_spread;

  require(smallest_singular_value(truth.mix_source) >= 0.1 &&
              smallest_singular_value(truth.mix_target) >= 0.1,
          ErrorKind::InvalidNumeric, "mixing map is too close to singular");
  truth.unmix_source = left_inverse(truth.mix_source);
  truth.unmix_target = spec.shift_strength == 0.0 ? truth.unmix_source : left_inverse(truth.mix_target);
  return truth;
}

DomainPair sample_rounds(const SyntheticPairSpec& spec, const GroundTruth& truth,
                         std::size_t n_rounds, std::uint64_t stream_seed) {
  spec.validate();
  Rng rng(stream_seed);
  DomainPair pair;
  pair.truth = truth;
  pair.source.reserve(n_rounds);
  pair.target.reserve(n_rounds);

  std::vector<Vector> latents(spec.arms);
  for (std::size_t i = 0; i < n_rounds; ++i) {
    std::size_t best = 0;
    double best_score = 0.0;
    for (std::size_t a = 0; a < spec.arms; ++a) {
      latents[a] = truth.draw_latent(rng);
      const double noise = rng.normal();
      const double score = truth.latent_score(latents[a]) + spec.noise_sigma * noise;
      if (a == 0 || score > best_score) {
        best = a;
        best_score = score;
      }
    }
    Round src{{}, best, Domain::Source};
    Round tgt{{}, best, Domain::Target};
    src.contexts.reserve(spec.arms);
    tgt.contexts.reserve(spec.arms);
    for (const Vector& z : latents) {
      src.contexts.push_back(matvec(truth.mix_source, z));
      tgt.contexts.push_back(matvec(truth.mix_target, z));
    }
    pair.source.push_back(std::move(src));
    pair.target.push_back(std::move(tgt));
  }
  return pair;
}

DomainPair generate_domain_pair(const SyntheticPairSpec& spec) {
  const GroundTruth truth = make_ground_truth(spec);
  return sample_rounds(spec, truth, spec.n_rounds, derive_seed(spec.seed, streams::kEnvironment));
}

// ---- rewards and the feedback firewall -------------------------------------

namespace {
thread_local int firewall_depth = 0;
thread_local std::size_t firewall_trips = 0;
}  // namespace

TargetFeedbackFirewall::TargetFeedbackFirewall() { ++firewall_depth; }
TargetFeedbackFirewall::~TargetFeedbackFirewall() { --firewall_depth; }
bool TargetFeedbackFirewall::active() noexcept { return firewall_depth > 0; }
std::size_t TargetFeedbackFirewall::trips() noexcept { return firewall_trips; }

double reward(const Round& round, std::size_t arm) {
  if (arm >= round.arms())
    fail(ErrorKind::ArmIndexError, "arm " + std::to_string(arm) + " out of range for K=" + std::to_string(round.arms()));
  if (round.domain == Domain::Target && TargetFeedbackFirewall::active()) {
    ++firewall_trips;
    fail(ErrorKind::FirewallViolation, "target reward read during source-only training");
  }
  return arm == round.optimal_arm ? 1.0 : 0.0;
}

std::vector<double> all_rewards(const Round& round) {
  std::vector<double> out(round.arms());
  for (std::size_t a = 0; a < round.arms(); ++a) out[a] = reward(round, a);
  return out;
}

// ---- DABD I/O ---------------------------------------------------------------

namespace {

constexpr char kMagic[4] = {'D', 'A', 'B', 'D'};
constexpr std::uint32_t kVersion = 1;
constexpr std::size_t kHeaderBytes = 20;

template <typename T>
void put_le(std::vector<char>& out, T value) {
  static_assert(sizeof(T) == 4);
  std::uint32_t bits;
  std::memcpy(&bits, &value, 4);
  if constexpr (std::endian::native == std::endian::big) {
    bits = ((bits & 0xffu) << 24) | ((bits & 0xff00u) << 8) | ((bits >> 8) & 0xff00u) | (bits >> 24);
  }
  char raw[4];
  std::memcpy(raw, &bits, 4);
  out.insert(out.end(), raw, raw + 4);
}

template <typename T>
T get_le(const char* p) {
  std::uint32_t bits;
  std::memcpy(&bits, p, 4);
  if constexpr (std::endian::native == std::endian::big) {
    bits = ((bits & 0xffu) << 24) | ((bits & 0xff00u) << 8) | ((bits >> 8) & 0xff00u) | (bits >> 24);
  }
  T value;
  std::memcpy(&value, &bits, 4);
  return value;
}

}  // namespace

void write_file_atomic(const std::filesystem::path& path, std::span<const char> bytes) {
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    require(static_cast<bool>(out), ErrorKind::IoError, "cannot open " + tmp.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    out.flush();
    require(static_cast<bool>(out), ErrorKind::IoError, "write failed for " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp, ec);
    fail(ErrorKind::IoError, "rename to " + path.string() + " failed");
  }
}

void save_featurized_dataset(std::span<const Round> rounds, const std::filesystem::path& path) {
  const std::size_t k = rounds.empty() ? 0 : rounds.front().arms();
  const std::size_t d = rounds.empty() ? 0 : rounds.front().dim();
  for (const Round& r : rounds) {
    require(r.arms() == k, ErrorKind::ShapeError, "rounds have different arm counts");
    for (const Vector& x : r.contexts) {
      require(x.dim() == d, ErrorKind::ShapeError, "rounds have different context dims");
    }
    require(r.optimal_arm < k, ErrorKind::CorruptRecord, "optimal_arm out of range");
  }

  std::vector<char> bytes;
  bytes.reserve(kHeaderBytes + rounds.size() * (k * d + 1) * 4);
  bytes.insert(bytes.end(), kMagic, kMagic + 4);
  put_le(bytes, kVersion);
  put_le(bytes, static_cast<std::uint32_t>(rounds.size()));
  put_le(bytes, static_cast<std::uint32_t>(k));
  put_le(bytes, static_cast<std::uint32_t>(d));
  for (const Round& r : rounds) {
    for (const Vector& x : r.contexts)
      for (std::size_t j = 0; j < d; ++j) put_le(bytes, static_cast<float>(x[j]));
    put_le(bytes, static_cast<std::uint32_t>(r.optimal_arm));
  }
  write_file_atomic(path, bytes);
}

std::vector<Round> load_featurized_dataset(const std::filesystem::path& path, Domain domain) {
  std::ifstream in(path, std::ios::binary);
  require(static_cast<bool>(in), ErrorKind::IoError, "cannot open " + path.string());
  const std::vector<char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

  require(bytes.size() >= 8, ErrorKind::FormatError, "file too short for a DABD header");
  require(std::memcmp(bytes.data(), kMagic, 4) == 0, ErrorKind::FormatError, "bad magic");
  require(get_le<std::uint32_t>(bytes.data() + 4) == kVersion, ErrorKind::FormatError,
          "unsupported version");
  require(bytes.size() >= kHeaderBytes, ErrorKind::TruncatedFile, "header truncated");
  const std::uint64_t n = get_le<std::uint32_t>(bytes.data() + 8);
  const std::uint64_t k = get_le<std::uint32_t>(bytes.data() + 12);
  const std::uint64_t d = get_le<std::uint32_t>(bytes.data() + 16);

  const std::uint64_t record = (k * d + 1) * 4;
  const std::uint64_t expected = kHeaderBytes + n * record;
  if (bytes.size() < expected)
    fail(ErrorKind::TruncatedFile, "expected " + std::to_string(expected) + " bytes, found " + std::to_string(bytes.size()));
  require(bytes.size() == expected, ErrorKind::FormatError, "trailing bytes after last record");

  std::vector<Round> rounds;
  rounds.reserve(n);
  const char* p = bytes.data() + kHeaderBytes;
  for (std::uint64_t i = 0; i < n; ++i) {
    Round r;
    r.domain = domain;
    r.contexts.reserve(k);
    for (std::uint64_t a = 0; a < k; ++a) {
      Vector x(d);
      for (std::uint64_t j = 0; j < d; ++j, p += 4) x[j] = static_cast<double>(get_le<float>(p));
      if (!x.all_finite())
        fail(ErrorKind::CorruptRecord, "non-finite context in round " + std::to_string(i));
      r.contexts.push_back(std::move(x));
    }
    r.optimal_arm = get_le<std::uint32_t>(p);
    p += 4;
    if (r.optimal_arm >= k)
      fail(ErrorKind::CorruptRecord, "round " + std::to_string(i) + " optimal_arm " + std::to_string(r.optimal_arm) +
                " >= K=" + std::to_string(k));
    rounds.push_back(std::move(r));
  }
  return rounds;
}

}  // namespace daband
