#include "daband/mlp.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "daband/kernels.hpp"

namespace daband {

namespace {

double activate(Activation act, double v) { return act == Activation::Tanh ? std::tanh(v) : (v > 0.0 ? v : 0.0); }

// Derivative expressed through the pre-activation and the activation value.
double activate_derivative(Activation act, double pre, double post) {
  if (act == Activation::Tanh) return 1.0 - post * post;
  return pre > 0.0 ? 1.0 : 0.0;
}

const char* activation_name(Activation act) { return act == Activation::Tanh ? "tanh" : "relu"; }

}  // namespace

MlpParams MlpParams::glorot(std::vector<std::size_t> dims, Activation act, Rng& rng) {
  MlpParams p = zeros(std::move(dims), act);
  for (std::size_t l = 0; l < p.layers(); ++l) {
    const double fan_in = static_cast<double>(p.layer_dims[l]);
    const double fan_out = static_cast<double>(p.layer_dims[l + 1]);
    const double limit = std::sqrt(6.0 / (fan_in + fan_out));
    for (double& w : p.weights[l].values()) w = rng.uniform(-limit, limit);
  }
  return p;
}

MlpParams MlpParams::zeros(std::vector<std::size_t> dims, Activation act) {
  require(dims.size() >= 2, ErrorKind::ShapeError, "an MLP needs at least input and output widths");
  for (std::size_t d : dims) require(d > 0, ErrorKind::ShapeError, "MLP layer width must be positive");
  MlpParams p;
  p.layer_dims = std::move(dims);
  p.activation = act;
  for (std::size_t l = 0; l + 1 < p.layer_dims.size(); ++l) {
    p.weights.emplace_back(p.layer_dims[l + 1], p.layer_dims[l]);
    p.biases.emplace_back(p.layer_dims[l + 1]);
  }
  return p;
}

std::size_t MlpParams::parameter_count() const noexcept {
  std::size_t n = 0;
  for (std::size_t l = 0; l < weights.size(); ++l) n += weights[l].values().size() + biases[l].dim();
  return n;
}

void MlpParams::validate() const {
  require(layer_dims.size() >= 2, ErrorKind::ShapeError, "MLP has no layers");
  require(weights.size() + 1 == layer_dims.size() && biases.size() == weights.size(), ErrorKind::ShapeError,
          "MLP layer count mismatch");
  for (std::size_t l = 0; l < weights.size(); ++l) {
    if (weights[l].rows() != layer_dims[l + 1] || weights[l].cols() != layer_dims[l] ||
        biases[l].dim() != layer_dims[l + 1])
      fail(ErrorKind::ShapeError, "MLP layer " + std::to_string(l) + " has inconsistent shape");
    if (!weights[l].all_finite() || !biases[l].all_finite())
      fail(ErrorKind::InvalidNumeric, "MLP layer " + std::to_string(l) + " has non-finite parameters");
  }
}

GradientBundle GradientBundle::zeros_like(const MlpParams& params) {
  GradientBundle g;
  for (std::size_t l = 0; l < params.layers(); ++l) {
    g.weights.emplace_back(params.weights[l].rows(), params.weights[l].cols());
    g.biases.emplace_back(params.biases[l].dim());
  }
  return g;
}

GradientBundle& GradientBundle::operator+=(const GradientBundle& other) {
  require(weights.size() == other.weights.size(), ErrorKind::ShapeError, "gradient layer mismatch");
  for (std::size_t l = 0; l < weights.size(); ++l) {
    auto& w = weights[l].values();
    const auto& o = other.weights[l].values();
    require(w.size() == o.size(), ErrorKind::ShapeError, "gradient shape mismatch");
    for (std::size_t i = 0; i < w.size(); ++i) w[i] += o[i];
    biases[l] += other.biases[l];
  }
  loss += other.loss;
  return *this;
}

void GradientBundle::scale(double s) {
  for (std::size_t l = 0; l < weights.size(); ++l) {
    for (double& w : weights[l].values()) w *= s;
    biases[l] *= s;
  }
  loss *= s;
}

bool GradientBundle::all_finite() const noexcept {
  for (std::size_t l = 0; l < weights.size(); ++l)
    if (!weights[l].all_finite() || !biases[l].all_finite()) return false;
  return std::isfinite(loss);
}

std::vector<double> GradientBundle::flatten() const {
  std::vector<double> out;
  for (std::size_t l = 0; l < weights.size(); ++l) {
    out.insert(out.end(), weights[l].values().begin(), weights[l].values().end());
    out.insert(out.end(), biases[l].values().begin(), biases[l].values().end());
  }
  return out;
}

void SgdConfig::validate() const {
  require(std::isfinite(learning_rate) && learning_rate > 0.0, ErrorKind::ConfigError,
          "learning rate must be a positive finite number");
}

Vector forward(const MlpParams& params, const Vector& x, ForwardCache* cache) {
  if (x.dim() != params.input_dim())
    fail(ErrorKind::DimensionError,
         "MLP input dim " + std::to_string(x.dim()) + " != " + std::to_string(params.input_dim()));
  if (cache) {
    cache->pre.clear();
    cache->post.clear();
    cache->post.push_back(x);
  }
  Vector h = x;
  for (std::size_t l = 0; l < params.layers(); ++l) {
    Vector z = matvec(params.weights[l], h);
    z += params.biases[l];
    const bool last = l + 1 == params.layers();
    Vector a = z;
    if (!last)
      for (std::size_t i = 0; i < a.dim(); ++i) a[i] = activate(params.activation, z[i]);
    if (cache) {
      cache->pre.push_back(std::move(z));
      cache->post.push_back(a);
    }
    h = std::move(a);
  }
  if (!h.all_finite()) fail(ErrorKind::NumericOverflow, "MLP forward produced a non-finite output");
  return h;
}

double sigmoid(double logit) {
  if (logit >= 0.0) return 1.0 / (1.0 + std::exp(-logit));
  const double e = std::exp(logit);
  return e / (1.0 + e);
}

Vector apply_head(OutputHead head, const Vector& raw) {
  switch (head) {
    case OutputHead::Linear:
      return raw;
    case OutputHead::UnitNormalized: {
      const double n = norm2(raw);
      return (1.0 / (n + kNormEpsilon)) * raw;
    }
    case OutputHead::Sigmoid:
      require(raw.dim() == 1, ErrorKind::ShapeError, "sigmoid head needs a single output");
      return Vector{sigmoid(std::clamp(raw[0], -kLogitClamp, kLogitClamp))};
  }
  return raw;
}

Vector head_backward(OutputHead head, const Vector& raw, const Vector& grad_headed) {
  switch (head) {
    case OutputHead::Linear:
      return grad_headed;
    case OutputHead::UnitNormalized: {
      // y = r / (n + ε):  J = I/(n+ε) − r rᵀ / (n (n+ε)²)
      const double n = norm2(raw);
      const double s = n + kNormEpsilon;
      Vector g = (1.0 / s) * grad_headed;
      if (n > 0.0) {
        const double c = dot(raw, grad_headed) / (n * s * s);
        for (std::size_t i = 0; i < g.dim(); ++i) g[i] -= c * raw[i];
      }
      return g;
    }
    case OutputHead::Sigmoid: {
      const double f = raw[0];
      if (f < -kLogitClamp || f > kLogitClamp) return Vector{0.0};
      const double p = sigmoid(f);
      return Vector{grad_headed[0] * p * (1.0 - p)};
    }
  }
  return grad_headed;
}

Vector encode(const MlpParams& params, const Vector& x) {
  return apply_head(OutputHead::UnitNormalized, forward(params, x));
}

double discriminator_logit(const MlpParams& params, const Vector& z) {
  const Vector out = forward(params, z);
  require(out.dim() == 1, ErrorKind::ShapeError, "discriminator must have a single output");
  return std::clamp(out[0], -kLogitClamp, kLogitClamp);
}

double discriminate(const MlpParams& params, const Vector& z) { return sigmoid(discriminator_logit(params, z)); }

Vector backprop(const MlpParams& params, const ForwardCache& cache, const Vector& grad_raw_output,
                GradientBundle& acc) {
  Vector delta = grad_raw_output;
  for (std::size_t l = params.layers(); l-- > 0;) {
    const Vector& input = cache.post[l];
    Matrix& gw = acc.weights[l];
    for (std::size_t r = 0; r < gw.rows(); ++r) {
      const double d = delta[r];
      if (d == 0.0) continue;
      std::span<double> row = gw.row(r);
      for (std::size_t c = 0; c < row.size(); ++c) row[c] += d * input[c];
    }
    acc.biases[l] += delta;
    Vector back = matvec_transposed(params.weights[l], delta);
    if (l > 0)
      for (std::size_t i = 0; i < back.dim(); ++i)
        back[i] *= activate_derivative(params.activation, cache.pre[l - 1][i], cache.post[l][i]);
    delta = std::move(back);
  }
  return delta;
}

GradientBundle backward(const MlpParams& params, std::span<const Vector> batch, OutputHead head,
                        const OutputLoss& loss) {
  require(!batch.empty(), ErrorKind::EmptyBatch, "backward on an empty batch");
  std::vector<Vector> raw;
  std::vector<ForwardCache> caches;
  kernels::forward_batch(params, batch, raw, caches);

  std::vector<Vector> headed;
  headed.reserve(raw.size());
  for (const Vector& r : raw) headed.push_back(apply_head(head, r));
  std::vector<Vector> grads(headed.size());
  for (std::size_t i = 0; i < headed.size(); ++i) grads[i] = Vector(headed[i].dim());

  const double value = loss(headed, grads);
  require(std::isfinite(value), ErrorKind::NumericOverflow, "loss is not finite");

  std::vector<Vector> grad_raw;
  grad_raw.reserve(raw.size());
  for (std::size_t i = 0; i < raw.size(); ++i) grad_raw.push_back(head_backward(head, raw[i], grads[i]));

  GradientBundle g = kernels::backprop_batch(params, caches, grad_raw);
  g.loss = value;
  require(g.all_finite(), ErrorKind::NumericOverflow, "gradient is not finite");
  return g;
}

void sgd_step_inplace(MlpParams& params, const GradientBundle& grads, double learning_rate) {
  require(grads.weights.size() == params.layers(), ErrorKind::ShapeError, "gradient/parameter layer mismatch");
  for (std::size_t l = 0; l < params.layers(); ++l) {
    auto& w = params.weights[l].values();
    const auto& g = grads.weights[l].values();
    require(w.size() == g.size() && params.biases[l].dim() == grads.biases[l].dim(), ErrorKind::ShapeError,
            "gradient/parameter shape mismatch");
    for (std::size_t i = 0; i < w.size(); ++i) w[i] -= learning_rate * g[i];
    for (std::size_t i = 0; i < params.biases[l].dim(); ++i)
      params.biases[l][i] -= learning_rate * grads.biases[l][i];
  }
}

MlpParams sgd_step(const MlpParams& params, const GradientBundle& grads, const SgdConfig& cfg) {
  cfg.validate();
  MlpParams next = params;
  sgd_step_inplace(next, grads, cfg.learning_rate);
  return next;
}

nlohmann::json to_json(const MlpParams& params) {
  nlohmann::json j;
  j["layer_dims"] = params.layer_dims;
  j["activation"] = activation_name(params.activation);
  j["weights"] = nlohmann::json::array();
  j["biases"] = nlohmann::json::array();
  for (std::size_t l = 0; l < params.layers(); ++l) {
    j["weights"].push_back(params.weights[l].values());
    j["biases"].push_back(params.biases[l].values());
  }
  return j;
}

MlpParams mlp_from_json(const nlohmann::json& j) {
  try {
    const auto dims = j.at("layer_dims").get<std::vector<std::size_t>>();
    const std::string act = j.at("activation").get<std::string>();
    require(act == "tanh" || act == "relu", ErrorKind::FormatError, "unknown activation '" + act + "'");
    MlpParams p = MlpParams::zeros(dims, act == "tanh" ? Activation::Tanh : Activation::Relu);
    const auto& ws = j.at("weights");
    const auto& bs = j.at("biases");
    require(ws.size() == p.layers() && bs.size() == p.layers(), ErrorKind::FormatError,
            "checkpoint layer count mismatch");
    for (std::size_t l = 0; l < p.layers(); ++l) {
      auto w = ws[l].get<std::vector<double>>();
      auto b = bs[l].get<std::vector<double>>();
      if (w.size() != p.weights[l].values().size() || b.size() != p.biases[l].dim())
        fail(ErrorKind::FormatError, "checkpoint layer " + std::to_string(l) + " has the wrong size");
      p.weights[l].values() = std::move(w);
      p.biases[l] = Vector(std::move(b));
    }
    p.validate();
    return p;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::FormatError, std::string("malformed MLP checkpoint: ") + e.what());
  }
}

}  // namespace daband
