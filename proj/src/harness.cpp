#include "daband/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <fstream>
#include <set>
#include <sstream>

namespace daband {

using nlohmann::json;

namespace {

const std::set<std::string> kTopKeys{"name",     "algorithm",   "env",     "n_rounds",      "eval_rounds",
                                     "continued_rounds", "pca", "certificate", "pool_size", "seeds",
                                     "alpha",    "alpha_eval",  "gamma",   "lambda",        "H",
                                     "sgd",      "discriminator_lr", "ablation", "encoder", "discriminator_hidden"};

void check_keys(const json& j, const std::set<std::string>& allowed, const std::string& where) {
  if (!j.is_object()) fail(ErrorKind::ConfigError, where + " must be an object");
  for (const auto& [key, value] : j.items())
    if (!allowed.count(key)) fail(ErrorKind::ConfigError, "unknown key '" + key + "' in " + where);
}

template <typename T>
T get_or(const json& j, const char* key, T fallback) {
  if (!j.contains(key) || j.at(key).is_null()) return fallback;
  return j.at(key).get<T>();
}

bool is_neural(Algorithm a) { return a == Algorithm::NLinUcb || a == Algorithm::NLinUcbP || a == Algorithm::DABand; }
bool uses_pca(Algorithm a) { return a == Algorithm::LinUcbP || a == Algorithm::NLinUcbP; }

std::vector<Round> project(const PcaModel& model, std::span<const Round> rounds) {
  return transform_rounds(model, rounds);
}

RegretTrace continue_linucb(LinUcbState state, std::span<const Round> rounds) {
  RegretTrace trace;
  trace.domain = Domain::Target;
  for (const Round& round : rounds) {
    const std::size_t arm = select_arm(state, round.contexts);
    const double r = reward(round, arm);
    update_inplace(state, round.contexts[arm], r);
    trace.push(arm, reward(round, round.optimal_arm), r);
  }
  return trace;
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::IoError, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string losses_csv(const std::vector<LossBreakdown>& episodes) {
  std::string out = "episode,l_rs,l_eps,l_reg,l_div,lambda,total\n";
  for (std::size_t i = 0; i < episodes.size(); ++i) {
    const LossBreakdown& l = episodes[i];
    out += std::to_string(i) + "," + format_number(l.l_rs) + "," + format_number(l.l_eps) + "," +
           format_number(l.l_reg) + "," + format_number(l.l_div) + "," + format_number(l.lambda) + "," +
           format_number(l.total) + "\n";
  }
  return out;
}

std::pair<BoundReport, LemmaReport> certify_seed(const DABandAgent& agent, const SeedData& data,
                                                 const RegretTrace& source_trace, std::size_t pool_size,
                                                 std::uint64_t seed) {
  if (!data.truth) fail(ErrorKind::GroundTruthUnavailable, "certificate needs a synthetic environment");
  const std::size_t n = source_trace.size();
  std::vector<std::size_t> src_arms, tgt_arms;
  for (const TraceRecord& rec : source_trace.records) src_arms.push_back(rec.chosen_arm);
  const std::span<const Round> target(data.target.data(), n);
  for (const Round& round : target) tgt_arms.push_back(zero_shot_policy(agent, round));
  const std::vector<Vector> xs = selected_contexts(data.source, src_arms);
  const std::vector<Vector> xt = selected_contexts(target, tgt_arms);
  const std::vector<Hypothesis> pool = build_pool(agent, xs, xt, *data.truth, pool_size, seed);
  return {bound_certificate(agent, data.source, source_trace, target, &*data.truth, pool),
          lemma_checks(pool, xs, xt, &*data.truth)};
}

}  // namespace

const char* to_string(Algorithm a) {
  switch (a) {
    case Algorithm::LinUcb: return "linucb";
    case Algorithm::LinUcbP: return "linucb_p";
    case Algorithm::NLinUcb: return "nlinucb";
    case Algorithm::NLinUcbP: return "nlinucb_p";
    case Algorithm::DABand: return "daband";
  }
  return "?";
}

Algorithm algorithm_from_string(const std::string& s) {
  for (Algorithm a : {Algorithm::LinUcb, Algorithm::LinUcbP, Algorithm::NLinUcb, Algorithm::NLinUcbP, Algorithm::DABand})
    if (s == to_string(a)) return a;
  fail(ErrorKind::ConfigError, "unknown algorithm '" + s + "'");
}

void ExperimentConfig::validate() const {
  require(synthetic.has_value() != dataset.has_value(), ErrorKind::ConfigError,
          "exactly one of a synthetic or a dataset environment is required");
  require(n_rounds >= 1, ErrorKind::ConfigError, "n_rounds must be >= 1");
  require(!seeds.empty(), ErrorKind::ConfigError, "seeds must be nonempty");
  require(std::set<std::uint64_t>(seeds.begin(), seeds.end()).size() == seeds.size(), ErrorKind::ConfigError,
          "seeds must be distinct");
  agent.validate();
  if (synthetic) {
    synthetic->validate();
    require(eval_rounds >= 1, ErrorKind::ConfigError, "eval_rounds must be >= 1");
  }
  if (dataset) {
    for (const auto& p : {dataset->source, dataset->target})
      if (!std::filesystem::exists(p)) fail(ErrorKind::ConfigError, "dataset not found: " + p.string());
  }
  if (uses_pca(algorithm)) {
    require(pca_k >= 1, ErrorKind::ConfigError, std::string(to_string(algorithm)) + " needs pca.k >= 1");
    require(pca_fit_rounds >= 1, ErrorKind::ConfigError, "pca.fit_rounds must be >= 1");
  }
  if (certificate) {
    require(synthetic.has_value(), ErrorKind::ConfigError, "certificate needs a synthetic environment");
    require(algorithm == Algorithm::NLinUcb || algorithm == Algorithm::DABand, ErrorKind::ConfigError,
            "certificate needs a neural agent without PCA");
    require(pool_size >= 3, ErrorKind::ConfigError, "pool_size must be >= 3");
  }
}

ExperimentConfig experiment_config_from_json(const json& j) {
  try {
    check_keys(j, kTopKeys, "config");
    ExperimentConfig c;
    c.name = get_or<std::string>(j, "name", c.name);
    c.algorithm = algorithm_from_string(get_or<std::string>(j, "algorithm", "daband"));
    if (!j.contains("env")) fail(ErrorKind::ConfigError, "missing env");
    const json& env = j.at("env");
    const std::string type = get_or<std::string>(env, "type", "synthetic");
    if (type == "synthetic") {
      check_keys(env, {"type", "d_latent", "d_raw", "arms", "shift_strength", "noise_sigma", "kind", "latent_clusters",
                       "cluster_spread"},
                 "env");
      SyntheticPairSpec s;
      s.d_latent = get_or<std::size_t>(env, "d_latent", s.d_latent);
      s.d_raw = get_or<std::size_t>(env, "d_raw", s.d_raw);
      s.arms = get_or<std::size_t>(env, "arms", s.arms);
      s.shift_strength = get_or<double>(env, "shift_strength", s.shift_strength);
      s.noise_sigma = get_or<double>(env, "noise_sigma", s.noise_sigma);
      const std::string kind = get_or<std::string>(env, "kind", "standard");
      if (kind != "standard" && kind != "linear") fail(ErrorKind::ConfigError, "unknown env kind '" + kind + "'");
      s.kind = kind == "linear" ? EnvKind::Linear : EnvKind::Standard;
      s.latent_clusters = get_or<std::size_t>(env, "latent_clusters", s.latent_clusters);
      s.cluster_spread = get_or<double>(env, "cluster_spread", s.cluster_spread);
      c.synthetic = s;
    } else if (type == "dataset") {
      check_keys(env, {"type", "source", "target"}, "env");
      if (!env.contains("source") || !env.contains("target"))
        fail(ErrorKind::ConfigError, "dataset env needs source and target paths");
      c.dataset = DatasetPaths{env.at("source").get<std::string>(), env.at("target").get<std::string>()};
    } else {
      fail(ErrorKind::ConfigError, "unknown env type '" + type + "'");
    }
    c.n_rounds = get_or<std::size_t>(j, "n_rounds", c.n_rounds);
    if (c.synthetic) c.synthetic->n_rounds = c.n_rounds;
    c.eval_rounds = get_or<std::size_t>(j, "eval_rounds", c.eval_rounds);
    c.continued_rounds = get_or<std::size_t>(j, "continued_rounds", c.continued_rounds);
    if (j.contains("pca")) {
      check_keys(j.at("pca"), {"k", "fit_rounds"}, "pca");
      c.pca_k = get_or<std::size_t>(j.at("pca"), "k", c.pca_k);
      c.pca_fit_rounds = get_or<std::size_t>(j.at("pca"), "fit_rounds", c.pca_fit_rounds);
    }
    c.certificate = get_or<bool>(j, "certificate", c.certificate);
    c.pool_size = get_or<std::size_t>(j, "pool_size", c.pool_size);
    c.seeds = get_or<std::vector<std::uint64_t>>(j, "seeds", c.seeds);

    AgentConfig& a = c.agent;
    a.alpha = get_or<double>(j, "alpha", a.alpha);
    if (j.contains("alpha_eval") && !j.at("alpha_eval").is_null()) a.alpha_eval = j.at("alpha_eval").get<double>();
    a.gamma = get_or<double>(j, "gamma", a.gamma);
    a.lambda = get_or<double>(j, "lambda", a.lambda);
    a.episode_len = get_or<std::size_t>(j, "H", a.episode_len);
    if (j.contains("sgd")) {
      const json& sgd = j.at("sgd");
      check_keys(sgd, {"lr", "inner_steps"}, "sgd");
      a.sgd.learning_rate = get_or<double>(sgd, "lr", a.sgd.learning_rate);
      if (sgd.contains("inner_steps") && !sgd.at("inner_steps").is_null())
        a.sgd.inner_steps = sgd.at("inner_steps").get<std::size_t>();
    }
    if (j.contains("discriminator_lr") && !j.at("discriminator_lr").is_null())
      a.discriminator_lr = j.at("discriminator_lr").get<double>();
    if (j.contains("ablation")) {
      const json& ab = j.at("ablation");
      check_keys(ab, {"use_regression_error", "use_predicted_reward"}, "ablation");
      a.flags.use_regression_error = get_or<bool>(ab, "use_regression_error", a.flags.use_regression_error);
      a.flags.use_predicted_reward = get_or<bool>(ab, "use_predicted_reward", a.flags.use_predicted_reward);
    }
    if (j.contains("encoder")) {
      const json& enc = j.at("encoder");
      check_keys(enc, {"hidden", "activation", "latent_dim"}, "encoder");
      a.encoder_hidden = get_or<std::vector<std::size_t>>(enc, "hidden", a.encoder_hidden);
      const std::string act = get_or<std::string>(enc, "activation", "tanh");
      if (act != "tanh" && act != "relu") fail(ErrorKind::ConfigError, "unknown activation '" + act + "'");
      a.encoder_activation = act == "tanh" ? Activation::Tanh : Activation::Relu;
      a.latent_dim = get_or<std::size_t>(enc, "latent_dim", a.latent_dim);
    }
    a.discriminator_hidden = get_or<std::size_t>(j, "discriminator_hidden", a.discriminator_hidden);
    c.validate();
    return c;
  } catch (const json::exception& e) {
    fail(ErrorKind::ConfigError, std::string("malformed config: ") + e.what());
  }
}

json to_json(const ExperimentConfig& c) {
  json j;
  j["name"] = c.name;
  j["algorithm"] = to_string(c.algorithm);
  if (c.synthetic) {
    const SyntheticPairSpec& s = *c.synthetic;
    j["env"] = {{"type", "synthetic"},
                {"d_latent", s.d_latent},
                {"d_raw", s.d_raw},
                {"arms", s.arms},
                {"shift_strength", s.shift_strength},
                {"noise_sigma", s.noise_sigma},
                {"kind", s.kind == EnvKind::Linear ? "linear" : "standard"},
                {"latent_clusters", s.latent_clusters},
                {"cluster_spread", s.cluster_spread}};
  } else if (c.dataset) {
    j["env"] = {{"type", "dataset"}, {"source", c.dataset->source.string()}, {"target", c.dataset->target.string()}};
  }
  j["n_rounds"] = c.n_rounds;
  j["eval_rounds"] = c.eval_rounds;
  j["continued_rounds"] = c.continued_rounds;
  j["pca"] = {{"k", c.pca_k}, {"fit_rounds", c.pca_fit_rounds}};
  j["certificate"] = c.certificate;
  j["pool_size"] = c.pool_size;
  j["seeds"] = c.seeds;
  const AgentConfig& a = c.agent;
  j["alpha"] = a.alpha;
  j["alpha_eval"] = a.alpha_eval ? json(*a.alpha_eval) : json(nullptr);
  j["gamma"] = a.gamma;
  j["lambda"] = a.lambda;
  j["H"] = a.episode_len;
  j["sgd"] = {{"lr", a.sgd.learning_rate}, {"inner_steps", a.sgd.inner_steps ? json(*a.sgd.inner_steps) : json(nullptr)}};
  j["discriminator_lr"] = a.discriminator_lr ? json(*a.discriminator_lr) : json(nullptr);
  j["ablation"] = {{"use_regression_error", a.flags.use_regression_error},
                   {"use_predicted_reward", a.flags.use_predicted_reward}};
  j["encoder"] = {{"hidden", a.encoder_hidden},
                  {"activation", a.encoder_activation == Activation::Tanh ? "tanh" : "relu"},
                  {"latent_dim", a.latent_dim}};
  j["discriminator_hidden"] = a.discriminator_hidden;
  return j;
}

json canonicalize(const json& j) { return to_json(experiment_config_from_json(j)); }

std::string config_fingerprint(const ExperimentConfig& cfg) {
  const std::string text = to_json(cfg).dump();
  std::uint64_t h = 14695981039346656037ULL;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 1099511628211ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

ExperimentConfig load_experiment_config(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) fail(ErrorKind::ConfigError, "config not found: " + path.string());
  json j;
  try {
    j = json::parse(read_text(path));
  } catch (const json::parse_error& e) {
    fail(ErrorKind::ConfigError, path.string() + ": " + e.what());
  }
  return experiment_config_from_json(j);
}

std::pair<double, double> mean_std(const std::vector<double>& values) {
  if (values.empty()) return {0.0, 0.0};
  double mean = 0.0;
  for (double v : values) mean += v;
  mean /= static_cast<double>(values.size());
  if (values.size() < 2) return {mean, 0.0};
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  return {mean, std::sqrt(ss / static_cast<double>(values.size() - 1))};
}

SeedData prepare_seed_data(const ExperimentConfig& cfg, std::uint64_t seed) {
  SeedData d;
  if (cfg.synthetic) {
    SyntheticPairSpec spec = *cfg.synthetic;
    spec.seed = seed;
    spec.n_rounds = cfg.n_rounds;
    DomainPair pair = generate_domain_pair(spec);
    d.source = std::move(pair.source);
    d.target = std::move(pair.target);
    d.eval_target = sample_rounds(spec, pair.truth, cfg.eval_rounds, derive_seed(seed, streams::kEvaluation)).target;
    if (cfg.continued_rounds > 0)
      d.continued = sample_rounds(spec, pair.truth, cfg.continued_rounds, derive_seed(seed, streams::kContinued)).target;
    d.truth = std::move(pair.truth);
    return d;
  }
  d.source = load_featurized_dataset(cfg.dataset->source, Domain::Source);
  d.target = load_featurized_dataset(cfg.dataset->target, Domain::Target);
  require(!d.source.empty() && !d.target.empty(), ErrorKind::StreamExhausted, "empty dataset");
  if (d.source.front().dim() != d.target.front().dim() || d.source.front().arms() != d.target.front().arms())
    fail(ErrorKind::DimensionError, "source and target datasets differ in arms or dimension");
  if (d.source.size() < cfg.n_rounds)
    fail(ErrorKind::StreamExhausted, "source dataset has " + std::to_string(d.source.size()) + " rounds, need " +
                                         std::to_string(cfg.n_rounds));
  d.source.resize(cfg.n_rounds);
  // Target contexts feed training unlabeled; the same rounds score the zero-shot
  // policy and, if requested, continued training.
  d.eval_target = d.target;
  if (cfg.continued_rounds > 0) {
    if (d.target.size() < cfg.continued_rounds)
      fail(ErrorKind::StreamExhausted, "target dataset too short for continued training");
    d.continued.assign(d.target.begin(), d.target.begin() + static_cast<std::ptrdiff_t>(cfg.continued_rounds));
  }
  if (cfg.algorithm == Algorithm::DABand && d.target.size() < cfg.n_rounds)
    fail(ErrorKind::StreamExhausted, "target dataset has fewer than n_rounds rounds");
  return d;
}

AgentConfig seed_agent_config(const ExperimentConfig& cfg, std::uint64_t seed) {
  AgentConfig a = cfg.agent;
  a.seed = seed;
  return a;
}

SeedResult run_seed(const ExperimentConfig& cfg, std::uint64_t seed) {
  SeedData data = prepare_seed_data(cfg, seed);
  const AgentConfig acfg = seed_agent_config(cfg, seed);
  SeedResult out;
  out.seed = seed;

  std::optional<PcaModel> pca;
  if (uses_pca(cfg.algorithm)) {
    const std::span<const Round> pools[] = {data.source, data.target};
    pca = fit_unlabeled_pca(pools, cfg.pca_fit_rounds, cfg.pca_k);
  }
  std::vector<Round> source = pca ? project(*pca, data.source) : data.source;
  std::vector<Round> eval = pca ? project(*pca, data.eval_target) : data.eval_target;
  std::vector<Round> continued = pca ? project(*pca, data.continued) : data.continued;

  if (is_neural(cfg.algorithm)) {
    TrainResult tr = cfg.algorithm == Algorithm::DABand ? run_daband(source, data.target, acfg, cfg.n_rounds)
                                                        : run_nlinucb(source, acfg, cfg.n_rounds);
    out.source_trace = std::move(tr.trace);
    out.episodes = std::move(tr.episodes);
    out.zero_shot_trace = evaluate_zero_shot(tr.agent, eval);
    if (!continued.empty()) out.continued_trace = continued_training(tr.agent, continued);
    if (cfg.certificate) {
      auto [bound, lemmas] = certify_seed(tr.agent, data, out.source_trace, cfg.pool_size, seed);
      out.bound = bound;
      out.lemmas = lemmas;
    }
    out.agent = agent_to_json(tr.agent);
  } else {
    LinUcbRun run = run_linucb(source, acfg.alpha, acfg.gamma);
    out.source_trace = std::move(run.trace);
    out.zero_shot_trace = evaluate_linucb(run, eval, acfg.eval_alpha());
    if (!continued.empty()) out.continued_trace = continue_linucb(run.state, continued);
  }

  const std::string fp = config_fingerprint(cfg);
  for (RegretTrace* t : {&out.source_trace, &out.zero_shot_trace}) {
    t->fingerprint = fp;
    t->seed = seed;
  }
  out.zero_shot_trace.domain = Domain::Target;
  if (out.continued_trace) {
    out.continued_trace->fingerprint = fp;
    out.continued_trace->seed = seed;
    out.continued_trace->domain = Domain::Target;
  }
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  for (std::size_t i = 0; i < eval.size(); ++i) pairs.emplace_back(eval[i].optimal_arm, out.zero_shot_trace.records[i].chosen_arm);
  out.per_class = per_class_accuracy(pairs, eval.front().arms());
  out.zero_shot_accuracy = zero_shot_accuracy(out.zero_shot_trace.total(), out.zero_shot_trace.size());
  return out;
}

ResultBundle run_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  const auto start = std::chrono::steady_clock::now();
  std::vector<std::uint64_t> seeds = cfg.seeds;
  std::sort(seeds.begin(), seeds.end());

  std::vector<SeedResult> results(seeds.size());
  std::vector<std::exception_ptr> errors(seeds.size());
  const auto count = static_cast<long long>(seeds.size());
#pragma omp parallel for schedule(dynamic, 1)
  for (long long i = 0; i < count; ++i) {
    try {
      results[static_cast<std::size_t>(i)] = run_seed(cfg, seeds[static_cast<std::size_t>(i)]);
    } catch (...) {
      errors[static_cast<std::size_t>(i)] = std::current_exception();
    }
  }
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);

  ResultBundle b;
  b.label = to_string(cfg.algorithm);
  b.config = cfg;
  b.fingerprint = config_fingerprint(cfg);
  b.seeds = std::move(results);
  std::vector<double> accs;
  for (const SeedResult& s : b.seeds) accs.push_back(s.zero_shot_accuracy);
  std::tie(b.mean_accuracy, b.std_accuracy) = mean_std(accs);
  b.wall_clock_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return b;
}

std::vector<AblationVariant> ablation_variants() {
  return {{"full", {true, true}}, {"no_R", {false, true}}, {"no_P", {true, false}}, {"no_RP", {false, false}}};
}

std::vector<ResultBundle> run_ablation(const ExperimentConfig& cfg) {
  require(cfg.algorithm == Algorithm::DABand, ErrorKind::ConfigError, "ablation needs algorithm = daband");
  std::vector<ResultBundle> out;
  for (const AblationVariant& v : ablation_variants()) {
    ExperimentConfig c = cfg;
    c.agent.flags = v.flags;
    ResultBundle b = run_experiment(c);
    b.label = v.label;
    out.push_back(std::move(b));
  }
  return out;
}

std::string format_number(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void write_text_atomic(const std::filesystem::path& path, const std::string& text) {
  write_file_atomic(path, std::span<const char>(text.data(), text.size()));
}

std::filesystem::path output_root(const std::filesystem::path& fallback) {
  const char* env = std::getenv("DABAND_OUT_DIR");
  return env && *env ? std::filesystem::path(env) : fallback;
}

std::string trace_csv(const RegretTrace& trace) {
  std::string out = "round,chosen_arm,reward,inst_regret,cum_regret\n";
  for (const TraceRecord& r : trace.records)
    out += std::to_string(r.round_index) + "," + std::to_string(r.chosen_arm) + "," + format_number(r.reward) + "," +
           format_number(r.inst_regret) + "," + format_number(r.cum_regret) + "\n";
  return out;
}

RegretTrace parse_trace_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line != "round,chosen_arm,reward,inst_regret,cum_regret")
    fail(ErrorKind::FormatError, "trace CSV header mismatch");
  RegretTrace trace;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream row(line);
    std::string cell;
    std::vector<std::string> cells;
    while (std::getline(row, cell, ',')) cells.push_back(cell);
    if (cells.size() != 5) fail(ErrorKind::FormatError, "trace CSV line " + std::to_string(lineno) + " has " + std::to_string(cells.size()) + " fields");
    TraceRecord r;
    try {
      r.round_index = std::stoull(cells[0]);
      r.chosen_arm = std::stoull(cells[1]);
      r.reward = std::stod(cells[2]);
      r.inst_regret = std::stod(cells[3]);
      r.cum_regret = std::stod(cells[4]);
    } catch (const std::exception&) {
      fail(ErrorKind::FormatError, "trace CSV line " + std::to_string(lineno) + " is not numeric");
    }
    trace.records.push_back(r);
  }
  return trace;
}

RegretTrace read_trace_csv(const std::filesystem::path& path) { return parse_trace_csv(read_text(path)); }

json summary_json(const ResultBundle& b) {
  json seeds = json::array();
  std::vector<double> cont_final;
  for (const SeedResult& s : b.seeds) {
    json e;
    e["seed"] = s.seed;
    e["zero_shot_accuracy"] = s.zero_shot_accuracy;
    e["zero_shot_regret"] = s.zero_shot_trace.total();
    e["eval_rounds"] = s.zero_shot_trace.size();
    e["per_class_accuracy"] = s.per_class.per_class;
    e["per_class_mean"] = s.per_class.mean;
    e["source_regret"] = s.source_trace.total();
    e["continued_regret"] = s.continued_trace ? json(s.continued_trace->total()) : json(nullptr);
    e["bound_holds"] = s.bound ? json(s.bound->holds) : json(nullptr);
    e["lemma_violations"] = s.lemmas ? json(s.lemmas->total_violations()) : json(nullptr);
    if (s.continued_trace) cont_final.push_back(s.continued_trace->total());
    seeds.push_back(std::move(e));
  }
  json j;
  j["label"] = b.label;
  j["algorithm"] = to_string(b.config.algorithm);
  j["fingerprint"] = b.fingerprint;
  j["config"] = to_json(b.config);
  j["seeds"] = std::move(seeds);
  j["mean_accuracy"] = b.mean_accuracy;
  j["std_accuracy"] = b.std_accuracy;
  if (!cont_final.empty()) {
    const auto [m, sd] = mean_std(cont_final);
    j["continued_regret_mean"] = m;
    j["continued_regret_std"] = sd;
  }
  return j;
}

void write_bundle(const ResultBundle& b, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  json bounds = json::array();
  for (const SeedResult& s : b.seeds) {
    const std::string tag = std::to_string(s.seed);
    write_text_atomic(dir / ("trace_" + tag + ".csv"), trace_csv(s.source_trace));
    write_text_atomic(dir / ("zeroshot_" + tag + ".csv"), trace_csv(s.zero_shot_trace));
    if (s.continued_trace) write_text_atomic(dir / ("continued_" + tag + ".csv"), trace_csv(*s.continued_trace));
    if (!s.episodes.empty()) write_text_atomic(dir / ("losses_" + tag + ".csv"), losses_csv(s.episodes));
    if (s.agent) write_text_atomic(dir / ("agent_" + tag + ".json"), s.agent->dump(1) + "\n");
    if (s.bound) {
      json e = to_json(*s.bound);
      e["seed"] = s.seed;
      if (s.lemmas) e["lemmas"] = to_json(*s.lemmas);
      bounds.push_back(std::move(e));
    }
  }
  if (!bounds.empty()) write_text_atomic(dir / "bound_report.json", bounds.dump(2) + "\n");
  write_text_atomic(dir / "summary.json", summary_json(b).dump(2) + "\n");
}

void emit_plot_data(const std::vector<ResultBundle>& bundles, const std::filesystem::path& dir,
                    const std::string& name, PlotSeries series) {
  require(!bundles.empty(), ErrorKind::EmptyEvaluation, "no bundles to plot");
  std::vector<std::vector<const RegretTrace*>> traces;
  std::size_t n = 0;
  bool first = true;
  for (const ResultBundle& b : bundles) {
    std::vector<const RegretTrace*> ts;
    for (const SeedResult& s : b.seeds) {
      const RegretTrace* t = series == PlotSeries::Source ? &s.source_trace
                             : s.continued_trace           ? &*s.continued_trace
                                                           : nullptr;
      if (!t) fail(ErrorKind::ShapeError, "bundle '" + b.label + "' has no continued-training trace");
      if (first) {
        n = t->size();
        first = false;
      }
      if (t->size() != n)
        fail(ErrorKind::ShapeError, "round count " + std::to_string(t->size()) + " in bundle '" + b.label +
                                        "' differs from " + std::to_string(n));
      ts.push_back(t);
    }
    traces.push_back(std::move(ts));
  }
  std::string out = "round";
  for (const ResultBundle& b : bundles) out += "," + b.label + "_mean," + b.label + "_std";
  out += "\n";
  for (std::size_t i = 0; i < n; ++i) {
    out += std::to_string(i);
    for (const auto& ts : traces) {
      std::vector<double> v;
      for (const RegretTrace* t : ts) v.push_back(t->records[i].cum_regret);
      const auto [m, sd] = mean_std(v);
      out += "," + format_number(m) + "," + format_number(sd);
    }
    out += "\n";
  }
  std::filesystem::create_directories(dir);
  write_text_atomic(dir / ("plot_" + name + ".csv"), out);
}

void write_ablation_table(const std::vector<ResultBundle>& bundles, const std::filesystem::path& path) {
  std::string out = "variant,mean_accuracy,std_accuracy\n";
  for (const ResultBundle& b : bundles)
    out += b.label + "," + format_number(b.mean_accuracy) + "," + format_number(b.std_accuracy) + "\n";
  write_text_atomic(path, out);
}

ResultBundle load_bundle(const std::filesystem::path& dir) {
  json summary;
  try {
    summary = json::parse(read_text(dir / "summary.json"));
    ResultBundle b;
    b.label = summary.at("label").get<std::string>();
    b.config = experiment_config_from_json(summary.at("config"));
    b.fingerprint = summary.at("fingerprint").get<std::string>();
    b.mean_accuracy = summary.at("mean_accuracy").get<double>();
    b.std_accuracy = summary.at("std_accuracy").get<double>();
    for (const json& e : summary.at("seeds")) {
      SeedResult s;
      s.seed = e.at("seed").get<std::uint64_t>();
      const std::string tag = std::to_string(s.seed);
      s.source_trace = read_trace_csv(dir / ("trace_" + tag + ".csv"));
      s.zero_shot_trace = read_trace_csv(dir / ("zeroshot_" + tag + ".csv"));
      if (std::filesystem::exists(dir / ("continued_" + tag + ".csv")))
        s.continued_trace = read_trace_csv(dir / ("continued_" + tag + ".csv"));
      s.zero_shot_accuracy = e.at("zero_shot_accuracy").get<double>();
      b.seeds.push_back(std::move(s));
    }
    return b;
  } catch (const json::exception& e) {
    fail(ErrorKind::FormatError, (dir / "summary.json").string() + ": " + e.what());
  }
}

CertifyResult certify_bundle(const std::filesystem::path& dir) {
  json summary;
  try {
    summary = json::parse(read_text(dir / "summary.json"));
  } catch (const json::parse_error& e) {
    fail(ErrorKind::FormatError, (dir / "summary.json").string() + ": " + e.what());
  }
  const ExperimentConfig cfg = experiment_config_from_json(summary.at("config"));
  if (!cfg.synthetic) fail(ErrorKind::GroundTruthUnavailable, "bundle was not produced on a synthetic environment");
  if (cfg.algorithm != Algorithm::NLinUcb && cfg.algorithm != Algorithm::DABand)
    fail(ErrorKind::GroundTruthUnavailable, "certificate needs a neural agent without PCA");

  CertifyResult out;
  for (const json& e : summary.at("seeds")) {
    const auto seed = e.at("seed").get<std::uint64_t>();
    const std::string tag = std::to_string(seed);
    DABandAgent agent;
    try {
      agent = agent_from_json(json::parse(read_text(dir / ("agent_" + tag + ".json"))));
    } catch (const json::parse_error& err) {
      fail(ErrorKind::FormatError, std::string("agent checkpoint: ") + err.what());
    }
    const RegretTrace trace = read_trace_csv(dir / ("trace_" + tag + ".csv"));
    const SeedData data = prepare_seed_data(cfg, seed);
    auto [bound, lemmas] = certify_seed(agent, data, trace, cfg.pool_size, seed);
    out.seeds.push_back(seed);
    out.bounds.push_back(bound);
    out.lemmas.push_back(lemmas);
  }
  return out;
}

}  // namespace daband
