#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "daband/harness.hpp"
#include "doctest.h"
#include "oracles.hpp"

using namespace daband;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const fs::path kConfigs = DABAND_CONFIG_DIR;

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "daband_test_harness" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

json tiny_config_json(const std::string& algorithm = "daband") {
  json j = json::parse(R"({
    "name": "tiny",
    "env": {"type": "synthetic", "d_latent": 3, "d_raw": 6, "arms": 3, "latent_clusters": 3},
    "n_rounds": 48, "eval_rounds": 30, "continued_rounds": 32,
    "H": 16, "lambda": 1.0, "sgd": {"lr": 0.05},
    "encoder": {"hidden": [8], "latent_dim": 3}, "discriminator_hidden": 4,
    "seeds": [7]
  })");
  j["algorithm"] = algorithm;
  return j;
}

}  // namespace

TEST_CASE("reference config carries the published hyperparameters") {
  const ExperimentConfig cfg = load_experiment_config(kConfigs / "reference.json");
  CHECK(cfg.agent.episode_len == 64);
  CHECK(cfg.agent.alpha == 0.05);
  CHECK(cfg.n_rounds == 1920);
  CHECK(cfg.seeds.size() == 5);
  REQUIRE(cfg.synthetic);
  CHECK(cfg.synthetic->d_latent == 10);
  CHECK(cfg.synthetic->d_raw == 50);
  CHECK(cfg.synthetic->arms == 10);
  CHECK(cfg.synthetic->shift_strength == 1.0);
  CHECK(cfg.synthetic->noise_sigma == 0.05);
  CHECK(cfg.pool_size == 16);
}

TEST_CASE("canonicalization is idempotent and the fingerprint is stable") {
  for (const char* name : {"reference.json", "smoke.json", "linear.json"}) {
    const json raw = json::parse(slurp(kConfigs / name));
    const json once = canonicalize(raw);
    CHECK(canonicalize(once) == once);
    CHECK(config_fingerprint(experiment_config_from_json(raw)) ==
          config_fingerprint(experiment_config_from_json(once)));
    CHECK(config_fingerprint(experiment_config_from_json(raw)).size() == 16);
  }
  json a = tiny_config_json();
  json b = a;
  b["lambda"] = 2.0;
  CHECK(config_fingerprint(experiment_config_from_json(a)) != config_fingerprint(experiment_config_from_json(b)));
}

TEST_CASE("config validation") {
  json unknown = tiny_config_json();
  unknown["lamda"] = 1.0;
  CHECK(oracle::error_kind([&] { experiment_config_from_json(unknown); }) == ErrorKind::ConfigError);

  json no_seeds = tiny_config_json();
  no_seeds["seeds"] = json::array();
  CHECK(oracle::error_kind([&] { experiment_config_from_json(no_seeds); }) == ErrorKind::ConfigError);

  json bad_alg = tiny_config_json("ucb2");
  CHECK(oracle::error_kind([&] { experiment_config_from_json(bad_alg); }) == ErrorKind::ConfigError);

  json pca_missing = tiny_config_json("linucb_p");
  CHECK(oracle::error_kind([&] { experiment_config_from_json(pca_missing); }) == ErrorKind::ConfigError);

  json missing = tiny_config_json();
  missing["env"] = {{"type", "dataset"}, {"source", "/nonexistent/src.dabd"}, {"target", "/nonexistent/tgt.dabd"}};
  try {
    experiment_config_from_json(missing);
    FAIL("expected ConfigError");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::ConfigError);
    CHECK(std::string(e.what()).find("/nonexistent/src.dabd") != std::string::npos);
  }
  CHECK(oracle::error_kind([] { load_experiment_config("/nonexistent/config.json"); }) == ErrorKind::ConfigError);
}

TEST_CASE("sample mean and standard deviation") {
  CHECK(mean_std({2.0}) == std::pair<double, double>{2.0, 0.0});
  const auto [m, s] = mean_std({1.0, 2.0, 3.0, 4.0});
  CHECK(m == 2.5);
  CHECK(std::abs(s - std::sqrt(5.0 / 3.0)) <= 1e-15);
}

TEST_CASE("trace CSV round trip") {
  RegretTrace t;
  t.push(2, 1.0, 0.0);
  t.push(0, 1.0, 1.0);
  t.push(1, 0.7, 0.1);
  const std::string csv = trace_csv(t);
  CHECK(csv.rfind("round,chosen_arm,reward,inst_regret,cum_regret\n", 0) == 0);
  CHECK(parse_trace_csv(csv).records == t.records);
  CHECK(format_number(0.1) == "0.10000000000000001");
  CHECK(oracle::error_kind([] { parse_trace_csv("round,arm\n"); }) == ErrorKind::FormatError);
  CHECK(oracle::error_kind([] {
          parse_trace_csv("round,chosen_arm,reward,inst_regret,cum_regret\n1,2,x,0,0\n");
        }) == ErrorKind::FormatError);
}

TEST_CASE("rerunning seeds = [7] gives byte-identical bundles") {
  const ExperimentConfig cfg = experiment_config_from_json(tiny_config_json());
  const fs::path a = scratch("rerun_a"), b = scratch("rerun_b");
  write_bundle(run_experiment(cfg), a);
  write_bundle(run_experiment(cfg), b);
  std::size_t files = 0;
  for (const auto& entry : fs::directory_iterator(a)) {
    ++files;
    const fs::path other = b / entry.path().filename();
    REQUIRE(fs::exists(other));
    CHECK(slurp(entry.path()) == slurp(other));
  }
  CHECK(files >= 6);
  for (const auto& entry : fs::directory_iterator(a)) CHECK(entry.path().extension() != ".tmp");
}

TEST_CASE("zero-shot accuracy in the summary matches the persisted trace") {
  json j = tiny_config_json();
  j["seeds"] = {1, 4};
  const fs::path dir = scratch("acc_identity");
  write_bundle(run_experiment(experiment_config_from_json(j)), dir);
  const json summary = json::parse(slurp(dir / "summary.json"));
  std::vector<double> accs;
  for (const json& e : summary["seeds"]) {
    const RegretTrace t = read_trace_csv(dir / ("zeroshot_" + std::to_string(e["seed"].get<int>()) + ".csv"));
    CHECK(t.size() == 30);
    std::size_t hits = 0;
    for (const TraceRecord& r : t.records) hits += r.inst_regret == 0.0;
    CHECK(e["zero_shot_accuracy"].get<double>() == 1.0 - t.total() / 30.0);
    CHECK(std::abs(e["zero_shot_accuracy"].get<double>() - hits / 30.0) <= 1e-12);
    accs.push_back(e["zero_shot_accuracy"].get<double>());
  }
  CHECK(summary["mean_accuracy"].get<double>() == mean_std(accs).first);
  const ResultBundle back = load_bundle(dir);
  CHECK(back.seeds.size() == 2);
  CHECK(back.seeds[0].seed == 1);
  CHECK(back.fingerprint == summary["fingerprint"].get<std::string>());
}

TEST_CASE("every algorithm runs through the harness") {
  for (const char* alg : {"linucb", "linucb_p", "nlinucb", "nlinucb_p", "daband"}) {
    json j = tiny_config_json(alg);
    j["pca"] = {{"k", 3}, {"fit_rounds", 40}};
    const ResultBundle b = run_experiment(experiment_config_from_json(j));
    REQUIRE(b.seeds.size() == 1);
    CHECK(b.seeds[0].source_trace.size() == 48);
    CHECK(b.seeds[0].zero_shot_trace.size() == 30);
    REQUIRE(b.seeds[0].continued_trace);
    CHECK(b.seeds[0].continued_trace->size() == 32);
    CHECK(b.mean_accuracy == b.seeds[0].zero_shot_accuracy);
    CHECK(b.label == alg);
  }
}

TEST_CASE("ablation variants are labeled exactly") {
  std::vector<std::string> labels;
  for (const AblationVariant& v : ablation_variants()) labels.push_back(v.label);
  CHECK(labels == std::vector<std::string>{"full", "no_R", "no_P", "no_RP"});

  const std::vector<ResultBundle> bundles = run_ablation(experiment_config_from_json(tiny_config_json()));
  REQUIRE(bundles.size() == 4);
  CHECK(bundles[0].config.agent.flags == LossFlags{true, true});
  CHECK(bundles[3].config.agent.flags == LossFlags{false, false});
  const fs::path dir = scratch("ablation");
  write_ablation_table(bundles, dir / "ablation.csv");
  const std::string table = slurp(dir / "ablation.csv");
  CHECK(table.rfind("variant,mean_accuracy,std_accuracy\nfull,", 0) == 0);
  CHECK(table.find("\nno_RP,") != std::string::npos);

  CHECK(oracle::error_kind([] { run_ablation(experiment_config_from_json(tiny_config_json("nlinucb"))); }) ==
        ErrorKind::ConfigError);
}

TEST_CASE("plot data") {
  json j = tiny_config_json("linucb");
  j["n_rounds"] = 10;
  j["seeds"] = {0, 1, 2};
  const ResultBundle b = run_experiment(experiment_config_from_json(j));
  const fs::path dir = scratch("plot");
  emit_plot_data({b}, dir, "single", PlotSeries::Source);
  std::istringstream in(slurp(dir / "plot_single.csv"));
  std::string line;
  std::getline(in, line);
  CHECK(line == "round,linucb_mean,linucb_std");
  std::size_t rows = 0;
  while (std::getline(in, line)) {
    std::vector<double> v;
    for (const SeedResult& s : b.seeds) v.push_back(s.source_trace.records[rows].cum_regret);
    const auto [m, sd] = mean_std(v);
    CHECK(line == std::to_string(rows) + "," + format_number(m) + "," + format_number(sd));
    ++rows;
  }
  CHECK(rows == 10);

  json k = j;
  k["n_rounds"] = 12;
  const ResultBundle other = run_experiment(experiment_config_from_json(k));
  CHECK(oracle::error_kind([&] { emit_plot_data({b, other}, dir, "bad", PlotSeries::Source); }) ==
        ErrorKind::ShapeError);
}

TEST_CASE("plot data from persisted traces") {
  json j = tiny_config_json("nlinucb");
  j["seeds"] = {2, 5};
  const fs::path dir = scratch("plot_persisted");
  write_bundle(run_experiment(experiment_config_from_json(j)), dir / "run");
  const ResultBundle loaded = load_bundle(dir / "run");
  emit_plot_data({loaded}, dir, "continued", PlotSeries::Continued);
  std::istringstream in(slurp(dir / "plot_continued.csv"));
  std::string line;
  std::getline(in, line);
  const RegretTrace t2 = read_trace_csv(dir / "run" / "continued_2.csv");
  const RegretTrace t5 = read_trace_csv(dir / "run" / "continued_5.csv");
  std::size_t i = 0;
  while (std::getline(in, line)) {
    const double mean = std::stod(line.substr(line.find(',') + 1));
    CHECK(mean == (t2.records[i].cum_regret + t5.records[i].cum_regret) / 2.0);
    ++i;
  }
  CHECK(i == 32);
}

TEST_CASE("certificate from a written bundle") {
  json j = tiny_config_json();
  j["certificate"] = true;
  j["pool_size"] = 5;
  j["seeds"] = {3};
  const ResultBundle b = run_experiment(experiment_config_from_json(j));
  REQUIRE(b.seeds[0].bound);
  CHECK(b.seeds[0].bound->holds);
  CHECK(b.seeds[0].lemmas->total_violations() == 0);
  const fs::path dir = scratch("certify");
  write_bundle(b, dir);
  const CertifyResult again = certify_bundle(dir);
  REQUIRE(again.bounds.size() == 1);
  CHECK(to_json(again.bounds[0]) == to_json(*b.seeds[0].bound));
  CHECK(to_json(again.lemmas[0]) == to_json(*b.seeds[0].lemmas));
}

TEST_CASE("dataset mode plays the stored rounds") {
  const fs::path dir = scratch("dataset");
  SyntheticPairSpec spec;
  spec.d_latent = 3;
  spec.d_raw = 6;
  spec.arms = 3;
  spec.n_rounds = 40;
  const DomainPair pair = generate_domain_pair(spec);
  save_featurized_dataset(pair.source, dir / "s.dabd");
  save_featurized_dataset(pair.target, dir / "t.dabd");
  json j = tiny_config_json();
  j["env"] = {{"type", "dataset"}, {"source", (dir / "s.dabd").string()}, {"target", (dir / "t.dabd").string()}};
  j["n_rounds"] = 40;
  j["continued_rounds"] = 0;
  const ResultBundle b = run_experiment(experiment_config_from_json(j));
  CHECK(b.seeds[0].zero_shot_trace.size() == 40);
  CHECK(!b.seeds[0].continued_trace);

  j["certificate"] = true;
  CHECK(oracle::error_kind([&] { experiment_config_from_json(j); }) == ErrorKind::ConfigError);
}

TEST_CASE("output root honors DABAND_OUT_DIR") {
  ::setenv("DABAND_OUT_DIR", "/tmp/somewhere", 1);
  CHECK(output_root("results") == fs::path("/tmp/somewhere"));
  ::unsetenv("DABAND_OUT_DIR");
  CHECK(output_root("results") == fs::path("results"));
}
