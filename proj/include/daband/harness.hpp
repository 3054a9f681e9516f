#pragma once

// Experiment configuration, seeded runs over all algorithms, ablations,
// persistence of result bundles and plot data.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "daband/certificate.hpp"
#include "daband/daband.hpp"
#include "daband/linucb.hpp"
#include "json.hpp"

namespace daband {

enum class Algorithm { LinUcb, LinUcbP, NLinUcb, NLinUcbP, DABand };

const char* to_string(Algorithm a);
Algorithm algorithm_from_string(const std::string& s);

struct DatasetPaths {
  std::filesystem::path source;
  std::filesystem::path target;
};

struct ExperimentConfig {
  std::string name = "experiment";
  Algorithm algorithm = Algorithm::DABand;
  std::optional<SyntheticPairSpec> synthetic;  // exactly one of synthetic / dataset
  std::optional<DatasetPaths> dataset;
  std::size_t n_rounds = 1920;
  std::size_t eval_rounds = 1000;       // held-out zero-shot rounds (synthetic)
  std::size_t continued_rounds = 0;     // 0 disables continued training
  std::size_t pca_k = 0;                // required by the *_p algorithms
  std::size_t pca_fit_rounds = 200;
  bool certificate = false;
  std::size_t pool_size = 16;
  std::vector<std::uint64_t> seeds{0};
  AgentConfig agent;  // α, α_eval, γ, λ, H, SGD, ablation flags, architecture

  void validate() const;
};

ExperimentConfig experiment_config_from_json(const nlohmann::json& j);
nlohmann::json to_json(const ExperimentConfig& cfg);
/// Parse and re-serialize with every field explicit.
nlohmann::json canonicalize(const nlohmann::json& j);
/// FNV-1a 64 of the canonical dump, as 16 hex digits.
std::string config_fingerprint(const ExperimentConfig& cfg);
ExperimentConfig load_experiment_config(const std::filesystem::path& path);

struct SeedResult {
  std::uint64_t seed = 0;
  RegretTrace source_trace;
  RegretTrace zero_shot_trace;
  PerClassAccuracy per_class;
  double zero_shot_accuracy = 0.0;
  std::optional<RegretTrace> continued_trace;
  std::vector<LossBreakdown> episodes;
  std::optional<BoundReport> bound;
  std::optional<LemmaReport> lemmas;
  std::optional<nlohmann::json> agent;  // neural algorithms only
};

struct ResultBundle {
  std::string label;
  ExperimentConfig config;
  std::string fingerprint;
  std::vector<SeedResult> seeds;  // sorted by seed
  double mean_accuracy = 0.0;
  double std_accuracy = 0.0;  // sample standard deviation
  double wall_clock_seconds = 0.0;  // reported on the console only
};

/// Sample mean and standard deviation (0 for a single value).
std::pair<double, double> mean_std(const std::vector<double>& values);

/// The rounds one seed plays on: training streams, zero-shot evaluation
/// rounds and the continued-training stream.
struct SeedData {
  std::vector<Round> source;
  std::vector<Round> target;
  std::vector<Round> eval_target;
  std::vector<Round> continued;
  std::optional<GroundTruth> truth;
};

SeedData prepare_seed_data(const ExperimentConfig& cfg, std::uint64_t seed);

/// Agent configuration for one seed.
AgentConfig seed_agent_config(const ExperimentConfig& cfg, std::uint64_t seed);

SeedResult run_seed(const ExperimentConfig& cfg, std::uint64_t seed);
ResultBundle run_experiment(const ExperimentConfig& cfg);

struct AblationVariant {
  std::string label;
  LossFlags flags;
};
/// full, no_R, no_P, no_RP.
std::vector<AblationVariant> ablation_variants();
std::vector<ResultBundle> run_ablation(const ExperimentConfig& cfg);

/// Writes trace_<seed>.csv, zeroshot_<seed>.csv, continued_<seed>.csv,
/// losses_<seed>.csv, agent_<seed>.json, summary.json and bound_report.json.
void write_bundle(const ResultBundle& bundle, const std::filesystem::path& dir);
nlohmann::json summary_json(const ResultBundle& bundle);

std::string trace_csv(const RegretTrace& trace);
RegretTrace parse_trace_csv(const std::string& text);
RegretTrace read_trace_csv(const std::filesystem::path& path);

/// Bundle reloaded from a directory written by write_bundle (traces, summary
/// numbers and config; agents and loss histories are not reloaded).
ResultBundle load_bundle(const std::filesystem::path& dir);

enum class PlotSeries { Source, Continued };

/// plot_<name>.csv: round, then <label>_mean and <label>_std per bundle.
void emit_plot_data(const std::vector<ResultBundle>& bundles, const std::filesystem::path& dir,
                    const std::string& name, PlotSeries series);

/// One row per ablation variant: label, mean, std.
void write_ablation_table(const std::vector<ResultBundle>& bundles, const std::filesystem::path& path);

/// Certificate and lemma checks recomputed from a persisted bundle directory.
struct CertifyResult {
  std::vector<std::uint64_t> seeds;
  std::vector<BoundReport> bounds;
  std::vector<LemmaReport> lemmas;
};
CertifyResult certify_bundle(const std::filesystem::path& dir);

/// "%.17g".
std::string format_number(double v);
void write_text_atomic(const std::filesystem::path& path, const std::string& text);
/// $DABAND_OUT_DIR, else `fallback`.
std::filesystem::path output_root(const std::filesystem::path& fallback);

}  // namespace daband
