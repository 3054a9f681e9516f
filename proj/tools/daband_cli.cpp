#include <cstdio>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "daband/harness.hpp"

using namespace daband;
namespace fs = std::filesystem;

namespace {

void print_bundle(const ResultBundle& b) {
  std::printf("%-10s acc %.4f +- %.4f  (%zu seeds, %.1fs, fingerprint %s)\n", b.label.c_str(), b.mean_accuracy,
              b.std_accuracy, b.seeds.size(), b.wall_clock_seconds, b.fingerprint.c_str());
}

int cmd_run(const std::string& config, const fs::path& out) {
  const ExperimentConfig cfg = load_experiment_config(config);
  const ResultBundle b = run_experiment(cfg);
  write_bundle(b, out);
  print_bundle(b);
  return 0;
}

int cmd_ablate(const std::string& config, const fs::path& out) {
  const ExperimentConfig cfg = load_experiment_config(config);
  const std::vector<ResultBundle> bundles = run_ablation(cfg);
  for (const ResultBundle& b : bundles) {
    write_bundle(b, out / b.label);
    print_bundle(b);
  }
  write_ablation_table(bundles, out / "ablation.csv");
  return 0;
}

int cmd_gen_data(const std::string& config, const fs::path& out) {
  const ExperimentConfig cfg = load_experiment_config(config);
  if (!cfg.synthetic) fail(ErrorKind::ConfigError, "gen-data needs a synthetic environment");
  fs::create_directories(out);
  for (std::uint64_t seed : cfg.seeds) {
    const SeedData d = prepare_seed_data(cfg, seed);
    const std::string tag = std::to_string(seed);
    save_featurized_dataset(d.source, out / ("source_" + tag + ".dabd"));
    save_featurized_dataset(d.target, out / ("target_" + tag + ".dabd"));
    save_featurized_dataset(d.eval_target, out / ("eval_target_" + tag + ".dabd"));
    std::printf("seed %s: %zu rounds, K=%zu, d=%zu\n", tag.c_str(), d.source.size(), d.source.front().arms(),
                d.source.front().dim());
  }
  return 0;
}

int cmd_certify(const fs::path& bundle, const fs::path& out) {
  const CertifyResult r = certify_bundle(bundle);
  nlohmann::json reports = nlohmann::json::array();
  bool ok = true;
  for (std::size_t i = 0; i < r.seeds.size(); ++i) {
    nlohmann::json e = to_json(r.bounds[i]);
    e["seed"] = r.seeds[i];
    e["lemmas"] = to_json(r.lemmas[i]);
    reports.push_back(e);
    ok = ok && r.bounds[i].holds && r.lemmas[i].total_violations() == 0;
    std::printf("seed %llu: lhs %.17g <= rhs %.17g : %s, lemma violations %zu\n",
                static_cast<unsigned long long>(r.seeds[i]), r.bounds[i].lhs_target_regret, r.bounds[i].rhs_total,
                r.bounds[i].holds ? "holds" : "VIOLATED", r.lemmas[i].total_violations());
  }
  fs::create_directories(out);
  write_text_atomic(out / "bound_report.json", reports.dump(2) + "\n");
  return ok ? 0 : 2;
}

int cmd_plot(const std::vector<std::string>& dirs, const fs::path& out, const std::string& name,
             const std::string& series) {
  if (series != "source" && series != "continued")
    fail(ErrorKind::ConfigError, "series must be 'source' or 'continued'");
  std::vector<ResultBundle> bundles;
  for (const std::string& d : dirs) bundles.push_back(load_bundle(d));
  emit_plot_data(bundles, out, name, series == "source" ? PlotSeries::Source : PlotSeries::Continued);
  return 0;
}

int cmd_validate(const std::string& config) {
  const ExperimentConfig cfg = load_experiment_config(config);
  std::cout << to_json(cfg).dump(2) << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Domain-adaptive neural contextual bandits"};
  app.require_subcommand(1);

  std::string config, out, bundle, name = "regret", series = "continued";
  std::vector<std::string> bundles;

  auto* run = app.add_subcommand("run", "Train and evaluate every seed of a config");
  run->add_option("config", config, "Experiment config (JSON)")->required();
  run->add_option("-o,--out", out, "Output directory (default $DABAND_OUT_DIR or results)");

  auto* ablate = app.add_subcommand("ablate", "Run the four loss-term variants");
  ablate->add_option("config", config, "Experiment config (JSON)")->required();
  ablate->add_option("-o,--out", out, "Output directory");

  auto* gen = app.add_subcommand("gen-data", "Write the synthetic streams of each seed as DABD files");
  gen->add_option("config", config, "Experiment config (JSON)")->required();
  gen->add_option("-o,--out", out, "Output directory");

  auto* certify = app.add_subcommand("certify", "Recompute the bound certificate of a finished bundle");
  certify->add_option("bundle", bundle, "Bundle directory written by run")->required();
  certify->add_option("-o,--out", out, "Where bound_report.json goes (default: the bundle)");

  auto* plot = app.add_subcommand("plot-data", "Mean/std cumulative regret per round across bundles");
  plot->add_option("bundles", bundles, "Bundle directories")->required();
  plot->add_option("-o,--out", out, "Output directory");
  plot->add_option("-n,--name", name, "Plot name (plot_<name>.csv)");
  plot->add_option("-s,--series", series, "source or continued");

  auto* validate = app.add_subcommand("validate-config", "Parse a config and print its canonical form");
  validate->add_option("config", config, "Experiment config (JSON)")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return e.get_exit_code() == 0 ? 0 : 1;
  }

  const fs::path out_dir = out.empty() ? output_root("results") : fs::path(out);
  try {
    if (*run) return cmd_run(config, out_dir);
    if (*ablate) return cmd_ablate(config, out_dir);
    if (*gen) return cmd_gen_data(config, out_dir);
    if (*certify) return cmd_certify(bundle, out.empty() ? fs::path(bundle) : fs::path(out));
    if (*plot) return cmd_plot(bundles, out_dir, name, series);
    if (*validate) return cmd_validate(config);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return e.kind() == ErrorKind::ConfigError ? 1 : 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 1;
}
