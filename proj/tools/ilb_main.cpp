#include <CLI11.hpp>
#include <fstream>
#include <iostream>

#include "ilb/bounds.hpp"
#include "ilb/harness.hpp"

namespace {

int cmd_run(const std::string& config_path, std::uint64_t seed, bool seed_set,
            const std::string& out_dir) {
  ilb::ExperimentConfig cfg = ilb::ExperimentConfig::parse_file(config_path);
  if (seed_set) cfg.seed = seed;
  if (!out_dir.empty()) cfg.out_dir = out_dir;
  const ilb::RunArtifacts art = ilb::run_experiment(cfg);
  std::cout << art.summary << "\n";
  std::cout << "artifacts written to " << art.out_dir << "\n";
  return 0;
}

int cmd_verify(const std::string& suite, const std::string& out_path) {
  const ilb::BoundReport report = ilb::verify_bounds(suite);
  if (out_path.empty()) {
    report.to_csv(std::cout);
  } else {
    std::ofstream out(out_path);
    if (!out) throw ilb::IoError("cannot write " + out_path);
    report.to_csv(out);
  }
  int failures = 0;
  for (const auto& r : report.rows) {
    if (!r.pass) ++failures;
  }
  std::cerr << "suite " << suite << ": " << report.rows.size() << " rows, " << failures
            << " failing\n";
  return failures == 0 ? 0 : 3;
}

int cmd_curve(const std::vector<std::string>& run_dirs, const std::string& out_path) {
  if (out_path.empty()) {
    ilb::emit_learning_curve(run_dirs, std::cout);
  } else {
    std::ofstream out(out_path);
    if (!out) throw ilb::IoError("cannot write " + out_path);
    ilb::emit_learning_curve(run_dirs, out);
  }
  return 0;
}

int cmd_dataset_inspect(const std::string& path) {
  const ilb::AggregateDataset ds = ilb::AggregateDataset::load_file(path);
  std::cout << "dataset: " << path << "\n";
  std::cout << "examples: " << ds.size() << "\n";
  std::cout << "feature_dim: " << ds.feature_dim() << "\n";
  std::cout << "action: " << ds.action_spec().describe() << "\n";
  std::map<int, std::size_t> per_iter;
  for (const auto& ex : ds.examples()) ++per_iter[ex.iteration_tag];
  for (const auto& [iter, count] : per_iter) {
    std::cout << "iteration " << iter << ": " << count << " examples\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"imitation-learning benchmark harness"};
  app.require_subcommand(1);

  std::string config_path, out_path, suite, dataset_path;
  std::uint64_t seed = 0;
  std::vector<std::string> run_dirs;

  auto* run = app.add_subcommand("run", "execute an experiment config");
  run->add_option("--config", config_path, "experiment config file")->required();
  auto* seed_opt = run->add_option("--seed", seed, "override the master seed");
  run->add_option("--out", out_path, "override the output directory");

  auto* verify = app.add_subcommand("verify", "run a bound-verification suite");
  verify->add_option("--suite", suite,
                     "compounding | forward | lemma_tv | dagger_regret | concentration")
      ->required();
  verify->add_option("--out", out_path, "write the report CSV here");

  auto* curve = app.add_subcommand("curve", "emit a learning-curve CSV from run directories");
  curve->add_option("--runs", run_dirs, "run directories")->required()->expected(-1);
  curve->add_option("--out", out_path, "write the curve CSV here");

  auto* dataset = app.add_subcommand("dataset", "dataset utilities");
  auto* inspect = dataset->add_subcommand("inspect", "summarize a dataset file");
  inspect->add_option("file", dataset_path, "dataset file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  try {
    if (*run) return cmd_run(config_path, seed, seed_opt->count() > 0, out_path);
    if (*verify) return cmd_verify(suite, out_path);
    if (*curve) return cmd_curve(run_dirs, out_path);
    if (*dataset) {
      if (*inspect) return cmd_dataset_inspect(dataset_path);
      std::cerr << "dataset: missing subcommand (try: inspect)\n";
      return 1;
    }
  } catch (const ilb::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 1;
}
