#ifndef ILB_HARNESS_HPP
#define ILB_HARNESS_HPP

#include <iosfwd>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "ilb/meta.hpp"

namespace ilb {

// Flat key = value experiment description; every key has a default and two
// runs from identical configs produce identical artifacts.
struct ExperimentConfig {
  std::string algorithm = "dagger";
  std::string env = "racer";
  std::string learner = "ridge";
  double lambda = 1e-3;
  int epochs = 5;
  std::string loss = "squared";
  std::string schedule = "indicator";
  double alpha = 0.1;
  int iterations = 20;       // N
  int trajectories = 0;      // m; 0 matches the per-iteration data volume
                             // of the original experiments (~1000 points
                             // for the racer, ~5000 for the platformer)
  int horizon = 0;           // T; 0 picks the environment default
  int m_val = 5;
  int eval_m = 3;
  std::uint64_t seed = 1;
  std::string out_dir = "runs/exp";
  std::vector<std::string> sweep_schedules;  // expands into one run per entry
  std::map<std::string, std::string> env_params;  // env.* keys, verbatim

  static ExperimentConfig parse(std::istream& in);
  static ExperimentConfig parse_file(const std::string& path);
  void serialize(std::ostream& out) const;  // fully resolved snapshot

  double env_param(const std::string& key, double fallback) const;
  std::string env_param_str(const std::string& key, const std::string& fallback) const;
};

// Instantiates the configured environment model; horizon_out receives the
// effective horizon when the config leaves it at 0.
std::unique_ptr<EnvModel> make_env_model(const ExperimentConfig& cfg, int& horizon_out);

struct RunArtifacts {
  RunRecord record;
  std::string out_dir;
  std::string summary;
  int selected_iteration = 0;
};

// Executes the configured meta-algorithm and persists config.snapshot,
// metrics.csv, model_<i> files, and the aggregated dataset.
RunArtifacts run_experiment(const ExperimentConfig& cfg);

// Learning-curve table over completed run directories: one row per
// (method, checkpoint iteration) with a Student-t 95% interval over runs.
void emit_learning_curve(const std::vector<std::string>& run_dirs, std::ostream& out);

// Two-sided Student-t critical value at 95% for df >= 1.
double student_t_95(int df);

struct CurvePoint {
  std::string method;
  double cumulative_data = 0.0;
  double mean = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
};
std::vector<CurvePoint> learning_curve_points(const std::vector<std::string>& run_dirs);

}  // namespace ilb

#endif  // ILB_HARNESS_HPP
