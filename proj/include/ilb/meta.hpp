#ifndef ILB_META_HPP
#define ILB_META_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "ilb/core.hpp"
#include "ilb/learners.hpp"

namespace ilb {

// ---------------------------------------------------------------------------
// Expert-usage schedules
// ---------------------------------------------------------------------------

// beta_i sequence controlling how often the expert takes over during data
// collection. indicator: beta_1 = 1 then 0. geometric(p): p^{i-1}.
// constant(c): c at every iteration (mean does not vanish; for ablations).
struct BetaSchedule {
  enum class Kind { indicator, geometric, constant };
  Kind kind = Kind::indicator;
  double p = 0.0;

  static BetaSchedule indicator();
  static BetaSchedule geometric(double p);
  static BetaSchedule constant(double c);
  static BetaSchedule parse(const std::string& text);  // "indicator" | "geometric:0.5" | ...
  std::string name() const;

  double beta(int i) const;       // i is 1-based
  double mean(int n) const;       // (1/N) sum_{i<=N} beta_i
};

// ---------------------------------------------------------------------------
// Run records
// ---------------------------------------------------------------------------

struct IterationMetrics {
  int iteration = 0;
  std::int64_t dataset_size = 0;
  double train_loss = 0.0;
  double val_loss = 0.0;
  double env_metric = 0.0;
  double beta = 0.0;
};

struct RunRecord {
  std::string algorithm;
  // trained[i] is the policy trained after iteration i+1; initial_policy is
  // the (never-trained) policy the first collection would fall back to.
  PolicyPtr initial_policy;
  std::vector<PolicyPtr> trained;
  std::vector<IterationMetrics> metrics;
  std::vector<AggregateDataset> iteration_datasets;
  // smile / searn: per-iteration mixture weights, expert first.
  std::vector<std::vector<double>> mixture_weights;

  int n_iterations() const { return static_cast<int>(trained.size()); }
  // Policy executed (mixed with the expert) at iteration i, 1-based: the
  // online learner's i-th iterate.
  PolicyPtr played(int i) const { return i <= 1 ? initial_policy : trained[i - 2]; }
};

struct RunOptions {
  int eval_episodes = 3;    // rollouts per iteration for val_loss/env_metric
  int eval_horizon = 0;     // 0: same as training horizon
  bool evaluate_each_iteration = true;
};

// ---------------------------------------------------------------------------
// Meta-algorithms
// ---------------------------------------------------------------------------

// Dataset aggregation: iteration i samples m trajectories under
// beta_i * expert + (1 - beta_i) * current policy (per-step mixing), labels
// every visited state with the expert, aggregates, and retrains on the
// union. Requires beta_1 = 1 unless an initial policy is supplied.
RunRecord dagger_run(const EnvModel& model, const LearnerConfig& learner, int N, int m, int T,
                     const BetaSchedule& schedule, const SurrogateLoss& loss, std::uint64_t seed,
                     const RunOptions& options = {}, PolicyPtr initial_policy = nullptr);

// Stochastic mixing: iteration n trains on data from the current mixture
// only and then moves probability alpha*(1-alpha)^{n-1} from the expert to
// the new policy; the expert keeps weight (1-alpha)^n.
RunRecord smile_run(const EnvModel& model, const LearnerConfig& learner, int N, int m, int T,
                    double alpha, const SurrogateLoss& loss, std::uint64_t seed,
                    const RunOptions& options = {});

// Greedy mixture update: the newest policy receives weight alpha and all
// existing weights shrink by (1-alpha); alpha = 1 is pure policy iteration.
RunRecord searn_greedy_run(const EnvModel& model, const LearnerConfig& learner, int N, int m,
                           int T, double alpha, const SurrogateLoss& loss, std::uint64_t seed,
                           const RunOptions& options = {});

// Mixture weights after n iterations, expert component first.
std::vector<double> smile_weights(double alpha, int n);
std::vector<double> searn_greedy_weights(double alpha, int n);

// Removes the expert component from a smile mixture and rescales the
// remaining weights to sum to 1. n = 0 (pure expert) is an error.
std::vector<double> smile_renormalized_weights(double alpha, int n);
PolicyPtr smile_renormalize(const RunRecord& record, double alpha, int n);

// Test-time mixture policy of a smile/searn record at iteration n (expert
// included, as executed during training).
PolicyPtr mixture_policy_at(const RunRecord& record, int n);

// Non-stationary policy: one sub-policy per time step, trained front to
// back on the states its own prefix induces. Guarded to T <= 64.
class NonStationaryPolicy : public Policy {
 public:
  explicit NonStationaryPolicy(std::vector<PolicyPtr> per_step);
  ActionVal act(const StateObs& s, RngStream& rng) const override;
  std::optional<std::vector<double>> scores(const StateObs& s) const override;
  const char* kind() const override { return "learned"; }
  const std::vector<PolicyPtr>& per_step() const { return per_step_; }

 private:
  std::vector<PolicyPtr> per_step_;
};

PolicyPtr forward_train(const EnvModel& model, const LearnerConfig& learner, int T, int m,
                        const SurrogateLoss& loss, std::uint64_t seed);

// Plain behavior cloning on n_traj expert demonstrations.
PolicyPtr supervised_train(const EnvModel& model, const LearnerConfig& learner, int n_traj, int T,
                           const SurrogateLoss& loss, std::uint64_t seed);

// Iterative supervised baseline: adds m expert trajectories per iteration
// and refits, so learning curves line up with the iterative methods at
// equal data.
RunRecord supervised_run(const EnvModel& model, const LearnerConfig& learner, int N, int m, int T,
                         const SurrogateLoss& loss, std::uint64_t seed,
                         const RunOptions& options = {});

// Picks the trained policy with the smallest mean expert-disagreement loss
// over m_val fresh rollouts under the candidate itself; ties resolve to the
// earliest iteration. Returns the index (1-based) through best_index.
PolicyPtr select_best_on_validation(const RunRecord& record, const EnvModel& model,
                                    const SurrogateLoss& loss, int m_val, int T,
                                    std::uint64_t seed, int* best_index = nullptr);

// Regret ledger over the record's played sequence against its per-iteration
// datasets.
RegretLedger run_regret(const RunRecord& record, const EnvModel& model, const SurrogateLoss& loss,
                        const LearnerConfig& learner, std::uint64_t seed);

// Metric-versus-cumulative-data series of a run: one (dataset size, env
// metric) point per iteration, the learning-curve axes.
std::vector<std::pair<double, double>> env_metric_series(const RunRecord& record);

}  // namespace ilb

#endif  // ILB_META_HPP
