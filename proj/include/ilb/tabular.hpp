#ifndef ILB_TABULAR_HPP
#define ILB_TABULAR_HPP

#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "ilb/core.hpp"

namespace ilb {

// Finite-horizon MDP with per-(state, action) costs in [0, 1].
struct TabularMDP {
  int n_states = 0;
  int n_actions = 0;
  int horizon = 0;
  std::vector<double> transition;  // [s * A * S + a * S + s']
  std::vector<double> cost;        // [s * A + a]
  std::vector<double> initial;     // length n_states

  double p(int s, int a, int s2) const { return transition[(s * n_actions + a) * n_states + s2]; }
  double& p(int s, int a, int s2) { return transition[(s * n_actions + a) * n_states + s2]; }
  double c(int s, int a) const { return cost[s * n_actions + a]; }
  double& c(int s, int a) { return cost[s * n_actions + a]; }

  // Throws ConfigError unless rows sum to 1 within 1e-12 and costs lie in [0,1].
  void validate() const;

  void save(std::ostream& out) const;
  void save_file(const std::string& path) const;
  static TabularMDP load(std::istream& in);  // validates
  static TabularMDP load_file(const std::string& path);
};

// Action distribution per state, optionally one table per time step
// (non-stationary policies as produced by forward training).
struct TabularPolicy {
  int n_states = 0;
  int n_actions = 0;
  int horizon = 1;       // number of tables; 1 means stationary
  std::vector<double> probs;  // [t * S * A + s * A + a]

  static TabularPolicy stationary(int n_states, int n_actions);
  static TabularPolicy non_stationary(int n_states, int n_actions, int horizon);
  static TabularPolicy deterministic(const std::vector<int>& action_per_state, int n_actions);
  static TabularPolicy uniform(int n_states, int n_actions);

  bool stationary_form() const { return horizon == 1; }
  // t is 1-based; stationary policies ignore it.
  double pi(int t, int s, int a) const;
  double& at(int t, int s, int a);
  void validate() const;  // rows sum to 1 within 1e-12
};

// Per-step state distributions d^t for t = 1..T plus their average.
struct DistributionReport {
  std::vector<std::vector<double>> per_step;
  std::vector<double> average;
};

// Forward dynamic program: d^1 = initial, d^{t+1} = push of d^t through
// the policy and the transition kernel.
DistributionReport state_distributions(const TabularMDP& mdp, const TabularPolicy& policy);

// Total expected cost of running the policy for the full horizon; in [0, T].
double expected_cost(const TabularMDP& mdp, const TabularPolicy& policy);

// Value table for the continuation policy: V[k][s] = expected cost of
// following `continuation` for the final k steps of the horizon from s
// (non-stationary continuations are indexed by absolute time T-k+1..T).
std::vector<std::vector<double>> continuation_values(const TabularMDP& mdp,
                                                     const TabularPolicy& continuation);

// t_remaining-step cost of taking `a` in `s` and then following `continuation`.
double q_value(const TabularMDP& mdp, const TabularPolicy& continuation, int t_remaining, int s,
               int a);
// Same with the first action drawn from `first`.
double q_value(const TabularMDP& mdp, const TabularPolicy& continuation, int t_remaining, int s,
               const TabularPolicy& first);

// Worst single-action increase in expert cost-to-go over the visited support:
// max over t, over s with d^t(s) > 0, over a, of
// Q^{expert}_{T-t+1}(s,a) - Q^{expert}_{T-t+1}(s,expert).
double recoverability_u(const TabularMDP& mdp, const TabularPolicy& expert,
                        const DistributionReport& visited);

// L1 distance between probability vectors, in [0, 2].
double tv_distance(std::span<const double> p, std::span<const double> q);

// Expected 0-1 disagreement between policy and expert under the given
// per-step distributions, averaged over time steps.
double disagreement_rate(const TabularMDP& mdp, const TabularPolicy& policy,
                         const TabularPolicy& expert, const DistributionReport& dist);

// Expected surrogate loss of score rows against the expert's action under
// the averaged distribution; scores[s] is a length-A vector.
double expected_squared_loss(const TabularMDP& mdp, const std::vector<std::vector<double>>& scores,
                             const TabularPolicy& expert, const DistributionReport& dist);

// Per-step action-distribution mixture beta*expert + (1-beta)*learned;
// exact DP equivalent of per-step coin mixing.
TabularPolicy mix_policies(const TabularPolicy& expert, const TabularPolicy& learned, double beta);

// ---------------------------------------------------------------------------
// Constructions
// ---------------------------------------------------------------------------

struct ChainInstance {
  TabularMDP mdp;
  TabularPolicy expert;
  TabularPolicy learner;
};

// Sequence-prediction chain where the learner flips relative to the correct
// bit with probability eps when fed its own previous output. State 0: last
// output in sync with the truth; state 1: out of sync. Action 0 emits the
// in-sync bit, action 1 the flipped bit; a flipped output costs 1 and moves
// to state 1. The expert propagates its input deterministically, so a
// desynchronized prediction stays wrong even under the expert -- this is
// what makes single mistakes expensive over a long horizon.
ChainInstance build_kaariainen_chain(int T, double eps);

// Closed-form expected mistakes of the chain's learner over T steps.
double kaariainen_expected_mistakes(int T, double eps);

struct GapInstance {
  TabularMDP mdp;
  TabularPolicy expert;
  TabularPolicy cloned_learner;
};

// Three-state instance (on-track, off-track absorbing, zero-cost terminal)
// where a supervised learner with eps 0-1 loss under the expert's state
// distribution attains exactly (1 - eps*T) * J(expert) + T^2 * eps:
// the cloned learner errs with probability eps*T at the first step only,
// a single error leads to the absorbing off-track region at cost 1 per
// step, and the expert stays on-track at cost on_track_cost per step.
// The terminal state is the zero-cost sink used for early-termination
// padding; the default dynamics never enter it. Requires eps*T <= 1.
GapInstance build_quadratic_gap_example(int T, double eps, double on_track_cost = 0.0);

struct GapFamilyInstance {
  TabularMDP mdp;
  TabularPolicy expert;
  std::vector<int> feature_group;  // aliasing map state -> feature group
  int n_groups = 0;
};

// Trainable variant of the gap construction used for scaling studies.
// Two aliased on-track states share one feature group but need different
// actions, so every policy in the aliased class errs at rate ~eps under
// the expert distribution; the off-track state is recoverable in one step
// via its own action (u = 1). Policies trained only on expert states never
// learn the recovery and compound quadratically; policies trained on their
// own induced states learn it and stay linear in the horizon.
GapFamilyInstance build_gap_family_instance(int T, double eps);

// ---------------------------------------------------------------------------
// Environment adapter
// ---------------------------------------------------------------------------

// Runs a TabularMDP as an episodic environment; observations are tabular
// indices and the expert label comes from argmax of the expert's row
// (expert policies used here are deterministic).
class TabularEnv : public Environment {
 public:
  TabularEnv(const TabularMDP& mdp, const TabularPolicy& expert, EnvSchema schema);

  const EnvSchema& schema() const override { return schema_; }
  void reset(RngStream& rng) override;
  StateObs observe() const override;
  ActionVal expert_action() const override;
  bool step(const ActionVal& a, RngStream& rng) override;
  std::map<std::string, double> episode_metrics() const override;

 private:
  const TabularMDP& mdp_;
  const TabularPolicy& expert_;
  EnvSchema schema_;
  int state_ = 0;
  int t_ = 1;
  double cost_acc_ = 0.0;
};

// Reads a concrete policy object back into a (deterministic, possibly
// non-stationary) tabular policy by acting on every (t, s).
TabularPolicy extract_tabular_policy(const Policy& policy, const TabularMDP& mdp);

class TabularEnvModel : public EnvModel {
 public:
  // The feature group map aliases states for the learner; identity by default.
  TabularEnvModel(TabularMDP mdp, TabularPolicy expert, std::string name,
                  std::vector<int> feature_group = {}, int n_groups = 0);

  std::unique_ptr<Environment> make() const override;
  const EnvSchema& schema() const override { return schema_; }
  Featurizer featurizer() const override;
  int learner_dim() const override { return n_groups_; }
  PolicyPtr expert_policy() const override;
  std::string metric_name() const override { return "exact_cost"; }
  double metric_from(const std::vector<Trajectory>& trajs) const override;
  // Exact J of the executed (argmax) policy via dynamic programming.
  std::optional<double> deterministic_metric(const Policy& policy) const override;

  const TabularMDP& mdp() const { return mdp_; }
  const TabularPolicy& expert() const { return expert_; }
  const std::vector<int>& feature_group() const { return group_; }

 private:
  TabularMDP mdp_;
  TabularPolicy expert_;
  EnvSchema schema_;
  std::vector<int> group_;
  int n_groups_ = 0;
};

}  // namespace ilb

#endif  // ILB_TABULAR_HPP
