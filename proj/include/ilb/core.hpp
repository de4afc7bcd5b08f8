#ifndef ILB_CORE_HPP
#define ILB_CORE_HPP

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "ilb/rng.hpp"

namespace ilb {

// ---------------------------------------------------------------------------
// Errors
// ---------------------------------------------------------------------------

// State/action shape does not match what a policy or environment expects.
struct SchemaError : std::runtime_error {
  explicit SchemaError(const std::string& what) : std::runtime_error(what) {}
};

// Malformed or unreadable file.
struct IoError : std::runtime_error {
  explicit IoError(const std::string& what) : std::runtime_error(what) {}
};

// Invalid configuration value or experiment setup.
struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

// Environment rejected an action mid-rollout; carries the failing step.
struct InvalidActionError : SchemaError {
  InvalidActionError(int step_index, const std::string& what)
      : SchemaError("step " + std::to_string(step_index) + ": " + what), step(step_index) {}
  int step;
};

// ---------------------------------------------------------------------------
// Actions and states
// ---------------------------------------------------------------------------

enum class ActionKind { discrete, continuous };

struct ActionSpec {
  ActionKind kind = ActionKind::discrete;
  int num_classes = 0;               // discrete: labels in [0, num_classes)
  bool bit_actions = false;          // discrete: labels decompose into independent bits
  int dim = 0;                       // continuous: vector dimension
  std::vector<double> lo, hi;        // continuous: per-dimension bounds

  static ActionSpec discrete(int k, bool bits = false);
  static ActionSpec continuous(std::vector<double> lo, std::vector<double> hi);

  int n_bits() const;                // bit_actions: number of bits encoding a label
  bool operator==(const ActionSpec& o) const;
  std::string describe() const;      // "discrete:K" or "continuous:dim"
  static ActionSpec parse(const std::string& text);  // inverse of describe (unit bounds)
};

struct ActionVal {
  std::optional<int> discrete;
  std::optional<std::vector<double>> continuous;

  static ActionVal make_discrete(int label);
  // Continuous values are clipped to the declared bounds.
  static ActionVal make_continuous(std::vector<double> v, const ActionSpec& spec);

  bool is_discrete() const { return discrete.has_value(); }
  int label() const;
  const std::vector<double>& values() const;
  bool operator==(const ActionVal& o) const;
};

// Observation: either an environment-defined feature vector or a tabular
// state index, never both. time_step is 1-based.
struct StateObs {
  std::optional<std::vector<double>> features;
  std::optional<int> tabular;
  int time_step = 1;

  static StateObs from_features(std::vector<double> f, int t = 1);
  static StateObs from_tabular(int index, int t = 1);
  bool is_tabular() const { return tabular.has_value(); }
};

// Maps tabular observations to learner inputs; feature observations pass
// through unchanged.
using Featurizer = std::function<std::vector<double>(const StateObs&)>;
Featurizer identity_featurizer();
Featurizer onehot_featurizer(int n_states);
// One-hot over state groups (feature aliasing); group[s] in [0, n_groups).
Featurizer group_onehot_featurizer(std::vector<int> group, int n_groups);

std::vector<double> featurize(const Featurizer& f, const StateObs& s);

// ---------------------------------------------------------------------------
// Policies
// ---------------------------------------------------------------------------

class Policy;
using PolicyPtr = std::shared_ptr<const Policy>;

class Policy {
 public:
  virtual ~Policy() = default;

  // Deterministic for learned/expert policies; mixtures draw a component
  // from rng at every call.
  virtual ActionVal act(const StateObs& s, RngStream& rng) const = 0;

  // Raw score vector (class scores or continuous prediction) when the
  // policy exposes one; used by the squared surrogate loss.
  virtual std::optional<std::vector<double>> scores(const StateObs&) const { return std::nullopt; }

  // Per-output margins for hinge losses, when defined.
  virtual std::optional<std::vector<double>> margins(const StateObs&) const { return std::nullopt; }

  virtual const char* kind() const = 0;  // "learned" | "expert" | "mixture"

  // True for the placeholder that stands for "the environment's expert";
  // it can only be executed inside a rollout.
  virtual bool is_env_expert() const { return false; }
};

// Deterministic policy from a plain function; `kind` is "expert" or "learned".
class FunctionPolicy : public Policy {
 public:
  FunctionPolicy(std::function<ActionVal(const StateObs&)> fn, const char* kind)
      : fn_(std::move(fn)), kind_(kind) {}
  ActionVal act(const StateObs& s, RngStream&) const override { return fn_(s); }
  const char* kind() const override { return kind_; }

 private:
  std::function<ActionVal(const StateObs&)> fn_;
  const char* kind_;
};

// Stands for the environment's privileged expert. rollout() resolves it to
// Environment::expert_action(); calling act() directly is a schema error.
class EnvExpertPolicy : public Policy {
 public:
  ActionVal act(const StateObs&, RngStream&) const override {
    throw SchemaError("environment expert can only act inside a rollout");
  }
  const char* kind() const override { return "expert"; }
  bool is_env_expert() const override { return true; }
};

PolicyPtr env_expert_policy();

// Weighted mixture over component policies; a component is drawn
// independently at every act() call.
class MixturePolicy : public Policy {
 public:
  // weights must be nonnegative and sum to 1 within 1e-9.
  MixturePolicy(std::vector<double> weights, std::vector<PolicyPtr> components);

  ActionVal act(const StateObs& s, RngStream& rng) const override;
  const char* kind() const override { return "mixture"; }

  const std::vector<double>& weights() const { return weights_; }
  const std::vector<PolicyPtr>& components() const { return components_; }
  // Sample a component index.
  int sample_component(RngStream& rng) const;

 private:
  std::vector<double> weights_;
  std::vector<PolicyPtr> components_;
};

// beta-mixture of the expert and a learned policy.
PolicyPtr make_beta_mixture(double beta, PolicyPtr expert, PolicyPtr learned);

enum class StepChoice { expert, learned };

// Per-time-step coin: expert with probability beta, independently at each
// step, so over T steps P(all learned) = (1-beta)^T.
StepChoice mixture_step_choice(double beta, RngStream& rng);

// ---------------------------------------------------------------------------
// Surrogate losses
// ---------------------------------------------------------------------------

struct SurrogateLoss {
  enum class Kind { zero_one, squared, hinge };
  Kind kind = Kind::zero_one;
  double ell_max = 1.0;
  // zero_one over continuous actions: mistake when any |pred - label|
  // exceeds this; < 0 means "0.1 of the action range" at evaluation time.
  double cont_tolerance = -1.0;

  static SurrogateLoss zero_one();
  static SurrogateLoss squared(double ell_max = 2.0);
  static SurrogateLoss hinge(double ell_max = 2.0);
  static SurrogateLoss parse(const std::string& name);
  std::string name() const;

  // Loss of a policy at one state against the expert's label, in [0, ell_max].
  double eval(const Policy& policy, const StateObs& s, const ActionVal& label,
              const ActionSpec& spec) const;
};

// ---------------------------------------------------------------------------
// Trajectories, environments, datasets
// ---------------------------------------------------------------------------

struct TrajectoryStep {
  StateObs state;
  ActionVal executed_action;
  ActionVal expert_action;
};

struct Trajectory {
  std::vector<TrajectoryStep> steps;
  std::map<std::string, double> metrics;  // episode return metrics
  int source_iteration = 0;
  std::uint64_t source_seed = 0;
  int length() const { return static_cast<int>(steps.size()); }
};

struct EnvSchema {
  std::string name;
  int feature_dim = 0;  // 0 when observations are tabular indices
  int n_states = 0;     // tabular envs only
  ActionSpec action;
};

// Episodic environment. Instances are cheap, single-rollout objects; the
// expert label for the current (internal) state is always available.
class Environment {
 public:
  virtual ~Environment() = default;
  virtual const EnvSchema& schema() const = 0;
  virtual void reset(RngStream& rng) = 0;
  virtual StateObs observe() const = 0;
  virtual ActionVal expert_action() const = 0;
  // Advances one step; returns false once the episode has ended.
  virtual bool step(const ActionVal& a, RngStream& rng) = 0;
  virtual std::map<std::string, double> episode_metrics() const = 0;
};

// Executes `policy` for up to `horizon` steps, recording at every visited
// state the observation, the executed action, and the expert's action.
Trajectory rollout(Environment& env, const Policy& policy, int horizon, RngStream& rng);

struct DatasetExample {
  std::vector<double> features;
  int time_step = 1;
  ActionVal label;
  int iteration_tag = 0;
};

// Union of the per-iteration datasets, in iteration-major, trajectory-minor,
// time-minor order.
class AggregateDataset {
 public:
  AggregateDataset() = default;
  AggregateDataset(int feature_dim, ActionSpec action);

  void append(DatasetExample ex);
  void extend(const AggregateDataset& other);

  int feature_dim() const { return feature_dim_; }
  const ActionSpec& action_spec() const { return action_; }
  const std::vector<DatasetExample>& examples() const { return examples_; }
  std::size_t size() const { return examples_.size(); }
  bool empty() const { return examples_.empty(); }

  void save(std::ostream& out) const;
  void save_file(const std::string& path) const;
  static AggregateDataset load(std::istream& in);
  static AggregateDataset load_file(const std::string& path);

 private:
  int feature_dim_ = 0;
  ActionSpec action_;
  std::vector<DatasetExample> examples_;
};

// One example per visited state, labeled by the expert policy evaluated at
// that state (not by the executed action).
std::vector<DatasetExample> label_with_expert(const Trajectory& traj, const Policy& expert,
                                              const Featurizer& featurizer, int iteration_tag);

// Same, but labels come from the expert actions recorded during the rollout;
// this is the path used when the expert needs environment internals.
std::vector<DatasetExample> label_from_recorded(const Trajectory& traj,
                                                const Featurizer& featurizer, int iteration_tag);

// Mean per-example loss of the policy against the stored expert labels.
double empirical_loss(const Policy& policy, const AggregateDataset& dataset,
                      const SurrogateLoss& loss);

// ---------------------------------------------------------------------------
// Environment models
// ---------------------------------------------------------------------------

// Immutable description of an environment family. Each rollout gets a fresh
// Environment instance, so concurrent rollouts never share mutable state.
class EnvModel {
 public:
  virtual ~EnvModel() = default;
  virtual std::unique_ptr<Environment> make() const = 0;
  virtual const EnvSchema& schema() const = 0;
  // Maps observations to learner inputs.
  virtual Featurizer featurizer() const = 0;
  // Learner input dimension (featurizer output size).
  virtual int learner_dim() const { return schema().feature_dim; }
  // The expert as a policy; environments whose expert needs internal state
  // return the env-bound placeholder, resolved by rollout().
  virtual PolicyPtr expert_policy() const = 0;
  virtual std::string metric_name() const = 0;
  // Aggregates episode metrics from evaluation rollouts into the reported
  // figure (falls per lap, mean distance, ...).
  virtual double metric_from(const std::vector<Trajectory>& trajs) const = 0;
  // Environments with a natural exact or exhaustive evaluation (tabular DP,
  // deterministic test corpora) can bypass sampled rollouts.
  virtual std::optional<double> deterministic_metric(const Policy&) const { return std::nullopt; }
};

struct EvalResult {
  double env_metric = 0.0;
  double mean_loss = 0.0;  // expert-disagreement surrogate loss over visited states
};

// Runs `episodes` fresh rollouts under the policy itself and reports the
// environment metric plus the mean surrogate loss against the expert labels.
EvalResult evaluate_policy(const EnvModel& model, const PolicyPtr& policy,
                           const SurrogateLoss& loss, int episodes, int horizon,
                           std::uint64_t seed);

}  // namespace ilb

#endif  // ILB_CORE_HPP
