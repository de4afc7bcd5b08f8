#include "ilb/meta.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace ilb {

// ---------------------------------------------------------------------------
// BetaSchedule
// ---------------------------------------------------------------------------

BetaSchedule BetaSchedule::indicator() { return BetaSchedule{Kind::indicator, 0.0}; }

BetaSchedule BetaSchedule::geometric(double p) {
  if (p <= 0.0 || p >= 1.0) throw ConfigError("geometric schedule needs p in (0,1)");
  return BetaSchedule{Kind::geometric, p};
}

BetaSchedule BetaSchedule::constant(double c) {
  if (c < 0.0 || c > 1.0) throw ConfigError("constant schedule needs c in [0,1]");
  return BetaSchedule{Kind::constant, c};
}

BetaSchedule BetaSchedule::parse(const std::string& text) {
  if (text == "indicator") return indicator();
  const auto colon = text.find(':');
  if (colon != std::string::npos) {
    const std::string head = text.substr(0, colon);
    const double v = std::atof(text.c_str() + colon + 1);
    if (head == "geometric") return geometric(v);
    if (head == "constant") return constant(v);
  }
  throw ConfigError("unknown schedule: " + text);
}

std::string BetaSchedule::name() const {
  switch (kind) {
    case Kind::indicator: return "indicator";
    case Kind::geometric: return "geometric:" + std::to_string(p);
    case Kind::constant: return "constant:" + std::to_string(p);
  }
  return "?";
}

double BetaSchedule::beta(int i) const {
  if (i < 1) throw ConfigError("schedule index is 1-based");
  switch (kind) {
    case Kind::indicator: return i == 1 ? 1.0 : 0.0;
    case Kind::geometric: return std::pow(p, i - 1);
    case Kind::constant: return p;
  }
  return 0.0;
}

double BetaSchedule::mean(int n) const {
  if (n < 1) throw ConfigError("schedule mean needs n >= 1");
  switch (kind) {
    case Kind::indicator: return 1.0 / n;
    case Kind::geometric: return (1.0 - std::pow(p, n)) / (n * (1.0 - p));
    case Kind::constant: return p;
  }
  return 0.0;
}

// ---------------------------------------------------------------------------
// Shared run machinery
// ---------------------------------------------------------------------------

namespace {

struct CollectResult {
  AggregateDataset dataset;
  std::vector<Trajectory> trajectories;
};

// m rollouts under `policy`, every visited state labeled by the expert
// (queried during the rollout). RNG streams derive from (seed, iteration,
// trajectory) so rollouts are order-independent.
CollectResult collect(const EnvModel& model, const Policy& policy, int m, int T, int iteration,
                      std::uint64_t seed) {
  CollectResult out;
  out.dataset = AggregateDataset(model.learner_dim(), model.schema().action);
  const Featurizer feat = model.featurizer();
  for (int j = 0; j < m; ++j) {
    auto env = model.make();
    RngStream rng = RngStream::child(seed, static_cast<std::uint64_t>(iteration),
                                     static_cast<std::uint64_t>(j));
    Trajectory traj = rollout(*env, policy, T, rng);
    traj.source_iteration = iteration;
    traj.source_seed = seed;
    for (auto& ex : label_from_recorded(traj, feat, iteration)) out.dataset.append(std::move(ex));
    out.trajectories.push_back(std::move(traj));
  }
  return out;
}

void validate_run_args(int N, int m, int T) {
  if (N < 1) throw ConfigError("need at least one iteration");
  if (m < 1) throw ConfigError("need at least one trajectory per iteration");
  if (T < 1) throw ConfigError("horizon must be positive");
}

IterationMetrics evaluate_iteration(const EnvModel& model, const PolicyPtr& trained,
                                    const AggregateDataset& aggregate, const SurrogateLoss& loss,
                                    int iteration, double beta, int T, std::uint64_t seed,
                                    const RunOptions& options) {
  IterationMetrics im;
  im.iteration = iteration;
  im.dataset_size = static_cast<std::int64_t>(aggregate.size());
  im.beta = beta;
  im.train_loss = aggregate.empty() ? 0.0 : empirical_loss(*trained, aggregate, loss);
  if (options.evaluate_each_iteration) {
    const int horizon = options.eval_horizon > 0 ? options.eval_horizon : T;
    const EvalResult ev = evaluate_policy(model, trained, loss, options.eval_episodes, horizon,
                                          mix64(seed ^ (0xe7a1u + iteration)));
    im.val_loss = ev.mean_loss;
    im.env_metric = ev.env_metric;
  }
  for (double v : {im.train_loss, im.val_loss, im.env_metric, im.beta}) {
    if (!std::isfinite(v)) throw ConfigError("non-finite metric in iteration record");
  }
  return im;
}

PolicyPtr default_initial_policy(const EnvModel& model, const LearnerConfig& learner) {
  AggregateDataset empty(model.learner_dim(), model.schema().action);
  RngStream rng(0);
  return fit_policy(empty, learner, model.schema().action, model.featurizer(), rng);
}

}  // namespace

// ---------------------------------------------------------------------------
// DAgger
// ---------------------------------------------------------------------------

RunRecord dagger_run(const EnvModel& model, const LearnerConfig& learner, int N, int m, int T,
                     const BetaSchedule& schedule, const SurrogateLoss& loss, std::uint64_t seed,
                     const RunOptions& options, PolicyPtr initial_policy) {
  validate_run_args(N, m, T);
  if (!initial_policy && schedule.beta(1) < 1.0)
    throw ConfigError("schedule has beta_1 < 1; supply an initial policy");
  RunRecord rec;
  rec.algorithm = "dagger";
  rec.initial_policy = initial_policy ? std::move(initial_policy)
                                      : default_initial_policy(model, learner);
  const PolicyPtr expert = model.expert_policy();
  const Featurizer feat = model.featurizer();

  std::vector<AggregateDataset> datasets;
  AggregateDataset aggregate(model.learner_dim(), model.schema().action);
  PolicyPtr current = rec.initial_policy;
  RngStream fit_rng = RngStream::child(seed, 0xf17, 0);

  for (int i = 1; i <= N; ++i) {
    const double beta = schedule.beta(i);
    PolicyPtr mixed = beta >= 1.0  ? expert
                      : beta <= 0.0 ? current
                                    : make_beta_mixture(beta, expert, current);
    CollectResult col = collect(model, *mixed, m, T, i, seed);
    aggregate.extend(col.dataset);
    datasets.push_back(std::move(col.dataset));
    PolicyPtr next = fit_policy(aggregate, learner, model.schema().action, feat, fit_rng);
    rec.trained.push_back(next);
    rec.metrics.push_back(
        evaluate_iteration(model, next, aggregate, loss, i, beta, T, seed, options));
    current = next;
  }
  rec.iteration_datasets = std::move(datasets);
  return rec;
}

// ---------------------------------------------------------------------------
// SMILe / SEARN-greedy
// ---------------------------------------------------------------------------

std::vector<double> smile_weights(double alpha, int n) {
  if (alpha <= 0.0 || alpha > 1.0) throw ConfigError("alpha must lie in (0,1]");
  if (n < 0) throw ConfigError("n must be nonnegative");
  std::vector<double> w(n + 1);
  w[0] = std::pow(1.0 - alpha, n);
  for (int j = 1; j <= n; ++j) w[j] = alpha * std::pow(1.0 - alpha, j - 1);
  return w;
}

std::vector<double> searn_greedy_weights(double alpha, int n) {
  if (alpha <= 0.0 || alpha > 1.0) throw ConfigError("alpha must lie in (0,1]");
  if (n < 0) throw ConfigError("n must be nonnegative");
  std::vector<double> w(n + 1);
  w[0] = std::pow(1.0 - alpha, n);
  for (int j = 1; j <= n; ++j) w[j] = alpha * std::pow(1.0 - alpha, n - j);
  return w;
}

std::vector<double> smile_renormalized_weights(double alpha, int n) {
  if (n < 1) throw ConfigError("cannot renormalize the pure-expert mixture (n = 0)");
  std::vector<double> w = smile_weights(alpha, n);
  const double expert_w = w[0];
  std::vector<double> out(w.begin() + 1, w.end());
  const double scale = 1.0 - expert_w;
  for (double& v : out) v /= scale;
  return out;
}

namespace {

PolicyPtr mixture_from_weights(const std::vector<double>& weights, const PolicyPtr& expert,
                               const std::vector<PolicyPtr>& trained, int n) {
  std::vector<double> w;
  std::vector<PolicyPtr> comps;
  if (weights.size() != static_cast<std::size_t>(n + 1))
    throw ConfigError("mixture weight count mismatch");
  for (int j = 0; j <= n; ++j) {
    if (weights[j] == 0.0) continue;
    w.push_back(weights[j]);
    comps.push_back(j == 0 ? expert : trained[j - 1]);
  }
  // guard against accumulated rounding before the mixture validates
  double total = std::accumulate(w.begin(), w.end(), 0.0);
  for (double& v : w) v /= total;
  return std::make_shared<MixturePolicy>(std::move(w), std::move(comps));
}

RunRecord mixing_run(const char* name, bool searn_update, const EnvModel& model,
                     const LearnerConfig& learner, int N, int m, int T, double alpha,
                     const SurrogateLoss& loss, std::uint64_t seed, const RunOptions& options) {
  validate_run_args(N, m, T);
  if (alpha <= 0.0 || alpha > 1.0) throw ConfigError("alpha must lie in (0,1]");
  RunRecord rec;
  rec.algorithm = name;
  rec.initial_policy = default_initial_policy(model, learner);
  const PolicyPtr expert = model.expert_policy();
  const Featurizer feat = model.featurizer();
  RngStream fit_rng = RngStream::child(seed, 0xf17, 0);

  for (int i = 1; i <= N; ++i) {
    const auto prev_weights = searn_update ? searn_greedy_weights(alpha, i - 1)
                                           : smile_weights(alpha, i - 1);
    const PolicyPtr mixture = mixture_from_weights(prev_weights, expert, rec.trained, i - 1);
    CollectResult col = collect(model, *mixture, m, T, i, seed);
    // each policy is trained on the current mixture's data only
    PolicyPtr next = fit_policy(col.dataset, learner, model.schema().action, feat, fit_rng);
    rec.trained.push_back(next);
    rec.iteration_datasets.push_back(std::move(col.dataset));
    const auto weights = searn_update ? searn_greedy_weights(alpha, i) : smile_weights(alpha, i);
    rec.mixture_weights.push_back(weights);

    // evaluate the policy actually used at test time: the expert-free mixture
    PolicyPtr eval_policy;
    if (searn_update && alpha >= 1.0) {
      eval_policy = next;
    } else {
      std::vector<double> renorm(weights.begin() + 1, weights.end());
      const double scale = 1.0 - weights[0];
      for (double& v : renorm) v /= scale;
      std::vector<double> w;
      std::vector<PolicyPtr> comps;
      for (int j = 0; j < i; ++j) {
        if (renorm[j] == 0.0) continue;
        w.push_back(renorm[j]);
        comps.push_back(rec.trained[j]);
      }
      eval_policy = std::make_shared<MixturePolicy>(std::move(w), std::move(comps));
    }
    std::int64_t total = 0;
    for (const auto& d : rec.iteration_datasets) total += static_cast<std::int64_t>(d.size());
    IterationMetrics im = evaluate_iteration(model, eval_policy, rec.iteration_datasets.back(),
                                             loss, i, weights[0], T, seed, options);
    im.dataset_size = total;
    rec.metrics.push_back(im);
  }
  return rec;
}

}  // namespace

RunRecord smile_run(const EnvModel& model, const LearnerConfig& learner, int N, int m, int T,
                    double alpha, const SurrogateLoss& loss, std::uint64_t seed,
                    const RunOptions& options) {
  return mixing_run("smile", false, model, learner, N, m, T, alpha, loss, seed, options);
}

RunRecord searn_greedy_run(const EnvModel& model, const LearnerConfig& learner, int N, int m,
                           int T, double alpha, const SurrogateLoss& loss, std::uint64_t seed,
                           const RunOptions& options) {
  return mixing_run("searn_greedy", true, model, learner, N, m, T, alpha, loss, seed, options);
}

PolicyPtr smile_renormalize(const RunRecord& record, double alpha, int n) {
  if (n < 1 || n > record.n_iterations())
    throw ConfigError("cannot renormalize the pure-expert mixture (n = 0)");
  const std::vector<double> w = smile_renormalized_weights(alpha, n);
  std::vector<double> weights;
  std::vector<PolicyPtr> comps;
  for (int j = 0; j < n; ++j) {
    if (w[j] == 0.0) continue;
    weights.push_back(w[j]);
    comps.push_back(record.trained[j]);
  }
  return std::make_shared<MixturePolicy>(std::move(weights), std::move(comps));
}

PolicyPtr mixture_policy_at(const RunRecord& record, int n) {
  if (n < 1 || n > static_cast<int>(record.mixture_weights.size()))
    throw ConfigError("no mixture recorded at iteration " + std::to_string(n));
  PolicyPtr expert;
  // weights include the expert; rebuild with the env-bound expert tag
  return mixture_from_weights(record.mixture_weights[n - 1], env_expert_policy(), record.trained,
                              n);
}

// ---------------------------------------------------------------------------
// Forward training
// ---------------------------------------------------------------------------

NonStationaryPolicy::NonStationaryPolicy(std::vector<PolicyPtr> per_step)
    : per_step_(std::move(per_step)) {
  if (per_step_.empty()) throw ConfigError("non-stationary policy needs at least one step");
}

ActionVal NonStationaryPolicy::act(const StateObs& s, RngStream& rng) const {
  const int t = std::clamp(s.time_step, 1, static_cast<int>(per_step_.size()));
  return per_step_[t - 1]->act(s, rng);
}

std::optional<std::vector<double>> NonStationaryPolicy::scores(const StateObs& s) const {
  const int t = std::clamp(s.time_step, 1, static_cast<int>(per_step_.size()));
  return per_step_[t - 1]->scores(s);
}

PolicyPtr forward_train(const EnvModel& model, const LearnerConfig& learner, int T, int m,
                        const SurrogateLoss& loss, std::uint64_t seed) {
  (void)loss;
  if (T < 1 || m < 1) throw ConfigError("forward training needs T >= 1 and m >= 1");
  if (T > 64)
    throw ConfigError("forward training is guarded to T <= 64; use dagger for longer horizons");
  const Featurizer feat = model.featurizer();
  const PolicyPtr expert = model.expert_policy();
  std::vector<PolicyPtr> per_step;
  RngStream fit_rng = RngStream::child(seed, 0xf0f, 0);

  for (int t = 1; t <= T; ++t) {
    // prefix executes the trained policies, expert from step t onward
    std::vector<PolicyPtr> prefix = per_step;
    for (int k = t; k <= T; ++k) prefix.push_back(expert);
    NonStationaryPolicy collector(prefix);
    AggregateDataset at_t(model.learner_dim(), model.schema().action);
    for (int j = 0; j < m; ++j) {
      auto env = model.make();
      RngStream rng = RngStream::child(seed, static_cast<std::uint64_t>(t),
                                       static_cast<std::uint64_t>(j));
      const Trajectory traj = rollout(*env, collector, T, rng);
      if (traj.length() >= t) {
        const auto& step = traj.steps[t - 1];
        DatasetExample ex;
        ex.features = featurize(feat, step.state);
        ex.time_step = t;
        ex.label = step.expert_action;
        ex.iteration_tag = t;
        at_t.append(std::move(ex));
      }
    }
    per_step.push_back(fit_policy(at_t, learner, model.schema().action, feat, fit_rng));
  }
  return std::make_shared<NonStationaryPolicy>(std::move(per_step));
}

// ---------------------------------------------------------------------------
// Supervised baseline
// ---------------------------------------------------------------------------

PolicyPtr supervised_train(const EnvModel& model, const LearnerConfig& learner, int n_traj, int T,
                           const SurrogateLoss& loss, std::uint64_t seed) {
  (void)loss;
  if (n_traj < 1) throw ConfigError("supervised training needs at least one trajectory");
  const PolicyPtr expert = model.expert_policy();
  CollectResult col = collect(model, *expert, n_traj, T, 1, seed);
  RngStream fit_rng = RngStream::child(seed, 0xf17, 0);
  return fit_policy(col.dataset, learner, model.schema().action, model.featurizer(), fit_rng);
}

RunRecord supervised_run(const EnvModel& model, const LearnerConfig& learner, int N, int m, int T,
                         const SurrogateLoss& loss, std::uint64_t seed,
                         const RunOptions& options) {
  validate_run_args(N, m, T);
  RunRecord rec;
  rec.algorithm = "supervised";
  rec.initial_policy = default_initial_policy(model, learner);
  const PolicyPtr expert = model.expert_policy();
  const Featurizer feat = model.featurizer();
  AggregateDataset aggregate(model.learner_dim(), model.schema().action);
  RngStream fit_rng = RngStream::child(seed, 0xf17, 0);
  for (int i = 1; i <= N; ++i) {
    CollectResult col = collect(model, *expert, m, T, i, seed);
    aggregate.extend(col.dataset);
    rec.iteration_datasets.push_back(std::move(col.dataset));
    PolicyPtr next = fit_policy(aggregate, learner, model.schema().action, feat, fit_rng);
    rec.trained.push_back(next);
    rec.metrics.push_back(
        evaluate_iteration(model, next, aggregate, loss, i, 1.0, T, seed, options));
  }
  return rec;
}

// ---------------------------------------------------------------------------
// Validation selection / regret
// ---------------------------------------------------------------------------

PolicyPtr select_best_on_validation(const RunRecord& record, const EnvModel& model,
                                    const SurrogateLoss& loss, int m_val, int T,
                                    std::uint64_t seed, int* best_index) {
  if (m_val < 1) throw ConfigError("validation needs at least one rollout");
  if (record.trained.empty()) throw ConfigError("record holds no trained policies");
  double best_loss = 0.0;
  int best = -1;
  for (int i = 0; i < record.n_iterations(); ++i) {
    const EvalResult ev = evaluate_policy(model, record.trained[i], loss, m_val, T,
                                          mix64(seed ^ (0x5e1ec7u + i)));
    if (best < 0 || ev.mean_loss < best_loss - 1e-15) {
      best_loss = ev.mean_loss;
      best = i;
    }
  }
  if (best_index) *best_index = best + 1;
  return record.trained[best];
}

RegretLedger run_regret(const RunRecord& record, const EnvModel& model, const SurrogateLoss& loss,
                        const LearnerConfig& learner, std::uint64_t seed) {
  const int N = record.n_iterations();
  std::vector<PolicyPtr> played;
  for (int i = 1; i <= N; ++i) played.push_back(record.played(i));
  RngStream rng = RngStream::child(seed, 0x4e64e7, 0);
  return regret_report(record.iteration_datasets, played, loss, learner, model.featurizer(), rng);
}

std::vector<std::pair<double, double>> env_metric_series(const RunRecord& record) {
  std::vector<std::pair<double, double>> series;
  series.reserve(record.metrics.size());
  for (const auto& im : record.metrics) {
    series.emplace_back(static_cast<double>(im.dataset_size), im.env_metric);
  }
  return series;
}

}  // namespace ilb
