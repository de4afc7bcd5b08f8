#include "ilb/core.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace ilb {

namespace {

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

// ---------------------------------------------------------------------------
// ActionSpec / ActionVal
// ---------------------------------------------------------------------------

ActionSpec ActionSpec::discrete(int k, bool bits) {
  if (k < 1) throw ConfigError("discrete action spec needs at least one class");
  ActionSpec s;
  s.kind = ActionKind::discrete;
  s.num_classes = k;
  s.bit_actions = bits;
  if (bits) {
    int n = 1;
    int b = 0;
    while (n < k) {
      n <<= 1;
      ++b;
    }
    if (n != k) throw ConfigError("bit-encoded action space must have a power-of-two class count");
  }
  return s;
}

ActionSpec ActionSpec::continuous(std::vector<double> lo, std::vector<double> hi) {
  if (lo.size() != hi.size() || lo.empty())
    throw ConfigError("continuous action spec needs matching nonempty bounds");
  ActionSpec s;
  s.kind = ActionKind::continuous;
  s.dim = static_cast<int>(lo.size());
  s.lo = std::move(lo);
  s.hi = std::move(hi);
  return s;
}

int ActionSpec::n_bits() const {
  int b = 0;
  while ((1 << b) < num_classes) ++b;
  return b;
}

bool ActionSpec::operator==(const ActionSpec& o) const {
  return kind == o.kind && num_classes == o.num_classes && dim == o.dim &&
         bit_actions == o.bit_actions && lo == o.lo && hi == o.hi;
}

std::string ActionSpec::describe() const {
  if (kind == ActionKind::discrete) return "discrete:" + std::to_string(num_classes);
  return "continuous:" + std::to_string(dim);
}

ActionSpec ActionSpec::parse(const std::string& text) {
  auto colon = text.find(':');
  if (colon == std::string::npos) throw IoError("bad action spec: " + text);
  const std::string head = text.substr(0, colon);
  const int n = std::atoi(text.c_str() + colon + 1);
  if (head == "discrete") return discrete(n);
  if (head == "continuous") {
    return continuous(std::vector<double>(n, -1.0), std::vector<double>(n, 1.0));
  }
  throw IoError("bad action spec: " + text);
}

ActionVal ActionVal::make_discrete(int label) {
  ActionVal a;
  a.discrete = label;
  return a;
}

ActionVal ActionVal::make_continuous(std::vector<double> v, const ActionSpec& spec) {
  if (spec.kind != ActionKind::continuous || static_cast<int>(v.size()) != spec.dim)
    throw SchemaError("continuous action has wrong dimension");
  for (int i = 0; i < spec.dim; ++i) v[i] = std::clamp(v[i], spec.lo[i], spec.hi[i]);
  ActionVal a;
  a.continuous = std::move(v);
  return a;
}

int ActionVal::label() const {
  if (!discrete) throw SchemaError("action is not discrete");
  return *discrete;
}

const std::vector<double>& ActionVal::values() const {
  if (!continuous) throw SchemaError("action is not continuous");
  return *continuous;
}

bool ActionVal::operator==(const ActionVal& o) const {
  return discrete == o.discrete && continuous == o.continuous;
}

// ---------------------------------------------------------------------------
// StateObs / featurizers
// ---------------------------------------------------------------------------

StateObs StateObs::from_features(std::vector<double> f, int t) {
  StateObs s;
  s.features = std::move(f);
  s.time_step = t;
  return s;
}

StateObs StateObs::from_tabular(int index, int t) {
  if (index < 0) throw SchemaError("tabular state index must be nonnegative");
  StateObs s;
  s.tabular = index;
  s.time_step = t;
  return s;
}

Featurizer identity_featurizer() {
  return [](const StateObs& s) {
    if (!s.features) throw SchemaError("observation has no feature vector");
    return *s.features;
  };
}

Featurizer onehot_featurizer(int n_states) {
  return [n_states](const StateObs& s) {
    if (!s.tabular) throw SchemaError("observation is not tabular");
    if (*s.tabular >= n_states) throw SchemaError("tabular index out of range");
    std::vector<double> f(n_states, 0.0);
    f[*s.tabular] = 1.0;
    return f;
  };
}

Featurizer group_onehot_featurizer(std::vector<int> group, int n_groups) {
  return [group = std::move(group), n_groups](const StateObs& s) {
    if (!s.tabular) throw SchemaError("observation is not tabular");
    if (*s.tabular >= static_cast<int>(group.size()))
      throw SchemaError("tabular index out of range");
    std::vector<double> f(n_groups, 0.0);
    f[group[*s.tabular]] = 1.0;
    return f;
  };
}

std::vector<double> featurize(const Featurizer& f, const StateObs& s) {
  if (s.features) return *s.features;
  return f(s);
}

// ---------------------------------------------------------------------------
// Policies
// ---------------------------------------------------------------------------

PolicyPtr env_expert_policy() { return std::make_shared<EnvExpertPolicy>(); }

MixturePolicy::MixturePolicy(std::vector<double> weights, std::vector<PolicyPtr> components)
    : weights_(std::move(weights)), components_(std::move(components)) {
  if (weights_.size() != components_.size() || weights_.empty())
    throw ConfigError("mixture needs matching nonempty weights and components");
  double total = 0.0;
  for (double w : weights_) {
    if (w < 0.0) throw ConfigError("mixture weights must be nonnegative");
    total += w;
  }
  if (std::abs(total - 1.0) > 1e-9) throw ConfigError("mixture weights must sum to 1");
}

int MixturePolicy::sample_component(RngStream& rng) const {
  return rng.categorical(weights_);
}

ActionVal MixturePolicy::act(const StateObs& s, RngStream& rng) const {
  return components_[sample_component(rng)]->act(s, rng);
}

PolicyPtr make_beta_mixture(double beta, PolicyPtr expert, PolicyPtr learned) {
  if (beta < 0.0 || beta > 1.0) throw ConfigError("beta must lie in [0,1]");
  return std::make_shared<MixturePolicy>(std::vector<double>{beta, 1.0 - beta},
                                         std::vector<PolicyPtr>{std::move(expert), std::move(learned)});
}

StepChoice mixture_step_choice(double beta, RngStream& rng) {
  if (beta < 0.0 || beta > 1.0) throw ConfigError("beta must lie in [0,1]");
  if (beta <= 0.0) return StepChoice::learned;
  if (beta >= 1.0) return StepChoice::expert;
  return rng.bernoulli(beta) ? StepChoice::expert : StepChoice::learned;
}

// ---------------------------------------------------------------------------
// Surrogate losses
// ---------------------------------------------------------------------------

SurrogateLoss SurrogateLoss::zero_one() { return SurrogateLoss{Kind::zero_one, 1.0, -1.0}; }
SurrogateLoss SurrogateLoss::squared(double ell_max) { return SurrogateLoss{Kind::squared, ell_max, -1.0}; }
SurrogateLoss SurrogateLoss::hinge(double ell_max) { return SurrogateLoss{Kind::hinge, ell_max, -1.0}; }

SurrogateLoss SurrogateLoss::parse(const std::string& name) {
  if (name == "zero_one") return zero_one();
  if (name == "squared") return squared();
  if (name == "hinge") return hinge();
  throw ConfigError("unknown loss: " + name);
}

std::string SurrogateLoss::name() const {
  switch (kind) {
    case Kind::zero_one: return "zero_one";
    case Kind::squared: return "squared";
    case Kind::hinge: return "hinge";
  }
  return "?";
}

namespace {

std::vector<double> onehot(int label, int k) {
  std::vector<double> v(k, 0.0);
  if (label >= 0 && label < k) v[label] = 1.0;
  return v;
}

}  // namespace

double SurrogateLoss::eval(const Policy& policy, const StateObs& s, const ActionVal& label,
                           const ActionSpec& spec) const {
  // Deterministic policies ignore the stream; mixtures are not evaluated
  // pointwise here (losses apply to the base policies).
  RngStream rng(0);
  double value = 0.0;
  switch (kind) {
    case Kind::zero_one: {
      const ActionVal a = policy.act(s, rng);
      if (spec.kind == ActionKind::discrete) {
        value = a.label() == label.label() ? 0.0 : 1.0;
      } else {
        double tol = cont_tolerance;
        const auto& pv = a.values();
        const auto& lv = label.values();
        bool miss = false;
        for (int i = 0; i < spec.dim; ++i) {
          double t = tol >= 0.0 ? tol : 0.1 * (spec.hi[i] - spec.lo[i]);
          if (std::abs(pv[i] - lv[i]) > t) miss = true;
        }
        value = miss ? 1.0 : 0.0;
      }
      return std::min(value, 1.0);
    }
    case Kind::squared: {
      std::vector<double> pred;
      std::vector<double> target;
      if (spec.kind == ActionKind::continuous) {
        target = label.values();
        if (auto sc = policy.scores(s); sc && sc->size() == target.size()) pred = *sc;
        else pred = policy.act(s, rng).values();
      } else {
        target = onehot(label.label(), spec.num_classes);
        if (auto sc = policy.scores(s); sc && static_cast<int>(sc->size()) == spec.num_classes)
          pred = *sc;
        else pred = onehot(policy.act(s, rng).label(), spec.num_classes);
      }
      for (std::size_t i = 0; i < pred.size(); ++i) {
        const double d = pred[i] - target[i];
        value += d * d;
      }
      break;
    }
    case Kind::hinge: {
      if (spec.kind != ActionKind::discrete)
        throw SchemaError("hinge loss is defined for discrete actions");
      auto ms = policy.margins(s);
      if (!ms) {
        // fall back to 0-1 scaled into the hinge range
        const ActionVal a = policy.act(s, rng);
        value = a.label() == label.label() ? 0.0 : 1.0;
        break;
      }
      if (spec.bit_actions) {
        const int nb = spec.n_bits();
        double acc = 0.0;
        for (int k = 0; k < nb; ++k) {
          const double y = ((label.label() >> k) & 1) ? 1.0 : -1.0;
          acc += std::max(0.0, 1.0 - y * (*ms)[k]);
        }
        value = acc / nb;
      } else {
        // one-vs-label margin view: hinge on the label's own separator score
        double acc = 0.0;
        for (double m : *ms) acc += std::max(0.0, 1.0 - m);
        value = ms->empty() ? 0.0 : acc / static_cast<double>(ms->size());
      }
      break;
    }
  }
  return std::clamp(value, 0.0, ell_max);
}

// ---------------------------------------------------------------------------
// Rollouts
// ---------------------------------------------------------------------------

namespace {

// Resolves mixtures and the env-expert placeholder to a concrete action.
ActionVal resolve_action(const Policy& policy, const StateObs& obs, const ActionVal& expert_action,
                         RngStream& rng) {
  const Policy* p = &policy;
  while (true) {
    if (p->is_env_expert()) return expert_action;
    if (const auto* mix = dynamic_cast<const MixturePolicy*>(p)) {
      p = mix->components()[mix->sample_component(rng)].get();
      continue;
    }
    return p->act(obs, rng);
  }
}

}  // namespace

Trajectory rollout(Environment& env, const Policy& policy, int horizon, RngStream& rng) {
  if (horizon < 1) throw ConfigError("rollout horizon must be at least 1");
  env.reset(rng);
  Trajectory traj;
  traj.steps.reserve(horizon);
  for (int t = 1; t <= horizon; ++t) {
    StateObs obs = env.observe();
    obs.time_step = t;
    const ActionVal expert = env.expert_action();
    const ActionVal executed = resolve_action(policy, obs, expert, rng);
    traj.steps.push_back(TrajectoryStep{std::move(obs), executed, expert});
    bool alive;
    try {
      alive = env.step(executed, rng);
    } catch (const SchemaError& e) {
      throw InvalidActionError(t, e.what());
    }
    if (!alive) break;
  }
  traj.metrics = env.episode_metrics();
  return traj;
}

std::vector<DatasetExample> label_with_expert(const Trajectory& traj, const Policy& expert,
                                              const Featurizer& featurizer, int iteration_tag) {
  if (expert.is_env_expert()) return label_from_recorded(traj, featurizer, iteration_tag);
  std::vector<DatasetExample> out;
  out.reserve(traj.steps.size());
  RngStream rng(0);  // experts are deterministic
  for (const auto& step : traj.steps) {
    DatasetExample ex;
    ex.features = featurize(featurizer, step.state);
    ex.time_step = step.state.time_step;
    ex.label = expert.act(step.state, rng);
    ex.iteration_tag = iteration_tag;
    out.push_back(std::move(ex));
  }
  return out;
}

std::vector<DatasetExample> label_from_recorded(const Trajectory& traj,
                                                const Featurizer& featurizer, int iteration_tag) {
  std::vector<DatasetExample> out;
  out.reserve(traj.steps.size());
  for (const auto& step : traj.steps) {
    DatasetExample ex;
    ex.features = featurize(featurizer, step.state);
    ex.time_step = step.state.time_step;
    ex.label = step.expert_action;
    ex.iteration_tag = iteration_tag;
    out.push_back(std::move(ex));
  }
  return out;
}

// ---------------------------------------------------------------------------
// AggregateDataset
// ---------------------------------------------------------------------------

AggregateDataset::AggregateDataset(int feature_dim, ActionSpec action)
    : feature_dim_(feature_dim), action_(std::move(action)) {}

void AggregateDataset::append(DatasetExample ex) {
  if (static_cast<int>(ex.features.size()) != feature_dim_)
    throw SchemaError("example feature dimension mismatch");
  if (action_.kind == ActionKind::discrete) {
    if (!ex.label.is_discrete() || ex.label.label() < 0 || ex.label.label() >= action_.num_classes)
      throw SchemaError("example label does not fit the action spec");
  } else if (ex.label.is_discrete() ||
             static_cast<int>(ex.label.values().size()) != action_.dim) {
    throw SchemaError("example label does not fit the action spec");
  }
  examples_.push_back(std::move(ex));
}

void AggregateDataset::extend(const AggregateDataset& other) {
  if (other.feature_dim_ != feature_dim_ || !(other.action_ == action_))
    throw SchemaError("cannot merge datasets with mismatched schemas");
  examples_.insert(examples_.end(), other.examples_.begin(), other.examples_.end());
}

void AggregateDataset::save(std::ostream& out) const {
  out << "ilb-dataset v1 feature_dim=" << feature_dim_ << " action=" << action_.describe() << "\n";
  for (const auto& ex : examples_) {
    out << ex.iteration_tag << ' ' << ex.time_step;
    for (double f : ex.features) out << ' ' << fmt_double(f);
    out << " |";
    if (ex.label.is_discrete()) {
      out << ' ' << ex.label.label();
    } else {
      for (double v : ex.label.values()) out << ' ' << fmt_double(v);
    }
    out << '\n';
  }
}

void AggregateDataset::save_file(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path);
  save(out);
}

AggregateDataset AggregateDataset::load(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw IoError("empty dataset file");
  std::istringstream head(line);
  std::string magic, ver, fd, act;
  head >> magic >> ver >> fd >> act;
  if (magic != "ilb-dataset" || ver != "v1" || fd.rfind("feature_dim=", 0) != 0 ||
      act.rfind("action=", 0) != 0)
    throw IoError("bad dataset header: " + line);
  const int feature_dim = std::atoi(fd.c_str() + 12);
  ActionSpec spec = ActionSpec::parse(act.substr(7));
  AggregateDataset ds(feature_dim, spec);
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream ls(line);
    DatasetExample ex;
    if (!(ls >> ex.iteration_tag >> ex.time_step))
      throw IoError("dataset line " + std::to_string(line_no) + ": bad prefix");
    ex.features.resize(feature_dim);
    for (int i = 0; i < feature_dim; ++i) {
      if (!(ls >> ex.features[i]))
        throw IoError("dataset line " + std::to_string(line_no) + ": bad features");
    }
    std::string bar;
    if (!(ls >> bar) || bar != "|")
      throw IoError("dataset line " + std::to_string(line_no) + ": missing separator");
    if (spec.kind == ActionKind::discrete) {
      int label;
      if (!(ls >> label)) throw IoError("dataset line " + std::to_string(line_no) + ": bad label");
      ex.label = ActionVal::make_discrete(label);
    } else {
      std::vector<double> v(spec.dim);
      for (int i = 0; i < spec.dim; ++i) {
        if (!(ls >> v[i])) throw IoError("dataset line " + std::to_string(line_no) + ": bad label");
      }
      // stored labels were already clipped when recorded; reload verbatim
      ex.label.continuous = std::move(v);
    }
    ds.append(std::move(ex));
  }
  return ds;
}

AggregateDataset AggregateDataset::load_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read " + path);
  return load(in);
}

// ---------------------------------------------------------------------------
// empirical_loss
// ---------------------------------------------------------------------------

double empirical_loss(const Policy& policy, const AggregateDataset& dataset,
                      const SurrogateLoss& loss) {
  if (dataset.empty()) throw ConfigError("empirical_loss over an empty dataset");
  double total = 0.0;
  for (const auto& ex : dataset.examples()) {
    const StateObs s = StateObs::from_features(ex.features, ex.time_step);
    total += loss.eval(policy, s, ex.label, dataset.action_spec());
  }
  return total / static_cast<double>(dataset.size());
}

// ---------------------------------------------------------------------------
// evaluate_policy
// ---------------------------------------------------------------------------

namespace {

// Per-step loss over the rollout's recorded states and expert labels. The
// 0-1 loss compares the executed action directly (correct in expectation
// for stochastic policies); other losses re-evaluate the policy at the raw
// observation so learned score vectors are used.
double trajectory_loss(const Policy& policy, const Trajectory& traj, const SurrogateLoss& loss,
                       const ActionSpec& spec) {
  double total = 0.0;
  for (const auto& step : traj.steps) {
    if (loss.kind == SurrogateLoss::Kind::zero_one) {
      if (spec.kind == ActionKind::discrete) {
        total += step.executed_action.label() == step.expert_action.label() ? 0.0 : 1.0;
      } else {
        const auto& pv = step.executed_action.values();
        const auto& lv = step.expert_action.values();
        bool miss = false;
        for (int i = 0; i < spec.dim; ++i) {
          const double t =
              loss.cont_tolerance >= 0.0 ? loss.cont_tolerance : 0.1 * (spec.hi[i] - spec.lo[i]);
          if (std::abs(pv[i] - lv[i]) > t) miss = true;
        }
        total += miss ? 1.0 : 0.0;
      }
    } else {
      total += loss.eval(policy, step.state, step.expert_action, spec);
    }
  }
  return traj.steps.empty() ? 0.0 : total / traj.steps.size();
}

}  // namespace

EvalResult evaluate_policy(const EnvModel& model, const PolicyPtr& policy,
                           const SurrogateLoss& loss, int episodes, int horizon,
                           std::uint64_t seed) {
  if (episodes < 1) throw ConfigError("evaluate_policy needs at least one episode");
  std::vector<Trajectory> trajs;
  trajs.reserve(episodes);
  for (int e = 0; e < episodes; ++e) {
    auto env = model.make();
    RngStream rng = RngStream::child(seed, 0x9e77, static_cast<std::uint64_t>(e));
    trajs.push_back(rollout(*env, *policy, horizon, rng));
  }
  EvalResult res;
  if (auto exact = model.deterministic_metric(*policy)) res.env_metric = *exact;
  else res.env_metric = model.metric_from(trajs);
  double loss_sum = 0.0;
  long steps = 0;
  for (const auto& t : trajs) {
    loss_sum += trajectory_loss(*policy, t, loss, model.schema().action) * t.steps.size();
    steps += t.steps.size();
  }
  res.mean_loss = steps > 0 ? loss_sum / steps : 0.0;
  return res;
}

}  // namespace ilb
