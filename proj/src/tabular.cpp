#include "ilb/tabular.hpp"

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
// TabularMDP
// ---------------------------------------------------------------------------

void TabularMDP::validate() const {
  if (n_states < 1 || n_actions < 1 || horizon < 1)
    throw ConfigError("mdp needs at least one state, action, and step");
  if (static_cast<int>(transition.size()) != n_states * n_actions * n_states ||
      static_cast<int>(cost.size()) != n_states * n_actions ||
      static_cast<int>(initial.size()) != n_states)
    throw ConfigError("mdp table sizes do not match the declared shape");
  double init_sum = 0.0;
  for (double v : initial) {
    if (v < 0.0) throw ConfigError("initial distribution has a negative entry");
    init_sum += v;
  }
  if (std::abs(init_sum - 1.0) > 1e-12) throw ConfigError("initial distribution must sum to 1");
  for (int s = 0; s < n_states; ++s) {
    for (int a = 0; a < n_actions; ++a) {
      double row = 0.0;
      for (int s2 = 0; s2 < n_states; ++s2) {
        const double v = p(s, a, s2);
        if (v < 0.0) throw ConfigError("transition row has a negative entry");
        row += v;
      }
      if (std::abs(row - 1.0) > 1e-12)
        throw ConfigError("transition row (" + std::to_string(s) + "," + std::to_string(a) +
                          ") must sum to 1");
      const double cv = c(s, a);
      if (cv < 0.0 || cv > 1.0)
        throw ConfigError("cost (" + std::to_string(s) + "," + std::to_string(a) +
                          ") outside [0,1]");
    }
  }
}

void TabularMDP::save(std::ostream& out) const {
  out << "ilb-mdp v1 S=" << n_states << " A=" << n_actions << " T=" << horizon << "\n";
  out << "init:";
  for (double v : initial) out << ' ' << fmt_double(v);
  out << '\n';
  for (int s = 0; s < n_states; ++s) {
    for (int a = 0; a < n_actions; ++a) {
      out << "P " << s << ' ' << a << ':';
      for (int s2 = 0; s2 < n_states; ++s2) out << ' ' << fmt_double(p(s, a, s2));
      out << '\n';
      out << "C " << s << ' ' << a << ": " << fmt_double(c(s, a)) << '\n';
    }
  }
}

void TabularMDP::save_file(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path);
  save(out);
}

TabularMDP TabularMDP::load(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw IoError("empty mdp file");
  TabularMDP mdp;
  {
    std::istringstream head(line);
    std::string magic, ver, s, a, t;
    head >> magic >> ver >> s >> a >> t;
    if (magic != "ilb-mdp" || ver != "v1" || s.rfind("S=", 0) != 0 || a.rfind("A=", 0) != 0 ||
        t.rfind("T=", 0) != 0)
      throw IoError("bad mdp header: " + line);
    mdp.n_states = std::atoi(s.c_str() + 2);
    mdp.n_actions = std::atoi(a.c_str() + 2);
    mdp.horizon = std::atoi(t.c_str() + 2);
  }
  if (mdp.n_states < 1 || mdp.n_actions < 1 || mdp.horizon < 1)
    throw IoError("bad mdp shape in header");
  mdp.transition.assign(static_cast<std::size_t>(mdp.n_states) * mdp.n_actions * mdp.n_states, 0.0);
  mdp.cost.assign(static_cast<std::size_t>(mdp.n_states) * mdp.n_actions, 0.0);
  mdp.initial.assign(mdp.n_states, 0.0);
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string tag;
    ls >> tag;
    const std::string where = "mdp line " + std::to_string(line_no);
    if (tag == "init:") {
      for (int i = 0; i < mdp.n_states; ++i) {
        if (!(ls >> mdp.initial[i])) throw IoError(where + ": bad initial distribution");
      }
    } else if (tag == "P") {
      int s, a;
      std::string colon;
      if (!(ls >> s >> colon) || colon.back() != ':') throw IoError(where + ": bad P row");
      a = std::atoi(colon.c_str());
      if (s < 0 || s >= mdp.n_states || a < 0 || a >= mdp.n_actions)
        throw IoError(where + ": P index out of range");
      for (int s2 = 0; s2 < mdp.n_states; ++s2) {
        if (!(ls >> mdp.p(s, a, s2))) throw IoError(where + ": bad P row");
      }
    } else if (tag == "C") {
      int s;
      std::string colon;
      if (!(ls >> s >> colon) || colon.back() != ':') throw IoError(where + ": bad C row");
      const int a = std::atoi(colon.c_str());
      if (s < 0 || s >= mdp.n_states || a < 0 || a >= mdp.n_actions)
        throw IoError(where + ": C index out of range");
      if (!(ls >> mdp.c(s, a))) throw IoError(where + ": bad C value");
    } else {
      throw IoError(where + ": unknown tag '" + tag + "'");
    }
  }
  try {
    mdp.validate();
  } catch (const ConfigError& e) {
    throw IoError(std::string("mdp file rejected: ") + e.what());
  }
  return mdp;
}

TabularMDP TabularMDP::load_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read " + path);
  return load(in);
}

// ---------------------------------------------------------------------------
// TabularPolicy
// ---------------------------------------------------------------------------

TabularPolicy TabularPolicy::stationary(int n_states, int n_actions) {
  TabularPolicy p;
  p.n_states = n_states;
  p.n_actions = n_actions;
  p.horizon = 1;
  p.probs.assign(static_cast<std::size_t>(n_states) * n_actions, 0.0);
  return p;
}

TabularPolicy TabularPolicy::non_stationary(int n_states, int n_actions, int horizon) {
  TabularPolicy p;
  p.n_states = n_states;
  p.n_actions = n_actions;
  p.horizon = horizon;
  p.probs.assign(static_cast<std::size_t>(horizon) * n_states * n_actions, 0.0);
  return p;
}

TabularPolicy TabularPolicy::deterministic(const std::vector<int>& action_per_state,
                                           int n_actions) {
  TabularPolicy p = stationary(static_cast<int>(action_per_state.size()), n_actions);
  for (std::size_t s = 0; s < action_per_state.size(); ++s) p.at(1, static_cast<int>(s), action_per_state[s]) = 1.0;
  return p;
}

TabularPolicy TabularPolicy::uniform(int n_states, int n_actions) {
  TabularPolicy p = stationary(n_states, n_actions);
  for (int s = 0; s < n_states; ++s)
    for (int a = 0; a < n_actions; ++a) p.at(1, s, a) = 1.0 / n_actions;
  return p;
}

double TabularPolicy::pi(int t, int s, int a) const {
  const int tt = horizon == 1 ? 0 : t - 1;
  return probs[(static_cast<std::size_t>(tt) * n_states + s) * n_actions + a];
}

double& TabularPolicy::at(int t, int s, int a) {
  const int tt = horizon == 1 ? 0 : t - 1;
  return probs[(static_cast<std::size_t>(tt) * n_states + s) * n_actions + a];
}

void TabularPolicy::validate() const {
  for (int t = 1; t <= horizon; ++t) {
    for (int s = 0; s < n_states; ++s) {
      double row = 0.0;
      for (int a = 0; a < n_actions; ++a) {
        const double v = pi(t, s, a);
        if (v < 0.0) throw ConfigError("policy row has a negative entry");
        row += v;
      }
      if (std::abs(row - 1.0) > 1e-12)
        throw ConfigError("policy row for state " + std::to_string(s) + " must sum to 1");
    }
  }
}

// ---------------------------------------------------------------------------
// Distribution and cost dynamic programs
// ---------------------------------------------------------------------------

namespace {

void check_compatible(const TabularMDP& mdp, const TabularPolicy& policy) {
  if (policy.n_states != mdp.n_states || policy.n_actions != mdp.n_actions)
    throw SchemaError("policy shape does not match the mdp");
  if (policy.horizon != 1 && policy.horizon < mdp.horizon)
    throw SchemaError("non-stationary policy shorter than the mdp horizon");
}

}  // namespace

DistributionReport state_distributions(const TabularMDP& mdp, const TabularPolicy& policy) {
  check_compatible(mdp, policy);
  const int S = mdp.n_states, A = mdp.n_actions, T = mdp.horizon;
  DistributionReport rep;
  rep.per_step.reserve(T);
  std::vector<double> d = mdp.initial;
  rep.average.assign(S, 0.0);
  for (int t = 1; t <= T; ++t) {
    rep.per_step.push_back(d);
    for (int s = 0; s < S; ++s) rep.average[s] += d[s] / T;
    if (t == T) break;
    std::vector<double> next(S, 0.0);
    for (int s = 0; s < S; ++s) {
      if (d[s] == 0.0) continue;
      for (int a = 0; a < A; ++a) {
        const double w = d[s] * policy.pi(t, s, a);
        if (w == 0.0) continue;
        for (int s2 = 0; s2 < S; ++s2) next[s2] += w * mdp.p(s, a, s2);
      }
    }
    d = std::move(next);
  }
  return rep;
}

double expected_cost(const TabularMDP& mdp, const TabularPolicy& policy) {
  const DistributionReport rep = state_distributions(mdp, policy);
  double total = 0.0;
  for (int t = 1; t <= mdp.horizon; ++t) {
    const auto& d = rep.per_step[t - 1];
    for (int s = 0; s < mdp.n_states; ++s) {
      if (d[s] == 0.0) continue;
      double cs = 0.0;
      for (int a = 0; a < mdp.n_actions; ++a) cs += policy.pi(t, s, a) * mdp.c(s, a);
      total += d[s] * cs;
    }
  }
  return total;
}

std::vector<std::vector<double>> continuation_values(const TabularMDP& mdp,
                                                     const TabularPolicy& continuation) {
  check_compatible(mdp, continuation);
  const int S = mdp.n_states, A = mdp.n_actions, T = mdp.horizon;
  std::vector<std::vector<double>> V(T + 1, std::vector<double>(S, 0.0));
  for (int k = 1; k <= T; ++k) {
    const int t_abs = T - k + 1;  // absolute time of the first of the k steps
    for (int s = 0; s < S; ++s) {
      double v = 0.0;
      for (int a = 0; a < A; ++a) {
        const double w = continuation.pi(t_abs, s, a);
        if (w == 0.0) continue;
        double q = mdp.c(s, a);
        if (k > 1) {
          for (int s2 = 0; s2 < S; ++s2) q += mdp.p(s, a, s2) * V[k - 1][s2];
        }
        v += w * q;
      }
      V[k][s] = v;
    }
  }
  return V;
}

double q_value(const TabularMDP& mdp, const TabularPolicy& continuation, int t_remaining, int s,
               int a) {
  if (t_remaining < 1 || t_remaining > mdp.horizon)
    throw ConfigError("t_remaining outside [1, T]");
  const auto V = continuation_values(mdp, continuation);
  double q = mdp.c(s, a);
  if (t_remaining > 1) {
    for (int s2 = 0; s2 < mdp.n_states; ++s2) q += mdp.p(s, a, s2) * V[t_remaining - 1][s2];
  }
  return q;
}

double q_value(const TabularMDP& mdp, const TabularPolicy& continuation, int t_remaining, int s,
               const TabularPolicy& first) {
  if (t_remaining < 1 || t_remaining > mdp.horizon)
    throw ConfigError("t_remaining outside [1, T]");
  const auto V = continuation_values(mdp, continuation);
  const int t_abs = mdp.horizon - t_remaining + 1;
  double q = 0.0;
  for (int a = 0; a < mdp.n_actions; ++a) {
    const double w = first.pi(t_abs, s, a);
    if (w == 0.0) continue;
    double qa = mdp.c(s, a);
    if (t_remaining > 1) {
      for (int s2 = 0; s2 < mdp.n_states; ++s2) qa += mdp.p(s, a, s2) * V[t_remaining - 1][s2];
    }
    q += w * qa;
  }
  return q;
}

double recoverability_u(const TabularMDP& mdp, const TabularPolicy& expert,
                        const DistributionReport& visited) {
  const int S = mdp.n_states, A = mdp.n_actions, T = mdp.horizon;
  const auto V = continuation_values(mdp, expert);
  double u = 0.0;
  for (int t = 1; t <= T; ++t) {
    const int k = T - t + 1;
    const auto& d = visited.per_step[t - 1];
    for (int s = 0; s < S; ++s) {
      if (d[s] <= 0.0) continue;
      for (int a = 0; a < A; ++a) {
        double q = mdp.c(s, a);
        if (k > 1) {
          for (int s2 = 0; s2 < S; ++s2) q += mdp.p(s, a, s2) * V[k - 1][s2];
        }
        u = std::max(u, q - V[k][s]);
      }
    }
  }
  return u;
}

double tv_distance(std::span<const double> p, std::span<const double> q) {
  if (p.size() != q.size()) throw SchemaError("tv_distance: vectors have different lengths");
  double d = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) d += std::abs(p[i] - q[i]);
  return d;
}

double disagreement_rate(const TabularMDP& mdp, const TabularPolicy& policy,
                         const TabularPolicy& expert, const DistributionReport& dist) {
  double loss = 0.0;
  for (int t = 1; t <= mdp.horizon; ++t) {
    const auto& d = dist.per_step[t - 1];
    for (int s = 0; s < mdp.n_states; ++s) {
      if (d[s] == 0.0) continue;
      double agree = 0.0;
      for (int a = 0; a < mdp.n_actions; ++a) agree += policy.pi(t, s, a) * expert.pi(t, s, a);
      loss += d[s] * (1.0 - agree);
    }
  }
  return loss / mdp.horizon;
}

double expected_squared_loss(const TabularMDP& mdp, const std::vector<std::vector<double>>& scores,
                             const TabularPolicy& expert, const DistributionReport& dist) {
  double loss = 0.0;
  for (int s = 0; s < mdp.n_states; ++s) {
    if (dist.average[s] == 0.0) continue;
    // expert rows are deterministic here; squared distance to the one-hot
    double v = 0.0;
    for (int a = 0; a < mdp.n_actions; ++a) {
      const double target = expert.pi(1, s, a);
      const double d = scores[s][a] - target;
      v += d * d;
    }
    loss += dist.average[s] * v;
  }
  return loss;
}

TabularPolicy mix_policies(const TabularPolicy& expert, const TabularPolicy& learned,
                           double beta) {
  if (beta < 0.0 || beta > 1.0) throw ConfigError("beta must lie in [0,1]");
  if (expert.n_states != learned.n_states || expert.n_actions != learned.n_actions)
    throw SchemaError("mix_policies: shape mismatch");
  const int H = std::max(expert.horizon, learned.horizon);
  TabularPolicy out = H == 1 ? TabularPolicy::stationary(expert.n_states, expert.n_actions)
                             : TabularPolicy::non_stationary(expert.n_states, expert.n_actions, H);
  for (int t = 1; t <= H; ++t)
    for (int s = 0; s < expert.n_states; ++s)
      for (int a = 0; a < expert.n_actions; ++a)
        out.at(t, s, a) = beta * expert.pi(t, s, a) + (1.0 - beta) * learned.pi(t, s, a);
  return out;
}

// ---------------------------------------------------------------------------
// Constructions
// ---------------------------------------------------------------------------

double kaariainen_expected_mistakes(int T, double eps) {
  const double q = 1.0 - 2.0 * eps;
  return T / 2.0 - (1.0 - std::pow(q, T + 1)) / (4.0 * eps) + 0.5;
}

ChainInstance build_kaariainen_chain(int T, double eps) {
  if (T < 1) throw ConfigError("chain horizon must be positive");
  if (eps <= 0.0 || eps > 0.5) throw ConfigError("chain eps must lie in (0, 0.5]");
  ChainInstance inst;
  TabularMDP& mdp = inst.mdp;
  mdp.n_states = 2;  // 0: in sync, 1: out of sync
  mdp.n_actions = 2;  // 0: emit in-sync bit, 1: emit flipped bit
  mdp.horizon = T;
  mdp.transition.assign(2 * 2 * 2, 0.0);
  mdp.cost.assign(2 * 2, 0.0);
  mdp.initial = {1.0, 0.0};
  for (int s = 0; s < 2; ++s) {
    mdp.p(s, 0, 0) = 1.0;  // correct output resynchronizes
    mdp.p(s, 1, 1) = 1.0;  // wrong output desynchronizes
    mdp.c(s, 0) = 0.0;
    mdp.c(s, 1) = 1.0;
  }
  mdp.validate();

  // The expert follows the generating rule exactly: from a synced input it
  // emits the correct bit; once fed a flipped input the rule keeps flipping.
  inst.expert = TabularPolicy::deterministic({0, 1}, 2);

  // The learner applies the same rule but errs with probability eps.
  inst.learner = TabularPolicy::stationary(2, 2);
  inst.learner.at(1, 0, 0) = 1.0 - eps;
  inst.learner.at(1, 0, 1) = eps;
  inst.learner.at(1, 1, 0) = eps;
  inst.learner.at(1, 1, 1) = 1.0 - eps;
  inst.learner.validate();
  return inst;
}

GapInstance build_quadratic_gap_example(int T, double eps, double on_track_cost) {
  if (T < 1) throw ConfigError("gap horizon must be positive");
  if (eps < 0.0 || eps * T > 1.0 + 1e-12) throw ConfigError("gap example requires eps*T <= 1");
  if (on_track_cost < 0.0 || on_track_cost > 1.0)
    throw ConfigError("on-track cost must lie in [0,1]");
  GapInstance inst;
  TabularMDP& mdp = inst.mdp;
  // States: 0 on-track, 1 off-track (absorbing, cost 1), 2 terminal sink.
  mdp.n_states = 3;
  mdp.n_actions = 2;  // 0: stay the course, 1: deviate
  mdp.horizon = T;
  mdp.transition.assign(3 * 2 * 3, 0.0);
  mdp.cost.assign(3 * 2, 0.0);
  mdp.initial = {1.0, 0.0, 0.0};
  mdp.p(0, 0, 0) = 1.0;
  mdp.p(0, 1, 1) = 1.0;
  mdp.p(1, 0, 1) = 1.0;
  mdp.p(1, 1, 1) = 1.0;
  mdp.p(2, 0, 2) = 1.0;
  mdp.p(2, 1, 2) = 1.0;
  mdp.c(0, 0) = on_track_cost;
  mdp.c(0, 1) = 1.0;  // the deviating step itself already costs a full unit
  mdp.c(1, 0) = 1.0;
  mdp.c(1, 1) = 1.0;
  mdp.validate();

  inst.expert = TabularPolicy::deterministic({0, 0, 0}, 2);

  // Cloned learner: errs with probability eps*T at the first step and is
  // exact afterwards, giving 0-1 loss eps under the expert's (uniform in
  // time, all on-track) state distribution.
  inst.cloned_learner = TabularPolicy::non_stationary(3, 2, T);
  for (int t = 1; t <= T; ++t) {
    const double perr = t == 1 ? eps * T : 0.0;
    inst.cloned_learner.at(t, 0, 0) = 1.0 - perr;
    inst.cloned_learner.at(t, 0, 1) = perr;
    inst.cloned_learner.at(t, 1, 0) = 1.0;
    inst.cloned_learner.at(t, 2, 0) = 1.0;
  }
  inst.cloned_learner.validate();
  return inst;
}

GapFamilyInstance build_gap_family_instance(int T, double eps) {
  if (T < 2) throw ConfigError("gap family horizon must be at least 2");
  if (eps <= 0.0 || eps >= 0.5) throw ConfigError("gap family eps must lie in (0, 0.5)");
  GapFamilyInstance inst;
  TabularMDP& mdp = inst.mdp;
  // States: 0,1 on-track (aliased pair), 2 off-track.
  // Actions: 0 correct-at-state-0, 1 correct-at-state-1, 2 recover.
  mdp.n_states = 3;
  mdp.n_actions = 3;
  mdp.horizon = T;
  mdp.transition.assign(3 * 3 * 3, 0.0);
  mdp.cost.assign(3 * 3, 0.0);
  mdp.initial = {1.0 - eps, eps, 0.0};
  auto on_track_row = [&](int s, int a) {
    mdp.p(s, a, 0) = 1.0 - eps;
    mdp.p(s, a, 1) = eps;
  };
  auto off_track_row = [&](int s, int a) { mdp.p(s, a, 2) = 1.0; };
  on_track_row(0, 0);
  off_track_row(0, 1);
  off_track_row(0, 2);
  off_track_row(1, 0);
  on_track_row(1, 1);
  off_track_row(1, 2);
  off_track_row(2, 0);
  off_track_row(2, 1);
  on_track_row(2, 2);
  for (int a = 0; a < 3; ++a) {
    mdp.c(0, a) = 0.0;
    mdp.c(1, a) = 0.0;
    mdp.c(2, a) = 1.0;
  }
  mdp.validate();

  inst.expert = TabularPolicy::deterministic({0, 1, 2}, 3);
  inst.feature_group = {0, 0, 1};  // both on-track states look identical
  inst.n_groups = 2;
  return inst;
}

// ---------------------------------------------------------------------------
// TabularEnv
// ---------------------------------------------------------------------------

TabularEnv::TabularEnv(const TabularMDP& mdp, const TabularPolicy& expert, EnvSchema schema)
    : mdp_(mdp), expert_(expert), schema_(std::move(schema)) {
  check_compatible(mdp, expert);
}

void TabularEnv::reset(RngStream& rng) {
  state_ = rng.categorical(mdp_.initial);
  t_ = 1;
  cost_acc_ = 0.0;
}

StateObs TabularEnv::observe() const { return StateObs::from_tabular(state_, t_); }

ActionVal TabularEnv::expert_action() const {
  int best = 0;
  double bestp = -1.0;
  for (int a = 0; a < mdp_.n_actions; ++a) {
    const double w = expert_.pi(t_, state_, a);
    if (w > bestp) {
      bestp = w;
      best = a;
    }
  }
  return ActionVal::make_discrete(best);
}

bool TabularEnv::step(const ActionVal& action, RngStream& rng) {
  if (!action.is_discrete()) throw SchemaError("tabular env expects a discrete action");
  const int a = action.label();
  if (a < 0 || a >= mdp_.n_actions) throw SchemaError("action label out of range");
  cost_acc_ += mdp_.c(state_, a);
  std::vector<double> row(mdp_.n_states);
  for (int s2 = 0; s2 < mdp_.n_states; ++s2) row[s2] = mdp_.p(state_, a, s2);
  state_ = rng.categorical(row);
  ++t_;
  return t_ <= mdp_.horizon;
}

std::map<std::string, double> TabularEnv::episode_metrics() const {
  return {{"episode_cost", cost_acc_}};
}

// ---------------------------------------------------------------------------
// TabularEnvModel
// ---------------------------------------------------------------------------

TabularPolicy extract_tabular_policy(const Policy& policy, const TabularMDP& mdp) {
  RngStream rng(0);
  TabularPolicy out =
      TabularPolicy::non_stationary(mdp.n_states, mdp.n_actions, mdp.horizon);
  for (int t = 1; t <= mdp.horizon; ++t) {
    for (int s = 0; s < mdp.n_states; ++s) {
      const ActionVal a = policy.act(StateObs::from_tabular(s, t), rng);
      out.at(t, s, a.label()) = 1.0;
    }
  }
  return out;
}

TabularEnvModel::TabularEnvModel(TabularMDP mdp, TabularPolicy expert, std::string name,
                                 std::vector<int> feature_group, int n_groups)
    : mdp_(std::move(mdp)), expert_(std::move(expert)), group_(std::move(feature_group)),
      n_groups_(n_groups) {
  mdp_.validate();
  expert_.validate();
  if (group_.empty()) {
    group_.resize(mdp_.n_states);
    for (int s = 0; s < mdp_.n_states; ++s) group_[s] = s;
    n_groups_ = mdp_.n_states;
  }
  if (static_cast<int>(group_.size()) != mdp_.n_states || n_groups_ < 1)
    throw ConfigError("feature group map does not match the state count");
  schema_.name = std::move(name);
  schema_.feature_dim = 0;
  schema_.n_states = mdp_.n_states;
  schema_.action = ActionSpec::discrete(mdp_.n_actions);
}

std::unique_ptr<Environment> TabularEnvModel::make() const {
  return std::make_unique<TabularEnv>(mdp_, expert_, schema_);
}

Featurizer TabularEnvModel::featurizer() const {
  return group_onehot_featurizer(group_, n_groups_);
}

PolicyPtr TabularEnvModel::expert_policy() const {
  const int n_actions = mdp_.n_actions;
  return std::make_shared<FunctionPolicy>(
      [expert = expert_, n_actions](const StateObs& s) {
        if (!s.tabular) throw SchemaError("tabular expert needs a tabular observation");
        int best = 0;
        double bestp = -1.0;
        for (int a = 0; a < n_actions; ++a) {
          const double w = expert.pi(s.time_step, *s.tabular, a);
          if (w > bestp) {
            bestp = w;
            best = a;
          }
        }
        return ActionVal::make_discrete(best);
      },
      "expert");
}

double TabularEnvModel::metric_from(const std::vector<Trajectory>& trajs) const {
  double total = 0.0;
  for (const auto& t : trajs) total += t.metrics.at("episode_cost");
  return trajs.empty() ? 0.0 : total / static_cast<double>(trajs.size());
}

std::optional<double> TabularEnvModel::deterministic_metric(const Policy& policy) const {
  return expected_cost(mdp_, extract_tabular_policy(policy, mdp_));
}

}  // namespace ilb
