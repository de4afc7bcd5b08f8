#include "ilb/bounds.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <numeric>

namespace ilb {

namespace {

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

double now_s() {
  return std::chrono::duration<double>(std::chrono::steady_clock::now().time_since_epoch())
      .count();
}

constexpr double kTol = 1e-9;

BoundRow make_row(std::string instance, std::string theorem, double lhs, double rhs,
                  double t0) {
  BoundRow row;
  row.instance = std::move(instance);
  row.theorem = std::move(theorem);
  row.lhs = lhs;
  row.rhs = rhs;
  row.slack = rhs - lhs;
  row.pass = lhs <= rhs + kTol;
  row.wall_s = now_s() - t0;
  return row;
}

TabularMDP random_instance(int S, int A, int T, RngStream& rng) {
  TabularMDP mdp;
  mdp.n_states = S;
  mdp.n_actions = A;
  mdp.horizon = T;
  mdp.transition.assign(static_cast<std::size_t>(S) * A * S, 0.0);
  mdp.cost.assign(static_cast<std::size_t>(S) * A, 0.0);
  mdp.initial.assign(S, 0.0);
  auto fill_simplex = [&](double* v, int n) {
    double z = 0.0;
    for (int i = 0; i < n; ++i) z += (v[i] = rng.uniform(0.02, 1.0));
    double acc = 0.0;
    for (int i = 0; i < n - 1; ++i) {
      v[i] /= z;
      acc += v[i];
    }
    v[n - 1] = 1.0 - acc;
  };
  fill_simplex(mdp.initial.data(), S);
  for (int s = 0; s < S; ++s)
    for (int a = 0; a < A; ++a) {
      fill_simplex(&mdp.transition[(s * A + a) * static_cast<std::size_t>(S)], S);
      mdp.c(s, a) = rng.uniform01() < 0.4 ? 0.0 : rng.uniform01();
    }
  mdp.validate();
  return mdp;
}

TabularPolicy random_stochastic(int S, int A, RngStream& rng) {
  TabularPolicy p = TabularPolicy::stationary(S, A);
  for (int s = 0; s < S; ++s) {
    std::vector<double> row(A);
    double z = 0.0;
    for (int a = 0; a < A; ++a) z += (row[a] = rng.uniform(0.05, 1.0));
    double acc = 0.0;
    for (int a = 0; a < A - 1; ++a) {
      row[a] /= z;
      acc += row[a];
    }
    row[A - 1] = 1.0 - acc;
    for (int a = 0; a < A; ++a) p.at(1, s, a) = row[a];
  }
  return p;
}

TabularPolicy random_deterministic(int S, int A, RngStream& rng) {
  std::vector<int> actions(S);
  for (int s = 0; s < S; ++s) actions[s] = static_cast<int>(rng.uniform_int(A));
  return TabularPolicy::deterministic(actions, A);
}

}  // namespace

bool BoundReport::all_pass() const {
  for (const auto& r : rows) {
    if (!r.pass) return false;
  }
  return true;
}

void BoundReport::to_csv(std::ostream& out) const {
  out << "instance,theorem,lhs,rhs,slack,pass,wall_s\n";
  for (const auto& r : rows) {
    out << r.instance << ',' << r.theorem << ',' << fmt_double(r.lhs) << ',' << fmt_double(r.rhs)
        << ',' << fmt_double(r.slack) << ',' << (r.pass ? 1 : 0) << ',' << fmt_double(r.wall_s)
        << '\n';
  }
}

// ---------------------------------------------------------------------------
// Exact-loss dataset aggregation
// ---------------------------------------------------------------------------

namespace {

struct ExactClass {
  const TabularMDP& mdp;
  const TabularPolicy& expert;
  const std::vector<int>& group;
  int n_groups;

  std::vector<std::vector<double>> expert_onehot;  // per state

  explicit ExactClass(const TabularMDP& m, const TabularPolicy& e, const std::vector<int>& g,
                      int ng)
      : mdp(m), expert(e), group(g), n_groups(ng) {
    expert_onehot.assign(m.n_states, std::vector<double>(m.n_actions, 0.0));
    for (int s = 0; s < m.n_states; ++s) {
      int best = 0;
      double bp = -1.0;
      for (int a = 0; a < m.n_actions; ++a) {
        if (e.pi(1, s, a) > bp) {
          bp = e.pi(1, s, a);
          best = a;
        }
      }
      expert_onehot[s][best] = 1.0;
    }
  }

  // argmax execution of a score table (ties toward the lowest action)
  TabularPolicy executed(const std::vector<std::vector<double>>& scores) const {
    std::vector<int> act(mdp.n_states, 0);
    for (int s = 0; s < mdp.n_states; ++s) {
      const auto& row = scores[group[s]];
      int best = 0;
      for (int a = 1; a < mdp.n_actions; ++a) {
        if (row[a] > row[best]) best = a;
      }
      act[s] = best;
    }
    return TabularPolicy::deterministic(act, mdp.n_actions);
  }

  double loss_under(const std::vector<std::vector<double>>& scores,
                    const std::vector<double>& avg_dist) const {
    double loss = 0.0;
    for (int s = 0; s < mdp.n_states; ++s) {
      if (avg_dist[s] == 0.0) continue;
      const auto& row = scores[group[s]];
      double v = 0.0;
      for (int a = 0; a < mdp.n_actions; ++a) {
        const double d = row[a] - expert_onehot[s][a];
        v += d * d;
      }
      loss += avg_dist[s] * v;
    }
    return loss;
  }

  // follow-the-leader closed form: occupancy-weighted mean of one-hot targets
  std::vector<std::vector<double>> ftl(const std::vector<double>& weights) const {
    std::vector<std::vector<double>> scores(n_groups,
                                            std::vector<double>(mdp.n_actions, 0.0));
    std::vector<double> denom(n_groups, 0.0);
    for (int s = 0; s < mdp.n_states; ++s) {
      const int g = group[s];
      denom[g] += weights[s];
      for (int a = 0; a < mdp.n_actions; ++a)
        scores[g][a] += weights[s] * expert_onehot[s][a];
    }
    for (int g = 0; g < n_groups; ++g) {
      if (denom[g] > 0.0) {
        for (double& v : scores[g]) v /= denom[g];
      }
    }
    return scores;
  }
};

}  // namespace

ExactDaggerResult exact_dagger_squared(const TabularMDP& mdp, const TabularPolicy& expert,
                                       const std::vector<int>& feature_group, int n_groups,
                                       int N, const BetaSchedule& schedule) {
  if (N < 1) throw ConfigError("need at least one iteration");
  const ExactClass cls(mdp, expert, feature_group, n_groups);
  const int T = mdp.horizon;
  const double ell_max = 2.0;

  ExactDaggerResult res;
  std::vector<double> weights(mdp.n_states, 0.0);
  std::vector<std::vector<double>> mixture_avg_dists;
  std::vector<std::vector<std::vector<double>>> iterates;
  std::vector<std::vector<double>> scores(n_groups, std::vector<double>(mdp.n_actions, 0.0));

  for (int i = 1; i <= N; ++i) {
    iterates.push_back(scores);
    const double beta = schedule.beta(i);
    const TabularPolicy exec = cls.executed(scores);
    const TabularPolicy mixed = mix_policies(expert, exec, beta);
    const DistributionReport dist = state_distributions(mdp, mixed);
    mixture_avg_dists.push_back(dist.average);
    res.chosen_losses.push_back(cls.loss_under(scores, dist.average));
    for (int s = 0; s < mdp.n_states; ++s) weights[s] += dist.average[s];
    scores = cls.ftl(weights);
  }

  // hindsight minimizer over the whole sequence is the final FTL iterate
  double eps_hat = 0.0;
  for (const auto& d : mixture_avg_dists) eps_hat += cls.loss_under(scores, d);
  res.eps_hat = eps_hat / N;
  const double mean_chosen =
      std::accumulate(res.chosen_losses.begin(), res.chosen_losses.end(), 0.0) / N;
  res.gamma = mean_chosen - res.eps_hat;

  res.own_losses.resize(N);
  for (int i = 0; i < N; ++i) {
    const TabularPolicy exec = cls.executed(iterates[i]);
    const DistributionReport own = state_distributions(mdp, exec);
    res.own_losses[i] = cls.loss_under(iterates[i], own.average);
  }
  res.selected = static_cast<int>(std::min_element(res.own_losses.begin(), res.own_losses.end()) -
                                  res.own_losses.begin()) +
                 1;
  res.lhs = res.own_losses[res.selected - 1];

  res.n_beta = 0;
  for (int i = 1; i <= N; ++i) {
    if (schedule.beta(i) > 1.0 / T) res.n_beta = i;
  }
  double tail = 0.0;
  for (int i = res.n_beta + 1; i <= N; ++i) tail += schedule.beta(i);
  res.beta_penalty = (2.0 * ell_max / N) * (res.n_beta + T * tail);
  res.rhs = res.eps_hat + res.gamma + res.beta_penalty;
  return res;
}

double exact_dagger_gamma_prefix(const TabularMDP& mdp, const TabularPolicy& expert,
                                 const std::vector<int>& feature_group, int n_groups, int n,
                                 const BetaSchedule& schedule) {
  return exact_dagger_squared(mdp, expert, feature_group, n_groups, n, schedule).gamma;
}

// ---------------------------------------------------------------------------
// Suites
// ---------------------------------------------------------------------------

namespace {

void compounding_suite(BoundReport& rep) {
  {
    const double t0 = now_s();
    const GapInstance inst = build_quadratic_gap_example(10, 0.05);
    const double j_exp = expected_cost(inst.mdp, inst.expert);
    const double j_sup = expected_cost(inst.mdp, inst.cloned_learner);
    rep.rows.push_back(make_row("gap_T10_eps0.05", "quadratic_bound", j_sup,
                                j_exp + 100 * 0.05, t0));
    // tightness: the bound is met with equality on this instance
    rep.rows.push_back(make_row("gap_T10_eps0.05", "quadratic_tight",
                                std::abs(j_sup - j_exp - (100 * 0.05 - 0.05 * 10 * j_exp)), 0.0,
                                t0));
  }
  for (const auto& [T, eps] : std::vector<std::pair<int, double>>{{10, 0.1}, {20, 0.1}, {15, 0.3}}) {
    const double t0 = now_s();
    const ChainInstance inst = build_kaariainen_chain(T, eps);
    const double j_exp = expected_cost(inst.mdp, inst.expert);
    const double j = expected_cost(inst.mdp, inst.learner);
    const auto d_exp = state_distributions(inst.mdp, inst.expert);
    const double eps_sup = disagreement_rate(inst.mdp, inst.learner, inst.expert, d_exp);
    rep.rows.push_back(make_row("chain_T" + std::to_string(T), "quadratic_bound", j,
                                j_exp + T * T * eps_sup, t0));
  }
  RngStream rng(0xc0de);
  for (int k = 0; k < 4; ++k) {
    const double t0 = now_s();
    const int S = 3 + static_cast<int>(rng.uniform_int(3));
    const int T = 3 + static_cast<int>(rng.uniform_int(6));
    const TabularMDP mdp = random_instance(S, 2, T, rng);
    const TabularPolicy pol = random_stochastic(S, 2, rng);
    const TabularPolicy expert = random_deterministic(S, 2, rng);
    const auto d_exp = state_distributions(mdp, expert);
    const double eps_sup = disagreement_rate(mdp, pol, expert, d_exp);
    rep.rows.push_back(make_row("random_" + std::to_string(k), "quadratic_bound",
                                expected_cost(mdp, pol),
                                expected_cost(mdp, expert) + T * T * eps_sup, t0));
  }
}

void forward_suite(BoundReport& rep) {
  RngStream rng(0xf0);
  for (int k = 0; k < 5; ++k) {
    const double t0 = now_s();
    const int S = 3 + static_cast<int>(rng.uniform_int(3));
    const int A = 2 + static_cast<int>(rng.uniform_int(2));
    const int T = 3 + static_cast<int>(rng.uniform_int(6));
    const TabularMDP mdp = random_instance(S, A, T, rng);
    const TabularPolicy pol = random_stochastic(S, A, rng);
    const TabularPolicy expert = random_deterministic(S, A, rng);
    const auto d_pol = state_distributions(mdp, pol);
    const double eps_own = disagreement_rate(mdp, pol, expert, d_pol);
    const double u = recoverability_u(mdp, expert, d_pol);
    rep.rows.push_back(make_row("random_" + std::to_string(k), "recoverability_bound",
                                expected_cost(mdp, pol),
                                expected_cost(mdp, expert) + u * T * eps_own, t0));
  }
  {
    const double t0 = now_s();
    const ChainInstance inst = build_kaariainen_chain(12, 0.2);
    const auto d = state_distributions(inst.mdp, inst.learner);
    const double eps_own = disagreement_rate(inst.mdp, inst.learner, inst.expert, d);
    const double u = recoverability_u(inst.mdp, inst.expert, d);
    rep.rows.push_back(make_row("chain_T12", "recoverability_bound",
                                expected_cost(inst.mdp, inst.learner),
                                expected_cost(inst.mdp, inst.expert) + u * 12 * eps_own, t0));
  }
  {
    const double t0 = now_s();
    const GapFamilyInstance inst = build_gap_family_instance(10, 0.05);
    const TabularPolicy rec = TabularPolicy::deterministic({0, 0, 2}, 3);
    const auto d = state_distributions(inst.mdp, rec);
    const double eps_own = disagreement_rate(inst.mdp, rec, inst.expert, d);
    const double u = recoverability_u(inst.mdp, inst.expert, d);
    rep.rows.push_back(make_row("gap_family_T10", "recoverability_bound",
                                expected_cost(inst.mdp, rec),
                                expected_cost(inst.mdp, inst.expert) + u * 10 * eps_own, t0));
  }
}

void lemma_tv_suite(BoundReport& rep) {
  struct Named {
    std::string name;
    TabularMDP mdp;
    TabularPolicy expert;
    TabularPolicy learned;
  };
  std::vector<Named> instances;
  {
    ChainInstance c = build_kaariainen_chain(10, 0.2);
    instances.push_back({"chain_T10", c.mdp, c.expert, c.learner});
  }
  {
    GapFamilyInstance g = build_gap_family_instance(10, 0.05);
    instances.push_back({"gap_family_T10", g.mdp, g.expert,
                         TabularPolicy::deterministic({0, 0, 0}, 3)});
  }
  {
    RngStream rng(0x777);
    const TabularMDP mdp = random_instance(6, 3, 12, rng);
    instances.push_back({"random_6s", mdp, random_deterministic(6, 3, rng),
                         random_stochastic(6, 3, rng)});
  }
  for (const auto& inst : instances) {
    const auto d_learned = state_distributions(inst.mdp, inst.learned);
    for (int i = 0; i <= 100; ++i) {
      const double t0 = now_s();
      const double beta = i / 100.0;
      const TabularPolicy mixed = mix_policies(inst.expert, inst.learned, beta);
      const auto d_mixed = state_distributions(inst.mdp, mixed);
      const double tv = tv_distance(d_mixed.average, d_learned.average);
      char name[64];
      std::snprintf(name, sizeof(name), "%s:beta=%.2f", inst.name.c_str(), beta);
      rep.rows.push_back(make_row(name, "state_mix_drift", tv,
                                  std::min(2.0, 2.0 * inst.mdp.horizon * beta), t0));
    }
  }
}

void dagger_regret_suite(BoundReport& rep) {
  struct Case {
    std::string name;
    TabularMDP mdp;
    TabularPolicy expert;
    std::vector<int> group;
    int n_groups;
    BetaSchedule schedule;
  };
  std::vector<Case> cases;
  {
    GapFamilyInstance g = build_gap_family_instance(10, 0.05);
    cases.push_back({"gap_family_indicator", g.mdp, g.expert, g.feature_group, g.n_groups,
                     BetaSchedule::indicator()});
    cases.push_back({"gap_family_geometric", g.mdp, g.expert, g.feature_group, g.n_groups,
                     BetaSchedule::geometric(0.5)});
  }
  {
    ChainInstance c = build_kaariainen_chain(8, 0.25);
    cases.push_back({"chain_indicator", c.mdp, c.expert, {0, 1}, 2, BetaSchedule::indicator()});
  }
  for (const auto& cs : cases) {
    const double t0 = now_s();
    const ExactDaggerResult res =
        exact_dagger_squared(cs.mdp, cs.expert, cs.group, cs.n_groups, 32, cs.schedule);
    rep.rows.push_back(make_row(cs.name, "no_regret_reduction", res.lhs, res.rhs, t0));
    rep.rows.push_back(make_row(cs.name, "ftl_nonneg_regret", 0.0, res.gamma, t0));
  }
}

void concentration_suite(BoundReport& rep) {
  // exact-loss iterates on a small instance; each repetition samples m
  // trajectories per iteration and tests the one-sided deviation bound
  const double t0 = now_s();
  const GapFamilyInstance g = build_gap_family_instance(8, 0.1);
  const int N = 8, m = 5, reps = 200;
  const double delta = 0.1;
  const double ell_max = 2.0;
  const BetaSchedule schedule = BetaSchedule::indicator();
  const ExactDaggerResult exact =
      exact_dagger_squared(g.mdp, g.expert, g.feature_group, g.n_groups, N, schedule);

  // rebuild the iterate score tables to evaluate sampled per-step losses
  const ExactClass cls(g.mdp, g.expert, g.feature_group, g.n_groups);
  std::vector<std::vector<std::vector<double>>> iterates;
  {
    std::vector<double> weights(g.mdp.n_states, 0.0);
    std::vector<std::vector<double>> scores(g.n_groups,
                                            std::vector<double>(g.mdp.n_actions, 0.0));
    for (int i = 1; i <= N; ++i) {
      iterates.push_back(scores);
      const TabularPolicy exec = cls.executed(scores);
      const TabularPolicy mixed = mix_policies(g.expert, exec, schedule.beta(i));
      const DistributionReport dist = state_distributions(g.mdp, mixed);
      for (int s = 0; s < g.mdp.n_states; ++s) weights[s] += dist.average[s];
      scores = cls.ftl(weights);
    }
  }

  const double bound = ell_max * std::sqrt(2.0 * std::log(1.0 / delta) / (m * N));
  int failures = 0;
  for (int r = 0; r < reps; ++r) {
    double dev = 0.0;
    for (int i = 1; i <= N; ++i) {
      const TabularPolicy exec = cls.executed(iterates[i - 1]);
      const TabularPolicy mixed = mix_policies(g.expert, exec, schedule.beta(i));
      for (int j = 0; j < m; ++j) {
        // per-trajectory average per-step loss of iterate i under pi_i
        RngStream rng = RngStream::child(0xacc, static_cast<std::uint64_t>(r) * 1000 + i, j);
        int s = rng.categorical(g.mdp.initial);
        double traj_loss = 0.0;
        for (int t = 1; t <= g.mdp.horizon; ++t) {
          double v = 0.0;
          const auto& row = iterates[i - 1][g.feature_group[s]];
          for (int a = 0; a < g.mdp.n_actions; ++a) {
            const double d = row[a] - cls.expert_onehot[s][a];
            v += d * d;
          }
          traj_loss += v / g.mdp.horizon;
          std::vector<double> arow(g.mdp.n_actions);
          for (int a = 0; a < g.mdp.n_actions; ++a) arow[a] = mixed.pi(t, s, a);
          const int act = rng.categorical(arow);
          std::vector<double> trow(g.mdp.n_states);
          for (int s2 = 0; s2 < g.mdp.n_states; ++s2) trow[s2] = g.mdp.p(s, act, s2);
          s = rng.categorical(trow);
        }
        dev += (exact.chosen_losses[i - 1] - traj_loss) / (m * N);
      }
    }
    if (dev > bound) ++failures;
  }
  const double rate = static_cast<double>(failures) / reps;
  rep.rows.push_back(make_row("gap_family_N8_m5", "azuma_failure_rate", rate, delta + 0.05, t0));
}

}  // namespace

BoundReport verify_bounds(const std::string& suite) {
  BoundReport rep;
  if (suite == "compounding") compounding_suite(rep);
  else if (suite == "forward") forward_suite(rep);
  else if (suite == "lemma_tv") lemma_tv_suite(rep);
  else if (suite == "dagger_regret") dagger_regret_suite(rep);
  else if (suite == "concentration") concentration_suite(rep);
  else throw ConfigError("unknown bound suite: " + suite);
  return rep;
}

}  // namespace ilb
