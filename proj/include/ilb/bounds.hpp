#ifndef ILB_BOUNDS_HPP
#define ILB_BOUNDS_HPP

#include <iosfwd>
#include <string>
#include <vector>

#include "ilb/meta.hpp"
#include "ilb/tabular.hpp"

namespace ilb {

struct BoundRow {
  std::string instance;
  std::string theorem;
  double lhs = 0.0;
  double rhs = 0.0;
  double slack = 0.0;  // rhs - lhs
  bool pass = false;
  double wall_s = 0.0;
};

struct BoundReport {
  std::vector<BoundRow> rows;
  bool all_pass() const;
  void to_csv(std::ostream& out) const;
};

// Suites: compounding (quadratic supervised bound and its tight instance),
// forward (linear recoverability bound), lemma_tv (state-distribution
// drift under expert mixing), dagger_regret (the no-regret reduction with
// exact losses), concentration (finite-sample deviation bound).
BoundReport verify_bounds(const std::string& suite);

// ---------------------------------------------------------------------------
// Exact-loss dataset aggregation on a tabular instance
// ---------------------------------------------------------------------------

// Policy class: one score row per feature group, squared loss against the
// expert's one-hot action, executed by argmax. The trainer is exact
// follow-the-leader over the state-occupancy-weighted aggregate, so every
// regret quantity is computed in closed form.
struct ExactDaggerResult {
  std::vector<double> chosen_losses;   // l_i(pi_i) under the mixture distribution
  std::vector<double> own_losses;      // loss of iterate i under its own distribution
  double eps_hat = 0.0;                // best-in-hindsight average loss
  double gamma = 0.0;                  // average regret of the iterate sequence
  double beta_penalty = 0.0;           // (2 l_max / N) [n_beta + T sum_{i>n_beta} beta_i]
  int n_beta = 0;
  int selected = 0;                    // 1-based index of the min own-loss iterate
  double lhs = 0.0;                    // own loss of the selected iterate
  double rhs = 0.0;                    // eps_hat + gamma + beta_penalty
};

ExactDaggerResult exact_dagger_squared(const TabularMDP& mdp, const TabularPolicy& expert,
                                       const std::vector<int>& feature_group, int n_groups, int N,
                                       const BetaSchedule& schedule);

// gamma_N of the same run truncated to its first n iterations.
double exact_dagger_gamma_prefix(const TabularMDP& mdp, const TabularPolicy& expert,
                                 const std::vector<int>& feature_group, int n_groups, int n,
                                 const BetaSchedule& schedule);

}  // namespace ilb

#endif  // ILB_BOUNDS_HPP
