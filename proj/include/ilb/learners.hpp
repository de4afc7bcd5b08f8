#ifndef ILB_LEARNERS_HPP
#define ILB_LEARNERS_HPP

#include <Eigen/Dense>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "ilb/core.hpp"

namespace ilb {

// ---------------------------------------------------------------------------
// Models
// ---------------------------------------------------------------------------

// Linear map with unregularized bias; rows of W are one output each.
struct LinearRegressor {
  Eigen::MatrixXd W;   // out_dim x feature_dim
  Eigen::VectorXd b;   // out_dim
  double ridge_lambda = 0.0;

  Eigen::VectorXd predict(const Eigen::Ref<const Eigen::VectorXd>& x) const {
    return W * x + b;
  }
};

struct LinearClassifier {
  enum class Mode { bits, allpairs };
  Mode mode = Mode::bits;
  int n_classes = 0;   // allpairs: class count; bits: 2^n_bits
  Eigen::MatrixXd W;   // n_separators x feature_dim
  Eigen::VectorXd b;   // n_separators
  double reg_lambda = 0.0;

  int n_separators() const { return static_cast<int>(W.rows()); }
  Eigen::VectorXd raw_margins(const Eigen::Ref<const Eigen::VectorXd>& x) const {
    return W * x + b;
  }
  // bits mode: label assembled from per-bit indicators I(margin > 0).
  // allpairs mode: pairwise vote, ties broken toward the lowest class index.
  int predict(const Eigen::Ref<const Eigen::VectorXd>& x) const;
};

// ---------------------------------------------------------------------------
// Fitting
// ---------------------------------------------------------------------------

// Exact minimizer of (1/n) sum_i w_i (Wx_i + b - y_i)^2 + (lambda/2)||W||^2
// via the normal equations; the bias is left unregularized. Weights default
// to 1. Throws ConfigError when lambda == 0 leaves the system singular.
LinearRegressor ridge_solve(const Eigen::MatrixXd& X, const Eigen::MatrixXd& Y, double lambda,
                            const std::vector<double>* example_weights = nullptr);

// Continuous labels: one output per action dimension. Discrete labels:
// one output per class with one-hot targets (used by the squared-loss
// reduction policies).
LinearRegressor ridge_fit(const AggregateDataset& dataset, double lambda);

// Pegasos-style SGD on hinge loss + (lambda/2)||w||^2 per separator, step
// size 1/(lambda*t), one pass order reshuffled each epoch; bias updated
// without regularization. Deterministic given the stream.
LinearClassifier svm_sgd_fit(const AggregateDataset& dataset, double lambda, int epochs,
                             RngStream& rng);

// One-vs-one reduction: K(K-1)/2 separators; separator (i,j), i < j, is
// trained with class j positive, and a positive margin votes j.
LinearClassifier allpairs_fit(const AggregateDataset& dataset, int n_classes, double lambda,
                              int epochs, RngStream& rng);
int allpairs_predict(const LinearClassifier& clf, const Eigen::Ref<const Eigen::VectorXd>& x);

// Model file round-trip ("ilb-model v1 ...").
void save_model(std::ostream& out, const LinearRegressor& m);
void save_model(std::ostream& out, const LinearClassifier& m);
void save_model_file(const std::string& path, const PolicyPtr& policy);
struct LoadedModel {
  std::optional<LinearRegressor> regressor;
  std::optional<LinearClassifier> classifier;
};
LoadedModel load_model(std::istream& in);
LoadedModel load_model_file(const std::string& path);

// ---------------------------------------------------------------------------
// Policies over fitted models
// ---------------------------------------------------------------------------

struct LearnerConfig {
  enum class Kind { ridge, svm_bits, allpairs };
  Kind kind = Kind::ridge;
  double lambda = 1e-3;
  int epochs = 5;

  static LearnerConfig parse(const std::string& name, double lambda, int epochs);
  std::string name() const;
};

class LearnedLinearPolicy : public Policy {
 public:
  LearnedLinearPolicy(LinearRegressor model, ActionSpec spec, Featurizer featurizer);
  LearnedLinearPolicy(LinearClassifier model, ActionSpec spec, Featurizer featurizer);

  ActionVal act(const StateObs& s, RngStream&) const override;
  std::optional<std::vector<double>> scores(const StateObs& s) const override;
  std::optional<std::vector<double>> margins(const StateObs& s) const override;
  const char* kind() const override { return "learned"; }

  const std::optional<LinearRegressor>& regressor() const { return regressor_; }
  const std::optional<LinearClassifier>& classifier() const { return classifier_; }

 private:
  Eigen::VectorXd input(const StateObs& s) const;
  std::optional<LinearRegressor> regressor_;
  std::optional<LinearClassifier> classifier_;
  ActionSpec spec_;
  Featurizer featurizer_;
};

// Fits the configured learner and wraps it as a policy. A zero-example
// dataset yields the zero-parameter model.
PolicyPtr fit_policy(const AggregateDataset& dataset, const LearnerConfig& config,
                     const ActionSpec& spec, const Featurizer& featurizer, RngStream& rng);

// Follow-The-Leader: trains the base learner on the concatenation of the
// per-iteration datasets with uniform weight per example.
PolicyPtr ftl_train(std::span<const AggregateDataset> datasets, const LearnerConfig& config,
                    const Featurizer& featurizer, RngStream& rng);

// ---------------------------------------------------------------------------
// Regret accounting
// ---------------------------------------------------------------------------

struct RegretLedger {
  std::vector<double> chosen_losses;        // l_i(pi_i)
  double best_in_hindsight_loss = 0.0;      // eps_hat_N
  double avg_regret = 0.0;                  // gamma_N
  // L[i][j] = loss of policy j on dataset i; filled only when requested.
  std::optional<std::vector<std::vector<double>>> loss_matrix;
};

// Per-dataset losses are weighted equally regardless of size, matching the
// average over iterations. The hindsight minimizer is approximated by the
// same base learner trained on the aggregate (exact for ridge).
RegretLedger regret_report(std::span<const AggregateDataset> datasets,
                           std::span<const PolicyPtr> policy_sequence, const SurrogateLoss& loss,
                           const LearnerConfig& config, const Featurizer& featurizer,
                           RngStream& rng, bool fill_matrix = false);

}  // namespace ilb

#endif  // ILB_LEARNERS_HPP
