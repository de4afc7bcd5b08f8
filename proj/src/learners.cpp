#include "ilb/learners.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>

namespace ilb {

namespace {

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

Eigen::VectorXd to_eigen(const std::vector<double>& v) {
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

}  // namespace

// ---------------------------------------------------------------------------
// LinearClassifier
// ---------------------------------------------------------------------------

int LinearClassifier::predict(const Eigen::Ref<const Eigen::VectorXd>& x) const {
  const Eigen::VectorXd m = raw_margins(x);
  if (mode == Mode::bits) {
    int label = 0;
    for (int k = 0; k < n_separators(); ++k) {
      if (m[k] > 0.0) label |= 1 << k;
    }
    return label;
  }
  std::vector<int> votes(n_classes, 0);
  int idx = 0;
  for (int i = 0; i < n_classes; ++i) {
    for (int j = i + 1; j < n_classes; ++j, ++idx) {
      if (m[idx] > 0.0) ++votes[j];
      else ++votes[i];
    }
  }
  int best = 0;
  for (int k = 1; k < n_classes; ++k) {
    if (votes[k] > votes[best]) best = k;  // ties keep the lowest index
  }
  return best;
}

int allpairs_predict(const LinearClassifier& clf, const Eigen::Ref<const Eigen::VectorXd>& x) {
  if (clf.mode != LinearClassifier::Mode::allpairs)
    throw SchemaError("classifier is not an all-pairs model");
  return clf.predict(x);
}

// ---------------------------------------------------------------------------
// Ridge
// ---------------------------------------------------------------------------

LinearRegressor ridge_solve(const Eigen::MatrixXd& X, const Eigen::MatrixXd& Y, double lambda,
                            const std::vector<double>* example_weights) {
  const Eigen::Index n = X.rows();
  const Eigen::Index d = X.cols();
  if (n < 1 || Y.rows() != n) throw ConfigError("ridge needs matching nonempty X and Y");
  if (lambda < 0.0) throw ConfigError("ridge lambda must be nonnegative");

  Eigen::VectorXd w = Eigen::VectorXd::Ones(n);
  if (example_weights) {
    if (static_cast<Eigen::Index>(example_weights->size()) != n)
      throw ConfigError("ridge weight count mismatch");
    w = to_eigen(*example_weights);
  }
  const double wsum = w.sum();
  if (wsum <= 0.0) throw ConfigError("ridge needs positive total weight");

  // Stationarity of (1/n) sum w_i (Wx+b-y)^2 + (lambda/2)||W||^2 gives the
  // symmetric system below; the bias row carries no regularization.
  Eigen::MatrixXd M(d + 1, d + 1);
  const Eigen::MatrixXd Xw = w.asDiagonal() * X;
  M.topLeftCorner(d, d) = X.transpose() * Xw;
  M.topLeftCorner(d, d) += (lambda * wsum / 2.0) * Eigen::MatrixXd::Identity(d, d);
  M.topRightCorner(d, 1) = Xw.colwise().sum().transpose();
  M.bottomLeftCorner(1, d) = Xw.colwise().sum();
  M(d, d) = wsum;

  Eigen::MatrixXd rhs(d + 1, Y.cols());
  rhs.topRows(d) = X.transpose() * (w.asDiagonal() * Y);
  rhs.bottomRows(1) = (w.asDiagonal() * Y).colwise().sum();

  Eigen::MatrixXd sol;
  if (lambda > 0.0) {
    sol = M.ldlt().solve(rhs);
  } else {
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(M);
    if (!qr.isInvertible())
      throw ConfigError("ridge system is singular; use a positive lambda");
    sol = qr.solve(rhs);
  }
  LinearRegressor out;
  out.W = sol.topRows(d).transpose();
  out.b = sol.bottomRows(1).transpose();
  out.ridge_lambda = lambda;
  return out;
}

namespace {

void dataset_matrices(const AggregateDataset& dataset, Eigen::MatrixXd& X, Eigen::MatrixXd& Y) {
  const auto& spec = dataset.action_spec();
  const Eigen::Index n = static_cast<Eigen::Index>(dataset.size());
  const Eigen::Index d = dataset.feature_dim();
  const Eigen::Index out =
      spec.kind == ActionKind::continuous ? spec.dim : spec.num_classes;
  X.resize(n, d);
  Y.setZero(n, out);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& ex = dataset.examples()[i];
    X.row(i) = to_eigen(ex.features).transpose();
    if (spec.kind == ActionKind::continuous) {
      Y.row(i) = to_eigen(ex.label.values()).transpose();
    } else {
      Y(i, ex.label.label()) = 1.0;
    }
  }
}

}  // namespace

LinearRegressor ridge_fit(const AggregateDataset& dataset, double lambda) {
  if (dataset.empty()) throw ConfigError("ridge_fit over an empty dataset");
  Eigen::MatrixXd X, Y;
  dataset_matrices(dataset, X, Y);
  return ridge_solve(X, Y, lambda);
}

// ---------------------------------------------------------------------------
// SVM
// ---------------------------------------------------------------------------

namespace {

// One separator trained by Pegasos SGD. y in {-1, +1}; per-example weights
// scale the hinge subgradient.
void pegasos_train(Eigen::Ref<Eigen::MatrixXd> W, Eigen::VectorXd& b, int sep,
                   const Eigen::MatrixXd& X, const std::vector<int>& rows,
                   const std::vector<double>& ys, const std::vector<double>& ws, double lambda,
                   int epochs, RngStream& rng) {
  if (rows.empty()) return;
  Eigen::VectorXd w = Eigen::VectorXd::Zero(X.cols());
  double bias = 0.0;
  std::vector<int> order(rows.size());
  std::iota(order.begin(), order.end(), 0);
  long t = 0;
  for (int e = 0; e < epochs; ++e) {
    rng.shuffle(order);
    for (int k : order) {
      ++t;
      const double eta = 1.0 / (lambda * static_cast<double>(t));
      const int r = rows[k];
      const double y = ys[k];
      const double margin = y * (w.dot(X.row(r)) + bias);
      w *= (1.0 - eta * lambda);
      if (margin < 1.0) {
        w += (eta * y * ws[k]) * X.row(r).transpose();
        // the unregularized bias direction anneals on a plain 1/t schedule,
        // keeping it bounded where 1/(lambda t) would blow up early
        bias += y * ws[k] / static_cast<double>(t);
      }
    }
  }
  W.row(sep) = w.transpose();
  b[sep] = bias;
}

}  // namespace

LinearClassifier svm_sgd_fit(const AggregateDataset& dataset, double lambda, int epochs,
                             RngStream& rng) {
  if (dataset.empty()) throw ConfigError("svm_sgd_fit over an empty dataset");
  if (epochs < 1) throw ConfigError("svm epochs must be at least 1");
  const auto& spec = dataset.action_spec();
  if (spec.kind != ActionKind::discrete) throw SchemaError("svm expects discrete labels");
  const int n_bits = spec.bit_actions ? spec.n_bits() : 1;
  if (!spec.bit_actions && spec.num_classes != 2)
    throw SchemaError("plain svm expects binary labels; use allpairs for more classes");

  Eigen::MatrixXd X, Y_unused;
  dataset_matrices(dataset, X, Y_unused);
  LinearClassifier clf;
  clf.mode = LinearClassifier::Mode::bits;
  clf.n_classes = spec.num_classes;
  clf.reg_lambda = lambda;
  clf.W.setZero(n_bits, dataset.feature_dim());
  clf.b.setZero(n_bits);

  std::vector<int> rows(dataset.size());
  std::iota(rows.begin(), rows.end(), 0);
  std::vector<double> ws(dataset.size(), 1.0);
  for (int k = 0; k < n_bits; ++k) {
    std::vector<double> ys(dataset.size());
    for (std::size_t i = 0; i < dataset.size(); ++i) {
      const int label = dataset.examples()[i].label.label();
      ys[i] = ((label >> k) & 1) ? 1.0 : -1.0;
    }
    pegasos_train(clf.W, clf.b, k, X, rows, ys, ws, lambda, epochs, rng);
  }
  return clf;
}

LinearClassifier allpairs_fit(const AggregateDataset& dataset, int n_classes, double lambda,
                              int epochs, RngStream& rng) {
  if (n_classes < 2) throw ConfigError("all-pairs reduction needs at least two classes");
  if (dataset.empty()) throw ConfigError("allpairs_fit over an empty dataset");
  Eigen::MatrixXd X, Y_unused;
  dataset_matrices(dataset, X, Y_unused);

  LinearClassifier clf;
  clf.mode = LinearClassifier::Mode::allpairs;
  clf.n_classes = n_classes;
  clf.reg_lambda = lambda;
  const int n_sep = n_classes * (n_classes - 1) / 2;
  clf.W.setZero(n_sep, dataset.feature_dim());
  clf.b.setZero(n_sep);

  for (std::size_t i = 0; i < dataset.size(); ++i) {
    const int label = dataset.examples()[i].label.label();
    if (label < 0 || label >= n_classes) throw SchemaError("label outside [0, K)");
  }
  int sep = 0;
  for (int i = 0; i < n_classes; ++i) {
    for (int j = i + 1; j < n_classes; ++j, ++sep) {
      // subset in original dataset order; class j is the positive side
      std::vector<int> rows;
      std::vector<double> ys;
      for (std::size_t r = 0; r < dataset.size(); ++r) {
        const int label = dataset.examples()[r].label.label();
        if (label != i && label != j) continue;
        rows.push_back(static_cast<int>(r));
        ys.push_back(label == j ? 1.0 : -1.0);
      }
      std::vector<double> ws(rows.size(), 1.0);
      pegasos_train(clf.W, clf.b, sep, X, rows, ys, ws, lambda, epochs, rng);
    }
  }
  return clf;
}

// ---------------------------------------------------------------------------
// Model files
// ---------------------------------------------------------------------------

void save_model(std::ostream& out, const LinearRegressor& m) {
  out << "ilb-model v1 kind=ridge dim=" << m.W.cols() << " out=" << m.W.rows()
      << " lambda=" << fmt_double(m.ridge_lambda) << "\n";
  for (Eigen::Index r = 0; r < m.W.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.W.cols(); ++c) out << fmt_double(m.W(r, c)) << ' ';
    out << fmt_double(m.b[r]) << '\n';
  }
}

void save_model(std::ostream& out, const LinearClassifier& m) {
  const char* kind = m.mode == LinearClassifier::Mode::bits ? "svm" : "allpairs";
  out << "ilb-model v1 kind=" << kind << " dim=" << m.W.cols() << " out=" << m.W.rows()
      << " classes=" << m.n_classes << " lambda=" << fmt_double(m.reg_lambda) << "\n";
  for (Eigen::Index r = 0; r < m.W.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.W.cols(); ++c) out << fmt_double(m.W(r, c)) << ' ';
    out << fmt_double(m.b[r]) << '\n';
  }
}

void save_model_file(const std::string& path, const PolicyPtr& policy) {
  const auto* lp = dynamic_cast<const LearnedLinearPolicy*>(policy.get());
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path);
  if (!lp) {
    out << "ilb-model v1 kind=opaque\n";
    return;
  }
  if (lp->regressor()) save_model(out, *lp->regressor());
  else save_model(out, *lp->classifier());
}

LoadedModel load_model(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw IoError("empty model file");
  std::istringstream head(line);
  std::string magic, ver;
  head >> magic >> ver;
  if (magic != "ilb-model" || ver != "v1") throw IoError("bad model header: " + line);
  std::string field, kind;
  long dim = 0, out_rows = 0, classes = 0;
  double lambda = 0.0;
  while (head >> field) {
    const auto eq = field.find('=');
    if (eq == std::string::npos) throw IoError("bad model header field: " + field);
    const std::string key = field.substr(0, eq);
    const std::string val = field.substr(eq + 1);
    if (key == "kind") kind = val;
    else if (key == "dim") dim = std::atol(val.c_str());
    else if (key == "out") out_rows = std::atol(val.c_str());
    else if (key == "classes") classes = std::atol(val.c_str());
    else if (key == "lambda") lambda = std::atof(val.c_str());
  }
  LoadedModel model;
  if (kind == "opaque") return model;
  Eigen::MatrixXd W(out_rows, dim);
  Eigen::VectorXd b(out_rows);
  for (long r = 0; r < out_rows; ++r) {
    if (!std::getline(in, line)) throw IoError("model file truncated");
    std::istringstream ls(line);
    for (long c = 0; c < dim; ++c) {
      if (!(ls >> W(r, c))) throw IoError("model row " + std::to_string(r) + " malformed");
    }
    if (!(ls >> b[r])) throw IoError("model row " + std::to_string(r) + " malformed");
  }
  if (kind == "ridge") {
    model.regressor = LinearRegressor{std::move(W), std::move(b), lambda};
  } else if (kind == "svm" || kind == "allpairs") {
    LinearClassifier clf;
    clf.mode = kind == "svm" ? LinearClassifier::Mode::bits : LinearClassifier::Mode::allpairs;
    clf.n_classes = static_cast<int>(classes);
    clf.W = std::move(W);
    clf.b = std::move(b);
    clf.reg_lambda = lambda;
    model.classifier = std::move(clf);
  } else {
    throw IoError("unknown model kind: " + kind);
  }
  return model;
}

LoadedModel load_model_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read " + path);
  return load_model(in);
}

// ---------------------------------------------------------------------------
// Policies
// ---------------------------------------------------------------------------

LearnerConfig LearnerConfig::parse(const std::string& name, double lambda, int epochs) {
  LearnerConfig c;
  c.lambda = lambda;
  c.epochs = epochs;
  if (name == "ridge") c.kind = Kind::ridge;
  else if (name == "svm_bits") c.kind = Kind::svm_bits;
  else if (name == "allpairs") c.kind = Kind::allpairs;
  else throw ConfigError("unknown learner: " + name);
  return c;
}

std::string LearnerConfig::name() const {
  switch (kind) {
    case Kind::ridge: return "ridge";
    case Kind::svm_bits: return "svm_bits";
    case Kind::allpairs: return "allpairs";
  }
  return "?";
}

LearnedLinearPolicy::LearnedLinearPolicy(LinearRegressor model, ActionSpec spec,
                                         Featurizer featurizer)
    : regressor_(std::move(model)), spec_(std::move(spec)), featurizer_(std::move(featurizer)) {}

LearnedLinearPolicy::LearnedLinearPolicy(LinearClassifier model, ActionSpec spec,
                                         Featurizer featurizer)
    : classifier_(std::move(model)), spec_(std::move(spec)), featurizer_(std::move(featurizer)) {}

Eigen::VectorXd LearnedLinearPolicy::input(const StateObs& s) const {
  const std::vector<double> f = ilb::featurize(featurizer_, s);
  const Eigen::Index d = regressor_ ? regressor_->W.cols() : classifier_->W.cols();
  if (static_cast<Eigen::Index>(f.size()) != d)
    throw SchemaError("observation dimension does not match the model");
  return to_eigen(f);
}

ActionVal LearnedLinearPolicy::act(const StateObs& s, RngStream&) const {
  const Eigen::VectorXd x = input(s);
  if (regressor_) {
    const Eigen::VectorXd y = regressor_->predict(x);
    if (spec_.kind == ActionKind::continuous) {
      return ActionVal::make_continuous(std::vector<double>(y.data(), y.data() + y.size()), spec_);
    }
    Eigen::Index best;
    y.maxCoeff(&best);
    return ActionVal::make_discrete(static_cast<int>(best));
  }
  return ActionVal::make_discrete(classifier_->predict(x));
}

std::optional<std::vector<double>> LearnedLinearPolicy::scores(const StateObs& s) const {
  if (!regressor_) return std::nullopt;
  const Eigen::VectorXd y = regressor_->predict(input(s));
  return std::vector<double>(y.data(), y.data() + y.size());
}

std::optional<std::vector<double>> LearnedLinearPolicy::margins(const StateObs& s) const {
  if (!classifier_) return std::nullopt;
  const Eigen::VectorXd m = classifier_->raw_margins(input(s));
  return std::vector<double>(m.data(), m.data() + m.size());
}

namespace {

PolicyPtr zero_policy(const LearnerConfig& config, const ActionSpec& spec,
                      const Featurizer& featurizer, int feature_dim) {
  if (config.kind == LearnerConfig::Kind::ridge) {
    LinearRegressor m;
    const int out = spec.kind == ActionKind::continuous ? spec.dim : spec.num_classes;
    m.W = Eigen::MatrixXd::Zero(out, feature_dim);
    m.b = Eigen::VectorXd::Zero(out);
    m.ridge_lambda = config.lambda;
    return std::make_shared<LearnedLinearPolicy>(std::move(m), spec, featurizer);
  }
  LinearClassifier clf;
  clf.mode = config.kind == LearnerConfig::Kind::allpairs ? LinearClassifier::Mode::allpairs
                                                          : LinearClassifier::Mode::bits;
  clf.n_classes = spec.num_classes;
  const int n_sep = clf.mode == LinearClassifier::Mode::allpairs
                        ? spec.num_classes * (spec.num_classes - 1) / 2
                        : (spec.bit_actions ? spec.n_bits() : 1);
  clf.W = Eigen::MatrixXd::Zero(n_sep, feature_dim);
  clf.b = Eigen::VectorXd::Zero(n_sep);
  clf.reg_lambda = config.lambda;
  return std::make_shared<LearnedLinearPolicy>(std::move(clf), spec, featurizer);
}

}  // namespace

PolicyPtr fit_policy(const AggregateDataset& dataset, const LearnerConfig& config,
                     const ActionSpec& spec, const Featurizer& featurizer, RngStream& rng) {
  if (dataset.empty()) return zero_policy(config, spec, featurizer, dataset.feature_dim());
  switch (config.kind) {
    case LearnerConfig::Kind::ridge:
      return std::make_shared<LearnedLinearPolicy>(ridge_fit(dataset, config.lambda), spec,
                                                   featurizer);
    case LearnerConfig::Kind::svm_bits:
      return std::make_shared<LearnedLinearPolicy>(
          svm_sgd_fit(dataset, config.lambda, config.epochs, rng), spec, featurizer);
    case LearnerConfig::Kind::allpairs:
      return std::make_shared<LearnedLinearPolicy>(
          allpairs_fit(dataset, spec.num_classes, config.lambda, config.epochs, rng), spec,
          featurizer);
  }
  throw ConfigError("unreachable learner kind");
}

PolicyPtr ftl_train(std::span<const AggregateDataset> datasets, const LearnerConfig& config,
                    const Featurizer& featurizer, RngStream& rng) {
  if (datasets.empty()) throw ConfigError("ftl_train needs at least one dataset");
  AggregateDataset all(datasets[0].feature_dim(), datasets[0].action_spec());
  for (const auto& d : datasets) all.extend(d);
  return fit_policy(all, config, all.action_spec(), featurizer, rng);
}

RegretLedger regret_report(std::span<const AggregateDataset> datasets,
                           std::span<const PolicyPtr> policy_sequence, const SurrogateLoss& loss,
                           const LearnerConfig& config, const Featurizer& featurizer,
                           RngStream& rng, bool fill_matrix) {
  if (datasets.size() != policy_sequence.size() || datasets.empty())
    throw ConfigError("regret_report needs matching nonempty datasets and policies");
  const std::size_t N = datasets.size();
  RegretLedger ledger;
  ledger.chosen_losses.resize(N);
  for (std::size_t i = 0; i < N; ++i)
    ledger.chosen_losses[i] = empirical_loss(*policy_sequence[i], datasets[i], loss);

  const PolicyPtr hindsight = ftl_train(datasets, config, featurizer, rng);
  double eps_hat = 0.0;
  for (std::size_t i = 0; i < N; ++i) eps_hat += empirical_loss(*hindsight, datasets[i], loss);
  ledger.best_in_hindsight_loss = eps_hat / static_cast<double>(N);

  const double mean_chosen =
      std::accumulate(ledger.chosen_losses.begin(), ledger.chosen_losses.end(), 0.0) /
      static_cast<double>(N);
  ledger.avg_regret = mean_chosen - ledger.best_in_hindsight_loss;

  if (fill_matrix) {
    std::vector<std::vector<double>> L(N, std::vector<double>(N, 0.0));
    for (std::size_t i = 0; i < N; ++i)
      for (std::size_t j = 0; j < N; ++j)
        L[i][j] = empirical_loss(*policy_sequence[j], datasets[i], loss);
    ledger.loss_matrix = std::move(L);
  }
  return ledger;
}

}  // namespace ilb
