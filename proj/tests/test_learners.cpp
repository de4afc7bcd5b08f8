#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <sstream>

#include "ilb/learners.hpp"

using namespace ilb;

namespace {

AggregateDataset regression_ds(const std::vector<std::vector<double>>& xs,
                               const std::vector<double>& ys) {
  AggregateDataset ds(static_cast<int>(xs[0].size()),
                      ActionSpec::continuous({-1e9}, {1e9}));
  for (std::size_t i = 0; i < xs.size(); ++i) {
    DatasetExample ex;
    ex.features = xs[i];
    ex.time_step = static_cast<int>(i) + 1;
    ex.label = ActionVal::make_continuous({ys[i]}, ds.action_spec());
    ds.append(std::move(ex));
  }
  return ds;
}

AggregateDataset classification_ds(const std::vector<std::vector<double>>& xs,
                                   const std::vector<int>& ys, int K, bool bits = false) {
  AggregateDataset ds(static_cast<int>(xs[0].size()), ActionSpec::discrete(K, bits));
  for (std::size_t i = 0; i < xs.size(); ++i) {
    DatasetExample ex;
    ex.features = xs[i];
    ex.time_step = static_cast<int>(i) + 1;
    ex.label = ActionVal::make_discrete(ys[i]);
    ds.append(std::move(ex));
  }
  return ds;
}

// Ridge objective (1/n) sum (w.x + b - y)^2 + (lambda/2)||w||^2.
double ridge_objective(const AggregateDataset& ds, const Eigen::VectorXd& w, double b,
                       double lambda) {
  double loss = 0.0;
  for (const auto& ex : ds.examples()) {
    const Eigen::Map<const Eigen::VectorXd> x(ex.features.data(), ex.features.size());
    const double r = w.dot(x) + b - ex.label.values()[0];
    loss += r * r;
  }
  return loss / ds.size() + 0.5 * lambda * w.squaredNorm();
}

// SVM objective (1/n) sum hinge + (lambda/2)||w||^2 for one separator.
double svm_objective(const AggregateDataset& ds, const Eigen::VectorXd& w, double b,
                     double lambda) {
  double loss = 0.0;
  for (const auto& ex : ds.examples()) {
    const Eigen::Map<const Eigen::VectorXd> x(ex.features.data(), ex.features.size());
    const double y = ex.label.label() == 1 ? 1.0 : -1.0;
    loss += std::max(0.0, 1.0 - y * (w.dot(x) + b));
  }
  return loss / ds.size() + 0.5 * lambda * w.squaredNorm();
}

// Batch subgradient oracle run to tight tolerance.
std::pair<Eigen::VectorXd, double> svm_batch_oracle(const AggregateDataset& ds, double lambda,
                                                    int iters) {
  const int d = ds.feature_dim();
  Eigen::VectorXd w = Eigen::VectorXd::Zero(d);
  double b = 0.0;
  for (int t = 1; t <= iters; ++t) {
    Eigen::VectorXd gw = lambda * w;
    double gb = 0.0;
    for (const auto& ex : ds.examples()) {
      const Eigen::Map<const Eigen::VectorXd> x(ex.features.data(), ex.features.size());
      const double y = ex.label.label() == 1 ? 1.0 : -1.0;
      if (y * (w.dot(x) + b) < 1.0) {
        gw -= (y / ds.size()) * x;
        gb -= y / ds.size();
      }
    }
    const double eta = 1.0 / (lambda * t);
    w -= eta * gw;
    b -= eta * gb;
  }
  return {w, b};
}

}  // namespace

TEST_CASE("ridge_fit: exact interpolation with lambda = 0") {
  const auto ds = regression_ds({{1.0}, {2.0}}, {1.0, 2.0});
  const LinearRegressor m = ridge_fit(ds, 0.0);
  CHECK(m.W(0, 0) == doctest::Approx(1.0).epsilon(1e-10));
  CHECK(std::abs(m.b[0]) < 1e-10);
}

TEST_CASE("ridge_fit: constant labels give zero weights and the constant bias") {
  RngStream rng(1);
  std::vector<std::vector<double>> xs;
  std::vector<double> ys;
  for (int i = 0; i < 20; ++i) {
    xs.push_back({rng.uniform(-2, 2), rng.uniform(-2, 2), rng.uniform(-2, 2)});
    ys.push_back(0.7);
  }
  const LinearRegressor m = ridge_fit(regression_ds(xs, ys), 0.01);
  for (int j = 0; j < 3; ++j) CHECK(std::abs(m.W(0, j)) < 1e-9);
  CHECK(m.b[0] == doctest::Approx(0.7).epsilon(1e-10));
}

TEST_CASE("ridge_fit satisfies first-order optimality on a random problem") {
  RngStream rng(50505);
  std::vector<std::vector<double>> xs;
  std::vector<double> ys;
  for (int i = 0; i < 50; ++i) {
    std::vector<double> x(5);
    for (auto& v : x) v = rng.uniform(-1, 1);
    const double y = 0.3 * x[0] - 1.2 * x[3] + 0.1 + 0.05 * rng.uniform(-1, 1);
    xs.push_back(x);
    ys.push_back(y);
  }
  const auto ds = regression_ds(xs, ys);
  const double lambda = 1e-3;
  const LinearRegressor m = ridge_fit(ds, lambda);
  const Eigen::VectorXd w = m.W.row(0).transpose();
  const double b = m.b[0];

  // analytic gradient at the solution
  Eigen::VectorXd gw = lambda * w;
  double gb = 0.0;
  for (const auto& ex : ds.examples()) {
    const Eigen::Map<const Eigen::VectorXd> x(ex.features.data(), ex.features.size());
    const double r = w.dot(x) + b - ex.label.values()[0];
    gw += (2.0 / ds.size()) * r * x;
    gb += (2.0 / ds.size()) * r;
  }
  CHECK(std::sqrt(gw.squaredNorm() + gb * gb) < 1e-8);

  // finite-difference check of the gradient at a nearby point
  const double h = 1e-6;
  Eigen::VectorXd w_off = w;
  w_off[0] += 0.05;
  for (int j = 0; j < 5; ++j) {
    Eigen::VectorXd wp = w_off, wm = w_off;
    wp[j] += h;
    wm[j] -= h;
    const double fd =
        (ridge_objective(ds, wp, b, lambda) - ridge_objective(ds, wm, b, lambda)) / (2 * h);
    Eigen::VectorXd ga = lambda * w_off;
    double gb2 = 0.0;
    for (const auto& ex : ds.examples()) {
      const Eigen::Map<const Eigen::VectorXd> x(ex.features.data(), ex.features.size());
      const double r = w_off.dot(x) + b - ex.label.values()[0];
      ga += (2.0 / ds.size()) * r * x;
      gb2 += (2.0 / ds.size()) * r;
    }
    CHECK(std::abs(fd - ga[j]) < 1e-5 * std::max(1.0, std::abs(ga[j])));
  }
}

TEST_CASE("ridge_fit rejects a singular unregularized system") {
  // duplicated feature column with lambda = 0
  const auto ds = regression_ds({{1.0, 1.0}, {2.0, 2.0}, {3.0, 3.0}}, {1.0, 2.0, 3.0});
  CHECK_THROWS_AS(ridge_fit(ds, 0.0), ConfigError);
}

TEST_CASE("svm_sgd_fit separates two separable points") {
  const auto ds = classification_ds({{1.0, 0.2}, {-1.0, -0.4}}, {1, 0}, 2);
  RngStream rng(7);
  const LinearClassifier clf = svm_sgd_fit(ds, 1e-2, 100, rng);
  CHECK(clf.predict(Eigen::Vector2d(1.0, 0.2)) == 1);
  CHECK(clf.predict(Eigen::Vector2d(-1.0, -0.4)) == 0);
}

TEST_CASE("svm_sgd_fit with one class predicts that class on its training set") {
  std::vector<std::vector<double>> xs;
  std::vector<int> ys;
  RngStream rng(8);
  for (int i = 0; i < 30; ++i) {
    xs.push_back({rng.uniform(0.5, 1.5), rng.uniform(-0.5, 0.5)});
    ys.push_back(1);
  }
  RngStream fit_rng(9);
  const LinearClassifier clf = svm_sgd_fit(classification_ds(xs, ys, 2), 1e-3, 50, fit_rng);
  for (const auto& x : xs) CHECK(clf.predict(Eigen::Vector2d(x[0], x[1])) == 1);
}

TEST_CASE("svm_sgd_fit objective lands within 5% of a batch subgradient oracle") {
  RngStream rng(2025);
  std::vector<std::vector<double>> xs;
  std::vector<int> ys;
  for (int i = 0; i < 200; ++i) {
    std::vector<double> x = {rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)};
    const int y = x[0] + 0.5 * x[1] - 0.2 * x[2] + 0.15 * rng.uniform(-1, 1) > 0 ? 1 : 0;
    xs.push_back(x);
    ys.push_back(y);
  }
  const auto ds = classification_ds(xs, ys, 2);
  const double lambda = 1e-2;
  RngStream fit_rng(4242);
  const LinearClassifier clf = svm_sgd_fit(ds, lambda, 200, fit_rng);
  const Eigen::VectorXd w = clf.W.row(0).transpose();
  const double f_sgd = svm_objective(ds, w, clf.b[0], lambda);

  const auto [wo, bo] = svm_batch_oracle(ds, lambda, 4000);
  const double f_oracle = svm_objective(ds, wo, bo, lambda);
  CHECK(f_sgd <= 1.05 * f_oracle);
}

TEST_CASE("svm_sgd_fit is bit-for-bit reproducible for a fixed stream") {
  RngStream rng(3);
  std::vector<std::vector<double>> xs;
  std::vector<int> ys;
  for (int i = 0; i < 60; ++i) {
    xs.push_back({rng.uniform(-1, 1), rng.uniform(-1, 1)});
    ys.push_back(rng.uniform01() < 0.5 ? 0 : 1);
  }
  const auto ds = classification_ds(xs, ys, 2);
  RngStream r1(77), r2(77), r3(78);
  const LinearClassifier a = svm_sgd_fit(ds, 1e-3, 10, r1);
  const LinearClassifier b = svm_sgd_fit(ds, 1e-3, 10, r2);
  const LinearClassifier c = svm_sgd_fit(ds, 1e-3, 10, r3);
  CHECK(a.W == b.W);
  CHECK(a.b == b.b);
  CHECK(a.W != c.W);
}

TEST_CASE("allpairs: K = 2 reduces to a single separator with identical predictions") {
  RngStream rng(11);
  std::vector<std::vector<double>> xs;
  std::vector<int> ys;
  for (int i = 0; i < 80; ++i) {
    std::vector<double> x = {rng.uniform(-1, 1), rng.uniform(-1, 1)};
    xs.push_back(x);
    ys.push_back(x[0] + x[1] > 0 ? 1 : 0);
  }
  const auto ds = classification_ds(xs, ys, 2);
  RngStream r1(5), r2(5);
  const LinearClassifier pair = allpairs_fit(ds, 2, 1e-2, 40, r1);
  const LinearClassifier single = svm_sgd_fit(ds, 1e-2, 40, r2);
  CHECK(pair.n_separators() == 1);
  for (const auto& x : xs) {
    const Eigen::Vector2d v(x[0], x[1]);
    CHECK(allpairs_predict(pair, v) == single.predict(v));
  }
}

TEST_CASE("allpairs reaches 99% training accuracy on three separated clusters") {
  RngStream rng(606);
  std::vector<std::vector<double>> xs;
  std::vector<int> ys;
  const std::vector<std::pair<double, double>> centers = {{0, 3}, {3, -2}, {-3, -2}};
  for (int i = 0; i < 300; ++i) {
    const int k = static_cast<int>(rng.uniform_int(3));
    xs.push_back({centers[k].first + rng.uniform(-0.5, 0.5),
                  centers[k].second + rng.uniform(-0.5, 0.5)});
    ys.push_back(k);
  }
  const auto ds = classification_ds(xs, ys, 3);
  RngStream fit_rng(707);
  const LinearClassifier clf = allpairs_fit(ds, 3, 1e-3, 50, fit_rng);
  int hits = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (allpairs_predict(clf, Eigen::Vector2d(xs[i][0], xs[i][1])) == ys[i]) ++hits;
  }
  CHECK(static_cast<double>(hits) / xs.size() >= 0.99);
}

TEST_CASE("allpairs tie-break: zero weights and x = 0 resolve to class 0") {
  LinearClassifier clf;
  clf.mode = LinearClassifier::Mode::allpairs;
  clf.n_classes = 4;
  clf.W = Eigen::MatrixXd::Zero(6, 3);
  clf.b = Eigen::VectorXd::Zero(6);
  CHECK(allpairs_predict(clf, Eigen::Vector3d(0, 0, 0)) == 0);
}

TEST_CASE("allpairs predictions are invariant to class relabeling up to the tie-break") {
  RngStream rng(909);
  std::vector<std::vector<double>> xs;
  std::vector<int> ys;
  const std::vector<std::pair<double, double>> centers = {{0, 3}, {3, -2}, {-3, -2}};
  for (int i = 0; i < 240; ++i) {
    const int k = static_cast<int>(rng.uniform_int(3));
    xs.push_back({centers[k].first + rng.uniform(-0.4, 0.4),
                  centers[k].second + rng.uniform(-0.4, 0.4)});
    ys.push_back(k);
  }
  // permutation sigma = (1 2 0)
  const std::vector<int> sigma = {1, 2, 0};
  std::vector<int> ys_perm(ys.size());
  for (std::size_t i = 0; i < ys.size(); ++i) ys_perm[i] = sigma[ys[i]];
  RngStream r1(13), r2(13);
  const LinearClassifier base = allpairs_fit(classification_ds(xs, ys, 3), 3, 1e-3, 60, r1);
  const LinearClassifier perm = allpairs_fit(classification_ds(xs, ys_perm, 3), 3, 1e-3, 60, r2);
  int agree = 0;
  for (const auto& x : xs) {
    const Eigen::Vector2d v(x[0], x[1]);
    if (sigma[allpairs_predict(base, v)] == allpairs_predict(perm, v)) ++agree;
  }
  // separable clusters leave no ties, so the permuted model must agree
  CHECK(static_cast<double>(agree) / xs.size() >= 0.99);
}

TEST_CASE("allpairs rejects K < 2") {
  const auto ds = classification_ds({{1.0}}, {0}, 2);
  RngStream rng(1);
  CHECK_THROWS_AS(allpairs_fit(ds, 1, 1e-3, 5, rng), ConfigError);
}

TEST_CASE("ftl_train: scaling invariance and union fits") {
  RngStream rng(135);
  std::vector<std::vector<double>> xs;
  std::vector<double> ys;
  for (int i = 0; i < 30; ++i) {
    xs.push_back({rng.uniform(-1, 1), rng.uniform(-1, 1)});
    ys.push_back(0.8 * xs.back()[0] - 0.1 * xs.back()[1] + 0.02 * rng.uniform(-1, 1));
  }
  const auto d = regression_ds(xs, ys);
  const LearnerConfig cfg = LearnerConfig::parse("ridge", 1e-3, 1);
  RngStream fit_rng(1);

  SUBCASE("single dataset equals a plain fit") {
    std::vector<AggregateDataset> one = {d};
    const auto p = ftl_train(one, cfg, identity_featurizer(), fit_rng);
    const auto* lp = dynamic_cast<const LearnedLinearPolicy*>(p.get());
    const LinearRegressor direct = ridge_fit(d, 1e-3);
    CHECK((lp->regressor()->W - direct.W).norm() < 1e-12);
  }

  SUBCASE("duplicated dataset leaves the ridge solution unchanged") {
    std::vector<AggregateDataset> twice = {d, d};
    const auto p = ftl_train(twice, cfg, identity_featurizer(), fit_rng);
    const auto* lp = dynamic_cast<const LearnedLinearPolicy*>(p.get());
    const LinearRegressor direct = ridge_fit(d, 1e-3);
    CHECK((lp->regressor()->W - direct.W).norm() < 1e-10);
    CHECK(std::abs(lp->regressor()->b[0] - direct.b[0]) < 1e-10);
  }

  SUBCASE("two conflicting equal-size datasets match the fit on their union") {
    std::vector<std::vector<double>> xs2 = xs;
    std::vector<double> ys2;
    for (const auto& x : xs2) ys2.push_back(-0.5 * x[0] + 0.3);
    const auto d2 = regression_ds(xs2, ys2);
    AggregateDataset uni = d;
    uni.extend(d2);
    std::vector<AggregateDataset> both = {d, d2};
    const auto p = ftl_train(both, cfg, identity_featurizer(), fit_rng);
    const auto* lp = dynamic_cast<const LearnedLinearPolicy*>(p.get());
    const LinearRegressor direct = ridge_fit(uni, 1e-3);
    CHECK((lp->regressor()->W - direct.W).norm() < 1e-10);
  }
}

TEST_CASE("regret_report: FTL base cases") {
  RngStream rng(2468);
  std::vector<std::vector<double>> xs;
  std::vector<double> ys;
  for (int i = 0; i < 25; ++i) {
    xs.push_back({rng.uniform(-1, 1)});
    ys.push_back(0.4 * xs.back()[0] + 0.05);
  }
  const auto d = regression_ds(xs, ys);
  const LearnerConfig cfg = LearnerConfig::parse("ridge", 1e-4, 1);
  const SurrogateLoss sq = SurrogateLoss::squared(1e9);
  RngStream fit_rng(3);

  SUBCASE("N = 1 with the policy trained on its own dataset") {
    std::vector<AggregateDataset> one = {d};
    const PolicyPtr pi = ftl_train(one, cfg, identity_featurizer(), fit_rng);
    std::vector<PolicyPtr> seq = {pi};
    const RegretLedger led = regret_report(one, seq, sq, cfg, identity_featurizer(), fit_rng);
    CHECK(std::abs(led.avg_regret) < 1e-12);
  }

  SUBCASE("constant datasets with the constant minimizer give zero regret") {
    std::vector<AggregateDataset> many = {d, d, d, d};
    const PolicyPtr pi = ftl_train(many, cfg, identity_featurizer(), fit_rng);
    std::vector<PolicyPtr> seq = {pi, pi, pi, pi};
    const RegretLedger led = regret_report(many, seq, sq, cfg, identity_featurizer(), fit_rng);
    CHECK(std::abs(led.avg_regret) < 1e-12);
  }
}

TEST_CASE("model files round-trip") {
  SUBCASE("ridge") {
    LinearRegressor m;
    m.W = Eigen::MatrixXd::Random(2, 3);
    m.b = Eigen::VectorXd::Random(2);
    m.ridge_lambda = 1e-3;
    std::stringstream buf;
    save_model(buf, m);
    const LoadedModel back = load_model(buf);
    REQUIRE(back.regressor.has_value());
    CHECK(back.regressor->W == m.W);
    CHECK(back.regressor->b == m.b);
    CHECK(back.regressor->ridge_lambda == m.ridge_lambda);
  }
  SUBCASE("classifier") {
    LinearClassifier m;
    m.mode = LinearClassifier::Mode::allpairs;
    m.n_classes = 3;
    m.W = Eigen::MatrixXd::Random(3, 4);
    m.b = Eigen::VectorXd::Random(3);
    m.reg_lambda = 1e-4;
    std::stringstream buf;
    save_model(buf, m);
    const LoadedModel back = load_model(buf);
    REQUIRE(back.classifier.has_value());
    CHECK(back.classifier->W == m.W);
    CHECK(back.classifier->b == m.b);
    CHECK(back.classifier->n_classes == 3);
    CHECK(back.classifier->mode == LinearClassifier::Mode::allpairs);
  }
}
