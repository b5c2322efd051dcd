#include <cmath>
#include <random>

#include "doctest.h"
#include "hetree/error.hpp"
#include "hetree/serialize.hpp"
#include "hetree/trainer.hpp"

using namespace hetree;

namespace {

QuantizedDataset integer_data(const Matrix<double>& X, int bits) {
  QuantizedDataset q;
  q.values = Matrix<std::int64_t>(X.rows(), X.cols());
  for (std::size_t i = 0; i < X.data().size(); ++i) q.values.data()[i] = static_cast<std::int64_t>(X.data()[i]);
  q.per_feature_params.assign(X.cols(), QuantParams{1.0, 0, bits});
  return q;
}

// Noisy two-class data on a few integer features.
void blobs(std::uint64_t seed, std::size_t n, int features, int bits, Matrix<double>& X, std::vector<double>& y) {
  std::mt19937_64 rng(seed);
  const double top = std::ldexp(1.0, bits) - 1;
  X = Matrix<double>(n, static_cast<std::size_t>(features));
  y.assign(n, 0.0);
  for (std::size_t r = 0; r < n; ++r) {
    const int label = static_cast<int>(rng() % 2);
    y[r] = label;
    for (int f = 0; f < features; ++f) {
      std::normal_distribution<double> d(top * (label ? 0.6 : 0.4) + f, top * 0.2);
      X(r, static_cast<std::size_t>(f)) = std::clamp(std::round(d(rng)), 0.0, top);
    }
  }
}

}  // namespace

TEST_CASE("threshold normalisation") {
  CHECK(quantize_threshold(3.5) == 4);
  CHECK(quantize_threshold(3.0) == 4);
  CHECK(quantize_threshold(0.5) == 1);
  CHECK(quantize_threshold(-0.5) == 0);
  // Same routing on every integer.
  for (double raw : {0.5, 1.25, 3.5, 6.0, 6.99}) {
    const auto t = quantize_threshold(raw);
    for (int x = 0; x < 8; ++x) CHECK((x <= raw) == (x < t));
  }
}

TEST_CASE("one-feature stump learns x < 4") {
  Matrix<double> X(8, 1);
  std::vector<double> y(8);
  for (int i = 0; i < 8; ++i) {
    X(static_cast<std::size_t>(i), 0) = i;
    y[static_cast<std::size_t>(i)] = i > 3 ? 1 : 0;
  }
  TrainConfig cfg;
  cfg.max_depth = 1;
  const auto e = train(integer_data(X, 3), y, cfg);
  REQUIRE(e.trees.size() == 1);
  const auto& root = e.trees[0].nodes[0];
  CHECK(!root.is_leaf());
  CHECK(root.feature == 0);
  CHECK(root.threshold == 4);

  // Exhaustive oracle: the Gini-optimal cut over all 8 candidates is the same one.
  double best = -1;
  int best_t = -1;
  for (int t = 1; t < 8; ++t) {
    double score = 0;
    for (int side = 0; side < 2; ++side) {
      double n = 0, ones = 0;
      for (int i = 0; i < 8; ++i) {
        if ((i < t) == (side == 0)) {
          n += 1;
          ones += y[static_cast<std::size_t>(i)];
        }
      }
      score += (ones * ones + (n - ones) * (n - ones)) / n;
    }
    if (score > best) {
      best = score;
      best_t = t;
    }
  }
  CHECK(best_t == 4);
}

TEST_CASE("pure labels give a single leaf") {
  Matrix<double> X(5, 2, 1.0);
  X(2, 0) = 3;
  const std::vector<double> y(5, 1.0);
  const auto e = train(integer_data(X, 2), y, TrainConfig{});
  CHECK(e.trees[0].nodes.size() == 1);
  CHECK(e.trees[0].nodes[0].is_leaf());
  CHECK(validate(e).empty());
}

TEST_CASE("tie-break prefers the lowest feature") {
  // Feature 1 duplicates feature 0, so both give identical splits.
  Matrix<double> X(6, 2);
  std::vector<double> y(6);
  for (int i = 0; i < 6; ++i) {
    X(static_cast<std::size_t>(i), 0) = i;
    X(static_cast<std::size_t>(i), 1) = i;
    y[static_cast<std::size_t>(i)] = i >= 3;
  }
  TrainConfig cfg;
  cfg.max_depth = 1;
  const auto f = fit_forest(X, y, cfg);
  CHECK(f.trees[0].nodes[0].feature == 0);
}

TEST_CASE("trained models respect depth and validate") {
  Matrix<double> X;
  std::vector<double> y;
  blobs(3, 400, 4, 5, X, y);
  for (ModelKind kind : {ModelKind::decision_tree, ModelKind::random_forest, ModelKind::boosted}) {
    TrainConfig cfg;
    cfg.kind = kind;
    cfg.max_depth = 3;
    cfg.n_estimators = kind == ModelKind::decision_tree ? 1 : 7;
    cfg.seed = 5;
    const auto forest = fit_forest(X, y, cfg);
    for (const auto& t : forest.trees) CHECK(t.depth() <= 3);
    const auto e = train(integer_data(X, 5), y, cfg);
    CHECK(validate(e).empty());
    CHECK(e.trees.size() == static_cast<std::size_t>(cfg.n_estimators));
  }
}

TEST_CASE("IR routing equals float routing on training rows") {
  Matrix<double> X;
  std::vector<double> y;
  blobs(8, 300, 3, 4, X, y);
  TrainConfig cfg;
  cfg.kind = ModelKind::random_forest;
  cfg.n_estimators = 5;
  cfg.max_depth = 4;
  const auto forest = fit_forest(X, y, cfg);
  const auto e = to_ensemble(forest, {}, 4, 4);
  const Traverser t(e);
  for (std::size_t r = 0; r < X.rows(); ++r) {
    std::vector<std::int64_t> xq(X.cols());
    for (std::size_t c = 0; c < X.cols(); ++c) xq[c] = static_cast<std::int64_t>(X(r, c));
    const auto route = t.route(xq);
    for (std::size_t k = 0; k < forest.trees.size(); ++k) {
      CHECK(route.leaf_index[k] == forest.trees[k].leaf_of(X.row(r)));
    }
  }
}

TEST_CASE("training is deterministic and independent of worker count") {
  Matrix<double> X;
  std::vector<double> y;
  blobs(21, 300, 5, 6, X, y);
  for (ModelKind kind : {ModelKind::random_forest, ModelKind::boosted}) {
    TrainConfig cfg;
    cfg.kind = kind;
    cfg.n_estimators = 6;
    cfg.seed = 77;
    const auto a = ensemble_to_json(train(integer_data(X, 6), y, cfg)).dump();
    cfg.workers = 3;
    const auto b = ensemble_to_json(train(integer_data(X, 6), y, cfg)).dump();
    CHECK(a == b);
    cfg.seed = 78;
    if (kind == ModelKind::random_forest) {
      CHECK(ensemble_to_json(train(integer_data(X, 6), y, cfg)).dump() != a);
    }
  }
}

TEST_CASE("models learn separable structure") {
  Matrix<double> X;
  std::vector<double> y;
  blobs(1, 600, 4, 6, X, y);
  for (ModelKind kind : {ModelKind::decision_tree, ModelKind::random_forest, ModelKind::boosted}) {
    TrainConfig cfg;
    cfg.kind = kind;
    cfg.n_estimators = kind == ModelKind::decision_tree ? 1 : 10;
    const auto f = fit_forest(X, y, cfg);
    int hit = 0;
    for (std::size_t r = 0; r < X.rows(); ++r) hit += f.predict_class(X.row(r)) == static_cast<int>(y[r]);
    CHECK(hit > 420);
  }
}

TEST_CASE("multiclass and regression") {
  std::mt19937_64 rng(6);
  Matrix<double> X(300, 2);
  std::vector<double> cls(300), val(300);
  for (std::size_t r = 0; r < 300; ++r) {
    X(r, 0) = static_cast<double>(rng() % 16);
    X(r, 1) = static_cast<double>(rng() % 16);
    cls[r] = X(r, 0) < 5 ? 0 : (X(r, 1) < 8 ? 1 : 2);
    val[r] = 0.5 * X(r, 0) - X(r, 1);
  }
  TrainConfig cfg;
  cfg.kind = ModelKind::boosted;
  cfg.n_estimators = 10;
  cfg.max_depth = 3;
  const auto m = fit_forest(X, cls, cfg);
  CHECK(m.n_classes == 3);
  CHECK(m.trees.size() == 30);
  int hit = 0;
  for (std::size_t r = 0; r < 300; ++r) hit += m.predict_class(X.row(r)) == static_cast<int>(cls[r]);
  CHECK(hit > 280);

  cfg.task = Task::regression;
  cfg.n_estimators = 40;
  const auto reg = fit_forest(X, val, cfg);
  double err = 0;
  for (std::size_t r = 0; r < 300; ++r) err += std::abs(reg.predict_value(X.row(r)) - val[r]);
  CHECK(err / 300 < 1.5);
}

TEST_CASE("config and data errors") {
  TrainConfig cfg;
  cfg.max_depth = 0;
  CHECK_THROWS_AS(check_config(cfg), ConfigurationError);
  cfg = {};
  cfg.n_estimators = 0;
  CHECK_THROWS_AS(check_config(cfg), ConfigurationError);
  CHECK_THROWS_AS(fit_forest(Matrix<double>(0, 2), std::vector<double>{}, TrainConfig{}), InvalidInput);
  Matrix<double> X(2, 1, 0.0);
  CHECK_THROWS_AS(fit_forest(X, std::vector<double>{0, 0.5}, TrainConfig{}), InvalidInput);
  CHECK_THROWS_AS(fit_forest(X, std::vector<double>{0}, TrainConfig{}), InvalidInput);
}
