#include <cmath>
#include <random>

#include "doctest.h"
#include "fixtures.hpp"
#include "hetree/compiler.hpp"
#include "hetree/engine.hpp"
#include "hetree/error.hpp"
#include "oracle.hpp"
#include "random_ensemble.hpp"

using namespace hetree;

namespace {

Matrix<std::int64_t> random_inputs(std::mt19937_64& rng, std::size_t n, const TreeEnsemble& e) {
  Matrix<std::int64_t> X(n, static_cast<std::size_t>(e.n_features));
  std::uniform_int_distribution<std::int64_t> d(0, (std::int64_t{1} << e.input_bits) - 1);
  for (auto& v : X.data()) v = d(rng);
  return X;
}

bool same(const PredictionResult& a, const PredictionResult& b) {
  return a.per_tree_sums == b.per_tree_sums && a.aggregate == b.aggregate && a.scores == b.scores &&
         a.predicted_class == b.predicted_class && a.tlu_failures == b.tlu_failures;
}

}  // namespace

TEST_CASE("stump decisions") {
  const auto b = compile(testing::stump());
  const auto low = evaluate(b, std::vector<std::int64_t>{0, 2}, NoiseModel::noiseless());
  const auto high = evaluate(b, std::vector<std::int64_t>{0, 5}, NoiseModel::noiseless());
  CHECK(low.predicted_class == 1);
  CHECK(high.predicted_class == 0);
  CHECK(low.tlu_applications == 3);
  CHECK(low.tlu_failures == 0);
}

TEST_CASE("noiseless evaluation equals traversal") {
  std::mt19937_64 rng(31);
  std::size_t pairs = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const auto e = testing::random_ensemble(rng, testing::random_options(rng));
    const auto b = compile(e);
    const auto X = random_inputs(rng, 100, e);
    const auto results = evaluate_batch(b, X, NoiseModel::noiseless(), 1, {}, {.trace = true});
    for (std::size_t r = 0; r < X.rows(); ++r, ++pairs) {
      const auto o = testing::oracle_evaluate(e, X.row(r));
      CHECK(results[r].aggregate == o.aggregate);
      for (std::size_t k = 0; k < e.trees.size(); ++k) {
        for (std::size_t c = 0; c < o.per_tree[k].size(); ++c) CHECK(results[r].per_tree_sums(k, c) == o.per_tree[k][c]);
        std::int64_t ones = 0;
        for (auto v : results[r].trace->S.row(k)) ones += v;
        CHECK(ones == 1);
      }
      if (e.task == Task::classification) {
        CHECK(results[r].predicted_class == testing::oracle_argmax(o.aggregate, e.leaf_quant, e.trees.size()));
      }
    }
  }
  CHECK(pairs == 10000);
}

TEST_CASE("exhaustive equivalence at small precision") {
  std::mt19937_64 rng(32);
  for (int trial = 0; trial < 40; ++trial) {
    auto o = testing::random_options(rng);
    o.bits = 1 + trial % 4;
    o.n_features = 2;
    const auto e = testing::random_ensemble(rng, o);
    const auto b = compile(e);
    const std::int64_t n = std::int64_t{1} << o.bits;
    for (std::int64_t a = 0; a < n; ++a) {
      for (std::int64_t c = 0; c < n; ++c) {
        const std::vector<std::int64_t> x{a, c};
        CHECK(evaluate(b, x, NoiseModel::noiseless()).aggregate == testing::oracle_evaluate(e, x).aggregate);
      }
    }
  }
}

TEST_CASE("aggregate is the sum of single-tree runs") {
  std::mt19937_64 rng(33);
  auto o = testing::random_options(rng);
  o.n_trees = 6;
  o.shape = testing::Shape::forest;
  const auto e = testing::random_ensemble(rng, o);
  const auto b = compile(e);
  const auto X = random_inputs(rng, 50, e);
  for (std::size_t r = 0; r < X.rows(); ++r) {
    const auto full = evaluate(b, X.row(r), NoiseModel::noiseless());
    std::vector<std::int64_t> sum(full.aggregate.size(), 0);
    for (std::size_t k = 0; k < e.trees.size(); ++k) {
      TreeEnsemble one = e;
      one.trees = {e.trees[k]};
      one.leaf_values = Matrix<std::int64_t>(1, e.leaf_values.cols());
      std::copy_n(e.leaf_values.row(k).begin(), e.leaf_values.cols(), one.leaf_values.row(0).begin());
      const auto single = evaluate(compile(one), X.row(r), NoiseModel::noiseless());
      for (std::size_t c = 0; c < sum.size(); ++c) sum[c] += single.aggregate[c];
    }
    CHECK(sum == full.aggregate);
  }
}

TEST_CASE("apply_tlu noise model") {
  const auto table = build_comparison_tlu(4, 3);
  const CounterRng rng(5);
  SUBCASE("noiseless") {
    for (std::int64_t x = 0; x < 8; ++x) {
      CHECK(apply_tlu(table, x, NoiseModel::noiseless(), rng, {0, 2, 0, 0}) == table.entries[static_cast<std::size_t>(x)]);
    }
  }
  SUBCASE("always +1") {
    NoiseModel m = NoiseModel::with_error(1.0, 3);
    m.law = DisplacementLaw::always(1);
    for (std::int64_t x = 0; x < 8; ++x) {
      const auto r = apply_tlu(table, x, m, rng.draw({0, 2, 0, static_cast<std::uint32_t>(x)}));
      CHECK(r.failed);
      CHECK(r.value == table.entries[static_cast<std::size_t>(std::min<std::int64_t>(x + 1, 7))]);
    }
  }
  SUBCASE("domain") {
    CHECK_THROWS_AS(apply_tlu(table, 8, NoiseModel::noiseless(), rng, {}), ContractViolation);
    CHECK_THROWS_AS(apply_tlu(table, -1, NoiseModel::noiseless(), rng, {}), ContractViolation);
  }
  SUBCASE("failure frequency") {
    const NoiseModel m = NoiseModel::with_error(0.05, 99);
    const CounterRng noisy(m.seed);
    std::size_t failures = 0, up = 0;
    const std::size_t n = 1000000;
    for (std::size_t i = 0; i < n; ++i) {
      const auto r = apply_tlu(table, 3, m, noisy.draw({i, 2, 0, 0}));
      failures += r.failed;
      up += r.failed && r.value == 0;
    }
    const double rate = static_cast<double>(failures) / n;
    CHECK(std::abs(rate - 0.05) <= 0.005 * 0.05);
    // From x = 3 only a +1 shift changes the answer, and that is half of the failures.
    CHECK(std::abs(static_cast<double>(up) / failures - 0.5) < 0.01);
  }
}

TEST_CASE("displacement laws") {
  const auto adj = DisplacementLaw::adjacent();
  CHECK(adj.pick(0.1) == -1);
  CHECK(adj.pick(0.9) == 1);
  const auto tail = DisplacementLaw::gaussian_tail(3);
  std::size_t far = 0;
  for (int i = 0; i < 1000; ++i) far += std::abs(tail.pick((i + 0.5) / 1000)) > 1;
  CHECK(far > 0);
  CHECK(far < 500);
  NoiseModel bad;
  bad.law = DisplacementLaw{{0}, {1.0}};
  CHECK_THROWS_AS(check_noise(bad), ConfigurationError);
  CHECK_THROWS_AS(check_noise(NoiseModel::with_error(1.5, 0)), ConfigurationError);
}

TEST_CASE("every TLU failing can empty S") {
  NoiseModel m = NoiseModel::with_error(1.0, 1);
  m.law = DisplacementLaw::always(2);
  const auto b = compile(testing::stump());
  // x[1] = 2: comparison reads T[4] = 0, so R = (0, 0); both equality reads land on R + 2 and miss.
  const auto r = evaluate(b, std::vector<std::int64_t>{0, 2}, m, 0, {.trace = true});
  CHECK(r.tlu_failures == 3);
  CHECK(r.trace->S(0, 0) == 0);
  CHECK(r.trace->S(0, 1) == 0);
  CHECK(r.aggregate == std::vector<std::int64_t>{0, 0});
}

TEST_CASE("batch evaluation is order and worker independent") {
  std::mt19937_64 rng(34);
  auto o = testing::random_options(rng);
  o.n_trees = 8;
  const auto e = testing::random_ensemble(rng, o);
  const auto b = compile(e);
  const auto X = random_inputs(rng, 200, e);
  const auto noise = NoiseModel::with_error(0.1, 17);
  const auto serial = evaluate_batch(b, X, noise, 1);
  const auto threaded = evaluate_batch(b, X, noise, 4);
  for (std::size_t r = 0; r < X.rows(); ++r) CHECK(same(serial[r], threaded[r]));

  // Reverse the batch, keeping each row's id.
  Matrix<std::int64_t> Y(X.rows(), X.cols());
  std::vector<std::uint64_t> ids(X.rows());
  for (std::size_t r = 0; r < X.rows(); ++r) {
    const std::size_t src = X.rows() - 1 - r;
    std::copy_n(X.row(src).begin(), X.cols(), Y.row(r).begin());
    ids[r] = src;
  }
  const auto reversed = evaluate_batch(b, Y, noise, 2, ids);
  for (std::size_t r = 0; r < X.rows(); ++r) CHECK(same(reversed[r], serial[X.rows() - 1 - r]));

  const auto single = evaluate(b, X.row(7), noise, 7);
  CHECK(same(single, serial[7]));
}

TEST_CASE("postprocess") {
  const QuantParams q{0.5, 2, 3};
  const auto tie = postprocess(std::vector<std::int64_t>{4, 4, 4}, q, Task::classification, 1);
  CHECK(tie.predicted_class == 0);
  const auto one = postprocess(std::vector<std::int64_t>{5}, q, Task::regression, 1);
  CHECK(one.predicted_value == dequantize(5, q));
  const auto three = postprocess(std::vector<std::int64_t>{12}, q, Task::regression, 3);
  CHECK(three.predicted_value == doctest::Approx(3.0));

  std::mt19937_64 rng(35);
  for (int i = 0; i < 1000; ++i) {
    std::vector<std::int64_t> agg(4);
    for (auto& v : agg) v = static_cast<std::int64_t>(rng() % 20);
    const auto n = 1 + rng() % 5;
    const auto d = postprocess(agg, q, Task::classification, n);
    const auto best = std::distance(d.scores.begin(), std::max_element(d.scores.begin(), d.scores.end()));
    CHECK(d.predicted_class == best);
  }
}

TEST_CASE("input and configuration errors") {
  auto b = compile(testing::stump());
  CHECK_THROWS_AS(evaluate(b, std::vector<std::int64_t>{0}, NoiseModel::noiseless()), InvalidInput);
  CHECK_THROWS_AS(evaluate(b, std::vector<std::int64_t>{0, 8}, NoiseModel::noiseless()), InvalidInput);
  b.feature_quants = {QuantParams{1.0, 0, 4}, QuantParams{1.0, 0, 4}};
  CHECK_THROWS_AS(evaluate(b, std::vector<std::int64_t>{0, 1}, NoiseModel::noiseless()), ConfigurationError);
}
