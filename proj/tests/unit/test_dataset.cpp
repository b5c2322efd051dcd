#include <sstream>

#include "doctest.h"
#include "hetree/dataset.hpp"
#include "hetree/error.hpp"

using namespace hetree;

TEST_CASE("csv with a label column") {
  std::istringstream in("a, b ,y\n1,2.5,0\n-3,4e2,1\n\n");
  const Table t = parse_csv(in, "y");
  CHECK(t.feature_names == std::vector<std::string>{"a", "b"});
  CHECK(t.X.rows() == 2);
  CHECK(t.X(1, 1) == 400.0);
  CHECK(t.labels == std::vector<double>{0, 1});
}

TEST_CASE("label column can sit anywhere") {
  std::istringstream in("y,a\n1,5\n0,6\n");
  const Table t = parse_csv(in, "y");
  CHECK(t.feature_names == std::vector<std::string>{"a"});
  CHECK(t.X(1, 0) == 6.0);
  CHECK(t.labels == std::vector<double>{1, 0});
}

TEST_CASE("csv errors name row and column") {
  std::istringstream bad("a,b,y\n1,2,0\n3,x,1\n");
  try {
    parse_csv(bad, "y");
    FAIL("expected an ingestion error");
  } catch (const InvalidInput& e) {
    const std::string msg = e.what();
    CHECK(msg.find("row 2") != msg.npos);
    CHECK(msg.find("'b'") != msg.npos);
  }
  std::istringstream missing("a,b\n1,2\n");
  CHECK_THROWS_AS(parse_csv(missing, "y"), InvalidInput);
  std::istringstream ragged("a,y\n1\n");
  CHECK_THROWS_AS(parse_csv(ragged, "y"), InvalidInput);
  std::istringstream nan_cell("a,y\nnan,1\n");
  CHECK_THROWS_AS(parse_csv(nan_cell, "y"), InvalidInput);
}

TEST_CASE("empty input") {
  std::istringstream empty("");
  CHECK(parse_csv(empty, "").X.rows() == 0);
  std::istringstream header_only("a,b\n");
  const Table t = parse_csv(header_only, "");
  CHECK(t.X.rows() == 0);
  CHECK(t.X.cols() == 2);
}

TEST_CASE("stratified folds") {
  std::vector<double> labels;
  for (int i = 0; i < 103; ++i) labels.push_back(i % 3 == 0 ? 1 : 0);
  const auto folds = make_folds(labels, 5, 9, true);
  std::vector<int> size(5, 0), pos(5, 0);
  for (std::size_t r = 0; r < labels.size(); ++r) {
    REQUIRE(folds[r] >= 0);
    REQUIRE(folds[r] < 5);
    ++size[static_cast<std::size_t>(folds[r])];
    pos[static_cast<std::size_t>(folds[r])] += labels[r] == 1;
  }
  for (int f = 0; f < 5; ++f) {
    CHECK(size[static_cast<std::size_t>(f)] >= 20);
    CHECK(size[static_cast<std::size_t>(f)] <= 21);
    CHECK(pos[static_cast<std::size_t>(f)] >= 6);
    CHECK(pos[static_cast<std::size_t>(f)] <= 7);
  }
  CHECK(make_folds(labels, 5, 9, true) == folds);
  CHECK(make_folds(labels, 5, 10, true) != folds);
  CHECK_THROWS_AS(make_folds(labels, 1, 0, true), ConfigurationError);
}

TEST_CASE("metrics") {
  const std::vector<int> truth{1, 0, 1, 1, 0, 0};
  const std::vector<int> pred{1, 0, 0, 1, 1, 0};
  CHECK(accuracy(truth, pred) == doctest::Approx(4.0 / 6));
  CHECK(f1_binary(truth, pred) == doctest::Approx(2.0 / 3));
  CHECK(f1_binary(std::vector<int>{0, 0}, std::vector<int>{0, 0}) == 0.0);

  // Hand-computed: ranks 0.9(+), 0.8(-), 0.7(+), 0.4(+), 0.3(-), 0.1(-)
  const std::vector<double> score{0.9, 0.8, 0.7, 0.4, 0.3, 0.1};
  const std::vector<int> ranked{1, 0, 1, 1, 0, 0};
  CHECK(average_precision(ranked, score) == doctest::Approx((1.0 + 2.0 / 3 + 3.0 / 4) / 3));

  // Ties collapse into one threshold: all tied gives the base rate.
  const std::vector<double> flat(6, 0.5);
  CHECK(average_precision(ranked, flat) == doctest::Approx(0.5));
  CHECK(average_precision(std::vector<int>{0, 0}, std::vector<double>{0.1, 0.2}) == 0.0);
}
