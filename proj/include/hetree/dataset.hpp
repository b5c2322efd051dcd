#pragma once

// CSV ingestion, cross-validation folds and evaluation metrics.

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "hetree/tensor.hpp"

namespace hetree {

struct Table {
  std::vector<std::string> feature_names;
  Matrix<double> X;
  std::string label_name;       // empty when the table has no label column
  std::vector<double> labels;
};

// First line is a header. With a non-empty `label`, that column becomes the
// label vector and must exist. Cells must be numeric; errors name the row and
// column. A completely empty stream yields an empty table.
Table parse_csv(std::istream& in, const std::string& label, const std::string& source = "<input>");
Table read_csv(const std::string& path, const std::string& label);

// Shortest text that parses back to the same double.
std::string format_number(double v);

// Fold id in [0, k) for every row. Rows are shuffled with the seed, then
// split into contiguous folds; with `stratify`, each label value is shuffled
// and split separately so every fold keeps the class balance.
std::vector<int> make_folds(std::span<const double> labels, int k, std::uint64_t seed, bool stratify);

double accuracy(std::span<const int> truth, std::span<const int> pred);
// F1 of class 1. Zero when there are no predicted and no true positives.
double f1_binary(std::span<const int> truth, std::span<const int> pred);
// Area under the precision-recall curve with step interpolation:
// sum_n (R_n - R_{n-1}) P_n over distinct score thresholds, descending.
// Zero when there are no positives.
double average_precision(std::span<const int> truth, std::span<const double> score);

}  // namespace hetree
