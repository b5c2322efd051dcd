#pragma once

// CART-style training for decision trees, random forests and a small
// gradient-boosting stand-in.
//
// Training works on real-valued features and learns midpoint thresholds with
// "x <= threshold goes left" routing, which is what the float reference models
// use directly. When the features are quantized integers, thresholds are then
// normalised to the IR's strict form "x < floor(threshold) + 1", which routes
// every integer identically.

#include <cstdint>
#include <span>
#include <vector>

#include "hetree/quantizer.hpp"
#include "hetree/tensor.hpp"
#include "hetree/tree_ir.hpp"

namespace hetree {

enum class ModelKind { decision_tree, random_forest, boosted };

struct TrainConfig {
  ModelKind kind = ModelKind::decision_tree;
  Task task = Task::classification;
  int max_depth = 5;
  int n_estimators = 1;          // trees (forest) or boosting rounds
  std::uint64_t seed = 0;
  int min_samples_split = 2;
  int max_features = 0;          // 0: ceil(sqrt(n_features)) for forests, all features otherwise
  double learning_rate = 0.3;    // boosting only
  int n_classes = 0;             // 0: one more than the largest label
  unsigned workers = 1;
};

// Throws ConfigurationError on max_depth < 1, n_estimators < 1 and similar.
void check_config(const TrainConfig& cfg);

struct RawNode {
  int feature = -1;        // -1 for leaves
  double threshold = 0.0;  // left iff x[feature] <= threshold
  int left = -1;
  int right = -1;
  int leaf = -1;           // index into RawTree::leaf_values
};

struct RawTree {
  std::vector<RawNode> nodes;                   // nodes[0] is the root
  std::vector<std::vector<double>> leaf_values; // leaf -> output vector

  int depth() const;
  std::size_t internal_count() const;
  int leaf_of(std::span<const double> x) const;
};

// A trained model with real thresholds and leaf values. Predictions sum the
// leaf vectors of all trees (per-tree weights are folded into the leaves).
struct RawForest {
  std::vector<RawTree> trees;
  int n_features = 0;
  Task task = Task::classification;
  int n_classes = 2;

  int n_outputs() const noexcept { return task == Task::classification ? n_classes : 1; }

  std::vector<double> scores(std::span<const double> x) const;
  int predict_class(std::span<const double> x) const;
  double predict_value(std::span<const double> x) const;
};

// Classification labels must be integers in [0, n_classes).
RawForest fit_forest(const Matrix<double>& X, std::span<const double> labels,
                     const TrainConfig& cfg);

// Trains on quantized features and emits the quantized IR. Leaf values are
// quantized globally with `leaf_bits` (default: the input bit-width).
TreeEnsemble train(const QuantizedDataset& data, std::span<const double> labels,
                   const TrainConfig& cfg, int leaf_bits = 0);

// Canonical strict threshold for "x <= raw" routing over integers: floor(raw) + 1.
std::int64_t quantize_threshold(double raw);
std::vector<std::int64_t> quantize_thresholds(std::span<const double> raw);

// Converts a forest trained on integer-valued features into the IR.
TreeEnsemble to_ensemble(const RawForest& forest, std::span<const QuantParams> feature_quants,
                         int input_bits, int leaf_bits);

int count_classes(std::span<const double> labels);

}  // namespace hetree
