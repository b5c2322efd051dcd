#pragma once

// Quantized tree-ensemble IR.
//
// Every internal node routes an integer input LEFT iff x[feature] < threshold.
// Leaf payloads live in `leaf_values`, one row per tree. A row holds
// `leaf_slots()` slots of `n_outputs()` integer codes each, slot-major:
// leaf_values(k, slot * n_outputs() + c). Trees with fewer leaves than the
// widest tree leave their trailing slots at 0; those slots are never reached.

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "hetree/quantizer.hpp"
#include "hetree/tensor.hpp"

namespace hetree {

enum class Task { classification, regression };

enum class NodeKind { internal, leaf };

struct TreeNode {
  int id = 0;
  NodeKind kind = NodeKind::leaf;
  int feature = -1;              // internal only
  std::int64_t threshold = 0;    // internal only
  int left = -1;                 // internal only
  int right = -1;                // internal only
  int leaf_index = -1;           // leaf only

  bool is_leaf() const noexcept { return kind == NodeKind::leaf; }

  static TreeNode make_leaf(int id, int leaf_index) {
    TreeNode n;
    n.id = id;
    n.kind = NodeKind::leaf;
    n.leaf_index = leaf_index;
    return n;
  }
  static TreeNode make_split(int id, int feature, std::int64_t threshold, int left, int right) {
    TreeNode n;
    n.id = id;
    n.kind = NodeKind::internal;
    n.feature = feature;
    n.threshold = threshold;
    n.left = left;
    n.right = right;
    return n;
  }

  bool operator==(const TreeNode&) const = default;
};

struct Tree {
  std::vector<TreeNode> nodes;

  bool operator==(const Tree&) const = default;
};

struct TreeEnsemble {
  std::vector<Tree> trees;
  Matrix<std::int64_t> leaf_values;
  int n_features = 0;
  int input_bits = 0;
  QuantParams leaf_quant;
  std::vector<QuantParams> feature_quants;  // empty when inputs arrive pre-quantized
  Task task = Task::classification;
  int n_classes = 2;

  int n_outputs() const noexcept { return task == Task::classification ? n_classes : 1; }
  std::size_t leaf_slots() const noexcept {
    return n_outputs() > 0 ? leaf_values.cols() / static_cast<std::size_t>(n_outputs()) : 0;
  }
  std::int64_t leaf_value(std::size_t tree, std::size_t slot, std::size_t output) const {
    return leaf_values(tree, slot * static_cast<std::size_t>(n_outputs()) + output);
  }

  bool operator==(const TreeEnsemble&) const = default;
};

// Human-readable invariant violations; empty means valid.
std::vector<std::string> validate(const TreeEnsemble& ensemble);

struct TraversalResult {
  std::vector<int> leaf_index;          // one per tree
  Matrix<std::int64_t> leaf_values;     // trees x n_outputs
};

// Plaintext root-to-leaf walker. Construction resolves node ids once so that
// repeated routing is cheap; the ensemble must outlive the traverser and be valid.
class Traverser {
 public:
  explicit Traverser(const TreeEnsemble& ensemble);

  TraversalResult route(std::span<const std::int64_t> x_q) const;

  // Leaf reached in a single tree.
  int leaf_of(std::size_t tree, std::span<const std::int64_t> x_q) const;

 private:
  struct Resolved {
    int root = 0;
    std::vector<int> left, right;  // positions, -1 for leaves
  };
  const TreeEnsemble* ensemble_;
  std::vector<Resolved> resolved_;
};

TraversalResult traverse(const TreeEnsemble& ensemble, std::span<const std::int64_t> x_q);

// Position of the root node within tree.nodes, or -1 if there is not exactly one.
int find_root(const Tree& tree);

}  // namespace hetree
