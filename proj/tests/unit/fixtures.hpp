#pragma once

#include "hetree/tree_ir.hpp"

namespace hetree::testing {

// Two features at p = 3; class 1 iff x[1] <= 3, written as "left iff x[1] < 4".
inline TreeEnsemble stump() {
  TreeEnsemble e;
  e.n_features = 2;
  e.input_bits = 3;
  e.n_classes = 2;
  Tree t;
  t.nodes.push_back(TreeNode::make_split(0, 1, 4, 1, 2));
  t.nodes.push_back(TreeNode::make_leaf(1, 0));
  t.nodes.push_back(TreeNode::make_leaf(2, 1));
  e.trees.push_back(t);
  e.leaf_values = Matrix<std::int64_t>(1, 4, 0);
  e.leaf_values(0, 1) = 1;  // slot 0 (left): class 1
  e.leaf_values(0, 2) = 1;  // slot 1 (right): class 0
  e.leaf_quant = QuantParams{1.0, 0, 3};
  return e;
}

inline TreeEnsemble root_leaf(int bits = 4) {
  TreeEnsemble e;
  e.n_features = 2;
  e.input_bits = bits;
  e.n_classes = 2;
  Tree t;
  t.nodes.push_back(TreeNode::make_leaf(5, 0));
  e.trees.push_back(t);
  e.leaf_values = Matrix<std::int64_t>(1, 2, 0);
  e.leaf_values(0, 0) = 3;
  e.leaf_values(0, 1) = 1;
  e.leaf_quant = QuantParams{0.5, 0, bits};
  return e;
}

}  // namespace hetree::testing
