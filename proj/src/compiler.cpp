#include "hetree/compiler.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <deque>
#include <unordered_map>

#include "hetree/error.hpp"

namespace hetree {

LookupTable build_comparison_tlu(std::int64_t threshold, int input_bits) {
  if (input_bits < 1 || input_bits > kMaxTluBits) {
    throw InvalidInput(fmt::format("comparison TLU width {} outside [1, {}]", input_bits, kMaxTluBits));
  }
  const std::int64_t size = std::int64_t{1} << input_bits;
  if (threshold < 0 || threshold > size) {
    throw InvalidInput(fmt::format("threshold {} outside [0, {}]", threshold, size));
  }
  LookupTable t;
  t.input_bits = input_bits;
  t.entries.resize(static_cast<std::size_t>(size));
  for (std::int64_t x = 0; x < size; ++x) t.entries[static_cast<std::size_t>(x)] = x < threshold ? 1 : 0;
  return t;
}

LookupTable build_equality_tlu(std::int64_t target, int value_bits) {
  if (value_bits < 0 || value_bits + 1 > kMaxTluBits) {
    throw InvalidInput(fmt::format("equality TLU value width {} out of range", value_bits));
  }
  const std::int64_t offset = std::int64_t{1} << value_bits;
  if (target < -offset || target > offset - 1) {
    throw InvalidInput(fmt::format("equality target {} outside [{}, {}]", target, -offset, offset - 1));
  }
  LookupTable t;
  t.input_bits = value_bits + 1;
  t.input_offset = offset;
  t.entries.assign(static_cast<std::size_t>(2 * offset), 0);
  t.entries[static_cast<std::size_t>(target + offset)] = 1;
  return t;
}

int signed_bits(std::int64_t lo, std::int64_t hi) {
  int w = 1;
  while (w < 63) {
    const std::int64_t half = std::int64_t{1} << (w - 1);
    if (lo >= -half && hi <= half - 1) break;
    ++w;
  }
  return w;
}

int unsigned_bits(std::int64_t hi) {
  int w = 1;
  while (w < 63 && hi > (std::int64_t{1} << w) - 1) ++w;
  return w;
}

std::size_t TensorBundle::tlu_count() const {
  std::size_t n = 0;
  for (std::size_t k = 0; k < shapes.n_trees; ++k) {
    // A root-leaf tree is a constant and needs no equality test.
    if (shapes.internal_counts[k] > 0) n += shapes.internal_counts[k] + shapes.leaf_counts[k];
  }
  return n;
}

namespace {

struct PathStep {
  std::size_t node;  // breadth-first internal index
  bool left;
};

struct LoweredTree {
  std::vector<const TreeNode*> internal;                  // breadth-first order
  std::vector<std::pair<int, std::vector<PathStep>>> leaves;  // (slot, root path)
};

LoweredTree lower_tree(const Tree& tree) {
  std::unordered_map<int, const TreeNode*> by_id;
  for (const TreeNode& n : tree.nodes) by_id.emplace(n.id, &n);

  LoweredTree out;
  struct Pending {
    const TreeNode* node;
    std::vector<PathStep> path;
  };
  std::deque<Pending> queue;
  queue.push_back({&tree.nodes[static_cast<std::size_t>(find_root(tree))], {}});
  while (!queue.empty()) {
    Pending cur = std::move(queue.front());
    queue.pop_front();
    if (cur.node->is_leaf()) {
      out.leaves.emplace_back(cur.node->leaf_index, std::move(cur.path));
      continue;
    }
    const std::size_t index = out.internal.size();
    out.internal.push_back(cur.node);
    auto left_path = cur.path;
    left_path.push_back({index, true});
    cur.path.push_back({index, false});
    queue.push_back({by_id.at(cur.node->left), std::move(left_path)});
    queue.push_back({by_id.at(cur.node->right), std::move(cur.path)});
  }
  return out;
}

}  // namespace

TensorBundle compile(const TreeEnsemble& ensemble) {
  if (auto violations = validate(ensemble); !violations.empty()) {
    throw CompileError(std::move(violations));
  }
  if (ensemble.input_bits > kMaxTluBits - 1) {
    throw ConfigurationError(fmt::format("input_bits {} exceeds the TLU limit of {} bits",
                                         ensemble.input_bits, kMaxTluBits - 1));
  }

  std::vector<LoweredTree> lowered;
  lowered.reserve(ensemble.trees.size());
  for (const Tree& tree : ensemble.trees) lowered.push_back(lower_tree(tree));

  TensorBundle b;
  auto& s = b.shapes;
  s.n_trees = ensemble.trees.size();
  s.n_features = static_cast<std::size_t>(ensemble.n_features);
  s.n_outputs = static_cast<std::size_t>(ensemble.n_outputs());
  s.max_leaves = ensemble.leaf_slots();
  for (const auto& t : lowered) {
    s.internal_counts.push_back(t.internal.size());
    s.leaf_counts.push_back(t.leaves.size());
    s.max_internal = std::max(s.max_internal, t.internal.size());
  }

  b.input_bits = ensemble.input_bits;
  b.leaf_quant = ensemble.leaf_quant;
  b.feature_quants = ensemble.feature_quants;
  b.task = ensemble.task;
  b.n_classes = ensemble.n_classes;

  b.selection = Tensor3<std::int8_t>(s.n_trees, s.n_features, s.max_internal, 0);
  b.thresholds = Matrix<std::int64_t>(s.n_trees, s.max_internal, 0);
  b.hierarchy = Tensor3<std::int8_t>(s.n_trees, s.max_leaves, s.max_internal, 0);
  b.path_codes = Matrix<std::int64_t>(s.n_trees, s.max_leaves, kInertPathCode);
  b.leaf_values = Tensor3<std::int64_t>(s.n_trees, s.max_leaves, s.n_outputs, 0);

  // R on leaf l ranges over [-(right turns), left turns] of l's path.
  std::int64_t r_lo = 0;
  std::int64_t r_hi = 0;
  for (std::size_t k = 0; k < s.n_trees; ++k) {
    const LoweredTree& t = lowered[k];
    for (std::size_t i = 0; i < t.internal.size(); ++i) {
      b.selection(k, static_cast<std::size_t>(t.internal[i]->feature), i) = 1;
      b.thresholds(k, i) = t.internal[i]->threshold;
    }
    for (const auto& [slot_id, path] : t.leaves) {
      const auto slot = static_cast<std::size_t>(slot_id);
      std::int64_t lefts = 0;
      for (const PathStep& step : path) {
        b.hierarchy(k, slot, step.node) = step.left ? 1 : -1;
        lefts += step.left ? 1 : 0;
      }
      const auto rights = static_cast<std::int64_t>(path.size()) - lefts;
      b.path_codes(k, slot) = lefts;
      r_lo = std::min(r_lo, -rights);
      r_hi = std::max(r_hi, lefts);
      for (std::size_t c = 0; c < s.n_outputs; ++c) {
        b.leaf_values(k, slot, c) = ensemble.leaf_value(k, slot, c);
      }
    }
  }

  b.path_code_bits = std::max(ensemble.input_bits + 1, signed_bits(r_lo, r_hi));
  if (b.path_code_bits > kMaxTluBits) {
    throw ConfigurationError(fmt::format("path codes need {} bits, above the TLU limit of {}",
                                         b.path_code_bits, kMaxTluBits));
  }

  b.comparison_tlus.resize(s.n_trees);
  b.equality_tlus.resize(s.n_trees);
  for (std::size_t k = 0; k < s.n_trees; ++k) {
    for (std::size_t i = 0; i < s.internal_counts[k]; ++i) {
      b.comparison_tlus[k].push_back(build_comparison_tlu(b.thresholds(k, i), b.input_bits));
    }
    b.equality_tlus[k].resize(s.max_leaves);
    for (std::size_t l = 0; l < s.max_leaves; ++l) {
      if (s.internal_counts[k] > 0 && b.leaf_active(k, l)) {
        b.equality_tlus[k][l] = build_equality_tlu(b.path_codes(k, l), b.path_code_bits - 1);
      }
    }
  }
  return b;
}

}  // namespace hetree
