#include "hetree/tree_ir.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <unordered_map>
#include <unordered_set>

#include "hetree/error.hpp"

namespace hetree {

namespace {

std::unordered_map<int, int> index_by_id(const Tree& tree) {
  std::unordered_map<int, int> pos;
  pos.reserve(tree.nodes.size());
  for (std::size_t i = 0; i < tree.nodes.size(); ++i) {
    pos.emplace(tree.nodes[i].id, static_cast<int>(i));
  }
  return pos;
}

void check_quant(const QuantParams& q, const std::string& what, std::vector<std::string>& out) {
  if (q.bits < 1 || q.bits > kMaxQuantBits) out.push_back(what + ": bits out of range");
  if (!(q.scale > 0.0) || !std::isfinite(q.scale)) out.push_back(what + ": scale must be positive");
}

void validate_tree(const TreeEnsemble& e, std::size_t k, std::vector<std::string>& out) {
  const Tree& tree = e.trees[k];
  const std::string where = fmt::format("tree {}", k);
  if (tree.nodes.empty()) {
    out.push_back(where + ": no nodes");
    return;
  }

  std::unordered_map<int, int> pos;
  for (std::size_t i = 0; i < tree.nodes.size(); ++i) {
    if (!pos.emplace(tree.nodes[i].id, static_cast<int>(i)).second) {
      out.push_back(fmt::format("{}: duplicate node id {}", where, tree.nodes[i].id));
    }
  }

  const std::int64_t top = (e.input_bits >= 1 && e.input_bits < 62)
                               ? (std::int64_t{1} << e.input_bits) - 1
                               : std::int64_t{0};
  const std::size_t slots = e.leaf_slots();
  std::unordered_set<int> used_slots;
  std::vector<int> parents(tree.nodes.size(), 0);
  bool structural_ok = true;

  for (const TreeNode& n : tree.nodes) {
    if (n.is_leaf()) {
      if (n.leaf_index < 0 || static_cast<std::size_t>(n.leaf_index) >= slots) {
        out.push_back(fmt::format("{}: node {} leaf_index {} out of range [0, {})", where, n.id,
                                  n.leaf_index, slots));
      } else if (!used_slots.insert(n.leaf_index).second) {
        out.push_back(fmt::format("{}: leaf_index {} used by more than one leaf", where,
                                  n.leaf_index));
      }
      continue;
    }
    if (n.feature < 0 || n.feature >= e.n_features) {
      out.push_back(fmt::format("{}: node {} feature out of range ({} not in [0, {}))", where,
                                n.id, n.feature, e.n_features));
    }
    if (n.threshold < 0 || n.threshold > top) {
      out.push_back(fmt::format("{}: node {} threshold {} outside [0, {}]", where, n.id,
                                n.threshold, top));
    }
    for (int child : {n.left, n.right}) {
      auto it = pos.find(child);
      if (it == pos.end()) {
        out.push_back(fmt::format("{}: node {} references missing child {}", where, n.id, child));
        structural_ok = false;
      } else {
        ++parents[static_cast<std::size_t>(it->second)];
      }
    }
    if (n.left == n.right) {
      out.push_back(fmt::format("{}: node {} has identical children", where, n.id));
      structural_ok = false;
    }
  }
  if (!structural_ok) return;

  int roots = 0;
  int root = -1;
  for (std::size_t i = 0; i < parents.size(); ++i) {
    if (parents[i] == 0) {
      ++roots;
      root = static_cast<int>(i);
    }
    if (parents[i] > 1) {
      out.push_back(fmt::format("{}: not a tree (node {} has {} parents)", where,
                                tree.nodes[i].id, parents[i]));
      return;
    }
  }
  if (roots != 1) {
    out.push_back(fmt::format("{}: not a tree ({} root candidates)", where, roots));
    return;
  }
  // With one root and single parents, reaching every node rules out detached cycles.
  std::vector<char> seen(tree.nodes.size(), 0);
  std::vector<int> stack{root};
  std::size_t visited = 0;
  while (!stack.empty()) {
    const int at = stack.back();
    stack.pop_back();
    if (seen[static_cast<std::size_t>(at)]) {
      out.push_back(where + ": not a tree (cycle)");
      return;
    }
    seen[static_cast<std::size_t>(at)] = 1;
    ++visited;
    const TreeNode& n = tree.nodes[static_cast<std::size_t>(at)];
    if (!n.is_leaf()) {
      stack.push_back(pos.at(n.left));
      stack.push_back(pos.at(n.right));
    }
  }
  if (visited != tree.nodes.size()) {
    out.push_back(where + ": not a tree (cycle or unreachable nodes)");
  }
}

}  // namespace

int find_root(const Tree& tree) {
  auto pos = index_by_id(tree);
  std::vector<int> parents(tree.nodes.size(), 0);
  for (const TreeNode& n : tree.nodes) {
    if (n.is_leaf()) continue;
    for (int child : {n.left, n.right}) {
      auto it = pos.find(child);
      if (it != pos.end()) ++parents[static_cast<std::size_t>(it->second)];
    }
  }
  int root = -1;
  for (std::size_t i = 0; i < parents.size(); ++i) {
    if (parents[i] == 0) {
      if (root != -1) return -1;
      root = static_cast<int>(i);
    }
  }
  return root;
}

std::vector<std::string> validate(const TreeEnsemble& e) {
  std::vector<std::string> out;
  if (e.n_features < 1) out.push_back("n_features must be at least 1");
  if (e.input_bits < 1 || e.input_bits > kMaxQuantBits) {
    out.push_back(fmt::format("input_bits {} out of range", e.input_bits));
  }
  if (e.task == Task::classification && e.n_classes < 2) {
    out.push_back("classification needs at least 2 classes");
  }
  check_quant(e.leaf_quant, "leaf_quant", out);
  if (!e.feature_quants.empty()) {
    if (e.feature_quants.size() != static_cast<std::size_t>(e.n_features)) {
      out.push_back("feature_quants must be empty or hold one entry per feature");
    }
    for (std::size_t j = 0; j < e.feature_quants.size(); ++j) {
      check_quant(e.feature_quants[j], fmt::format("feature_quants[{}]", j), out);
      if (e.feature_quants[j].bits != e.input_bits) {
        out.push_back(fmt::format("feature_quants[{}] bits {} != input_bits {}", j,
                                  e.feature_quants[j].bits, e.input_bits));
      }
    }
  }
  if (e.trees.empty()) out.push_back("ensemble has no trees");
  if (e.leaf_values.rows() != e.trees.size()) {
    out.push_back(fmt::format("leaf_values has {} rows for {} trees", e.leaf_values.rows(),
                              e.trees.size()));
  }
  if (e.n_outputs() < 1 || e.leaf_values.cols() == 0 ||
      e.leaf_values.cols() % static_cast<std::size_t>(std::max(1, e.n_outputs())) != 0) {
    out.push_back("leaf_values row length must be a positive multiple of the output count");
  }
  if (!out.empty()) return out;

  const std::int64_t leaf_top = e.leaf_quant.max_code();
  for (std::int64_t v : e.leaf_values.data()) {
    if (v < 0 || v > leaf_top) {
      out.push_back(fmt::format("leaf code {} outside [0, {}]", v, leaf_top));
      break;
    }
  }
  for (std::size_t k = 0; k < e.trees.size(); ++k) validate_tree(e, k, out);
  return out;
}

Traverser::Traverser(const TreeEnsemble& ensemble) : ensemble_(&ensemble) {
  resolved_.reserve(ensemble.trees.size());
  for (const Tree& tree : ensemble.trees) {
    Resolved r;
    r.root = find_root(tree);
    if (r.root < 0) throw InvalidInput("tree has no unique root");
    auto pos = index_by_id(tree);
    r.left.assign(tree.nodes.size(), -1);
    r.right.assign(tree.nodes.size(), -1);
    for (std::size_t i = 0; i < tree.nodes.size(); ++i) {
      const TreeNode& n = tree.nodes[i];
      if (n.is_leaf()) continue;
      r.left[i] = pos.at(n.left);
      r.right[i] = pos.at(n.right);
    }
    resolved_.push_back(std::move(r));
  }
}

int Traverser::leaf_of(std::size_t tree, std::span<const std::int64_t> x_q) const {
  const Resolved& r = resolved_[tree];
  const auto& nodes = ensemble_->trees[tree].nodes;
  int at = r.root;
  // Bounded by node count so a malformed tree cannot loop forever.
  for (std::size_t steps = 0; steps <= nodes.size(); ++steps) {
    const TreeNode& n = nodes[static_cast<std::size_t>(at)];
    if (n.is_leaf()) return n.leaf_index;
    at = x_q[static_cast<std::size_t>(n.feature)] < n.threshold ? r.left[static_cast<std::size_t>(at)]
                                                                : r.right[static_cast<std::size_t>(at)];
  }
  throw ContractViolation("traversal did not terminate; ensemble is not a tree");
}

TraversalResult Traverser::route(std::span<const std::int64_t> x_q) const {
  const TreeEnsemble& e = *ensemble_;
  if (x_q.size() != static_cast<std::size_t>(e.n_features)) {
    throw InvalidInput(fmt::format("expected {} features, got {}", e.n_features, x_q.size()));
  }
  const std::int64_t top = (std::int64_t{1} << e.input_bits) - 1;
  for (std::int64_t v : x_q) {
    if (v < 0 || v > top) {
      throw InvalidInput(fmt::format("input code {} outside [0, {}]", v, top));
    }
  }
  const auto outputs = static_cast<std::size_t>(e.n_outputs());
  TraversalResult result;
  result.leaf_index.resize(e.trees.size());
  result.leaf_values = Matrix<std::int64_t>(e.trees.size(), outputs);
  for (std::size_t k = 0; k < e.trees.size(); ++k) {
    const int leaf = leaf_of(k, x_q);
    result.leaf_index[k] = leaf;
    for (std::size_t c = 0; c < outputs; ++c) {
      result.leaf_values(k, c) = e.leaf_value(k, static_cast<std::size_t>(leaf), c);
    }
  }
  return result;
}

TraversalResult traverse(const TreeEnsemble& ensemble, std::span<const std::int64_t> x_q) {
  return Traverser(ensemble).route(x_q);
}

}  // namespace hetree
