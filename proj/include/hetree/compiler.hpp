#pragma once

// Lowers a TreeEnsemble into the branch-free tensor program
//
//   P = x_q . A        (feature selection, leveled)
//   Q = P < B          (one comparison TLU per internal node)
//   R = Q . C          (path codes, leveled, signed)
//   S = R == D         (one equality TLU per leaf)
//   T_k = S . L_q      (per-tree leaf values)
//
// Internal nodes of each tree are numbered breadth-first from the root; leaf
// rows follow the IR leaf slots. Trees narrower than the widest one are padded
// with inert nodes (all-zero A columns) and inert leaf slots (D = kInertPathCode).

#include <cstdint>
#include <limits>
#include <vector>

#include "hetree/quantizer.hpp"
#include "hetree/tensor.hpp"
#include "hetree/tree_ir.hpp"

namespace hetree {

// Largest input bit-width for which TLU tables are materialised.
inline constexpr int kMaxTluBits = 20;

inline constexpr std::int64_t kInertPathCode = std::numeric_limits<std::int64_t>::min();

struct LookupTable {
  std::vector<std::int64_t> entries;  // length 2^input_bits
  std::int64_t input_offset = 0;      // entries[x + input_offset] is T[x]
  int input_bits = 0;

  std::int64_t domain_min() const noexcept { return -input_offset; }
  std::int64_t domain_max() const noexcept {
    return static_cast<std::int64_t>(entries.size()) - 1 - input_offset;
  }

  bool operator==(const LookupTable&) const = default;
};

// entries[x] = 1 iff x < threshold, for x in [0, 2^input_bits).
LookupTable build_comparison_tlu(std::int64_t threshold, int input_bits);

// Signed domain [-2^value_bits, 2^value_bits - 1] stored with offset 2^value_bits
// in a table of 2^(value_bits + 1) entries; entries[x + offset] = 1 iff x == target.
LookupTable build_equality_tlu(std::int64_t target, int value_bits);

// Smallest two's-complement width holding every value of [lo, hi].
int signed_bits(std::int64_t lo, std::int64_t hi);
// Smallest unsigned width holding [0, hi]; at least 1.
int unsigned_bits(std::int64_t hi);

struct BundleShapes {
  std::size_t n_trees = 0;
  std::size_t n_features = 0;
  std::size_t max_internal = 0;
  std::size_t max_leaves = 0;   // leaf slots per tree
  std::size_t n_outputs = 0;
  std::vector<std::size_t> internal_counts;
  std::vector<std::size_t> leaf_counts;

  bool operator==(const BundleShapes&) const = default;
};

struct TensorBundle {
  Tensor3<std::int8_t> selection;    // A: trees x features x internal
  Matrix<std::int64_t> thresholds;   // B: trees x internal
  Tensor3<std::int8_t> hierarchy;    // C: trees x leaves x internal, entries in {-1, 0, 1}
  Matrix<std::int64_t> path_codes;   // D: trees x leaves
  Tensor3<std::int64_t> leaf_values; // L_q: trees x leaves x outputs
  BundleShapes shapes;

  int input_bits = 0;
  // Width of the offset-encoded R domain fed to the equality TLUs (p + 1 unless
  // some path is too deep for it).
  int path_code_bits = 0;

  std::vector<std::vector<LookupTable>> comparison_tlus;  // [tree][internal node]
  std::vector<std::vector<LookupTable>> equality_tlus;    // [tree][leaf slot], empty for inert slots

  QuantParams leaf_quant;
  std::vector<QuantParams> feature_quants;
  Task task = Task::classification;
  int n_classes = 2;

  bool leaf_active(std::size_t tree, std::size_t slot) const {
    return path_codes(tree, slot) != kInertPathCode;
  }
  std::size_t tlu_count() const;
};

// Throws CompileError when the ensemble does not validate.
TensorBundle compile(const TreeEnsemble& ensemble);

}  // namespace hetree
