#pragma once

// Static bit-width analysis of a compiled bundle.
//
// The program splits into leveled segments, each closed by a TLU:
//   input -> P (x . A) -> [compare TLU] -> Q -> R (Q . C) -> [equality TLU] -> S -> T_k (S . L_q)
// followed by the clear-domain sum T = sum_k T_k. Intervals are propagated
// with ordinary interval arithmetic, except that S is known to be one-hot per
// tree (a property of the path codes), which bounds T_k by the leaf codes
// instead of their sum.

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "hetree/compiler.hpp"

namespace hetree {

struct StepRange {
  std::string step;
  std::int64_t min = 0;
  std::int64_t max = 0;
  int bits = 0;
  bool encrypted = true;
};

struct BitWidthReport {
  int input_bits = 0;
  std::vector<StepRange> steps;
  int global_max_bits = 0;          // over encrypted steps
  std::size_t pbs_count = 0;
  std::vector<int> pbs_input_widths;  // one per TLU, comparisons first
  std::map<std::string, double> norm2_constants;  // largest |w|_2 of the clear weights feeding each segment

  // Throws std::out_of_range when the step is absent.
  const StepRange& step(const std::string& name) const;
  bool has_step(const std::string& name) const;
};

BitWidthReport analyze(const TensorBundle& bundle);

// Sum over all TLUs of cost_table[input width]. Throws ConfigurationError on a missing width.
double pbs_cost_estimate(const BitWidthReport& report, const std::map<int, double>& cost_table);

}  // namespace hetree
