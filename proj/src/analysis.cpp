#include "hetree/analysis.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "hetree/error.hpp"

namespace hetree {

const StepRange& BitWidthReport::step(const std::string& name) const {
  for (const auto& s : steps) {
    if (s.step == name) return s;
  }
  throw std::out_of_range("no step named " + name);
}

bool BitWidthReport::has_step(const std::string& name) const {
  return std::any_of(steps.begin(), steps.end(), [&](const StepRange& s) { return s.step == name; });
}

namespace {

struct Interval {
  std::int64_t lo = std::numeric_limits<std::int64_t>::max();
  std::int64_t hi = std::numeric_limits<std::int64_t>::min();

  bool empty() const { return lo > hi; }
  void include(std::int64_t lo_, std::int64_t hi_) {
    lo = std::min(lo, lo_);
    hi = std::max(hi, hi_);
  }
};

// Bounds of sum_i w_i * v_i for v_i in [v_lo, v_hi].
template <typename W>
std::pair<std::int64_t, std::int64_t> dot_bounds(std::span<const W> weights, std::int64_t v_lo,
                                                 std::int64_t v_hi) {
  std::int64_t lo = 0, hi = 0;
  for (W w : weights) {
    const std::int64_t a = static_cast<std::int64_t>(w) * v_lo;
    const std::int64_t b = static_cast<std::int64_t>(w) * v_hi;
    lo += std::min(a, b);
    hi += std::max(a, b);
  }
  return {lo, hi};
}

int range_bits(std::int64_t lo, std::int64_t hi) {
  return lo < 0 ? signed_bits(lo, hi) : unsigned_bits(hi);
}

}  // namespace

BitWidthReport analyze(const TensorBundle& b) {
  const auto& s = b.shapes;
  const int p = b.input_bits;
  const std::int64_t top = (std::int64_t{1} << p) - 1;

  BitWidthReport report;
  report.input_bits = p;

  Interval P, R, Tk;
  double norm_a = 0.0, norm_c = 0.0, norm_l = 0.0;
  std::vector<std::int64_t> t_lo(s.n_outputs, 0), t_hi(s.n_outputs, 0);
  std::vector<std::int8_t> column(s.n_features);
  std::size_t equality_tlus = 0;

  for (std::size_t k = 0; k < s.n_trees; ++k) {
    const std::size_t n_internal = s.internal_counts[k];

    // Step 1: P_i = sum_j x_j A_ji over x_j in [0, top]
    for (std::size_t i = 0; i < n_internal; ++i) {
      double sq = 0.0;
      for (std::size_t j = 0; j < s.n_features; ++j) {
        column[j] = b.selection(k, j, i);
        sq += static_cast<double>(column[j]) * column[j];
      }
      const auto [lo, hi] = dot_bounds<std::int8_t>(column, 0, top);
      P.include(lo, hi);
      norm_a = std::max(norm_a, std::sqrt(sq));
      report.pbs_input_widths.push_back(p);
    }

    // Step 3: R_l = sum_i Q_i C_li over Q_i in [0, 1]
    for (std::size_t l = 0; l < s.max_leaves; ++l) {
      if (!b.leaf_active(k, l) || n_internal == 0) continue;
      const auto row = b.hierarchy.fiber(k, l).first(n_internal);
      const auto [lo, hi] = dot_bounds<std::int8_t>(row, 0, 1);
      R.include(lo, hi);
      double sq = 0.0;
      for (auto c : row) sq += static_cast<double>(c) * c;
      norm_c = std::max(norm_c, std::sqrt(sq));
      ++equality_tlus;
    }

    // Step 5.1 with one-hot S: T_k lies between the smallest and largest active leaf code.
    for (std::size_t c = 0; c < s.n_outputs; ++c) {
      Interval leaf;
      double sq = 0.0;
      for (std::size_t l = 0; l < s.max_leaves; ++l) {
        if (!b.leaf_active(k, l)) continue;
        const std::int64_t v = b.leaf_values(k, l, c);
        leaf.include(v, v);
        sq += static_cast<double>(v) * static_cast<double>(v);
      }
      if (leaf.empty()) continue;
      Tk.include(leaf.lo, leaf.hi);
      t_lo[c] += leaf.lo;
      t_hi[c] += leaf.hi;
      norm_l = std::max(norm_l, std::sqrt(sq));
    }
  }

  report.steps.push_back({"input", 0, top, p, true});
  if (!P.empty()) {
    report.steps.push_back({"P", P.lo, P.hi, range_bits(P.lo, P.hi), true});
    report.steps.push_back({"Q", 0, 1, 1, true});
  }
  int r_width = 0;
  if (!R.empty()) {
    // R shares the p-bit message space and needs one more bit for its sign.
    r_width = std::max(p + 1, signed_bits(R.lo, R.hi));
    report.steps.push_back({"R", R.lo, R.hi, r_width, true});
    report.steps.push_back({"S", 0, 1, 1, true});
    report.pbs_input_widths.insert(report.pbs_input_widths.end(), equality_tlus, r_width);
  }
  if (!Tk.empty()) {
    report.steps.push_back({"T_k", Tk.lo, Tk.hi, range_bits(Tk.lo, Tk.hi), true});
    Interval T;
    for (std::size_t c = 0; c < s.n_outputs; ++c) T.include(t_lo[c], t_hi[c]);
    report.steps.push_back({"T", T.lo, T.hi, range_bits(T.lo, T.hi), false});
  }

  for (const auto& st : report.steps) {
    if (st.encrypted) report.global_max_bits = std::max(report.global_max_bits, st.bits);
  }
  report.pbs_count = report.pbs_input_widths.size();

  if (!P.empty()) report.norm2_constants["P"] = norm_a;
  if (!R.empty()) report.norm2_constants["R"] = norm_c;
  if (!Tk.empty()) report.norm2_constants["T_k"] = norm_l;
  return report;
}

double pbs_cost_estimate(const BitWidthReport& report, const std::map<int, double>& cost_table) {
  double total = 0.0;
  for (int w : report.pbs_input_widths) {
    auto it = cost_table.find(w);
    if (it == cost_table.end()) {
      throw ConfigurationError(fmt::format("cost table has no entry for {}-bit TLUs", w));
    }
    total += it->second;
  }
  return total;
}

}  // namespace hetree
