#pragma once

// Executes a compiled TensorBundle. Leveled steps (P, R, T_k) are exact
// integer arithmetic. Each TLU application returns T[x] with probability
// 1 - p_error and otherwise T[x + k], k drawn from the displacement law, the
// index clamped to the table. Per-tree sums are added in the clear and then
// dequantized; classification takes the argmax (lowest index on ties).

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "hetree/compiler.hpp"
#include "hetree/rng.hpp"

namespace hetree {

struct DisplacementLaw {
  std::vector<std::int64_t> offsets;
  std::vector<double> weights;  // relative, need not sum to 1

  // k = -1 or +1 with equal probability.
  static DisplacementLaw adjacent();
  static DisplacementLaw always(std::int64_t k);
  // k in {±1, ..., ±max_k} with weight proportional to exp(-|k|^2 / 2).
  static DisplacementLaw gaussian_tail(int max_k);

  std::int64_t pick(double u) const;
};

struct NoiseModel {
  double p_error = 0.0;
  DisplacementLaw law = DisplacementLaw::adjacent();
  std::uint64_t seed = 0;

  static NoiseModel noiseless() { return {}; }
  static NoiseModel with_error(double p_error, std::uint64_t seed) {
    NoiseModel m;
    m.p_error = p_error;
    m.seed = seed;
    return m;
  }
};

// Throws ConfigurationError on p_error outside [0, 1] or a malformed law.
void check_noise(const NoiseModel& noise);

struct TluOutcome {
  std::int64_t value = 0;
  bool failed = false;
};

// Throws ContractViolation when x lies outside the table's domain.
TluOutcome apply_tlu(const LookupTable& table, std::int64_t x, const NoiseModel& noise,
                     const TluDraw& draw);
std::int64_t apply_tlu(const LookupTable& table, std::int64_t x, const NoiseModel& noise,
                       const CounterRng& rng, const TluSite& site);

// Algorithm step numbers used in TluSite::step.
inline constexpr std::uint32_t kCompareStep = 2;
inline constexpr std::uint32_t kEqualStep = 4;

struct StepTrace {
  Matrix<std::int64_t> P;  // trees x max_internal
  Matrix<std::int64_t> Q;
  Matrix<std::int64_t> R;  // trees x max_leaves (inert slots hold 0)
  Matrix<std::int64_t> S;
};

struct Decision {
  std::vector<double> scores;
  int predicted_class = 0;
  double predicted_value = 0.0;
};

struct PredictionResult {
  Matrix<std::int64_t> per_tree_sums;  // trees x outputs, encrypted-domain T_k
  std::vector<std::int64_t> aggregate; // clear-domain sum over trees
  std::vector<double> scores;          // dequantized aggregate
  int predicted_class = 0;
  double predicted_value = 0.0;
  std::size_t tlu_applications = 0;
  std::size_t tlu_failures = 0;
  std::optional<StepTrace> trace;
};

struct EvalOptions {
  bool trace = false;
};

// Dequantizes clear-domain sums of n_trees leaf codes (subtracting
// n_trees * zero_point) and takes the decision.
Decision postprocess(std::span<const std::int64_t> aggregate, const QuantParams& leaf_quant,
                     Task task, std::size_t n_trees);

// `row` keys the noise stream for this input.
PredictionResult evaluate(const TensorBundle& bundle, std::span<const std::int64_t> x_q,
                          const NoiseModel& noise, std::uint64_t row = 0,
                          const EvalOptions& options = {});

// Rows are keyed by `row_ids` (default: 0..n-1) and spread over `workers` threads.
// Output is bit-identical for any worker count.
std::vector<PredictionResult> evaluate_batch(const TensorBundle& bundle,
                                             const Matrix<std::int64_t>& X_q,
                                             const NoiseModel& noise, unsigned workers = 1,
                                             std::span<const std::uint64_t> row_ids = {},
                                             const EvalOptions& options = {});

}  // namespace hetree
