#include "hetree/engine.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "hetree/error.hpp"
#include "hetree/parallel.hpp"

namespace hetree {

DisplacementLaw DisplacementLaw::adjacent() { return {{-1, 1}, {0.5, 0.5}}; }

DisplacementLaw DisplacementLaw::always(std::int64_t k) { return {{k}, {1.0}}; }

DisplacementLaw DisplacementLaw::gaussian_tail(int max_k) {
  DisplacementLaw law;
  for (int k = 1; k <= max_k; ++k) {
    const double w = std::exp(-0.5 * k * k);
    law.offsets.push_back(-k);
    law.weights.push_back(w);
    law.offsets.push_back(k);
    law.weights.push_back(w);
  }
  return law;
}

std::int64_t DisplacementLaw::pick(double u) const {
  const double total = std::accumulate(weights.begin(), weights.end(), 0.0);
  double target = u * total;
  for (std::size_t i = 0; i < offsets.size(); ++i) {
    if (target < weights[i]) return offsets[i];
    target -= weights[i];
  }
  return offsets.back();
}

void check_noise(const NoiseModel& noise) {
  if (!(noise.p_error >= 0.0 && noise.p_error <= 1.0)) {
    throw ConfigurationError(fmt::format("p_error {} outside [0, 1]", noise.p_error));
  }
  const auto& law = noise.law;
  if (law.offsets.empty() || law.offsets.size() != law.weights.size()) {
    throw ConfigurationError("displacement law needs one weight per offset");
  }
  for (std::size_t i = 0; i < law.offsets.size(); ++i) {
    if (law.offsets[i] == 0) throw ConfigurationError("displacement offsets must be non-zero");
    if (!(law.weights[i] > 0.0) || !std::isfinite(law.weights[i])) {
      throw ConfigurationError("displacement weights must be positive");
    }
  }
}

TluOutcome apply_tlu(const LookupTable& table, std::int64_t x, const NoiseModel& noise,
                     const TluDraw& draw) {
  const std::int64_t index = x + table.input_offset;
  const auto size = static_cast<std::int64_t>(table.entries.size());
  if (index < 0 || index >= size) {
    throw ContractViolation(fmt::format("TLU input {} outside domain [{}, {}]", x,
                                        table.domain_min(), table.domain_max()));
  }
  if (draw.failure_u >= noise.p_error) {
    return {table.entries[static_cast<std::size_t>(index)], false};
  }
  const std::int64_t shifted = std::clamp(index + noise.law.pick(draw.displacement_u),
                                          std::int64_t{0}, size - 1);
  return {table.entries[static_cast<std::size_t>(shifted)], true};
}

std::int64_t apply_tlu(const LookupTable& table, std::int64_t x, const NoiseModel& noise,
                       const CounterRng& rng, const TluSite& site) {
  return apply_tlu(table, x, noise, rng.draw(site)).value;
}

Decision postprocess(std::span<const std::int64_t> aggregate, const QuantParams& leaf_quant,
                     Task task, std::size_t n_trees) {
  Decision d;
  d.scores.reserve(aggregate.size());
  const auto shift = static_cast<std::int64_t>(n_trees) * leaf_quant.zero_point;
  for (std::int64_t a : aggregate) {
    d.scores.push_back(static_cast<double>(a - shift) * leaf_quant.scale);
  }
  if (task == Task::classification) {
    // Same winner as on the integers: the affine map is increasing and shared by all classes.
    const auto best = std::max_element(aggregate.begin(), aggregate.end());
    d.predicted_class = static_cast<int>(std::distance(aggregate.begin(), best));
  } else if (!d.scores.empty()) {
    d.predicted_value = d.scores.front();
  }
  return d;
}

namespace {

void check_bundle_input(const TensorBundle& b, std::span<const std::int64_t> x_q) {
  if (x_q.size() != b.shapes.n_features) {
    throw InvalidInput(fmt::format("expected {} features, got {}", b.shapes.n_features, x_q.size()));
  }
  const std::int64_t top = (std::int64_t{1} << b.input_bits) - 1;
  for (std::int64_t v : x_q) {
    if (v < 0 || v > top) throw InvalidInput(fmt::format("input code {} outside [0, {}]", v, top));
  }
}

void check_bundle_config(const TensorBundle& b) {
  for (const auto& q : b.feature_quants) {
    if (q.bits != b.input_bits) {
      throw ConfigurationError(fmt::format("feature quantizer uses {} bits but the bundle expects {}",
                                           q.bits, b.input_bits));
    }
  }
  for (const auto& tree : b.comparison_tlus) {
    for (const auto& t : tree) {
      if (t.input_bits != b.input_bits) {
        throw ConfigurationError("comparison table width does not match the bundle input width");
      }
    }
  }
}

PredictionResult run(const TensorBundle& b, std::span<const std::int64_t> x_q,
                     const NoiseModel& noise, const CounterRng& rng, std::uint64_t row,
                     const EvalOptions& options) {
  const auto& s = b.shapes;
  PredictionResult out;
  out.per_tree_sums = Matrix<std::int64_t>(s.n_trees, s.n_outputs, 0);
  out.aggregate.assign(s.n_outputs, 0);
  if (options.trace) {
    out.trace = StepTrace{Matrix<std::int64_t>(s.n_trees, s.max_internal, 0),
                          Matrix<std::int64_t>(s.n_trees, s.max_internal, 0),
                          Matrix<std::int64_t>(s.n_trees, s.max_leaves, 0),
                          Matrix<std::int64_t>(s.n_trees, s.max_leaves, 0)};
  }

  std::vector<std::int64_t> P(s.max_internal), Q(s.max_internal), R(s.max_leaves), S(s.max_leaves);
  for (std::size_t k = 0; k < s.n_trees; ++k) {
    const std::size_t n_internal = s.internal_counts[k];
    const auto tree = static_cast<std::uint32_t>(k);

    // Step 1: P = x_q . A
    std::fill(P.begin(), P.end(), 0);
    for (std::size_t j = 0; j < s.n_features; ++j) {
      const std::int64_t xj = x_q[j];
      if (xj == 0) continue;
      const auto column = b.selection.fiber(k, j);
      for (std::size_t i = 0; i < n_internal; ++i) P[i] += xj * column[i];
    }

    // Step 2: Q = P < B, one comparison TLU per node
    for (std::size_t i = 0; i < n_internal; ++i) {
      const auto r = apply_tlu(b.comparison_tlus[k][i], P[i], noise,
                               rng.draw({row, kCompareStep, tree, static_cast<std::uint32_t>(i)}));
      Q[i] = r.value;
      out.tlu_failures += r.failed ? 1 : 0;
    }
    out.tlu_applications += n_internal;

    // Steps 3-4: R = Q . C, S = R == D
    for (std::size_t l = 0; l < s.max_leaves; ++l) {
      R[l] = 0;
      S[l] = 0;
      if (!b.leaf_active(k, l)) continue;
      if (n_internal == 0) {
        S[l] = 1;
        continue;
      }
      const auto row_c = b.hierarchy.fiber(k, l);
      std::int64_t acc = 0;
      for (std::size_t i = 0; i < n_internal; ++i) acc += Q[i] * row_c[i];
      R[l] = acc;
      const auto r = apply_tlu(b.equality_tlus[k][l], acc, noise,
                               rng.draw({row, kEqualStep, tree, static_cast<std::uint32_t>(l)}));
      S[l] = r.value;
      out.tlu_failures += r.failed ? 1 : 0;
      ++out.tlu_applications;
    }

    // Step 5.1: T_k = S . L_q (encrypted domain)
    for (std::size_t l = 0; l < s.max_leaves; ++l) {
      if (S[l] == 0) continue;
      const auto values = b.leaf_values.fiber(k, l);
      for (std::size_t c = 0; c < s.n_outputs; ++c) out.per_tree_sums(k, c) += S[l] * values[c];
    }
    // Step 5.2: clear-domain sum over trees
    for (std::size_t c = 0; c < s.n_outputs; ++c) out.aggregate[c] += out.per_tree_sums(k, c);

    if (out.trace) {
      auto& t = *out.trace;
      std::copy_n(P.begin(), n_internal, t.P.row(k).begin());
      std::copy_n(Q.begin(), n_internal, t.Q.row(k).begin());
      std::copy(R.begin(), R.end(), t.R.row(k).begin());
      std::copy(S.begin(), S.end(), t.S.row(k).begin());
    }
  }

  Decision d = postprocess(out.aggregate, b.leaf_quant, b.task, s.n_trees);
  out.scores = std::move(d.scores);
  out.predicted_class = d.predicted_class;
  out.predicted_value = d.predicted_value;
  return out;
}

}  // namespace

PredictionResult evaluate(const TensorBundle& bundle, std::span<const std::int64_t> x_q,
                          const NoiseModel& noise, std::uint64_t row, const EvalOptions& options) {
  check_noise(noise);
  check_bundle_config(bundle);
  check_bundle_input(bundle, x_q);
  return run(bundle, x_q, noise, CounterRng(noise.seed), row, options);
}

std::vector<PredictionResult> evaluate_batch(const TensorBundle& bundle,
                                             const Matrix<std::int64_t>& X_q,
                                             const NoiseModel& noise, unsigned workers,
                                             std::span<const std::uint64_t> row_ids,
                                             const EvalOptions& options) {
  check_noise(noise);
  check_bundle_config(bundle);
  if (X_q.rows() > 0 && X_q.cols() != bundle.shapes.n_features) {
    throw InvalidInput(fmt::format("expected {} features, got {}", bundle.shapes.n_features, X_q.cols()));
  }
  if (!row_ids.empty() && row_ids.size() != X_q.rows()) {
    throw InvalidInput("row_ids must hold one id per input row");
  }
  for (std::size_t r = 0; r < X_q.rows(); ++r) check_bundle_input(bundle, X_q.row(r));

  const CounterRng rng(noise.seed);
  std::vector<PredictionResult> results(X_q.rows());
  parallel_for(X_q.rows(), workers, [&](std::size_t r) {
    const std::uint64_t id = row_ids.empty() ? r : row_ids[r];
    results[r] = run(bundle, X_q.row(r), noise, rng, id, options);
  });
  return results;
}

}  // namespace hetree
