#include "hetree/trainer.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <random>

#include "hetree/error.hpp"
#include "hetree/parallel.hpp"
#include "hetree/rng.hpp"

namespace hetree {

void check_config(const TrainConfig& cfg) {
  if (cfg.max_depth < 1) throw ConfigurationError("max_depth must be at least 1");
  if (cfg.n_estimators < 1) throw ConfigurationError("n_estimators must be at least 1");
  if (cfg.min_samples_split < 2) throw ConfigurationError("min_samples_split must be at least 2");
  if (cfg.max_features < 0) throw ConfigurationError("max_features must be non-negative");
  if (!(cfg.learning_rate > 0.0)) throw ConfigurationError("learning_rate must be positive");
  if (cfg.n_classes < 0 || cfg.n_classes == 1) throw ConfigurationError("n_classes must be 0 or at least 2");
}

int RawTree::depth() const {
  std::function<int(int)> walk = [&](int at) -> int {
    const RawNode& n = nodes[static_cast<std::size_t>(at)];
    if (n.feature < 0) return 0;
    return 1 + std::max(walk(n.left), walk(n.right));
  };
  return nodes.empty() ? 0 : walk(0);
}

std::size_t RawTree::internal_count() const {
  return static_cast<std::size_t>(
      std::count_if(nodes.begin(), nodes.end(), [](const RawNode& n) { return n.feature >= 0; }));
}

int RawTree::leaf_of(std::span<const double> x) const {
  int at = 0;
  while (nodes[static_cast<std::size_t>(at)].feature >= 0) {
    const RawNode& n = nodes[static_cast<std::size_t>(at)];
    at = x[static_cast<std::size_t>(n.feature)] <= n.threshold ? n.left : n.right;
  }
  return nodes[static_cast<std::size_t>(at)].leaf;
}

std::vector<double> RawForest::scores(std::span<const double> x) const {
  std::vector<double> out(static_cast<std::size_t>(n_outputs()), 0.0);
  for (const RawTree& t : trees) {
    const auto& v = t.leaf_values[static_cast<std::size_t>(t.leaf_of(x))];
    for (std::size_t c = 0; c < out.size(); ++c) out[c] += v[c];
  }
  return out;
}

int RawForest::predict_class(std::span<const double> x) const {
  const auto s = scores(x);
  return static_cast<int>(std::distance(s.begin(), std::max_element(s.begin(), s.end())));
}

double RawForest::predict_value(std::span<const double> x) const { return scores(x).front(); }

int count_classes(std::span<const double> labels) {
  int top = 1;
  for (double y : labels) {
    if (!(y >= 0.0) || y != std::floor(y) || y > 1e6) {
      throw InvalidInput(fmt::format("class label {} is not a non-negative integer", y));
    }
    top = std::max(top, static_cast<int>(y));
  }
  return top + 1;
}

std::int64_t quantize_threshold(double raw) {
  return static_cast<std::int64_t>(std::floor(raw)) + 1;
}

std::vector<std::int64_t> quantize_thresholds(std::span<const double> raw) {
  std::vector<std::int64_t> out;
  out.reserve(raw.size());
  for (double t : raw) out.push_back(quantize_threshold(t));
  return out;
}

namespace {

// Per feature: sorted distinct values and each row's index into them.
struct Binned {
  std::vector<std::vector<double>> cuts;
  std::vector<std::vector<std::uint32_t>> codes;
};

Binned bin_features(const Matrix<double>& X) {
  Binned b;
  b.cuts.resize(X.cols());
  b.codes.resize(X.cols());
  std::vector<double> column(X.rows());
  for (std::size_t j = 0; j < X.cols(); ++j) {
    for (std::size_t r = 0; r < X.rows(); ++r) column[r] = X(r, j);
    auto& cuts = b.cuts[j];
    cuts = column;
    std::sort(cuts.begin(), cuts.end());
    cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());
    auto& codes = b.codes[j];
    codes.resize(X.rows());
    for (std::size_t r = 0; r < X.rows(); ++r) {
      codes[r] = static_cast<std::uint32_t>(
          std::lower_bound(cuts.begin(), cuts.end(), column[r]) - cuts.begin());
    }
  }
  return b;
}

// Row targets: one-hot class indicators for Gini trees, a single value for
// squared-error trees. Both criteria maximise sum over children of |sum t|^2 / n.
struct Targets {
  std::size_t width = 1;
  std::vector<double> values;  // rows x width

  std::span<const double> row(std::size_t r) const { return {values.data() + r * width, width}; }
};

using LeafFn = std::function<std::vector<double>(double count, std::span<const double> sum)>;

struct GrowParams {
  int max_depth = 5;
  int min_samples_split = 2;
  int max_features = 0;  // 0: every feature
};

struct Split {
  int feature = -1;
  std::uint32_t last_left_bin = 0;
  double threshold = 0.0;
  double score = -1.0;
};

double midpoint(double a, double b) {
  double m = a + (b - a) / 2.0;
  if (m >= b) m = a;
  return m;
}

class TreeGrower {
 public:
  TreeGrower(const Binned& bins, const Targets& targets, GrowParams params, LeafFn leaf_fn,
             std::mt19937_64* rng)
      : bins_(bins), targets_(targets), params_(params), leaf_fn_(std::move(leaf_fn)), rng_(rng) {
    features_.resize(bins.cuts.size());
    std::iota(features_.begin(), features_.end(), 0);
  }

  RawTree grow(std::vector<std::uint32_t> rows) {
    RawTree tree;
    build(rows, 0, tree);
    return tree;
  }

 private:
  int build(std::vector<std::uint32_t>& rows, int depth, RawTree& tree) {
    const std::size_t w = targets_.width;
    std::vector<double> sum(w, 0.0);
    double sq = 0.0;
    for (auto r : rows) {
      const auto t = targets_.row(r);
      for (std::size_t c = 0; c < w; ++c) {
        sum[c] += t[c];
        sq += t[c] * t[c];
      }
    }
    const auto n = static_cast<double>(rows.size());
    double norm = 0.0;
    for (double s : sum) norm += s * s;
    const double impurity = sq - norm / n;

    const int index = static_cast<int>(tree.nodes.size());
    tree.nodes.emplace_back();

    Split split;
    if (depth < params_.max_depth && static_cast<int>(rows.size()) >= params_.min_samples_split &&
        impurity > 1e-9 * std::max(1.0, n)) {
      split = best_split(rows);
    }
    if (split.feature < 0) {
      tree.nodes[static_cast<std::size_t>(index)].leaf = static_cast<int>(tree.leaf_values.size());
      tree.leaf_values.push_back(leaf_fn_(n, sum));
      return index;
    }

    const auto& codes = bins_.codes[static_cast<std::size_t>(split.feature)];
    std::vector<std::uint32_t> left, right;
    for (auto r : rows) (codes[r] <= split.last_left_bin ? left : right).push_back(r);
    rows.clear();
    rows.shrink_to_fit();

    const int l = build(left, depth + 1, tree);
    const int r = build(right, depth + 1, tree);
    RawNode& node = tree.nodes[static_cast<std::size_t>(index)];
    node.feature = split.feature;
    node.threshold = split.threshold;
    node.left = l;
    node.right = r;
    return index;
  }

  Split best_split(const std::vector<std::uint32_t>& rows) {
    if (rng_ != nullptr) {
      // Fresh feature order per node; only non-constant features count towards max_features.
      for (std::size_t i = features_.size(); i > 1; --i) {
        std::swap(features_[i - 1], features_[(*rng_)() % i]);
      }
    }
    const int budget = params_.max_features > 0 ? params_.max_features
                                                : static_cast<int>(features_.size());
    Split best;
    int evaluated = 0;
    for (int f : features_) {
      if (evaluated >= budget) break;
      if (scan_feature(f, rows, best)) ++evaluated;
    }
    return best;
  }

  // Returns false when the feature is constant over `rows`.
  bool scan_feature(int f, const std::vector<std::uint32_t>& rows, Split& best) {
    const auto& cuts = bins_.cuts[static_cast<std::size_t>(f)];
    if (cuts.size() < 2) return false;
    const auto& codes = bins_.codes[static_cast<std::size_t>(f)];
    const std::size_t w = targets_.width;

    // Group rows by bin in ascending order: histogram for dense nodes, sort for sparse ones.
    groups_.clear();
    if (cuts.size() <= 2 * rows.size()) {
      hist_count_.assign(cuts.size(), 0.0);
      hist_sum_.assign(cuts.size() * w, 0.0);
      for (auto r : rows) {
        const auto b = codes[r];
        hist_count_[b] += 1.0;
        const auto t = targets_.row(r);
        for (std::size_t c = 0; c < w; ++c) hist_sum_[b * w + c] += t[c];
      }
      for (std::size_t b = 0; b < cuts.size(); ++b) {
        if (hist_count_[b] > 0) groups_.push_back(static_cast<std::uint32_t>(b));
      }
    } else {
      sorted_ = rows;
      std::sort(sorted_.begin(), sorted_.end(),
                [&](std::uint32_t a, std::uint32_t b) { return codes[a] < codes[b]; });
      hist_count_.clear();
      hist_sum_.clear();
      for (std::size_t i = 0; i < sorted_.size(); ++i) {
        const auto b = codes[sorted_[i]];
        if (groups_.empty() || groups_.back() != b) {
          groups_.push_back(b);
          hist_count_.push_back(0.0);
          hist_sum_.insert(hist_sum_.end(), w, 0.0);
        }
        hist_count_.back() += 1.0;
        const auto t = targets_.row(sorted_[i]);
        const std::size_t g = groups_.size() - 1;
        for (std::size_t c = 0; c < w; ++c) hist_sum_[g * w + c] += t[c];
      }
    }
    if (groups_.size() < 2) return false;
    const bool dense = hist_count_.size() == cuts.size();

    total_.assign(w, 0.0);
    double n_total = 0.0;
    for (std::size_t g = 0; g < groups_.size(); ++g) {
      const std::size_t slot = dense ? groups_[g] : g;
      n_total += hist_count_[slot];
      for (std::size_t c = 0; c < w; ++c) total_[c] += hist_sum_[slot * w + c];
    }

    left_.assign(w, 0.0);
    double n_left = 0.0;
    for (std::size_t g = 0; g + 1 < groups_.size(); ++g) {
      const std::size_t slot = dense ? groups_[g] : g;
      n_left += hist_count_[slot];
      for (std::size_t c = 0; c < w; ++c) left_[c] += hist_sum_[slot * w + c];
      const double n_right = n_total - n_left;
      double l2 = 0.0, r2 = 0.0;
      for (std::size_t c = 0; c < w; ++c) {
        const double rc = total_[c] - left_[c];
        l2 += left_[c] * left_[c];
        r2 += rc * rc;
      }
      const double score = l2 / n_left + r2 / n_right;
      const double tol = 1e-12 * std::max(1.0, std::abs(best.score));
      const bool better = score > best.score + tol ||
                          (best.feature >= 0 && std::abs(score - best.score) <= tol && f < best.feature);
      if (best.feature < 0 || better) {
        best.feature = f;
        best.score = score;
        best.last_left_bin = groups_[g];
        best.threshold = midpoint(cuts[groups_[g]], cuts[groups_[g + 1]]);
      }
    }
    return true;
  }

  const Binned& bins_;
  const Targets& targets_;
  GrowParams params_;
  LeafFn leaf_fn_;
  std::mt19937_64* rng_;
  std::vector<int> features_;

  std::vector<std::uint32_t> groups_, sorted_;
  std::vector<double> hist_count_, hist_sum_, total_, left_;
};

Targets one_hot(std::span<const double> labels, int n_classes) {
  Targets t;
  t.width = static_cast<std::size_t>(n_classes);
  t.values.assign(labels.size() * t.width, 0.0);
  for (std::size_t r = 0; r < labels.size(); ++r) {
    t.values[r * t.width + static_cast<std::size_t>(labels[r])] = 1.0;
  }
  return t;
}

std::vector<std::uint32_t> all_rows(std::size_t n) {
  std::vector<std::uint32_t> rows(n);
  std::iota(rows.begin(), rows.end(), 0u);
  return rows;
}

RawForest fit_bagged(const Binned& bins, const Targets& targets, std::size_t n_rows,
                     const TrainConfig& cfg, RawForest forest) {
  const bool forest_mode = cfg.kind == ModelKind::random_forest;
  const int n_trees = forest_mode ? cfg.n_estimators : 1;
  const double weight = 1.0 / n_trees;
  GrowParams params{cfg.max_depth, cfg.min_samples_split, 0};
  if (forest_mode) {
    params.max_features = cfg.max_features > 0
                              ? cfg.max_features
                              : static_cast<int>(std::ceil(std::sqrt(static_cast<double>(forest.n_features))));
  } else {
    params.max_features = cfg.max_features;
  }
  LeafFn leaf = [weight](double n, std::span<const double> sum) {
    std::vector<double> v(sum.begin(), sum.end());
    for (double& x : v) x = x / n * weight;
    return v;
  };

  forest.trees.resize(static_cast<std::size_t>(n_trees));
  parallel_for(forest.trees.size(), cfg.workers, [&](std::size_t t) {
    std::mt19937_64 rng(derive_seed(cfg.seed, t));
    std::vector<std::uint32_t> rows;
    if (forest_mode) {
      rows.resize(n_rows);
      for (auto& r : rows) r = static_cast<std::uint32_t>(rng() % n_rows);
    } else {
      rows = all_rows(n_rows);
    }
    TreeGrower grower(bins, targets, params, leaf, forest_mode || cfg.max_features > 0 ? &rng : nullptr);
    forest.trees[t] = grower.grow(std::move(rows));
  });
  return forest;
}

RawForest fit_boosted(const Binned& bins, std::span<const double> labels, std::size_t n_rows,
                      const TrainConfig& cfg, RawForest forest) {
  const std::size_t n_out = static_cast<std::size_t>(forest.n_outputs());
  // Binary classification boosts a single logit carried by class column 1.
  const bool binary = forest.task == Task::classification && forest.n_classes == 2;
  const std::size_t n_models = forest.task == Task::regression || binary ? 1 : n_out;
  const auto column_of = [&](std::size_t m) { return binary ? std::size_t{1} : m; };
  const auto rounds = static_cast<std::size_t>(cfg.n_estimators);
  const double lr = cfg.learning_rate;

  // Initial score, later spread evenly over that model's trees.
  std::vector<double> base(n_models, 0.0);
  if (forest.task == Task::regression) {
    base[0] = std::accumulate(labels.begin(), labels.end(), 0.0) / static_cast<double>(n_rows);
  } else if (binary) {
    const double pos = std::count(labels.begin(), labels.end(), 1.0) / static_cast<double>(n_rows);
    const double p = std::clamp(pos, 1e-6, 1.0 - 1e-6);
    base[0] = std::log(p / (1.0 - p));
  } else {
    for (std::size_t c = 0; c < n_models; ++c) {
      const double prior = std::count(labels.begin(), labels.end(), static_cast<double>(c)) /
                           static_cast<double>(n_rows);
      base[c] = std::log(std::max(prior, 1e-6));
    }
  }

  Matrix<double> F(n_rows, n_models);
  for (std::size_t r = 0; r < n_rows; ++r) {
    for (std::size_t m = 0; m < n_models; ++m) F(r, m) = base[m];
  }

  GrowParams params{cfg.max_depth, cfg.min_samples_split, cfg.max_features};
  std::vector<Targets> residuals(n_models);
  for (auto& t : residuals) {
    t.width = 1;
    t.values.resize(n_rows);
  }

  forest.trees.resize(rounds * n_models);
  for (std::size_t round = 0; round < rounds; ++round) {
    for (std::size_t r = 0; r < n_rows; ++r) {
      if (forest.task == Task::regression) {
        residuals[0].values[r] = labels[r] - F(r, 0);
      } else if (binary) {
        residuals[0].values[r] = labels[r] - 1.0 / (1.0 + std::exp(-F(r, 0)));
      } else {
        double mx = F(r, 0);
        for (std::size_t m = 1; m < n_models; ++m) mx = std::max(mx, F(r, m));
        double z = 0.0;
        for (std::size_t m = 0; m < n_models; ++m) z += std::exp(F(r, m) - mx);
        for (std::size_t m = 0; m < n_models; ++m) {
          const double prob = std::exp(F(r, m) - mx) / z;
          residuals[m].values[r] = (labels[r] == static_cast<double>(m) ? 1.0 : 0.0) - prob;
        }
      }
    }
    parallel_for(n_models, cfg.workers, [&](std::size_t m) {
      std::mt19937_64 rng(derive_seed(cfg.seed, round * n_models + m));
      LeafFn leaf = [&, m](double n, std::span<const double> sum) {
        std::vector<double> v(n_out, 0.0);
        v[column_of(m)] = lr * sum[0] / n;
        return v;
      };
      TreeGrower grower(bins, residuals[m], params, leaf, cfg.max_features > 0 ? &rng : nullptr);
      forest.trees[round * n_models + m] = grower.grow(all_rows(n_rows));
    });
    for (std::size_t m = 0; m < n_models; ++m) {
      const RawTree& tree = forest.trees[round * n_models + m];
      for (std::size_t r = 0; r < n_rows; ++r) {
        int at = 0;
        while (tree.nodes[static_cast<std::size_t>(at)].feature >= 0) {
          const RawNode& nd = tree.nodes[static_cast<std::size_t>(at)];
          at = bins.cuts[static_cast<std::size_t>(nd.feature)][bins.codes[static_cast<std::size_t>(nd.feature)][r]] <= nd.threshold
                   ? nd.left
                   : nd.right;
        }
        const auto leaf = static_cast<std::size_t>(tree.nodes[static_cast<std::size_t>(at)].leaf);
        F(r, m) += tree.leaf_values[leaf][column_of(m)];
      }
    }
  }

  for (std::size_t t = 0; t < forest.trees.size(); ++t) {
    const std::size_t m = t % n_models;
    const double share = base[m] / static_cast<double>(rounds);
    for (auto& v : forest.trees[t].leaf_values) v[column_of(m)] += share;
  }
  return forest;
}

}  // namespace

RawForest fit_forest(const Matrix<double>& X, std::span<const double> labels, const TrainConfig& cfg) {
  check_config(cfg);
  if (X.rows() == 0 || X.cols() == 0) throw InvalidInput("cannot train on an empty dataset");
  if (labels.size() != X.rows()) throw InvalidInput("label count does not match row count");
  for (double v : X.data()) {
    if (!std::isfinite(v)) throw InvalidInput("non-finite feature value in training data");
  }
  for (double y : labels) {
    if (!std::isfinite(y)) throw InvalidInput("non-finite label in training data");
  }

  RawForest forest;
  forest.n_features = static_cast<int>(X.cols());
  forest.task = cfg.task;
  if (cfg.task == Task::classification) {
    const int seen = count_classes(labels);
    if (cfg.n_classes > 0 && seen > cfg.n_classes) {
      throw InvalidInput(fmt::format("label {} exceeds the configured {} classes", seen - 1, cfg.n_classes));
    }
    forest.n_classes = cfg.n_classes > 0 ? cfg.n_classes : seen;
  } else {
    forest.n_classes = 1;
  }

  const Binned bins = bin_features(X);
  if (cfg.kind == ModelKind::boosted) return fit_boosted(bins, labels, X.rows(), cfg, std::move(forest));

  Targets targets;
  if (cfg.task == Task::classification) {
    targets = one_hot(labels, forest.n_classes);
  } else {
    targets.width = 1;
    targets.values.assign(labels.begin(), labels.end());
  }
  return fit_bagged(bins, targets, X.rows(), cfg, std::move(forest));
}

TreeEnsemble to_ensemble(const RawForest& forest, std::span<const QuantParams> feature_quants,
                         int input_bits, int leaf_bits) {
  if (forest.trees.empty()) throw InvalidInput("forest has no trees");
  const auto n_out = static_cast<std::size_t>(forest.n_outputs());

  std::size_t total_leaves = 0, max_leaves = 0;
  for (const RawTree& t : forest.trees) {
    total_leaves += t.leaf_values.size();
    max_leaves = std::max(max_leaves, t.leaf_values.size());
  }
  Matrix<double> raw_leaves(total_leaves, n_out);
  std::size_t at = 0;
  for (const RawTree& t : forest.trees) {
    for (const auto& v : t.leaf_values) {
      for (std::size_t c = 0; c < n_out; ++c) raw_leaves(at, c) = v[c];
      ++at;
    }
  }
  const LeafQuantization lq = quantize_leaves(raw_leaves, leaf_bits);

  TreeEnsemble e;
  e.n_features = forest.n_features;
  e.input_bits = input_bits;
  e.task = forest.task;
  e.n_classes = forest.task == Task::classification ? forest.n_classes : 1;
  e.leaf_quant = lq.params;
  e.feature_quants.assign(feature_quants.begin(), feature_quants.end());
  e.leaf_values = Matrix<std::int64_t>(forest.trees.size(), max_leaves * n_out, 0);

  at = 0;
  for (std::size_t k = 0; k < forest.trees.size(); ++k) {
    const RawTree& t = forest.trees[k];
    Tree tree;
    tree.nodes.reserve(t.nodes.size());
    for (std::size_t i = 0; i < t.nodes.size(); ++i) {
      const RawNode& n = t.nodes[i];
      const int id = static_cast<int>(i);
      tree.nodes.push_back(n.feature < 0
                               ? TreeNode::make_leaf(id, n.leaf)
                               : TreeNode::make_split(id, n.feature, quantize_threshold(n.threshold),
                                                      n.left, n.right));
    }
    e.trees.push_back(std::move(tree));
    for (std::size_t l = 0; l < t.leaf_values.size(); ++l, ++at) {
      for (std::size_t c = 0; c < n_out; ++c) e.leaf_values(k, l * n_out + c) = lq.codes(at, c);
    }
  }
  return e;
}

TreeEnsemble train(const QuantizedDataset& data, std::span<const double> labels,
                   const TrainConfig& cfg, int leaf_bits) {
  if (data.rows() == 0 || data.features() == 0) throw InvalidInput("cannot train on an empty dataset");
  if (data.per_feature_params.size() != data.features()) {
    throw InvalidInput("quantized dataset is missing per-feature parameters");
  }
  const int input_bits = data.per_feature_params.front().bits;
  Matrix<double> X(data.rows(), data.features());
  for (std::size_t i = 0; i < X.data().size(); ++i) {
    X.data()[i] = static_cast<double>(data.values.data()[i]);
  }
  const RawForest forest = fit_forest(X, labels, cfg);
  return to_ensemble(forest, data.per_feature_params, input_bits,
                     leaf_bits > 0 ? leaf_bits : input_bits);
}

}  // namespace hetree
