#include "hetree/serialize.hpp"

#include <fmt/format.h>

#include "hetree/error.hpp"

namespace hetree {

using nlohmann::json;

namespace {

const json& field(const json& j, const char* name) {
  if (!j.is_object()) throw InvalidInput(fmt::format("expected a JSON object holding '{}'", name));
  auto it = j.find(name);
  if (it == j.end()) throw InvalidInput(fmt::format("missing field '{}'", name));
  return *it;
}

std::int64_t integer(const json& j, const char* name) {
  const json& v = field(j, name);
  if (!v.is_number_integer()) throw InvalidInput(fmt::format("field '{}' must be an integer", name));
  return v.get<std::int64_t>();
}

int small_int(const json& j, const char* name) {
  const std::int64_t v = integer(j, name);
  if (v < std::numeric_limits<int>::min() || v > std::numeric_limits<int>::max()) {
    throw InvalidInput(fmt::format("field '{}' is out of range", name));
  }
  return static_cast<int>(v);
}

template <typename T>
json matrix_json(const Matrix<T>& m) {
  json rows = json::array();
  for (std::size_t r = 0; r < m.rows(); ++r) {
    rows.push_back(json(std::vector<T>(m.row(r).begin(), m.row(r).end())));
  }
  return rows;
}

template <typename T>
json tensor_json(const Tensor3<T>& t) {
  json outer = json::array();
  for (std::size_t k = 0; k < t.dim0(); ++k) {
    json mid = json::array();
    for (std::size_t i = 0; i < t.dim1(); ++i) {
      const auto f = t.fiber(k, i);
      std::vector<std::int64_t> v(f.begin(), f.end());
      mid.push_back(json(v));
    }
    outer.push_back(std::move(mid));
  }
  return outer;
}

}  // namespace

std::string task_name(Task t) { return t == Task::classification ? "classification" : "regression"; }

Task parse_task(const std::string& s) {
  if (s == "classification") return Task::classification;
  if (s == "regression") return Task::regression;
  throw InvalidInput(fmt::format("unknown task '{}'", s));
}

json quant_params_to_json(const QuantParams& q) {
  return {{"scale", q.scale}, {"zero_point", q.zero_point}, {"bits", q.bits}};
}

QuantParams quant_params_from_json(const json& j) {
  QuantParams q;
  const json& scale = field(j, "scale");
  if (!scale.is_number()) throw InvalidInput("field 'scale' must be a number");
  q.scale = scale.get<double>();
  q.zero_point = integer(j, "zero_point");
  q.bits = small_int(j, "bits");
  check_params(q);
  return q;
}

json ensemble_to_json(const TreeEnsemble& e) {
  json trees = json::array();
  for (const Tree& t : e.trees) {
    json nodes = json::array();
    for (const TreeNode& n : t.nodes) {
      if (n.is_leaf()) {
        nodes.push_back({{"id", n.id}, {"kind", "leaf"}, {"leaf_index", n.leaf_index}});
      } else {
        nodes.push_back({{"id", n.id},
                         {"kind", "internal"},
                         {"feature", n.feature},
                         {"threshold", n.threshold},
                         {"left", n.left},
                         {"right", n.right}});
      }
    }
    trees.push_back({{"nodes", std::move(nodes)}});
  }
  json feature_quants = json::array();
  for (const auto& q : e.feature_quants) feature_quants.push_back(quant_params_to_json(q));

  json j;
  j["version"] = kIrVersion;
  j["task"] = task_name(e.task);
  j["n_features"] = e.n_features;
  j["input_bits"] = e.input_bits;
  j["n_classes"] = e.n_classes;
  j["feature_quants"] = std::move(feature_quants);
  j["leaf_quant"] = quant_params_to_json(e.leaf_quant);
  j["trees"] = std::move(trees);
  j["leaf_values"] = matrix_json(e.leaf_values);
  return j;
}

TreeEnsemble ensemble_from_json(const json& j) {
  const std::int64_t version = integer(j, "version");
  if (version != kIrVersion) throw InvalidInput(fmt::format("unsupported IR version {}", version));

  TreeEnsemble e;
  const json& task = field(j, "task");
  if (!task.is_string()) throw InvalidInput("field 'task' must be a string");
  e.task = parse_task(task.get<std::string>());
  e.n_features = small_int(j, "n_features");
  e.input_bits = small_int(j, "input_bits");
  e.n_classes = small_int(j, "n_classes");
  e.leaf_quant = quant_params_from_json(field(j, "leaf_quant"));

  const json& fq = field(j, "feature_quants");
  if (!fq.is_array()) throw InvalidInput("field 'feature_quants' must be an array");
  for (const json& q : fq) e.feature_quants.push_back(quant_params_from_json(q));

  const json& trees = field(j, "trees");
  if (!trees.is_array()) throw InvalidInput("field 'trees' must be an array");
  for (const json& t : trees) {
    const json& nodes = field(t, "nodes");
    if (!nodes.is_array()) throw InvalidInput("field 'nodes' must be an array");
    Tree tree;
    for (const json& n : nodes) {
      const json& kind = field(n, "kind");
      if (!kind.is_string()) throw InvalidInput("field 'kind' must be a string");
      const int id = small_int(n, "id");
      if (kind == "leaf") {
        tree.nodes.push_back(TreeNode::make_leaf(id, small_int(n, "leaf_index")));
      } else if (kind == "internal") {
        tree.nodes.push_back(TreeNode::make_split(id, small_int(n, "feature"), integer(n, "threshold"),
                                                  small_int(n, "left"), small_int(n, "right")));
      } else {
        throw InvalidInput(fmt::format("unknown node kind '{}'", kind.get<std::string>()));
      }
    }
    e.trees.push_back(std::move(tree));
  }

  const json& lv = field(j, "leaf_values");
  if (!lv.is_array()) throw InvalidInput("field 'leaf_values' must be an array");
  const std::size_t cols = lv.empty() || !lv.front().is_array() ? 0 : lv.front().size();
  e.leaf_values = Matrix<std::int64_t>(lv.size(), cols);
  for (std::size_t r = 0; r < lv.size(); ++r) {
    if (!lv[r].is_array() || lv[r].size() != cols) {
      throw InvalidInput("leaf_values rows must be arrays of equal length");
    }
    for (std::size_t c = 0; c < cols; ++c) {
      if (!lv[r][c].is_number_integer()) throw InvalidInput("leaf codes must be integers");
      e.leaf_values(r, c) = lv[r][c].get<std::int64_t>();
    }
  }
  return e;
}

json bundle_to_json(const TensorBundle& b) {
  const auto& s = b.shapes;
  json shapes = {{"n_trees", s.n_trees},
                 {"n_features", s.n_features},
                 {"max_internal", s.max_internal},
                 {"max_leaves", s.max_leaves},
                 {"n_outputs", s.n_outputs},
                 {"internal_counts", s.internal_counts},
                 {"leaf_counts", s.leaf_counts}};
  // Inert slots serialise as null rather than the sentinel.
  json D = json::array();
  for (std::size_t k = 0; k < b.path_codes.rows(); ++k) {
    json row = json::array();
    for (std::size_t l = 0; l < b.path_codes.cols(); ++l) {
      if (b.leaf_active(k, l)) {
        row.push_back(b.path_codes(k, l));
      } else {
        row.push_back(nullptr);
      }
    }
    D.push_back(std::move(row));
  }
  json feature_quants = json::array();
  for (const auto& q : b.feature_quants) feature_quants.push_back(quant_params_to_json(q));

  json j;
  j["version"] = kIrVersion;
  j["task"] = task_name(b.task);
  j["n_classes"] = b.n_classes;
  j["input_bits"] = b.input_bits;
  j["path_code_bits"] = b.path_code_bits;
  j["shapes"] = std::move(shapes);
  j["A"] = tensor_json(b.selection);
  j["B"] = matrix_json(b.thresholds);
  j["C"] = tensor_json(b.hierarchy);
  j["D"] = std::move(D);
  j["L_q"] = tensor_json(b.leaf_values);
  j["leaf_quant"] = quant_params_to_json(b.leaf_quant);
  j["feature_quants"] = std::move(feature_quants);
  return j;
}

json report_to_json(const BitWidthReport& r) {
  json steps = json::array();
  for (const auto& s : r.steps) {
    steps.push_back({{"step", s.step}, {"min", s.min}, {"max", s.max}, {"bits", s.bits},
                     {"encrypted", s.encrypted}});
  }
  json norms = json::object();
  for (const auto& [k, v] : r.norm2_constants) norms[k] = v;
  return {{"input_bits", r.input_bits},
          {"global_max_bits", r.global_max_bits},
          {"pbs_count", r.pbs_count},
          {"pbs_input_widths", r.pbs_input_widths},
          {"per_step_widths", std::move(steps)},
          {"norm2_constants", std::move(norms)}};
}

json trace_to_json(const PredictionResult& r) {
  json j;
  if (r.trace) {
    j["P"] = matrix_json(r.trace->P);
    j["Q"] = matrix_json(r.trace->Q);
    j["R"] = matrix_json(r.trace->R);
    j["S"] = matrix_json(r.trace->S);
  }
  j["T_k"] = matrix_json(r.per_tree_sums);
  j["T"] = r.aggregate;
  j["scores"] = r.scores;
  j["tlu_applications"] = r.tlu_applications;
  j["tlu_failures"] = r.tlu_failures;
  return j;
}

}  // namespace hetree
