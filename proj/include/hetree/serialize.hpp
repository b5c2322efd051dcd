#pragma once

// JSON forms of the on-disk artifacts. The model IR layout is
//
//   { "version": 1, "task": "classification" | "regression",
//     "n_features": int, "input_bits": int, "n_classes": int,
//     "feature_quants": [QuantParams...], "leaf_quant": QuantParams,
//     "trees": [ { "nodes": [ {"id", "kind": "internal", "feature", "threshold", "left", "right"}
//                           | {"id", "kind": "leaf", "leaf_index"} ] } ],
//     "leaf_values": [[int...]...] }
//
// with QuantParams = {"scale": float, "zero_point": int, "bits": int}.
// Thresholds, leaf codes and zero points must be JSON integers.

#include <string>

#include "json.hpp"

#include "hetree/analysis.hpp"
#include "hetree/compiler.hpp"
#include "hetree/engine.hpp"
#include "hetree/quantizer.hpp"
#include "hetree/tree_ir.hpp"

namespace hetree {

inline constexpr int kIrVersion = 1;

nlohmann::json quant_params_to_json(const QuantParams& q);
QuantParams quant_params_from_json(const nlohmann::json& j);

nlohmann::json ensemble_to_json(const TreeEnsemble& e);
// Throws InvalidInput on missing fields, wrong types or non-integer codes.
// Structural invariants are left to validate().
TreeEnsemble ensemble_from_json(const nlohmann::json& j);

nlohmann::json bundle_to_json(const TensorBundle& b);
nlohmann::json report_to_json(const BitWidthReport& r);
nlohmann::json trace_to_json(const PredictionResult& r);

std::string task_name(Task t);
Task parse_task(const std::string& s);

}  // namespace hetree
