#include "hetree/cli.hpp"

#include <fmt/format.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include "CLI11.hpp"

#include "hetree/analysis.hpp"
#include "hetree/compiler.hpp"
#include "hetree/dataset.hpp"
#include "hetree/engine.hpp"
#include "hetree/error.hpp"
#include "hetree/experiment.hpp"
#include "hetree/serialize.hpp"
#include "hetree/trainer.hpp"

namespace hetree::cli {

namespace {

using nlohmann::json;

struct ModelOptions {
  std::string model = "dt";
  std::optional<int> n_estimators;
  int max_depth = 5;
  std::uint64_t seed = 0;
  std::string task = "classification";
  unsigned workers = 1;

  void add(CLI::App* app, bool with_task) {
    app->add_option("--model", model, "dt, rf or xgb-like")->check(CLI::IsMember({"dt", "rf", "xgb-like"}));
    app->add_option("--n-estimators", n_estimators, "trees (rf) or boosting rounds (xgb-like); default 50");
    app->add_option("--max-depth", max_depth, "maximum tree depth")->capture_default_str();
    app->add_option("--seed", seed, "random seed")->capture_default_str();
    app->add_option("--workers", workers, "worker threads")->capture_default_str();
    if (with_task) {
      app->add_option("--task", task, "classification or regression")
          ->check(CLI::IsMember({"classification", "regression"}));
    }
  }

  TrainConfig config() const {
    TrainConfig cfg;
    cfg.kind = parse_model(model);
    cfg.task = parse_task(task);
    cfg.max_depth = max_depth;
    cfg.n_estimators = n_estimators.value_or(cfg.kind == ModelKind::decision_tree ? 1 : 50);
    if (cfg.kind == ModelKind::decision_tree && cfg.n_estimators != 1) {
      throw ConfigurationError("a decision tree has exactly one estimator");
    }
    cfg.seed = seed;
    cfg.workers = workers;
    return cfg;
  }
};

json read_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidInput(fmt::format("cannot open '{}'", path));
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw InvalidInput(fmt::format("{}: {}", path, e.what()));
  }
}

// Writes to `path`, or to `fallback` when path is empty.
void emit(const std::string& path, const std::string& text, std::ostream& fallback) {
  if (path.empty()) {
    fallback << text;
    return;
  }
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw InvalidInput(fmt::format("cannot write '{}'", path));
  f << text;
}

std::string dump(const json& j) { return j.dump(2) + "\n"; }

// Appends below an existing report of the same schema, or starts a new file.
template <typename WriteFn>
void emit_report(const std::string& path, bool append, std::ostream& fallback, WriteFn write) {
  std::ostringstream header_text;
  write(header_text, true);
  const std::string header = header_text.str().substr(0, header_text.str().find('\n'));
  if (append && !path.empty() && std::filesystem::exists(path) && std::filesystem::file_size(path) > 0) {
    std::ifstream in(path);
    std::string first;
    std::getline(in, first);
    if (first != header) {
      throw InvalidInput(fmt::format("'{}' holds a report with a different schema; refusing to append", path));
    }
    std::ofstream f(path, std::ios::binary | std::ios::app);
    if (!f) throw InvalidInput(fmt::format("cannot write '{}'", path));
    write(f, false);
    return;
  }
  std::ostringstream text;
  write(text, true);
  emit(path, text.str(), fallback);
}

std::string params_path_for(const std::string& out) {
  std::filesystem::path p(out);
  p.replace_extension(".params.json");
  return p.string();
}

Table load_table(const std::string& path, const std::string& label) { return read_csv(path, label); }

TreeEnsemble load_ensemble(const std::string& path) {
  TreeEnsemble e = ensemble_from_json(read_json(path));
  if (auto v = validate(e); !v.empty()) throw CompileError(std::move(v));
  return e;
}

Matrix<std::int64_t> integer_matrix(const Matrix<double>& X) {
  Matrix<std::int64_t> out(X.rows(), X.cols());
  for (std::size_t i = 0; i < X.data().size(); ++i) {
    const double v = X.data()[i];
    if (v != std::floor(v) || std::abs(v) > 9.0e15) {
      throw InvalidInput(fmt::format("row {}: value {} is not an integer code", i / std::max<std::size_t>(X.cols(), 1) + 1, v));
    }
    out.data()[i] = static_cast<std::int64_t>(v);
  }
  return out;
}

std::string report_table(const BitWidthReport& r) {
  std::string s = fmt::format("{:<8}{:>14}{:>14}{:>6}  {}\n", "step", "min", "max", "bits", "domain");
  for (const auto& st : r.steps) {
    s += fmt::format("{:<8}{:>14}{:>14}{:>6}  {}\n", st.step, st.min, st.max, st.bits,
                     st.encrypted ? "encrypted" : "clear");
  }
  s += fmt::format("global max bits: {}\nPBS count: {}\n", r.global_max_bits, r.pbs_count);
  return s;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Quantized tree ensembles compiled to TLU-based integer programs"};
  app.require_subcommand(1);

  // quantize
  std::string q_input, q_label, q_out, q_params;
  int q_bits = 6;
  auto* quantize_cmd = app.add_subcommand("quantize", "quantize a CSV dataset per feature");
  quantize_cmd->add_option("dataset", q_input, "input CSV")->required();
  quantize_cmd->add_option("--label", q_label, "label column")->required();
  quantize_cmd->add_option("--bits", q_bits, "bit-width")->capture_default_str();
  quantize_cmd->add_option("--out", q_out, "quantized CSV")->required();
  quantize_cmd->add_option("--params", q_params, "parameter JSON (default: <out>.params.json)");

  // train
  std::string t_input, t_label, t_out;
  int t_bits = 6;
  ModelOptions t_model;
  auto* train_cmd = app.add_subcommand("train", "quantize, train and emit the model IR");
  train_cmd->add_option("dataset", t_input, "input CSV")->required();
  train_cmd->add_option("--label", t_label, "label column")->required();
  train_cmd->add_option("--bits", t_bits, "bit-width")->capture_default_str();
  train_cmd->add_option("--out", t_out, "IR JSON (default: stdout)");
  t_model.add(train_cmd, true);

  // compile
  std::string c_model, c_out;
  auto* compile_cmd = app.add_subcommand("compile", "compile an IR into its tensor form");
  compile_cmd->add_option("model", c_model, "IR JSON")->required();
  compile_cmd->add_option("--out", c_out, "tensor bundle JSON (default: stdout)");

  // analyze
  std::string a_model, a_out;
  auto* analyze_cmd = app.add_subcommand("analyze", "report per-step value ranges and bit-widths");
  analyze_cmd->add_option("model", a_model, "IR JSON")->required();
  analyze_cmd->add_option("--out", a_out, "report JSON");

  // infer
  std::string i_model, i_input, i_label, i_out, i_trace;
  double i_perror = 0.0;
  std::uint64_t i_seed = 0;
  unsigned i_workers = 1;
  bool i_quantized = false;
  auto* infer_cmd = app.add_subcommand("infer", "evaluate a model on a CSV");
  infer_cmd->add_option("model", i_model, "IR JSON")->required();
  infer_cmd->add_option("dataset", i_input, "input CSV")->required();
  infer_cmd->add_option("--label", i_label, "label column to ignore");
  infer_cmd->add_option("--p-error", i_perror, "TLU failure probability")->capture_default_str();
  infer_cmd->add_option("--seed", i_seed, "noise seed")->capture_default_str();
  infer_cmd->add_option("--workers", i_workers, "worker threads")->capture_default_str();
  infer_cmd->add_flag("--quantized", i_quantized, "input already holds integer codes");
  infer_cmd->add_option("--trace", i_trace, "write per-row intermediate values to this JSON file");
  infer_cmd->add_option("--out", i_out, "predictions CSV (default: stdout)");

  // sweeps
  struct SweepOptions {
    std::string input, label, out;
    std::vector<int> bits;
    std::vector<double> p_errors;
    int folds = 5, repeats = 3, noise_seeds = 20;
    bool append = false;
    ModelOptions model;
  } sb, sp;
  sb.bits = {2, 3, 4, 5, 6, 7, 8};
  sp.bits = {6};
  sp.p_errors = {1e-40, 1e-3, 1e-2, 0.05, 0.1, 0.2};
  auto add_sweep = [](CLI::App* cmd, SweepOptions& o) {
    cmd->add_option("dataset", o.input, "input CSV")->required();
    cmd->add_option("--label", o.label, "label column")->required();
    cmd->add_option("--folds", o.folds, "cross-validation folds")->capture_default_str();
    cmd->add_option("--repeats", o.repeats, "cross-validation repeats")->capture_default_str();
    cmd->add_option("--out", o.out, "report CSV (default: stdout)");
    cmd->add_flag("--append", o.append, "append rows to an existing report");
    o.model.add(cmd, false);
  };
  auto* sweep_bits_cmd = app.add_subcommand("sweep-bits", "cross-validated metrics for each bit-width");
  add_sweep(sweep_bits_cmd, sb);
  sweep_bits_cmd->add_option("--bits", sb.bits, "bit-widths")->delimiter(',')->capture_default_str();
  auto* sweep_perror_cmd = app.add_subcommand("sweep-perror", "cross-validated accuracy for each p_error");
  add_sweep(sweep_perror_cmd, sp);
  sweep_perror_cmd->add_option("--bits", sp.bits, "bit-width")->delimiter(',')->expected(1)->capture_default_str();
  sweep_perror_cmd->add_option("--p-error", sp.p_errors, "TLU failure probabilities")->delimiter(',');
  sweep_perror_cmd->add_option("--noise-seeds", sp.noise_seeds, "Monte-Carlo noise seeds per fold")
      ->capture_default_str();

  std::vector<std::string> argv_store{"hetree"};
  argv_store.insert(argv_store.end(), args.begin(), args.end());
  std::vector<const char*> argv;
  for (const auto& a : argv_store) argv.push_back(a.c_str());

  try {
    try {
      app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::ParseError& e) {
      return app.exit(e, out, err) == 0 ? kOk : kUsage;
    }

    if (*quantize_cmd) {
      if (q_bits < 1 || q_bits > kMaxQuantBits) throw ConfigurationError("--bits outside [1, 32]");
      const Table t = load_table(q_input, q_label);
      const QuantizedDataset q = train_quantizer(t.X, q_bits, t.labels);
      std::string csv;
      for (const auto& name : t.feature_names) csv += name + ",";
      csv += t.label_name + "\n";
      for (std::size_t r = 0; r < q.rows(); ++r) {
        for (std::size_t c = 0; c < q.features(); ++c) csv += fmt::format("{},", q.values(r, c));
        csv += format_number(t.labels[r]) + "\n";
      }
      json params = json::array();
      for (std::size_t c = 0; c < q.per_feature_params.size(); ++c) {
        json p = quant_params_to_json(q.per_feature_params[c]);
        p["feature"] = t.feature_names[c];
        params.push_back(std::move(p));
      }
      emit(q_out, csv, out);
      emit(q_params.empty() ? params_path_for(q_out) : q_params, dump(params), out);
    } else if (*train_cmd) {
      if (t_bits < 1 || t_bits > 16) throw ConfigurationError("--bits outside [1, 16]");
      const TrainConfig cfg = t_model.config();
      const Table t = load_table(t_input, t_label);
      const QuantizedDataset q = train_quantizer(t.X, t_bits, t.labels);
      emit(t_out, dump(ensemble_to_json(train(q, t.labels, cfg))), out);
    } else if (*compile_cmd) {
      emit(c_out, dump(bundle_to_json(compile(load_ensemble(c_model)))), out);
    } else if (*analyze_cmd) {
      const BitWidthReport r = analyze(compile(load_ensemble(a_model)));
      out << report_table(r);
      if (!a_out.empty()) emit(a_out, dump(report_to_json(r)), out);
    } else if (*infer_cmd) {
      const NoiseModel noise = NoiseModel::with_error(i_perror, i_seed);
      check_noise(noise);
      const TreeEnsemble e = load_ensemble(i_model);
      const TensorBundle bundle = compile(e);
      const Table t = load_table(i_input, i_label);
      Matrix<std::int64_t> X_q;
      if (t.X.rows() == 0) {
        X_q = Matrix<std::int64_t>(0, static_cast<std::size_t>(e.n_features));
      } else if (t.X.cols() != static_cast<std::size_t>(e.n_features)) {
        throw InvalidInput(fmt::format("input has {} features, model expects {}", t.X.cols(), e.n_features));
      } else if (i_quantized) {
        X_q = integer_matrix(t.X);
      } else {
        if (e.feature_quants.empty()) {
          throw InvalidInput("model carries no feature quantization; pass --quantized integer input");
        }
        X_q = apply_quantizer(t.X, e.feature_quants);
      }
      const auto results = evaluate_batch(bundle, X_q, noise, i_workers, {}, {.trace = !i_trace.empty()});

      std::string csv = "row";
      if (e.task == Task::classification) {
        csv += ",class";
        for (int c = 0; c < e.n_classes; ++c) csv += fmt::format(",score_{}", c);
      } else {
        csv += ",value";
      }
      csv += "\n";
      for (std::size_t r = 0; r < results.size(); ++r) {
        const auto& res = results[r];
        csv += fmt::format("{}", r);
        if (e.task == Task::classification) {
          csv += fmt::format(",{}", res.predicted_class);
          for (double s : res.scores) csv += "," + format_number(s);
        } else {
          csv += "," + format_number(res.predicted_value);
        }
        csv += "\n";
      }
      emit(i_out, csv, out);
      if (!i_trace.empty()) {
        json rows = json::array();
        for (std::size_t r = 0; r < results.size(); ++r) {
          json j = trace_to_json(results[r]);
          j["row"] = r;
          rows.push_back(std::move(j));
        }
        emit(i_trace, dump(rows), out);
      }
    } else if (*sweep_bits_cmd || *sweep_perror_cmd) {
      const bool bits_sweep = sweep_bits_cmd->parsed();
      SweepOptions& o = bits_sweep ? sb : sp;
      ExperimentSpec spec;
      spec.train = o.model.config();
      spec.bits = o.bits;
      spec.p_errors = bits_sweep ? std::vector<double>{0.0} : o.p_errors;
      spec.folds = o.folds;
      spec.repeats = o.repeats;
      spec.noise_seeds = o.noise_seeds;
      spec.seed = o.model.seed;
      spec.workers = o.model.workers;
      check_spec(spec);
      const Table t = load_table(o.input, o.label);
      if (bits_sweep) {
        const auto rows = sweep_bits(t, spec);
        emit_report(o.out, o.append, out, [&](std::ostream& s, bool h) { write_bits_csv(s, rows, h); });
      } else {
        const auto rows = sweep_perror(t, spec);
        emit_report(o.out, o.append, out, [&](std::ostream& s, bool h) { write_perror_csv(s, rows, h); });
      }
    }
    return kOk;
  } catch (const ConfigurationError& e) {
    err << "configuration error: " << e.what() << "\n";
    return kUsage;
  } catch (const InvalidInput& e) {
    err << "data error: " << e.what() << "\n";
    return kDataError;
  } catch (const ContractViolation& e) {
    err << "contract violation: " << e.what() << "\n";
    return kContract;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace hetree::cli
