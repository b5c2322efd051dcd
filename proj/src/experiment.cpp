#include "hetree/experiment.hpp"

#include <fmt/format.h>

#include <cmath>
#include <ostream>

#include "hetree/compiler.hpp"
#include "hetree/engine.hpp"
#include "hetree/error.hpp"
#include "hetree/parallel.hpp"
#include "hetree/rng.hpp"

namespace hetree {

std::string model_name(ModelKind kind) {
  switch (kind) {
    case ModelKind::decision_tree: return "dt";
    case ModelKind::random_forest: return "rf";
    case ModelKind::boosted: return "xgb-like";
  }
  return "?";
}

ModelKind parse_model(const std::string& name) {
  if (name == "dt") return ModelKind::decision_tree;
  if (name == "rf") return ModelKind::random_forest;
  if (name == "xgb-like") return ModelKind::boosted;
  throw ConfigurationError(fmt::format("unknown model '{}' (expected dt, rf or xgb-like)", name));
}

void check_spec(const ExperimentSpec& spec) {
  check_config(spec.train);
  if (spec.train.task != Task::classification) {
    throw ConfigurationError("sweeps report classification metrics and need a classification task");
  }
  if (spec.folds < 2) throw ConfigurationError("folds must be at least 2");
  if (spec.repeats < 1) throw ConfigurationError("repeats must be at least 1");
  if (spec.noise_seeds < 1) throw ConfigurationError("noise seeds must be at least 1");
  if (spec.bits.empty()) throw ConfigurationError("no bit-widths given");
  for (int b : spec.bits) {
    if (b < 1 || b > 16) throw ConfigurationError(fmt::format("bit-width {} outside [1, 16]", b));
  }
  if (spec.p_errors.empty()) throw ConfigurationError("no p_error values given");
  for (double p : spec.p_errors) {
    if (!(p >= 0.0 && p <= 1.0)) throw ConfigurationError(fmt::format("p_error {} outside [0, 1]", p));
  }
}

double PerrorRow::failure_rate() const {
  return tlu_applications == 0 ? 0.0
                               : static_cast<double>(tlu_failures) / static_cast<double>(tlu_applications);
}

double PerrorRow::mean_failures_per_row() const {
  return rows == 0 ? 0.0 : static_cast<double>(tlu_failures) / static_cast<double>(rows);
}

namespace {

struct Split {
  Matrix<double> X_train, X_test;
  std::vector<double> y_train;
  std::vector<int> y_test;
};

Split take_split(const Table& data, const std::vector<int>& fold, int test_fold) {
  std::vector<std::size_t> train_rows, test_rows;
  for (std::size_t r = 0; r < fold.size(); ++r) (fold[r] == test_fold ? test_rows : train_rows).push_back(r);
  const std::size_t F = data.X.cols();
  Split s;
  s.X_train = Matrix<double>(train_rows.size(), F);
  s.X_test = Matrix<double>(test_rows.size(), F);
  for (std::size_t i = 0; i < train_rows.size(); ++i) {
    std::copy_n(data.X.row(train_rows[i]).begin(), F, s.X_train.row(i).begin());
    s.y_train.push_back(data.labels[train_rows[i]]);
  }
  for (std::size_t i = 0; i < test_rows.size(); ++i) {
    std::copy_n(data.X.row(test_rows[i]).begin(), F, s.X_test.row(i).begin());
    s.y_test.push_back(static_cast<int>(data.labels[test_rows[i]]));
  }
  return s;
}

// Jobs are (repeat, fold) pairs in a fixed order.
struct Job {
  int repeat = 0;
  int fold = 0;
  std::uint64_t train_seed = 0;
};

std::vector<Job> make_jobs(const ExperimentSpec& spec) {
  std::vector<Job> jobs;
  for (int r = 0; r < spec.repeats; ++r) {
    for (int f = 0; f < spec.folds; ++f) {
      const auto index = static_cast<std::uint64_t>(r * spec.folds + f);
      jobs.push_back({r, f, derive_seed(spec.seed, 0x10000 + index)});
    }
  }
  return jobs;
}

std::vector<std::vector<int>> make_fold_maps(const Table& data, const ExperimentSpec& spec) {
  std::vector<std::vector<int>> maps;
  for (int r = 0; r < spec.repeats; ++r) {
    maps.push_back(make_folds(data.labels, spec.folds, derive_seed(spec.seed, 0x100 + static_cast<std::uint64_t>(r)),
                              true));
  }
  return maps;
}

// Margin of class 1 over class 0, used to rank rows for average precision.
double binary_margin(std::span<const double> scores) {
  return scores.size() >= 2 ? scores[1] - scores[0] : scores.front();
}

Metrics score(std::span<const int> truth, std::span<const int> pred, std::span<const double> margin,
              bool binary) {
  Metrics m;
  m.accuracy = accuracy(truth, pred);
  if (binary) {
    m.f1 = f1_binary(truth, pred);
    m.ap = average_precision(truth, margin);
  }
  return m;
}

void accumulate(Metrics& sum, const Metrics& m) {
  sum.accuracy += m.accuracy;
  sum.f1 += m.f1;
  sum.ap += m.ap;
}

Metrics mean(Metrics sum, int n) {
  sum.accuracy /= n;
  sum.f1 /= n;
  sum.ap /= n;
  return sum;
}

struct QuantizedModel {
  TensorBundle bundle;
  Matrix<std::int64_t> X_test;
};

QuantizedModel build_quantized(const Split& s, int bits, TrainConfig cfg) {
  const QuantizedDataset q = train_quantizer(s.X_train, bits, s.y_train);
  const TreeEnsemble e = train(q, s.y_train, cfg);
  return {compile(e), apply_quantizer(s.X_test, q.per_feature_params)};
}

Metrics score_results(const std::vector<PredictionResult>& results, std::span<const int> truth, bool binary) {
  std::vector<int> pred;
  std::vector<double> margin;
  for (const auto& r : results) {
    pred.push_back(r.predicted_class);
    margin.push_back(binary_margin(r.scores));
  }
  return score(truth, pred, margin, binary);
}

}  // namespace

std::vector<BitsRow> sweep_bits(const Table& data, const ExperimentSpec& spec) {
  check_spec(spec);
  const int n_classes = count_classes(data.labels);
  const bool binary = n_classes == 2;
  const auto folds = make_fold_maps(data, spec);
  const auto jobs = make_jobs(spec);
  const std::size_t n_bits = spec.bits.size();

  TrainConfig base = spec.train;
  base.n_classes = n_classes;
  base.workers = 1;

  // Slot 0 of each job holds the float reference, slots 1.. the bit-widths.
  std::vector<Metrics> results(jobs.size() * (n_bits + 1));
  parallel_for(results.size(), spec.workers, [&](std::size_t i) {
    const Job& job = jobs[i / (n_bits + 1)];
    const std::size_t slot = i % (n_bits + 1);
    const Split s = take_split(data, folds[static_cast<std::size_t>(job.repeat)], job.fold);
    TrainConfig cfg = base;
    cfg.seed = job.train_seed;
    if (slot == 0) {
      const RawForest forest = fit_forest(s.X_train, s.y_train, cfg);
      std::vector<int> pred;
      std::vector<double> margin;
      for (std::size_t r = 0; r < s.X_test.rows(); ++r) {
        const auto sc = forest.scores(s.X_test.row(r));
        pred.push_back(static_cast<int>(std::distance(sc.begin(), std::max_element(sc.begin(), sc.end()))));
        margin.push_back(binary_margin(sc));
      }
      results[i] = score(s.y_test, pred, margin, binary);
    } else {
      const QuantizedModel m = build_quantized(s, spec.bits[slot - 1], cfg);
      results[i] = score_results(evaluate_batch(m.bundle, m.X_test, NoiseModel::noiseless()), s.y_test, binary);
    }
  });

  Metrics reference;
  for (std::size_t j = 0; j < jobs.size(); ++j) accumulate(reference, results[j * (n_bits + 1)]);
  const int runs = static_cast<int>(jobs.size());
  std::vector<BitsRow> rows;
  for (std::size_t b = 0; b < n_bits; ++b) {
    Metrics sum;
    for (std::size_t j = 0; j < jobs.size(); ++j) accumulate(sum, results[j * (n_bits + 1) + b + 1]);
    rows.push_back({model_name(spec.train.kind), spec.bits[b], runs, mean(sum, runs), mean(reference, runs)});
  }
  return rows;
}

std::vector<PerrorRow> sweep_perror(const Table& data, const ExperimentSpec& spec) {
  check_spec(spec);
  const int n_classes = count_classes(data.labels);
  const int bits = spec.bits.front();
  const auto folds = make_fold_maps(data, spec);
  const auto jobs = make_jobs(spec);

  TrainConfig base = spec.train;
  base.n_classes = n_classes;
  base.workers = 1;

  // Train and compile once per job; the models are shared by every noise run.
  std::vector<QuantizedModel> models(jobs.size());
  std::vector<std::vector<int>> truth(jobs.size());
  std::vector<double> noiseless(jobs.size());
  parallel_for(jobs.size(), spec.workers, [&](std::size_t j) {
    const Split s = take_split(data, folds[static_cast<std::size_t>(jobs[j].repeat)], jobs[j].fold);
    TrainConfig cfg = base;
    cfg.seed = jobs[j].train_seed;
    models[j] = build_quantized(s, bits, cfg);
    truth[j] = s.y_test;
    noiseless[j] = score_results(evaluate_batch(models[j].bundle, models[j].X_test, NoiseModel::noiseless()),
                                 truth[j], false)
                       .accuracy;
  });
  double noiseless_mean = 0.0;
  for (double a : noiseless) noiseless_mean += a;
  noiseless_mean /= static_cast<double>(jobs.size());

  struct Run {
    double accuracy = 0.0;
    std::uint64_t applications = 0, failures = 0, rows = 0;
  };
  const std::size_t n_seeds = static_cast<std::size_t>(spec.noise_seeds);
  const std::size_t per_p = jobs.size() * n_seeds;
  std::vector<Run> runs(spec.p_errors.size() * per_p);
  parallel_for(runs.size(), spec.workers, [&](std::size_t i) {
    const std::size_t pi = i / per_p;
    const std::size_t j = (i % per_p) / n_seeds;
    const std::size_t s = i % n_seeds;
    // The same noise stream is reused across p_error values for a given job and seed.
    const std::uint64_t noise_seed = derive_seed(derive_seed(spec.seed, 0x20000 + j), s);
    const auto results =
        evaluate_batch(models[j].bundle, models[j].X_test, NoiseModel::with_error(spec.p_errors[pi], noise_seed));
    Run run;
    run.accuracy = score_results(results, truth[j], false).accuracy;
    for (const auto& r : results) {
      run.applications += r.tlu_applications;
      run.failures += r.tlu_failures;
    }
    run.rows = results.size();
    runs[i] = run;
  });

  std::vector<PerrorRow> rows;
  for (std::size_t pi = 0; pi < spec.p_errors.size(); ++pi) {
    PerrorRow row;
    row.model = model_name(spec.train.kind);
    row.bits = bits;
    row.p_error = spec.p_errors[pi];
    row.runs = static_cast<int>(per_p);
    row.noiseless_accuracy = noiseless_mean;
    for (std::size_t k = 0; k < per_p; ++k) {
      const Run& r = runs[pi * per_p + k];
      row.accuracy += r.accuracy;
      row.tlu_applications += r.applications;
      row.tlu_failures += r.failures;
      row.rows += r.rows;
    }
    row.accuracy /= static_cast<double>(per_p);
    rows.push_back(row);
  }
  return rows;
}

void write_bits_csv(std::ostream& out, const std::vector<BitsRow>& rows, bool header) {
  if (header) {
    out << "schema_version,model,bits,runs,accuracy,f1,ap,float_accuracy,float_f1,float_ap\n";
  }
  for (const auto& r : rows) {
    out << fmt::format("{},{},{},{},{},{},{},{},{},{}\n", kReportSchemaVersion, r.model, r.bits, r.runs,
                       r.quantized.accuracy, r.quantized.f1, r.quantized.ap, r.reference.accuracy,
                       r.reference.f1, r.reference.ap);
  }
}

void write_perror_csv(std::ostream& out, const std::vector<PerrorRow>& rows, bool header) {
  if (header) {
    out << "schema_version,model,bits,p_error,runs,accuracy,noiseless_accuracy,tlu_applications,"
           "tlu_failures,failure_rate,mean_failures_per_row\n";
  }
  for (const auto& r : rows) {
    out << fmt::format("{},{},{},{},{},{},{},{},{},{},{}\n", kReportSchemaVersion, r.model, r.bits, r.p_error,
                       r.runs, r.accuracy, r.noiseless_accuracy, r.tlu_applications, r.tlu_failures,
                       r.failure_rate(), r.mean_failures_per_row());
  }
}

}  // namespace hetree
