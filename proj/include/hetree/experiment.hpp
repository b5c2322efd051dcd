#pragma once

// Cross-validated sweeps: accuracy against input precision, and accuracy
// against the PBS failure probability. Every (repeat, fold) job gets its own
// derived seed, so results do not depend on how jobs are scheduled.

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "hetree/dataset.hpp"
#include "hetree/trainer.hpp"

namespace hetree {

inline constexpr int kReportSchemaVersion = 1;

std::string model_name(ModelKind kind);
ModelKind parse_model(const std::string& name);  // dt, rf, xgb-like

struct ExperimentSpec {
  TrainConfig train;              // kind, depth, estimators; seed is overridden per job
  std::vector<int> bits{6};
  std::vector<double> p_errors{0.0};
  int folds = 5;
  int repeats = 3;
  int noise_seeds = 20;
  std::uint64_t seed = 0;
  unsigned workers = 1;
};

// Throws ConfigurationError on folds < 2, repeats < 1, empty lists and bad values.
void check_spec(const ExperimentSpec& spec);

struct Metrics {
  double accuracy = 0.0;
  double f1 = 0.0;
  double ap = 0.0;
};

struct BitsRow {
  std::string model;
  int bits = 0;
  int runs = 0;           // folds x repeats
  Metrics quantized;      // means over runs
  Metrics reference;      // float-trained model on the same splits
};

struct PerrorRow {
  std::string model;
  int bits = 0;
  double p_error = 0.0;
  int runs = 0;           // folds x repeats x noise seeds
  double accuracy = 0.0;
  double noiseless_accuracy = 0.0;
  std::uint64_t tlu_applications = 0;
  std::uint64_t tlu_failures = 0;
  std::uint64_t rows = 0;

  double failure_rate() const;
  double mean_failures_per_row() const;
};

std::vector<BitsRow> sweep_bits(const Table& data, const ExperimentSpec& spec);
// Uses spec.bits.front() as the fixed precision.
std::vector<PerrorRow> sweep_perror(const Table& data, const ExperimentSpec& spec);

void write_bits_csv(std::ostream& out, const std::vector<BitsRow>& rows, bool header);
void write_perror_csv(std::ostream& out, const std::vector<PerrorRow>& rows, bool header);

}  // namespace hetree
