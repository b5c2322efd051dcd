#pragma once

// Affine (asymmetric) uniform quantization of features and leaf values.
//
//   scale      = (max - min) / (2^bits - 1)
//   zero_point = -round(min / scale)
//   q(x)       = clamp(round(x / scale) + zero_point, 0, 2^bits - 1)
//   x'(q)      = (q - zero_point) * scale
//
// round() is half-away-from-zero everywhere. A constant calibration range
// falls back to scale = 1 so every value maps to code 0.

#include <cstdint>
#include <span>
#include <vector>

#include "hetree/tensor.hpp"

namespace hetree {

inline constexpr int kMaxQuantBits = 32;

struct QuantParams {
  double scale = 1.0;
  std::int64_t zero_point = 0;
  int bits = 1;

  std::int64_t max_code() const noexcept { return (std::int64_t{1} << bits) - 1; }

  bool operator==(const QuantParams&) const = default;
};

// Throws InvalidInput if scale is not finite and positive or bits is outside [1, kMaxQuantBits].
void check_params(const QuantParams& params);

// Calibrates on exact min/max of `values`. Throws InvalidInput on empty or non-finite input.
QuantParams calibrate(std::span<const double> values, int bits);

std::int64_t quantize(double x, const QuantParams& params);
double dequantize(std::int64_t q, const QuantParams& params);

struct QuantizedDataset {
  Matrix<std::int64_t> values;
  std::vector<QuantParams> per_feature_params;
  std::vector<double> labels;

  std::size_t rows() const noexcept { return values.rows(); }
  std::size_t features() const noexcept { return values.cols(); }
};

// Calibrates every column independently and quantizes X with the result.
QuantizedDataset train_quantizer(const Matrix<double>& X, int bits,
                                 std::vector<double> labels = {});

// Quantizes X with previously calibrated per-column params (e.g. a held-out fold).
Matrix<std::int64_t> apply_quantizer(const Matrix<double>& X, std::span<const QuantParams> params);

struct LeafQuantization {
  Matrix<std::int64_t> codes;
  QuantParams params;
};

// One global (scale, zero_point) pair for the whole matrix.
LeafQuantization quantize_leaves(const Matrix<double>& leaves, int bits);

}  // namespace hetree
