#include "hetree/quantizer.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "hetree/error.hpp"

namespace hetree {

void check_params(const QuantParams& params) {
  if (params.bits < 1 || params.bits > kMaxQuantBits) {
    throw InvalidInput("quantization bits must be in [1, " + std::to_string(kMaxQuantBits) +
                       "], got " + std::to_string(params.bits));
  }
  if (!std::isfinite(params.scale) || params.scale <= 0.0) {
    throw InvalidInput("quantization scale must be finite and positive");
  }
}

QuantParams calibrate(std::span<const double> values, int bits) {
  if (bits < 1 || bits > kMaxQuantBits) {
    throw InvalidInput("quantization bits must be in [1, " + std::to_string(kMaxQuantBits) +
                       "], got " + std::to_string(bits));
  }
  if (values.empty()) throw InvalidInput("cannot calibrate a quantizer on an empty range");
  double lo = values.front();
  double hi = values.front();
  for (double v : values) {
    if (!std::isfinite(v)) throw InvalidInput("non-finite value in calibration data");
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }

  QuantParams params;
  params.bits = bits;
  if (hi == lo) {
    params.scale = 1.0;
  } else {
    params.scale = (hi - lo) / static_cast<double>(params.max_code());
    if (!std::isfinite(params.scale) || params.scale <= 0.0) {
      throw InvalidInput("calibration range is too wide to quantize");
    }
  }
  // Same rounding as quantize() so that q(min) == 0 exactly.
  params.zero_point = -static_cast<std::int64_t>(std::round(lo / params.scale));
  return params;
}

std::int64_t quantize(double x, const QuantParams& params) {
  if (!std::isfinite(x)) throw InvalidInput("cannot quantize a non-finite value");
  const double shifted = std::round(x / params.scale) + static_cast<double>(params.zero_point);
  const double top = static_cast<double>(params.max_code());
  return static_cast<std::int64_t>(std::clamp(shifted, 0.0, top));
}

double dequantize(std::int64_t q, const QuantParams& params) {
  return static_cast<double>(q - params.zero_point) * params.scale;
}

QuantizedDataset train_quantizer(const Matrix<double>& X, int bits, std::vector<double> labels) {
  if (X.rows() == 0 || X.cols() == 0) throw InvalidInput("cannot quantize an empty dataset");
  if (!labels.empty() && labels.size() != X.rows()) {
    throw InvalidInput("label count does not match row count");
  }
  QuantizedDataset out;
  out.per_feature_params.reserve(X.cols());
  std::vector<double> column(X.rows());
  for (std::size_t j = 0; j < X.cols(); ++j) {
    for (std::size_t r = 0; r < X.rows(); ++r) column[r] = X(r, j);
    out.per_feature_params.push_back(calibrate(column, bits));
  }
  out.values = apply_quantizer(X, out.per_feature_params);
  out.labels = std::move(labels);
  return out;
}

Matrix<std::int64_t> apply_quantizer(const Matrix<double>& X, std::span<const QuantParams> params) {
  if (params.size() != X.cols()) {
    throw InvalidInput("expected " + std::to_string(params.size()) + " feature columns, got " +
                       std::to_string(X.cols()));
  }
  Matrix<std::int64_t> q(X.rows(), X.cols());
  for (std::size_t r = 0; r < X.rows(); ++r) {
    for (std::size_t j = 0; j < X.cols(); ++j) q(r, j) = quantize(X(r, j), params[j]);
  }
  return q;
}

LeafQuantization quantize_leaves(const Matrix<double>& leaves, int bits) {
  if (leaves.empty()) throw InvalidInput("cannot quantize an empty leaf matrix");
  LeafQuantization out;
  out.params = calibrate(leaves.data(), bits);
  out.codes = Matrix<std::int64_t>(leaves.rows(), leaves.cols());
  for (std::size_t i = 0; i < leaves.data().size(); ++i) {
    out.codes.data()[i] = quantize(leaves.data()[i], out.params);
  }
  return out;
}

}  // namespace hetree
