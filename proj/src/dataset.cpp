#include "hetree/dataset.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <random>
#include <sstream>

#include "hetree/error.hpp"

namespace hetree {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split(std::string_view line) {
  std::vector<std::string_view> cells;
  std::size_t start = 0;
  for (;;) {
    const std::size_t comma = line.find(',', start);
    cells.push_back(trim(line.substr(start, comma == std::string_view::npos ? line.npos : comma - start)));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return cells;
}

std::string unquote(std::string_view s) {
  if (s.size() >= 2 && s.front() == '"' && s.back() == '"') s = s.substr(1, s.size() - 2);
  return std::string(s);
}

bool parse_double(std::string_view s, double& out) {
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  if (s.empty()) return false;
  const auto [end, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && end == s.data() + s.size() && std::isfinite(out);
}

}  // namespace

Table parse_csv(std::istream& in, const std::string& label, const std::string& source) {
  Table t;
  std::string line;
  std::size_t line_no = 0;
  bool have_header = false;
  while (!have_header && std::getline(in, line)) {
    ++line_no;
    if (!trim(line).empty()) have_header = true;
  }
  if (!have_header) {
    if (!label.empty()) t.label_name = label;
    return t;
  }

  std::vector<std::string> header;
  for (auto cell : split(line)) header.push_back(unquote(cell));
  int label_col = -1;
  for (std::size_t c = 0; c < header.size(); ++c) {
    std::string name = header[c];
    if (!label.empty() && name == label) {
      if (label_col >= 0) throw InvalidInput(fmt::format("{}: duplicate label column '{}'", source, label));
      label_col = static_cast<int>(c);
    } else {
      t.feature_names.push_back(std::move(name));
    }
  }
  if (!label.empty() && label_col < 0) {
    throw InvalidInput(fmt::format("{}: no column named '{}'", source, label));
  }
  t.label_name = label;

  std::vector<double> values;
  std::size_t rows = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto cells = split(line);
    if (cells.size() != header.size()) {
      throw InvalidInput(fmt::format("{}: line {} has {} cells, expected {}", source, line_no,
                                     cells.size(), header.size()));
    }
    for (std::size_t c = 0; c < cells.size(); ++c) {
      double v = 0.0;
      if (!parse_double(cells[c], v)) {
        throw InvalidInput(fmt::format("{}: row {} column '{}': non-numeric value '{}'", source, rows + 1,
                                       header[c], cells[c]));
      }
      if (static_cast<int>(c) == label_col) {
        t.labels.push_back(v);
      } else {
        values.push_back(v);
      }
    }
    ++rows;
  }
  t.X = Matrix<double>(rows, t.feature_names.size());
  std::copy(values.begin(), values.end(), t.X.data().begin());
  return t;
}

Table read_csv(const std::string& path, const std::string& label) {
  std::ifstream in(path);
  if (!in) throw InvalidInput(fmt::format("cannot open '{}'", path));
  return parse_csv(in, label, path);
}

std::string format_number(double v) { return fmt::format("{}", v); }

std::vector<int> make_folds(std::span<const double> labels, int k, std::uint64_t seed, bool stratify) {
  if (k < 2) throw ConfigurationError("cross-validation needs at least 2 folds");
  if (labels.size() < static_cast<std::size_t>(k)) {
    throw InvalidInput(fmt::format("{} rows cannot be split into {} folds", labels.size(), k));
  }
  std::map<double, std::vector<std::size_t>> groups;
  for (std::size_t r = 0; r < labels.size(); ++r) groups[stratify ? labels[r] : 0.0].push_back(r);

  // Fisher-Yates written out so the permutation does not depend on the standard library.
  std::mt19937_64 rng(seed);
  std::vector<int> fold(labels.size(), 0);
  const auto kk = static_cast<std::size_t>(k);
  std::size_t shift = 0;
  for (auto& [_, rows] : groups) {
    for (std::size_t i = rows.size(); i > 1; --i) {
      std::swap(rows[i - 1], rows[rng() % i]);
    }
    // Contiguous chunks per group; rotating the start keeps remainders from piling into fold 0.
    for (std::size_t i = 0; i < rows.size(); ++i) {
      fold[rows[i]] = static_cast<int>((i * kk / rows.size() + shift) % kk);
    }
    ++shift;
  }
  return fold;
}

double accuracy(std::span<const int> truth, std::span<const int> pred) {
  if (truth.size() != pred.size()) throw InvalidInput("prediction count does not match labels");
  if (truth.empty()) return 0.0;
  std::size_t hit = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) hit += truth[i] == pred[i];
  return static_cast<double>(hit) / static_cast<double>(truth.size());
}

double f1_binary(std::span<const int> truth, std::span<const int> pred) {
  if (truth.size() != pred.size()) throw InvalidInput("prediction count does not match labels");
  std::size_t tp = 0, fp = 0, fn = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const bool t = truth[i] == 1, p = pred[i] == 1;
    tp += t && p;
    fp += !t && p;
    fn += t && !p;
  }
  if (tp == 0) return 0.0;
  return 2.0 * static_cast<double>(tp) / static_cast<double>(2 * tp + fp + fn);
}

double average_precision(std::span<const int> truth, std::span<const double> score) {
  if (truth.size() != score.size()) throw InvalidInput("score count does not match labels");
  const auto positives = static_cast<double>(std::count(truth.begin(), truth.end(), 1));
  if (positives == 0) return 0.0;
  std::vector<std::size_t> order(truth.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return score[a] > score[b]; });

  double ap = 0.0, prev_recall = 0.0, tp = 0.0, seen = 0.0;
  for (std::size_t i = 0; i < order.size(); ++i) {
    tp += truth[order[i]] == 1;
    seen += 1.0;
    // Tied scores form one threshold.
    if (i + 1 < order.size() && score[order[i + 1]] == score[order[i]]) continue;
    const double recall = tp / positives;
    ap += (recall - prev_recall) * (tp / seen);
    prev_recall = recall;
  }
  return ap;
}

}  // namespace hetree
