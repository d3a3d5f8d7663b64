#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include <json.hpp>

#include "../errors.hpp"
#include "../matrix.hpp"

namespace agcfdia::ml {

inline constexpr std::size_t kClasses = 4;

using Scores = std::array<double, kClasses>;

/// Index of the largest score; ties go to the lowest class id.
inline int argmax(std::span<const double> scores) {
  std::size_t best = 0;
  for (std::size_t c = 1; c < scores.size(); ++c)
    if (scores[c] > scores[best]) best = c;
  return static_cast<int>(best);
}

inline void check_training_set(const Matrix& X, std::span<const int> y, std::size_t min_rows = 1) {
  if (X.rows() != y.size()) throw DimensionMismatch("feature rows and labels differ in count");
  if (X.rows() < min_rows)
    throw InvalidArgument("need at least " + std::to_string(min_rows) + " training samples");
  if (X.cols() == 0) throw DimensionMismatch("training matrix has no columns");
  for (int label : y)
    if (label < 0 || label >= static_cast<int>(kClasses)) throw LabelOutOfRange("label outside 0..3");
}

/// Numerically stable softmax.
inline Scores softmax(const Scores& logits) {
  const double mx = *std::max_element(logits.begin(), logits.end());
  Scores p{};
  double total = 0.0;
  for (std::size_t c = 0; c < kClasses; ++c) total += (p[c] = std::exp(logits[c] - mx));
  for (auto& v : p) v /= total;
  return p;
}

/// Multiclass cross-entropy -log softmax(logits)[label].
inline double cross_entropy(const Scores& logits, int label) {
  const double mx = *std::max_element(logits.begin(), logits.end());
  double total = 0.0;
  for (double z : logits) total += std::exp(z - mx);
  return -(logits[static_cast<std::size_t>(label)] - mx - std::log(total));
}

/// d cross_entropy / d logits = softmax(logits) - onehot(label).
inline Scores cross_entropy_gradient(const Scores& logits, int label) {
  Scores g = softmax(logits);
  g[static_cast<std::size_t>(label)] -= 1.0;
  return g;
}

/// Per-feature z-scoring fitted on training data. Zero-variance features
/// map to 0.
struct Standardizer {
  std::vector<double> mean;
  std::vector<double> scale;  // 1/std, or 0 for a constant feature

  static Standardizer fit(const Matrix& X) {
    Standardizer s;
    const std::size_t n = X.rows(), d = X.cols();
    s.mean.assign(d, 0.0);
    s.scale.assign(d, 0.0);
    for (std::size_t r = 0; r < n; ++r)
      for (std::size_t c = 0; c < d; ++c) s.mean[c] += X(r, c);
    for (auto& m : s.mean) m /= static_cast<double>(n);
    std::vector<double> var(d, 0.0);
    for (std::size_t r = 0; r < n; ++r)
      for (std::size_t c = 0; c < d; ++c) {
        const double dv = X(r, c) - s.mean[c];
        var[c] += dv * dv;
      }
    for (std::size_t c = 0; c < d; ++c) {
      const double sd = std::sqrt(var[c] / static_cast<double>(n));
      s.scale[c] = sd > 0.0 ? 1.0 / sd : 0.0;
    }
    return s;
  }

  void transform_row(std::span<const double> in, std::span<double> out) const {
    for (std::size_t c = 0; c < in.size(); ++c) out[c] = (in[c] - mean[c]) * scale[c];
  }

  Matrix transform(const Matrix& X) const {
    Matrix out(X.rows(), X.cols());
    for (std::size_t r = 0; r < X.rows(); ++r) transform_row(X.row(r), out.row(r));
    return out;
  }

  friend bool operator==(const Standardizer&, const Standardizer&) = default;
};

inline void to_json(nlohmann::json& j, const Standardizer& s) {
  j = nlohmann::json{{"mean", s.mean}, {"scale", s.scale}};
}
inline void from_json(const nlohmann::json& j, Standardizer& s) {
  s.mean = j.at("mean").get<std::vector<double>>();
  s.scale = j.at("scale").get<std::vector<double>>();
}

/// Rows of X selected by `rows`.
inline Matrix take_rows(const Matrix& X, std::span<const std::size_t> rows) {
  Matrix out(rows.size(), X.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto src = X.row(rows[i]);
    std::copy(src.begin(), src.end(), out.row(i).begin());
  }
  return out;
}

}  // namespace agcfdia::ml
