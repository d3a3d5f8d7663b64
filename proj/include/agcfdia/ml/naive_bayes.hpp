#pragma once

#include <cmath>
#include <cstddef>
#include <limits>
#include <numbers>
#include <span>
#include <vector>

#include <json.hpp>

#include "common.hpp"

namespace agcfdia::ml {

struct GaussianNBConfig {
  double var_smoothing = 1e-9;

  friend bool operator==(const GaussianNBConfig&, const GaussianNBConfig&) = default;
};

/// Gaussian naive Bayes with equal class priors, scored in the log domain.
class GaussianNB {
 public:
  static GaussianNB fit(const Matrix& X, std::span<const int> y, const GaussianNBConfig& cfg = {}) {
    check_training_set(X, y, 1);
    if (!(cfg.var_smoothing >= 0.0)) throw InvalidArgument("var_smoothing must be non-negative");
    const std::size_t n = X.rows(), d = X.cols();
    GaussianNB m;
    m.feature_count_ = d;

    // Smoothing scale: the largest per-feature variance over all rows.
    double max_var = 0.0;
    for (std::size_t c = 0; c < d; ++c) {
      double mean = 0.0;
      for (std::size_t r = 0; r < n; ++r) mean += X(r, c);
      mean /= static_cast<double>(n);
      double var = 0.0;
      for (std::size_t r = 0; r < n; ++r) var += (X(r, c) - mean) * (X(r, c) - mean);
      max_var = std::max(max_var, var / static_cast<double>(n));
    }
    double epsilon = cfg.var_smoothing * max_var;
    if (!(epsilon > 0.0)) epsilon = cfg.var_smoothing > 0.0 ? cfg.var_smoothing : 1e-300;
    m.epsilon_ = epsilon;

    std::array<std::size_t, kClasses> counts{};
    for (int label : y) ++counts[static_cast<std::size_t>(label)];
    for (std::size_t k = 0; k < kClasses; ++k) {
      m.present_[k] = counts[k] > 0;
      if (!m.present_[k]) continue;
      auto& mu = m.means_[k];
      auto& var = m.variances_[k];
      mu.assign(d, 0.0);
      var.assign(d, 0.0);
      for (std::size_t r = 0; r < n; ++r)
        if (y[r] == static_cast<int>(k))
          for (std::size_t c = 0; c < d; ++c) mu[c] += X(r, c);
      for (auto& v : mu) v /= static_cast<double>(counts[k]);
      for (std::size_t r = 0; r < n; ++r)
        if (y[r] == static_cast<int>(k))
          for (std::size_t c = 0; c < d; ++c) var[c] += (X(r, c) - mu[c]) * (X(r, c) - mu[c]);
      for (auto& v : var) v = v / static_cast<double>(counts[k]) + epsilon;
    }
    return m;
  }

  std::size_t feature_count() const { return feature_count_; }
  bool class_present(std::size_t k) const { return present_[k]; }
  const std::vector<double>& means(std::size_t k) const { return means_[k]; }
  const std::vector<double>& variances(std::size_t k) const { return variances_[k]; }
  double epsilon() const { return epsilon_; }

  /// Joint log-likelihood per class (log prior included); absent classes score -inf.
  Scores predict_scores_one(std::span<const double> x) const {
    Scores s{};
    const double log_prior = std::log(1.0 / static_cast<double>(kClasses));
    for (std::size_t k = 0; k < kClasses; ++k) {
      if (!present_[k]) {
        s[k] = -std::numeric_limits<double>::infinity();
        continue;
      }
      double total = log_prior;
      for (std::size_t c = 0; c < feature_count_; ++c) {
        const double v = variances_[k][c];
        const double dx = x[c] - means_[k][c];
        total -= 0.5 * std::log(2.0 * std::numbers::pi * v) + dx * dx / (2.0 * v);
      }
      s[k] = total;
    }
    return s;
  }

  int predict_one(std::span<const double> x) const { return argmax(predict_scores_one(x)); }

  friend void to_json(nlohmann::json& j, const GaussianNB& m) {
    nlohmann::json classes = nlohmann::json::array();
    for (std::size_t k = 0; k < kClasses; ++k)
      classes.push_back({{"present", m.present_[k]}, {"mean", m.means_[k]}, {"variance", m.variances_[k]}});
    j = nlohmann::json{{"feature_count", m.feature_count_}, {"epsilon", m.epsilon_}, {"classes", classes}};
  }
  friend void from_json(const nlohmann::json& j, GaussianNB& m) {
    m.feature_count_ = j.at("feature_count").get<std::size_t>();
    m.epsilon_ = j.at("epsilon").get<double>();
    const auto& classes = j.at("classes");
    if (classes.size() != kClasses) throw FormatError("naive Bayes model needs 4 classes");
    for (std::size_t k = 0; k < kClasses; ++k) {
      m.present_[k] = classes[k].at("present").get<bool>();
      m.means_[k] = classes[k].at("mean").get<std::vector<double>>();
      m.variances_[k] = classes[k].at("variance").get<std::vector<double>>();
      const std::size_t expect = m.present_[k] ? m.feature_count_ : 0;
      if (m.means_[k].size() != expect || m.variances_[k].size() != expect)
        throw FormatError("naive Bayes class " + std::to_string(k) + " has wrong length");
    }
  }
  friend bool operator==(const GaussianNB&, const GaussianNB&) = default;

 private:
  std::size_t feature_count_ = 0;
  double epsilon_ = 0.0;
  std::array<bool, kClasses> present_{};
  std::array<std::vector<double>, kClasses> means_;
  std::array<std::vector<double>, kClasses> variances_;
};

}  // namespace agcfdia::ml
