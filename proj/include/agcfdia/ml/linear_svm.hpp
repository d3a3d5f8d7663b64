#pragma once

// One-vs-rest linear SVMs trained by Pegasos-style subgradient descent on the
// L2-regularized hinge loss, with C picked by stratified k-fold CV.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <span>
#include <vector>

#include <json.hpp>

#include "../parallel.hpp"
#include "../random.hpp"
#include "common.hpp"

namespace agcfdia::ml {

struct LinearSvmConfig {
  std::vector<double> c_grid{1e-4, 1e-2, 1.0, 1e2};
  std::size_t folds = 3;
  std::size_t epochs = 50;
  bool standardize = true;
  std::uint64_t seed = 1;

  friend bool operator==(const LinearSvmConfig&, const LinearSvmConfig&) = default;
};

/// Fold id per sample: each class is shuffled with its own stream and dealt
/// round-robin across folds.
inline std::vector<std::size_t> stratified_folds(std::span<const int> y, std::size_t folds, std::uint64_t seed) {
  if (folds < 2) throw InvalidArgument("need at least two folds");
  std::vector<std::size_t> fold(y.size());
  for (std::size_t c = 0; c < kClasses; ++c) {
    std::vector<std::size_t> members;
    for (std::size_t i = 0; i < y.size(); ++i)
      if (y[i] == static_cast<int>(c)) members.push_back(i);
    Rng rng(derive_seed(seed, {0xf01dULL, c}));
    rng.shuffle(members);
    for (std::size_t p = 0; p < members.size(); ++p) fold[members[p]] = p % folds;
  }
  return fold;
}

namespace detail {

/// Pegasos on rows of Z (bias folded in as a trailing constant 1) with
/// targets t in {-1, +1}; returns the iterate averaged over the final epoch.
inline std::vector<double> pegasos(const Matrix& Z, std::span<const double> t, double lambda, std::size_t epochs,
                                   std::uint64_t seed) {
  const std::size_t n = Z.rows(), d = Z.cols();
  std::vector<double> w(d, 0.0), avg(d, 0.0);
  std::vector<std::size_t> order(n);
  const double radius = 1.0 / std::sqrt(lambda);
  std::uint64_t step = 0;
  for (std::size_t e = 0; e < epochs; ++e) {
    std::iota(order.begin(), order.end(), 0);
    Rng rng(derive_seed(seed, {0xe90cULL, e}));
    rng.shuffle(order);
    const bool last = e + 1 == epochs;
    for (auto i : order) {
      ++step;
      const double eta = 1.0 / (lambda * static_cast<double>(step));
      const auto x = Z.row(i);
      double margin = 0.0;
      for (std::size_t c = 0; c < d; ++c) margin += w[c] * x[c];
      margin *= t[i];
      const double shrink = 1.0 - eta * lambda;
      for (auto& v : w) v *= shrink;
      if (margin < 1.0)
        for (std::size_t c = 0; c < d; ++c) w[c] += eta * t[i] * x[c];
      double norm = 0.0;
      for (double v : w) norm += v * v;
      norm = std::sqrt(norm);
      if (norm > radius)
        for (auto& v : w) v *= radius / norm;
      if (last)
        for (std::size_t c = 0; c < d; ++c) avg[c] += w[c];
    }
  }
  for (auto& v : avg) v /= static_cast<double>(n);
  return avg;
}

}  // namespace detail

class LinearSvm {
 public:
  static LinearSvm fit(const Matrix& X, std::span<const int> y, const LinearSvmConfig& cfg = {},
                       std::size_t threads = default_thread_count()) {
    check_training_set(X, y, 2 * std::max<std::size_t>(cfg.folds, 1));
    if (cfg.c_grid.empty()) throw InvalidArgument("C grid is empty");
    for (double c : cfg.c_grid)
      if (!(c > 0.0) || !std::isfinite(c)) throw InvalidArgument("C values must be positive");
    if (cfg.epochs == 0) throw InvalidArgument("epochs must be positive");

    std::vector<double> grid = cfg.c_grid;
    std::sort(grid.begin(), grid.end());
    grid.erase(std::unique(grid.begin(), grid.end()), grid.end());

    const auto fold = stratified_folds(y, cfg.folds, cfg.seed);
    std::vector<double> fold_accuracy(grid.size() * cfg.folds, 0.0);
    parallel_for(
        fold_accuracy.size(),
        [&](std::size_t job) {
          const std::size_t gi = job / cfg.folds, f = job % cfg.folds;
          std::vector<std::size_t> tr, te;
          for (std::size_t i = 0; i < y.size(); ++i) (fold[i] == f ? te : tr).push_back(i);
          if (te.empty() || tr.empty()) return;
          const Matrix Xtr = take_rows(X, tr);
          std::vector<int> ytr;
          for (auto i : tr) ytr.push_back(y[i]);
          const LinearSvm m = train(Xtr, ytr, grid[gi], cfg);
          std::size_t correct = 0;
          for (auto i : te) correct += m.predict_one(X.row(i)) == y[i];
          fold_accuracy[job] = static_cast<double>(correct) / static_cast<double>(te.size());
        },
        threads);

    std::vector<double> mean_accuracy(grid.size(), 0.0);
    std::size_t best = 0;
    for (std::size_t gi = 0; gi < grid.size(); ++gi) {
      for (std::size_t f = 0; f < cfg.folds; ++f) mean_accuracy[gi] += fold_accuracy[gi * cfg.folds + f];
      mean_accuracy[gi] /= static_cast<double>(cfg.folds);
      if (mean_accuracy[gi] > mean_accuracy[best]) best = gi;  // ascending grid: ties keep the smaller C
    }

    LinearSvm m = train(X, y, grid[best], cfg);
    m.c_grid_ = grid;
    m.cv_accuracy_ = mean_accuracy;
    return m;
  }

  /// Fits the four one-vs-rest problems at a fixed C.
  static LinearSvm train(const Matrix& X, std::span<const int> y, double C, const LinearSvmConfig& cfg) {
    const std::size_t n = X.rows(), d = X.cols();
    LinearSvm m;
    m.feature_count_ = d;
    m.chosen_c_ = C;
    if (cfg.standardize) {
      m.scaler_ = Standardizer::fit(X);
    } else {
      m.scaler_.mean.assign(d, 0.0);
      m.scaler_.scale.assign(d, 1.0);
    }
    Matrix Z(n, d + 1);
    for (std::size_t r = 0; r < n; ++r) {
      m.scaler_.transform_row(X.row(r), Z.row(r).first(d));
      Z(r, d) = 1.0;
    }
    const double lambda = 1.0 / (C * static_cast<double>(n));
    std::vector<double> t(n);
    for (std::size_t c = 0; c < kClasses; ++c) {
      for (std::size_t i = 0; i < n; ++i) t[i] = y[i] == static_cast<int>(c) ? 1.0 : -1.0;
      m.weights_[c] = detail::pegasos(Z, t, lambda, cfg.epochs, cfg.seed);
    }
    return m;
  }

  std::size_t feature_count() const { return feature_count_; }
  double chosen_c() const { return chosen_c_; }
  const std::vector<double>& cv_accuracy() const { return cv_accuracy_; }
  const std::vector<double>& c_grid() const { return c_grid_; }

  /// Decision value w_c . [z, 1] per class.
  Scores predict_scores_one(std::span<const double> x) const {
    std::vector<double> z(feature_count_);
    scaler_.transform_row(x, z);
    Scores s{};
    for (std::size_t c = 0; c < kClasses; ++c) {
      const auto& w = weights_[c];
      double v = w[feature_count_];
      for (std::size_t j = 0; j < feature_count_; ++j) v += w[j] * z[j];
      s[c] = v;
    }
    return s;
  }

  int predict_one(std::span<const double> x) const { return argmax(predict_scores_one(x)); }

  friend void to_json(nlohmann::json& j, const LinearSvm& m) {
    j = nlohmann::json{{"feature_count", m.feature_count_}, {"chosen_c", m.chosen_c_},
                       {"c_grid", m.c_grid_},               {"cv_accuracy", m.cv_accuracy_},
                       {"scaler", m.scaler_},               {"weights", m.weights_}};
  }
  friend void from_json(const nlohmann::json& j, LinearSvm& m) {
    m.feature_count_ = j.at("feature_count").get<std::size_t>();
    m.chosen_c_ = j.at("chosen_c").get<double>();
    m.c_grid_ = j.at("c_grid").get<std::vector<double>>();
    m.cv_accuracy_ = j.at("cv_accuracy").get<std::vector<double>>();
    m.scaler_ = j.at("scaler").get<Standardizer>();
    m.weights_ = j.at("weights").get<std::array<std::vector<double>, kClasses>>();
    for (const auto& w : m.weights_)
      if (w.size() != m.feature_count_ + 1) throw FormatError("svm weight vector has wrong length");
    if (m.scaler_.mean.size() != m.feature_count_ || m.scaler_.scale.size() != m.feature_count_)
      throw FormatError("svm scaler has wrong length");
  }
  friend bool operator==(const LinearSvm&, const LinearSvm&) = default;

 private:
  std::size_t feature_count_ = 0;
  double chosen_c_ = 1.0;
  std::vector<double> c_grid_;
  std::vector<double> cv_accuracy_;
  Standardizer scaler_;
  std::array<std::vector<double>, kClasses> weights_;
};

}  // namespace agcfdia::ml
