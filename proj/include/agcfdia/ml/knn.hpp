#pragma once

#include <algorithm>
#include <cstddef>
#include <numeric>
#include <span>
#include <utility>
#include <vector>

#include <json.hpp>

#include "common.hpp"

namespace agcfdia::ml {

struct KnnConfig {
  std::size_t k = 5;
  bool standardize = true;

  friend bool operator==(const KnnConfig&, const KnnConfig&) = default;
};

/// k-nearest neighbours on Euclidean distance. Distance ties go to the lower
/// training index, vote ties to the lower class id.
class Knn {
 public:
  static Knn fit(const Matrix& X, std::span<const int> y, const KnnConfig& cfg = {}) {
    check_training_set(X, y, 1);
    if (cfg.k == 0) throw InvalidArgument("k must be positive");
    if (X.rows() < cfg.k) throw InvalidArgument("need at least k training samples");
    Knn m;
    m.k_ = cfg.k;
    m.feature_count_ = X.cols();
    if (cfg.standardize) {
      m.scaler_ = Standardizer::fit(X);
    } else {
      m.scaler_.mean.assign(X.cols(), 0.0);
      m.scaler_.scale.assign(X.cols(), 1.0);
    }
    m.train_ = m.scaler_.transform(X);
    m.labels_.assign(y.begin(), y.end());
    return m;
  }

  std::size_t feature_count() const { return feature_count_; }
  std::size_t k() const { return k_; }

  /// Training indices of the k nearest neighbours, nearest first.
  std::vector<std::size_t> neighbours(std::span<const double> x) const {
    std::vector<double> z(feature_count_);
    scaler_.transform_row(x, z);
    std::vector<std::pair<double, std::size_t>> dist(train_.rows());
    for (std::size_t i = 0; i < train_.rows(); ++i) {
      const auto row = train_.row(i);
      double s = 0.0;
      for (std::size_t c = 0; c < feature_count_; ++c) {
        const double dv = row[c] - z[c];
        s += dv * dv;
      }
      dist[i] = {s, i};
    }
    std::partial_sort(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(k_), dist.end());
    std::vector<std::size_t> out(k_);
    for (std::size_t i = 0; i < k_; ++i) out[i] = dist[i].second;
    return out;
  }

  /// Fraction of the k neighbours in each class.
  Scores predict_scores_one(std::span<const double> x) const {
    Scores votes{};
    for (auto i : neighbours(x)) votes[static_cast<std::size_t>(labels_[i])] += 1.0;
    for (auto& v : votes) v /= static_cast<double>(k_);
    return votes;
  }

  int predict_one(std::span<const double> x) const { return argmax(predict_scores_one(x)); }

  friend void to_json(nlohmann::json& j, const Knn& m) {
    j = nlohmann::json{{"k", m.k_},
                       {"feature_count", m.feature_count_},
                       {"scaler", m.scaler_},
                       {"train", m.train_.data()},
                       {"labels", m.labels_}};
  }
  friend void from_json(const nlohmann::json& j, Knn& m) {
    m.k_ = j.at("k").get<std::size_t>();
    m.feature_count_ = j.at("feature_count").get<std::size_t>();
    m.scaler_ = j.at("scaler").get<Standardizer>();
    m.labels_ = j.at("labels").get<std::vector<int>>();
    auto data = j.at("train").get<std::vector<double>>();
    if (m.feature_count_ == 0 || data.size() != m.labels_.size() * m.feature_count_ || m.labels_.size() < m.k_ ||
        m.k_ == 0 || m.scaler_.mean.size() != m.feature_count_ || m.scaler_.scale.size() != m.feature_count_)
      throw FormatError("knn model has inconsistent sizes");
    m.train_ = Matrix(m.labels_.size(), m.feature_count_, std::move(data));
  }
  friend bool operator==(const Knn&, const Knn&) = default;

 private:
  std::size_t k_ = 5;
  std::size_t feature_count_ = 0;
  Standardizer scaler_;
  Matrix train_;
  std::vector<int> labels_;
};

}  // namespace agcfdia::ml
