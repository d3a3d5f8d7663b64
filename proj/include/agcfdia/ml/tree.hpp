#pragma once

// CART classification trees (Gini) and the bagged random forest built on them.

#include <algorithm>
#include <array>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <optional>
#include <span>
#include <vector>

#include <json.hpp>

#include "../parallel.hpp"
#include "../random.hpp"
#include "common.hpp"

namespace agcfdia::ml {

using ClassCounts = std::array<std::uint32_t, kClasses>;

/// 1 - sum (c_i / n)^2.
inline double gini(std::span<const std::uint32_t> counts) {
  double n = 0.0;
  for (auto c : counts) n += c;
  if (n <= 0.0) throw EmptyNode("gini of an empty node");
  double sq = 0.0;
  for (auto c : counts) sq += (c / n) * (c / n);
  return 1.0 - sq;
}

struct TreeNode {
  int feature = -1;  // -1 marks a leaf
  double threshold = 0.0;  // x[feature] <= threshold goes left
  int left = -1;
  int right = -1;
  ClassCounts counts{};

  bool is_leaf() const { return feature < 0; }

  friend bool operator==(const TreeNode&, const TreeNode&) = default;
};

/// Majority class of a count vector, lowest id on ties.
inline int majority(const ClassCounts& counts) {
  std::size_t best = 0;
  for (std::size_t c = 1; c < kClasses; ++c)
    if (counts[c] > counts[best]) best = c;
  return static_cast<int>(best);
}

struct TreeGrowth {
  std::size_t min_samples_split = 2;
  std::size_t max_depth = 0;     // 0 = unlimited
  std::size_t max_features = 0;  // 0 = all features
};

class DecisionTree {
 public:
  DecisionTree() = default;

  /// Grows a tree on `rows` (indices into X, duplicates allowed as in a
  /// bootstrap). With max_features < d, `rng` draws the candidate features
  /// of each node.
  static DecisionTree grow(const Matrix& X, std::span<const int> y, std::vector<std::size_t> rows,
                           const TreeGrowth& growth, Rng* rng = nullptr);

  static DecisionTree fit(const Matrix& X, std::span<const int> y, const TreeGrowth& growth = {}) {
    check_training_set(X, y, 2);
    std::vector<std::size_t> rows(X.rows());
    std::iota(rows.begin(), rows.end(), 0);
    return grow(X, y, std::move(rows), growth);
  }

  std::size_t feature_count() const { return feature_count_; }
  const std::vector<TreeNode>& nodes() const { return nodes_; }

  const TreeNode& leaf_for(std::span<const double> x) const {
    const TreeNode* node = &nodes_.front();
    while (!node->is_leaf())
      node = &nodes_[static_cast<std::size_t>(x[node->feature] <= node->threshold ? node->left : node->right)];
    return *node;
  }

  int predict_one(std::span<const double> x) const { return majority(leaf_for(x).counts); }

  /// Class fractions of the reached leaf.
  Scores predict_scores_one(std::span<const double> x) const {
    const auto& counts = leaf_for(x).counts;
    double total = 0.0;
    for (auto c : counts) total += c;
    Scores s{};
    for (std::size_t c = 0; c < kClasses; ++c) s[c] = counts[c] / total;
    return s;
  }

  std::size_t depth() const {
    std::size_t best = 0;
    std::vector<std::pair<int, std::size_t>> stack{{0, 0}};
    while (!stack.empty()) {
      auto [id, d] = stack.back();
      stack.pop_back();
      best = std::max(best, d);
      const auto& n = nodes_[static_cast<std::size_t>(id)];
      if (!n.is_leaf()) {
        stack.emplace_back(n.left, d + 1);
        stack.emplace_back(n.right, d + 1);
      }
    }
    return best;
  }

  friend void to_json(nlohmann::json& j, const DecisionTree& t);
  friend void from_json(const nlohmann::json& j, DecisionTree& t);
  friend bool operator==(const DecisionTree&, const DecisionTree&) = default;

 private:
  std::vector<TreeNode> nodes_;
  std::size_t feature_count_ = 0;
};

namespace detail {

struct SplitChoice {
  int feature = -1;
  double threshold = 0.0;
  // Split quality sum_c cL^2/nL + sum_c cR^2/nR kept as an exact fraction.
  unsigned __int128 num = 0;
  unsigned __int128 den = 1;
};

/// Scans feature `f` for the best midpoint threshold over `rows`.
/// Updates `best` only on a strictly better split.
inline bool scan_feature(const Matrix& X, std::span<const int> y, std::span<const std::size_t> rows,
                         const ClassCounts& total, std::size_t f,
                         std::vector<std::pair<double, int>>& scratch, SplitChoice& best) {
  scratch.clear();
  for (auto r : rows) scratch.emplace_back(X(r, f), y[r]);
  std::sort(scratch.begin(), scratch.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });
  if (!(scratch.front().first < scratch.back().first)) return false;  // constant here

  const std::uint64_t n = rows.size();
  ClassCounts left{};
  bool any = false;
  for (std::size_t i = 0; i + 1 < scratch.size(); ++i) {
    ++left[static_cast<std::size_t>(scratch[i].second)];
    const double a = scratch[i].first, b = scratch[i + 1].first;
    if (!(a < b)) continue;
    any = true;
    const std::uint64_t n_left = i + 1, n_right = n - n_left;
    std::uint64_t sq_left = 0, sq_right = 0;
    for (std::size_t c = 0; c < kClasses; ++c) {
      const std::uint64_t cl = left[c], cr = total[c] - left[c];
      sq_left += cl * cl;
      sq_right += cr * cr;
    }
    const unsigned __int128 num =
        static_cast<unsigned __int128>(sq_left) * n_right + static_cast<unsigned __int128>(sq_right) * n_left;
    const unsigned __int128 den = static_cast<unsigned __int128>(n_left) * n_right;
    if (best.feature < 0 || num * best.den > best.num * den) {
      double t = a + (b - a) / 2.0;
      if (!(t < b)) t = a;
      best = {static_cast<int>(f), t, num, den};
    }
  }
  return any;
}

}  // namespace detail

inline DecisionTree DecisionTree::grow(const Matrix& X, std::span<const int> y,
                                       std::vector<std::size_t> rows, const TreeGrowth& growth,
                                       Rng* rng) {
  const std::size_t d = X.cols();
  const std::size_t max_features = growth.max_features == 0 ? d : std::min(growth.max_features, d);
  if (max_features < d && rng == nullptr) throw InvalidArgument("feature sampling needs a random stream");

  DecisionTree tree;
  tree.feature_count_ = d;

  struct Pending {
    int node;
    std::size_t begin, end, depth;
  };
  std::vector<Pending> stack;
  std::vector<std::pair<double, int>> scratch;
  std::vector<std::size_t> feature_pool(d);

  auto make_node = [&](std::size_t begin, std::size_t end) {
    TreeNode node;
    for (std::size_t i = begin; i < end; ++i) ++node.counts[static_cast<std::size_t>(y[rows[i]])];
    tree.nodes_.push_back(node);
    return static_cast<int>(tree.nodes_.size() - 1);
  };

  stack.push_back({make_node(0, rows.size()), 0, rows.size(), 0});
  while (!stack.empty()) {
    const Pending job = stack.back();
    stack.pop_back();
    const ClassCounts counts = tree.nodes_[static_cast<std::size_t>(job.node)].counts;
    const std::size_t n = job.end - job.begin;
    const bool pure = std::count_if(counts.begin(), counts.end(), [](auto c) { return c > 0; }) <= 1;
    if (pure || n < growth.min_samples_split || (growth.max_depth > 0 && job.depth >= growth.max_depth))
      continue;

    const std::span<const std::size_t> node_rows(rows.data() + job.begin, n);
    detail::SplitChoice best;
    if (max_features == d) {
      for (std::size_t f = 0; f < d; ++f) detail::scan_feature(X, y, node_rows, counts, f, scratch, best);
    } else {
      // Draw candidates without replacement; keep drawing past max_features
      // only while none of the drawn features can split this node.
      std::iota(feature_pool.begin(), feature_pool.end(), 0);
      std::size_t drawn = 0;
      bool splittable = false;
      while (drawn < d && (drawn < max_features || !splittable)) {
        const std::size_t batch_end = drawn < max_features ? max_features : drawn + 1;
        for (; drawn < batch_end; ++drawn) {
          const std::size_t j = drawn + rng->below(d - drawn);
          std::swap(feature_pool[drawn], feature_pool[j]);
        }
        std::vector<std::size_t> candidates(feature_pool.begin(), feature_pool.begin() + static_cast<std::ptrdiff_t>(drawn));
        std::sort(candidates.begin(), candidates.end());
        best = {};
        splittable = false;
        for (auto f : candidates)
          splittable = detail::scan_feature(X, y, node_rows, counts, f, scratch, best) || splittable;
      }
    }
    if (best.feature < 0) continue;  // every candidate constant: leaf

    const auto mid = std::partition(rows.begin() + static_cast<std::ptrdiff_t>(job.begin),
                                    rows.begin() + static_cast<std::ptrdiff_t>(job.end),
                                    [&](std::size_t r) { return X(r, static_cast<std::size_t>(best.feature)) <= best.threshold; });
    const auto split_at = static_cast<std::size_t>(mid - rows.begin());
    const int left = make_node(job.begin, split_at);
    const int right = make_node(split_at, job.end);
    auto& node = tree.nodes_[static_cast<std::size_t>(job.node)];
    node.feature = best.feature;
    node.threshold = best.threshold;
    node.left = left;
    node.right = right;
    stack.push_back({right, split_at, job.end, job.depth + 1});
    stack.push_back({left, job.begin, split_at, job.depth + 1});
  }
  return tree;
}

inline void to_json(nlohmann::json& j, const DecisionTree& t) {
  // Flat arrays keep large forests compact.
  std::vector<int> feature, left, right;
  std::vector<double> threshold;
  std::vector<std::uint32_t> counts;
  for (const auto& n : t.nodes_) {
    feature.push_back(n.feature);
    threshold.push_back(n.threshold);
    left.push_back(n.left);
    right.push_back(n.right);
    counts.insert(counts.end(), n.counts.begin(), n.counts.end());
  }
  j = nlohmann::json{{"feature_count", t.feature_count_}, {"feature", feature}, {"threshold", threshold},
                     {"left", left},   {"right", right},   {"counts", counts}};
}

inline void from_json(const nlohmann::json& j, DecisionTree& t) {
  t.feature_count_ = j.at("feature_count").get<std::size_t>();
  const auto feature = j.at("feature").get<std::vector<int>>();
  const auto threshold = j.at("threshold").get<std::vector<double>>();
  const auto left = j.at("left").get<std::vector<int>>();
  const auto right = j.at("right").get<std::vector<int>>();
  const auto counts = j.at("counts").get<std::vector<std::uint32_t>>();
  const std::size_t n = feature.size();
  if (threshold.size() != n || left.size() != n || right.size() != n || counts.size() != n * kClasses || n == 0)
    throw FormatError("tree arrays have inconsistent lengths");
  t.nodes_.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    auto& node = t.nodes_[i];
    node.feature = feature[i];
    node.threshold = threshold[i];
    node.left = left[i];
    node.right = right[i];
    std::copy_n(counts.begin() + static_cast<std::ptrdiff_t>(i * kClasses), kClasses, node.counts.begin());
    if (!node.is_leaf() &&
        (node.feature >= static_cast<int>(t.feature_count_) || node.left <= static_cast<int>(i) ||
         node.right <= static_cast<int>(i) || node.left >= static_cast<int>(n) || node.right >= static_cast<int>(n)))
      throw FormatError("tree node " + std::to_string(i) + " is malformed");
  }
}

struct RandomForestConfig {
  std::size_t n_trees = 500;
  std::size_t min_samples_split = 2;
  std::size_t max_depth = 0;          // 0 = unlimited
  std::size_t features_per_split = 0; // 0 = floor(sqrt(d))
  bool bootstrap = true;
  std::uint64_t seed = 1;

  friend bool operator==(const RandomForestConfig&, const RandomForestConfig&) = default;
};

class RandomForest {
 public:
  RandomForest() = default;

  static RandomForest fit(const Matrix& X, std::span<const int> y, const RandomForestConfig& cfg,
                          std::size_t threads = default_thread_count()) {
    check_training_set(X, y, 2);
    if (cfg.n_trees == 0) throw InvalidArgument("a forest needs at least one tree");
    const std::size_t d = X.cols();
    TreeGrowth growth;
    growth.min_samples_split = cfg.min_samples_split;
    growth.max_depth = cfg.max_depth;
    growth.max_features = cfg.features_per_split == 0
                              ? std::max<std::size_t>(1, static_cast<std::size_t>(std::sqrt(static_cast<double>(d))))
                              : cfg.features_per_split;

    RandomForest forest;
    forest.trees_.resize(cfg.n_trees);
    parallel_for(
        cfg.n_trees,
        [&](std::size_t t) {
          Rng rng(derive_seed(cfg.seed, {0x7ee5ULL, t}));
          std::vector<std::size_t> rows(X.rows());
          if (cfg.bootstrap) {
            for (auto& r : rows) r = rng.below(X.rows());
          } else {
            std::iota(rows.begin(), rows.end(), 0);
          }
          forest.trees_[t] = DecisionTree::grow(X, y, std::move(rows), growth, &rng);
        },
        threads);
    return forest;
  }

  std::size_t feature_count() const { return trees_.empty() ? 0 : trees_.front().feature_count(); }
  const std::vector<DecisionTree>& trees() const { return trees_; }

  /// Fraction of trees voting for each class.
  Scores predict_scores_one(std::span<const double> x) const {
    Scores votes{};
    for (const auto& t : trees_) votes[static_cast<std::size_t>(t.predict_one(x))] += 1.0;
    for (auto& v : votes) v /= static_cast<double>(trees_.size());
    return votes;
  }

  int predict_one(std::span<const double> x) const { return argmax(predict_scores_one(x)); }

  friend void to_json(nlohmann::json& j, const RandomForest& f) { j = nlohmann::json{{"trees", f.trees_}}; }
  friend void from_json(const nlohmann::json& j, RandomForest& f) {
    f.trees_ = j.at("trees").get<std::vector<DecisionTree>>();
    if (f.trees_.empty()) throw FormatError("forest has no trees");
  }
  friend bool operator==(const RandomForest&, const RandomForest&) = default;

 private:
  std::vector<DecisionTree> trees_;
};

}  // namespace agcfdia::ml
