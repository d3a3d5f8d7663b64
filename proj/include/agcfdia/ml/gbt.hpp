#pragma once

// Multiclass gradient-boosted trees: softmax objective, one Newton regression
// tree per class per round, exact greedy splits over presorted columns.

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

struct GbtConfig {
  double learning_rate = 0.025;
  std::size_t n_rounds = 300;
  std::size_t max_depth = 5;
  double min_child_weight = 1.2;
  double subsample = 0.8;
  double colsample = 0.8;
  double gamma = 0.066;
  double lambda = 1.0;
  std::uint64_t seed = 1;

  friend bool operator==(const GbtConfig&, const GbtConfig&) = default;
};

struct GbtNode {
  int feature = -1;
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  double value = 0.0;  // leaf output, learning rate included

  bool is_leaf() const { return feature < 0; }
  friend bool operator==(const GbtNode&, const GbtNode&) = default;
};

class RegressionTree {
 public:
  std::vector<GbtNode> nodes;

  double predict_one(std::span<const double> x) const {
    const GbtNode* n = &nodes.front();
    while (!n->is_leaf())
      n = &nodes[static_cast<std::size_t>(x[n->feature] <= n->threshold ? n->left : n->right)];
    return n->value;
  }

  friend bool operator==(const RegressionTree&, const RegressionTree&) = default;
};

namespace detail {

struct NewtonSplit {
  bool found = false;
  double gain = 0.0;
  int feature = -1;
  double threshold = 0.0;
};

/// Grows one Newton tree level by level. `node_of` holds -1 for rows outside
/// the round's subsample; `order` holds every column's presorted row order.
inline RegressionTree grow_newton_tree(const Matrix& X, const std::vector<std::vector<std::uint32_t>>& order,
                                       std::span<const std::size_t> features, std::span<const double> g,
                                       std::span<const double> h, std::vector<int> node_of, const GbtConfig& cfg) {
  RegressionTree tree;
  std::vector<double> node_g(1, 0.0), node_h(1, 0.0);
  for (std::size_t i = 0; i < node_of.size(); ++i)
    if (node_of[i] == 0) {
      node_g[0] += g[i];
      node_h[0] += h[i];
    }
  tree.nodes.push_back({});
  std::vector<int> frontier{0};
  const double lam = cfg.lambda;
  auto score = [lam](double G, double H) { return G * G / (H + lam); };

  for (std::size_t depth = 0; depth < cfg.max_depth && !frontier.empty(); ++depth) {
    std::vector<int> slot_of(tree.nodes.size(), -1);
    for (std::size_t s = 0; s < frontier.size(); ++s) slot_of[static_cast<std::size_t>(frontier[s])] = static_cast<int>(s);
    std::vector<NewtonSplit> best(frontier.size());
    std::vector<double> gl(frontier.size()), hl(frontier.size()), last(frontier.size());
    std::vector<char> seen(frontier.size());

    for (auto f : features) {
      std::fill(gl.begin(), gl.end(), 0.0);
      std::fill(hl.begin(), hl.end(), 0.0);
      std::fill(seen.begin(), seen.end(), 0);
      for (auto i : order[f]) {
        const int nd = node_of[i];
        if (nd < 0) continue;
        const int s = slot_of[static_cast<std::size_t>(nd)];
        if (s < 0) continue;
        const auto si = static_cast<std::size_t>(s);
        const double v = X(i, f);
        if (seen[si] && v > last[si]) {
          const double G = node_g[static_cast<std::size_t>(nd)], H = node_h[static_cast<std::size_t>(nd)];
          const double hr = H - hl[si];
          if (hl[si] >= cfg.min_child_weight && hr >= cfg.min_child_weight) {
            const double gain = 0.5 * (score(gl[si], hl[si]) + score(G - gl[si], hr) - score(G, H)) - cfg.gamma;
            if (gain > 0.0 && (!best[si].found || gain > best[si].gain)) {
              double t = last[si] + (v - last[si]) / 2.0;
              if (!(t < v)) t = last[si];
              best[si] = {true, gain, static_cast<int>(f), t};
            }
          }
        }
        gl[si] += g[i];
        hl[si] += h[i];
        last[si] = v;
        seen[si] = 1;
      }
    }

    std::vector<int> next;
    std::vector<int> left_of(tree.nodes.size(), -1);
    for (std::size_t s = 0; s < frontier.size(); ++s) {
      if (!best[s].found) continue;
      const auto id = static_cast<std::size_t>(frontier[s]);
      const int l = static_cast<int>(tree.nodes.size());
      tree.nodes.push_back({});
      tree.nodes.push_back({});
      node_g.resize(tree.nodes.size(), 0.0);
      node_h.resize(tree.nodes.size(), 0.0);
      tree.nodes[id].feature = best[s].feature;
      tree.nodes[id].threshold = best[s].threshold;
      tree.nodes[id].left = l;
      tree.nodes[id].right = l + 1;
      left_of[id] = l;
      next.push_back(l);
      next.push_back(l + 1);
    }
    for (std::size_t i = 0; i < node_of.size(); ++i) {
      const int nd = node_of[i];
      if (nd < 0 || left_of[static_cast<std::size_t>(nd)] < 0) continue;
      const auto& parent = tree.nodes[static_cast<std::size_t>(nd)];
      const int child = X(i, static_cast<std::size_t>(parent.feature)) <= parent.threshold ? parent.left : parent.right;
      node_of[i] = child;
      node_g[static_cast<std::size_t>(child)] += g[i];
      node_h[static_cast<std::size_t>(child)] += h[i];
    }
    frontier = std::move(next);
  }

  for (std::size_t id = 0; id < tree.nodes.size(); ++id)
    if (tree.nodes[id].is_leaf()) tree.nodes[id].value = -cfg.learning_rate * node_g[id] / (node_h[id] + lam);
  return tree;
}

}  // namespace detail

class GradientBoostedTrees {
 public:
  /// `loss_history`, when given, receives the mean training cross-entropy
  /// before the first round and after every round.
  static GradientBoostedTrees fit(const Matrix& X, std::span<const int> y, const GbtConfig& cfg = {},
                                  std::size_t threads = default_thread_count(),
                                  std::vector<double>* loss_history = nullptr) {
    check_training_set(X, y, 2);
    if (!(cfg.learning_rate > 0.0)) throw InvalidArgument("learning_rate must be positive");
    if (!(cfg.subsample > 0.0 && cfg.subsample <= 1.0)) throw InvalidArgument("subsample must lie in (0, 1]");
    if (!(cfg.colsample > 0.0 && cfg.colsample <= 1.0)) throw InvalidArgument("colsample must lie in (0, 1]");
    if (!(cfg.min_child_weight >= 0.0) || !(cfg.gamma >= 0.0) || !(cfg.lambda >= 0.0))
      throw InvalidArgument("min_child_weight, gamma and lambda must be non-negative");
    if (cfg.max_depth == 0) throw InvalidArgument("max_depth must be positive");

    const std::size_t n = X.rows(), d = X.cols();
    GradientBoostedTrees m;
    m.feature_count_ = d;
    m.base_score_.fill(0.0);

    std::vector<std::vector<std::uint32_t>> order(d, std::vector<std::uint32_t>(n));
    parallel_for(
        d,
        [&](std::size_t f) {
          std::iota(order[f].begin(), order[f].end(), 0u);
          std::stable_sort(order[f].begin(), order[f].end(),
                           [&](std::uint32_t a, std::uint32_t b) { return X(a, f) < X(b, f); });
        },
        threads);

    std::vector<Scores> margin(n, m.base_score_);
    auto mean_loss = [&] {
      double total = 0.0;
      for (std::size_t i = 0; i < n; ++i) total += cross_entropy(margin[i], y[i]);
      return total / static_cast<double>(n);
    };
    if (loss_history) loss_history->push_back(mean_loss());

    const std::size_t n_cols = std::max<std::size_t>(1, static_cast<std::size_t>(std::floor(cfg.colsample * static_cast<double>(d))));
    std::vector<std::array<double, kClasses>> grad(n), hess(n);
    for (std::size_t r = 0; r < cfg.n_rounds; ++r) {
      Rng row_rng(derive_seed(cfg.seed, {0xb005ULL, r}));
      std::vector<int> node_of(n);
      for (std::size_t i = 0; i < n; ++i) node_of[i] = cfg.subsample >= 1.0 || row_rng.uniform() < cfg.subsample ? 0 : -1;
      for (std::size_t i = 0; i < n; ++i) {
        const Scores p = softmax(margin[i]);
        for (std::size_t c = 0; c < kClasses; ++c) {
          grad[i][c] = p[c] - (y[i] == static_cast<int>(c) ? 1.0 : 0.0);
          hess[i][c] = std::max(p[c] * (1.0 - p[c]), 1e-16);
        }
      }

      std::array<RegressionTree, kClasses> round;
      parallel_for(
          kClasses,
          [&](std::size_t c) {
            Rng col_rng(derive_seed(cfg.seed, {0xc015ULL, r, c}));
            std::vector<std::size_t> cols(d);
            std::iota(cols.begin(), cols.end(), 0);
            for (std::size_t k = 0; k < n_cols; ++k) std::swap(cols[k], cols[k + col_rng.below(d - k)]);
            cols.resize(n_cols);
            std::sort(cols.begin(), cols.end());
            std::vector<double> g(n), h(n);
            for (std::size_t i = 0; i < n; ++i) {
              g[i] = grad[i][c];
              h[i] = hess[i][c];
            }
            round[c] = detail::grow_newton_tree(X, order, cols, g, h, node_of, cfg);
          },
          threads);

      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t c = 0; c < kClasses; ++c) margin[i][c] += round[c].predict_one(X.row(i));
      m.rounds_.push_back(std::move(round));
      if (loss_history) loss_history->push_back(mean_loss());
    }
    return m;
  }

  std::size_t feature_count() const { return feature_count_; }
  std::size_t round_count() const { return rounds_.size(); }

  /// Accumulated raw class scores (softmax logits).
  Scores predict_scores_one(std::span<const double> x) const {
    Scores s = base_score_;
    for (const auto& round : rounds_)
      for (std::size_t c = 0; c < kClasses; ++c) s[c] += round[c].predict_one(x);
    return s;
  }

  int predict_one(std::span<const double> x) const { return argmax(predict_scores_one(x)); }

  friend void to_json(nlohmann::json& j, const GradientBoostedTrees& m) {
    nlohmann::json rounds = nlohmann::json::array();
    for (const auto& round : m.rounds_) {
      nlohmann::json per_class = nlohmann::json::array();
      for (const auto& t : round) {
        std::vector<int> feature, left, right;
        std::vector<double> threshold, value;
        for (const auto& n : t.nodes) {
          feature.push_back(n.feature);
          threshold.push_back(n.threshold);
          left.push_back(n.left);
          right.push_back(n.right);
          value.push_back(n.value);
        }
        per_class.push_back(
            {{"feature", feature}, {"threshold", threshold}, {"left", left}, {"right", right}, {"value", value}});
      }
      rounds.push_back(per_class);
    }
    j = nlohmann::json{{"feature_count", m.feature_count_}, {"base_score", m.base_score_}, {"rounds", rounds}};
  }

  friend void from_json(const nlohmann::json& j, GradientBoostedTrees& m) {
    m.feature_count_ = j.at("feature_count").get<std::size_t>();
    m.base_score_ = j.at("base_score").get<Scores>();
    m.rounds_.clear();
    for (const auto& round : j.at("rounds")) {
      if (round.size() != kClasses) throw FormatError("boosting round needs one tree per class");
      std::array<RegressionTree, kClasses> trees;
      for (std::size_t c = 0; c < kClasses; ++c) {
        const auto feature = round[c].at("feature").get<std::vector<int>>();
        const auto threshold = round[c].at("threshold").get<std::vector<double>>();
        const auto left = round[c].at("left").get<std::vector<int>>();
        const auto right = round[c].at("right").get<std::vector<int>>();
        const auto value = round[c].at("value").get<std::vector<double>>();
        const std::size_t n = feature.size();
        if (n == 0 || threshold.size() != n || left.size() != n || right.size() != n || value.size() != n)
          throw FormatError("boosted tree arrays have inconsistent lengths");
        for (std::size_t i = 0; i < n; ++i) {
          GbtNode node{feature[i], threshold[i], left[i], right[i], value[i]};
          if (!node.is_leaf() && (node.feature >= static_cast<int>(m.feature_count_) || node.left <= static_cast<int>(i) ||
                                  node.right <= static_cast<int>(i) || node.left >= static_cast<int>(n) ||
                                  node.right >= static_cast<int>(n)))
            throw FormatError("boosted tree node " + std::to_string(i) + " is malformed");
          trees[c].nodes.push_back(node);
        }
      }
      m.rounds_.push_back(std::move(trees));
    }
  }

  friend bool operator==(const GradientBoostedTrees&, const GradientBoostedTrees&) = default;

 private:
  std::size_t feature_count_ = 0;
  Scores base_score_{};
  std::vector<std::array<RegressionTree, kClasses>> rounds_;
};

}  // namespace agcfdia::ml
