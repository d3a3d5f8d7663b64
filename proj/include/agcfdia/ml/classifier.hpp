#pragma once

// Uniform front end over the six classifiers: tagged configs, training,
// prediction and the versioned JSON model container.

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <set>
#include <string>
#include <span>
#include <string_view>
#include <type_traits>
#include <variant>
#include <vector>

#include <json.hpp>

#include "../io.hpp"
#include "../parallel.hpp"
#include "common.hpp"
#include "gbt.hpp"
#include "knn.hpp"
#include "linear_svm.hpp"
#include "naive_bayes.hpp"
#include "tree.hpp"

namespace agcfdia::ml {

struct DecisionTreeConfig {
  std::size_t min_samples_split = 2;
  std::size_t max_depth = 0;  // 0 = unlimited

  friend bool operator==(const DecisionTreeConfig&, const DecisionTreeConfig&) = default;
};

using ClassifierConfig =
    std::variant<DecisionTreeConfig, RandomForestConfig, GaussianNBConfig, KnnConfig, LinearSvmConfig, GbtConfig>;

using TrainedModel = std::variant<DecisionTree, RandomForest, GaussianNB, Knn, LinearSvm, GradientBoostedTrees>;

inline constexpr std::array<std::string_view, 6> kClassifierTags{"dt", "rf", "gnb", "knn", "svm", "gbt"};

inline std::string_view tag_of(const ClassifierConfig& cfg) { return kClassifierTags[cfg.index()]; }

inline std::string_view display_name(std::string_view tag) {
  if (tag == "dt") return "Decision Tree";
  if (tag == "rf") return "Random Forest";
  if (tag == "gnb") return "Gaussian Naive Bayes";
  if (tag == "knn") return "K-Nearest Neighbors";
  if (tag == "svm") return "Linear SVM";
  if (tag == "gbt") return "Gradient Boosted Trees";
  throw InvalidArgument("unknown classifier '" + std::string(tag) + "'");
}

/// Default hyperparameters for a classifier tag; stochastic variants take `seed`.
inline ClassifierConfig default_config(std::string_view tag, std::uint64_t seed = 1) {
  if (tag == "dt") return DecisionTreeConfig{};
  if (tag == "rf") {
    RandomForestConfig c;
    c.seed = seed;
    return c;
  }
  if (tag == "gnb") return GaussianNBConfig{};
  if (tag == "knn") return KnnConfig{};
  if (tag == "svm") {
    LinearSvmConfig c;
    c.seed = seed;
    return c;
  }
  if (tag == "gbt") {
    GbtConfig c;
    c.seed = seed;
    return c;
  }
  throw InvalidArgument("unknown classifier '" + std::string(tag) + "'");
}

inline void validate(const ClassifierConfig& config) {
  std::visit(
      [](const auto& c) {
        using T = std::decay_t<decltype(c)>;
        if constexpr (std::is_same_v<T, DecisionTreeConfig>) {
          if (c.min_samples_split < 2) throw InvalidArgument("min_samples_split must be at least 2");
        } else if constexpr (std::is_same_v<T, RandomForestConfig>) {
          if (c.n_trees == 0) throw InvalidArgument("n_trees must be positive");
          if (c.min_samples_split < 2) throw InvalidArgument("min_samples_split must be at least 2");
        } else if constexpr (std::is_same_v<T, GaussianNBConfig>) {
          if (!(c.var_smoothing >= 0.0)) throw InvalidArgument("var_smoothing must be non-negative");
        } else if constexpr (std::is_same_v<T, KnnConfig>) {
          if (c.k == 0) throw InvalidArgument("k must be positive");
        } else if constexpr (std::is_same_v<T, LinearSvmConfig>) {
          if (c.c_grid.empty()) throw InvalidArgument("C grid is empty");
          for (double v : c.c_grid)
            if (!(v > 0.0)) throw InvalidArgument("C values must be positive");
          if (c.folds < 2) throw InvalidArgument("folds must be at least 2");
          if (c.epochs == 0) throw InvalidArgument("epochs must be positive");
        } else {
          if (!(c.learning_rate > 0.0)) throw InvalidArgument("learning_rate must be positive");
          if (c.max_depth == 0) throw InvalidArgument("max_depth must be positive");
          if (!(c.subsample > 0.0 && c.subsample <= 1.0)) throw InvalidArgument("subsample must lie in (0, 1]");
          if (!(c.colsample > 0.0 && c.colsample <= 1.0)) throw InvalidArgument("colsample must lie in (0, 1]");
          if (!(c.min_child_weight >= 0.0 && c.gamma >= 0.0 && c.lambda >= 0.0))
            throw InvalidArgument("min_child_weight, gamma and lambda must be non-negative");
        }
      },
      config);
}

// ---- config JSON --------------------------------------------------------

namespace detail {

template <typename T>
void read_field(const nlohmann::json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

}  // namespace detail

inline nlohmann::json config_to_json(const ClassifierConfig& config) {
  nlohmann::json j = std::visit(
      [](const auto& c) -> nlohmann::json {
        using T = std::decay_t<decltype(c)>;
        if constexpr (std::is_same_v<T, DecisionTreeConfig>) {
          return {{"criterion", "gini"}, {"min_samples_split", c.min_samples_split}, {"max_depth", c.max_depth}};
        } else if constexpr (std::is_same_v<T, RandomForestConfig>) {
          return {{"criterion", "gini"},
                  {"n_trees", c.n_trees},
                  {"min_samples_split", c.min_samples_split},
                  {"max_depth", c.max_depth},
                  {"features_per_split", c.features_per_split},
                  {"bootstrap", c.bootstrap},
                  {"seed", c.seed}};
        } else if constexpr (std::is_same_v<T, GaussianNBConfig>) {
          return {{"var_smoothing", c.var_smoothing}};
        } else if constexpr (std::is_same_v<T, KnnConfig>) {
          return {{"k", c.k}, {"metric", "euclidean"}, {"standardize", c.standardize}};
        } else if constexpr (std::is_same_v<T, LinearSvmConfig>) {
          return {{"c_grid", c.c_grid},
                  {"folds", c.folds},
                  {"epochs", c.epochs},
                  {"standardize", c.standardize},
                  {"seed", c.seed}};
        } else {
          return {{"learning_rate", c.learning_rate},
                  {"n_rounds", c.n_rounds},
                  {"max_depth", c.max_depth},
                  {"min_child_weight", c.min_child_weight},
                  {"subsample", c.subsample},
                  {"colsample", c.colsample},
                  {"gamma", c.gamma},
                  {"lambda", c.lambda},
                  {"objective", "multiclass-softmax"},
                  {"seed", c.seed}};
        }
      },
      config);
  j["variant"] = std::string(tag_of(config));
  return j;
}

/// Parses {"variant": tag, ...}; absent fields keep their defaults and unknown
/// fields are rejected.
inline ClassifierConfig config_from_json(const nlohmann::json& j, std::uint64_t default_seed = 1) {
  try {
    const std::string tag = j.at("variant").get<std::string>();
    ClassifierConfig config = default_config(tag, default_seed);
    const std::set<std::string> allowed = [&] {
      std::set<std::string> keys;
      const nlohmann::json defaults = config_to_json(config);
      for (const auto& [k, v] : defaults.items()) keys.insert(k);
      return keys;
    }();
    for (const auto& [k, v] : j.items())
      if (!allowed.count(k)) throw FormatError("unknown " + tag + " setting '" + k + "'");
    if (j.contains("criterion") && j.at("criterion") != "gini") throw FormatError("only the gini criterion is supported");
    if (j.contains("metric") && j.at("metric") != "euclidean") throw FormatError("only the euclidean metric is supported");
    if (j.contains("objective") && j.at("objective") != "multiclass-softmax")
      throw FormatError("only the multiclass-softmax objective is supported");
    std::visit(
        [&](auto& c) {
          using T = std::decay_t<decltype(c)>;
          if constexpr (std::is_same_v<T, DecisionTreeConfig>) {
            detail::read_field(j, "min_samples_split", c.min_samples_split);
            detail::read_field(j, "max_depth", c.max_depth);
          } else if constexpr (std::is_same_v<T, RandomForestConfig>) {
            detail::read_field(j, "n_trees", c.n_trees);
            detail::read_field(j, "min_samples_split", c.min_samples_split);
            detail::read_field(j, "max_depth", c.max_depth);
            detail::read_field(j, "features_per_split", c.features_per_split);
            detail::read_field(j, "bootstrap", c.bootstrap);
            detail::read_field(j, "seed", c.seed);
          } else if constexpr (std::is_same_v<T, GaussianNBConfig>) {
            detail::read_field(j, "var_smoothing", c.var_smoothing);
          } else if constexpr (std::is_same_v<T, KnnConfig>) {
            detail::read_field(j, "k", c.k);
            detail::read_field(j, "standardize", c.standardize);
          } else if constexpr (std::is_same_v<T, LinearSvmConfig>) {
            detail::read_field(j, "c_grid", c.c_grid);
            detail::read_field(j, "folds", c.folds);
            detail::read_field(j, "epochs", c.epochs);
            detail::read_field(j, "standardize", c.standardize);
            detail::read_field(j, "seed", c.seed);
          } else {
            detail::read_field(j, "learning_rate", c.learning_rate);
            detail::read_field(j, "n_rounds", c.n_rounds);
            detail::read_field(j, "max_depth", c.max_depth);
            detail::read_field(j, "min_child_weight", c.min_child_weight);
            detail::read_field(j, "subsample", c.subsample);
            detail::read_field(j, "colsample", c.colsample);
            detail::read_field(j, "gamma", c.gamma);
            detail::read_field(j, "lambda", c.lambda);
            detail::read_field(j, "seed", c.seed);
          }
        },
        config);
    validate(config);
    return config;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("classifier config: ") + e.what());
  } catch (const InvalidArgument& e) {
    throw FormatError(std::string("classifier config: ") + e.what());
  }
}

// ---- models --------------------------------------------------------------

class Model {
 public:
  Model() = default;
  Model(ClassifierConfig config, TrainedModel fitted, std::vector<std::string> feature_names = {})
      : config_(std::move(config)), fitted_(std::move(fitted)), feature_names_(std::move(feature_names)) {
    if (config_.index() != fitted_.index()) throw InvalidArgument("config and model variants differ");
  }

  std::string_view tag() const { return kClassifierTags[fitted_.index()]; }
  const ClassifierConfig& config() const { return config_; }
  const TrainedModel& fitted() const { return fitted_; }
  const std::vector<std::string>& feature_names() const { return feature_names_; }
  std::size_t class_count() const { return kClasses; }

  std::size_t feature_count() const {
    return std::visit([](const auto& m) { return m.feature_count(); }, fitted_);
  }

  Scores predict_scores_one(std::span<const double> x) const {
    if (x.size() != feature_count())
      throw DimensionMismatch("expected " + std::to_string(feature_count()) + " features, got " +
                              std::to_string(x.size()));
    return std::visit([&](const auto& m) { return m.predict_scores_one(x); }, fitted_);
  }

  int predict_one(std::span<const double> x) const { return argmax(predict_scores_one(x)); }

  std::vector<Scores> predict_scores(const Matrix& X, std::size_t threads = default_thread_count()) const {
    if (X.cols() != feature_count())
      throw DimensionMismatch("expected " + std::to_string(feature_count()) + " feature columns, got " +
                              std::to_string(X.cols()));
    std::vector<Scores> out(X.rows());
    parallel_for(X.rows(), [&](std::size_t r) { out[r] = predict_scores_one(X.row(r)); }, threads);
    return out;
  }

  std::vector<int> predict(const Matrix& X, std::size_t threads = default_thread_count()) const {
    const auto scores = predict_scores(X, threads);
    std::vector<int> out(scores.size());
    for (std::size_t i = 0; i < scores.size(); ++i) out[i] = argmax(scores[i]);
    return out;
  }

  friend bool operator==(const Model&, const Model&) = default;

 private:
  ClassifierConfig config_;
  TrainedModel fitted_;
  std::vector<std::string> feature_names_;
};

inline Model train(const ClassifierConfig& config, const Matrix& X, std::span<const int> y,
                   std::vector<std::string> feature_names = {}, std::size_t threads = default_thread_count()) {
  validate(config);
  if (!feature_names.empty() && feature_names.size() != X.cols())
    throw DimensionMismatch("feature names do not match the column count");
  TrainedModel fitted = std::visit(
      [&](const auto& c) -> TrainedModel {
        using T = std::decay_t<decltype(c)>;
        if constexpr (std::is_same_v<T, DecisionTreeConfig>) {
          TreeGrowth growth;
          growth.min_samples_split = c.min_samples_split;
          growth.max_depth = c.max_depth;
          return DecisionTree::fit(X, y, growth);
        } else if constexpr (std::is_same_v<T, RandomForestConfig>) {
          return RandomForest::fit(X, y, c, threads);
        } else if constexpr (std::is_same_v<T, GaussianNBConfig>) {
          return GaussianNB::fit(X, y, c);
        } else if constexpr (std::is_same_v<T, KnnConfig>) {
          return Knn::fit(X, y, c);
        } else if constexpr (std::is_same_v<T, LinearSvmConfig>) {
          return LinearSvm::fit(X, y, c, threads);
        } else {
          return GradientBoostedTrees::fit(X, y, c, threads);
        }
      },
      config);
  return Model(config, std::move(fitted), std::move(feature_names));
}

inline constexpr int kModelFormatVersion = 1;

inline nlohmann::json to_json(const Model& model) {
  nlohmann::json body = std::visit([](const auto& m) { return nlohmann::json(m); }, model.fitted());
  return {{"format", "agcfdia-model"},
          {"version", kModelFormatVersion},
          {"variant", std::string(model.tag())},
          {"feature_count", model.feature_count()},
          {"class_count", kClasses},
          {"feature_names", model.feature_names()},
          {"config", config_to_json(model.config())},
          {"model", body}};
}

inline Model model_from_json(const nlohmann::json& j) {
  try {
    if (j.at("format").get<std::string>() != "agcfdia-model") throw FormatError("not a model file");
    const int version = j.at("version").get<int>();
    if (version != kModelFormatVersion) throw FormatError("unsupported model version " + std::to_string(version));
    if (j.at("class_count").get<std::size_t>() != kClasses) throw FormatError("model must have 4 classes");
    const std::string tag = j.at("variant").get<std::string>();
    const ClassifierConfig config = config_from_json(j.at("config"));
    if (tag_of(config) != tag) throw FormatError("model variant and config variant differ");
    const auto& body = j.at("model");
    TrainedModel fitted;
    switch (config.index()) {
      case 0: fitted = body.get<DecisionTree>(); break;
      case 1: fitted = body.get<RandomForest>(); break;
      case 2: fitted = body.get<GaussianNB>(); break;
      case 3: fitted = body.get<Knn>(); break;
      case 4: fitted = body.get<LinearSvm>(); break;
      default: fitted = body.get<GradientBoostedTrees>(); break;
    }
    Model model(config, std::move(fitted), j.at("feature_names").get<std::vector<std::string>>());
    if (model.feature_count() != j.at("feature_count").get<std::size_t>())
      throw FormatError("model feature_count disagrees with its structure");
    if (!model.feature_names().empty() && model.feature_names().size() != model.feature_count())
      throw FormatError("model feature_names disagree with feature_count");
    return model;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("model: ") + e.what());
  }
}

inline void save_model(const std::filesystem::path& path, const Model& model) { io::write_json(path, to_json(model)); }

inline Model load_model(const std::filesystem::path& path) { return model_from_json(io::read_json(path)); }

}  // namespace agcfdia::ml
