#pragma once

// The single JSON run configuration: plant, simulation, dataset ranges,
// selection, split and classifier settings. Every key is optional.
//
// {
//   "seed": 20240521,
//   "threads": 0,                       // 0 = all hardware threads
//   "plant": { "areas": [{...}, {...}], "sync_coeff_Ps": 0.545, ... },
//   "simulation": { "dt": 0.005, "horizon": 80, "measurement_rate": 10 },
//   "dataset": { "class_counts": [200, 700, 700, 800], "ranges": {...} },
//   "selection": { "fdr_q": 0.05 },
//   "split": { "train_fraction": 0.8 },
//   "classifiers": [ { "variant": "rf", "n_trees": 500, ... }, ... ]
// }

#include <cstdint>
#include <filesystem>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "dataset.hpp"
#include "io.hpp"
#include "ml/classifier.hpp"

namespace agcfdia {

struct PipelineConfig {
  DatasetConfig dataset;  // carries seed, plant, simulation and thread count
  double fdr_q = 0.05;
  double train_fraction = 0.8;
  std::vector<ml::ClassifierConfig> classifiers;

  std::uint64_t seed() const { return dataset.seed; }

  /// Settings for `tag`: the configured entry if present, else defaults.
  ml::ClassifierConfig classifier(std::string_view tag) const {
    for (const auto& c : classifiers)
      if (ml::tag_of(c) == tag) return c;
    return ml::default_config(tag, seed());
  }

  void validate() const {
    dataset.validate();
    if (!(fdr_q > 0.0 && fdr_q < 1.0)) throw InvalidArgument("selection.fdr_q must lie in (0, 1)");
    if (!(train_fraction > 0.0 && train_fraction < 1.0))
      throw InvalidArgument("split.train_fraction must lie in (0, 1)");
    std::set<std::string_view> seen;
    for (const auto& c : classifiers) {
      ml::validate(c);
      if (!seen.insert(ml::tag_of(c)).second)
        throw InvalidArgument("classifier '" + std::string(ml::tag_of(c)) + "' configured twice");
    }
  }
};

inline PipelineConfig default_pipeline_config(std::optional<std::uint64_t> seed = std::nullopt) {
  PipelineConfig c;
  if (seed) c.dataset.seed = *seed;
  for (auto tag : ml::kClassifierTags) c.classifiers.push_back(ml::default_config(tag, c.dataset.seed));
  return c;
}

inline nlohmann::json to_json(const PipelineConfig& c) {
  nlohmann::json classifiers = nlohmann::json::array();
  for (const auto& k : c.classifiers) classifiers.push_back(ml::config_to_json(k));
  return {{"seed", c.dataset.seed},
          {"threads", 0},
          {"plant", c.dataset.plant},
          {"simulation", c.dataset.simulation},
          {"dataset", {{"class_counts", c.dataset.class_counts}, {"ranges", c.dataset.ranges}}},
          {"selection", {{"fdr_q", c.fdr_q}}},
          {"split", {{"train_fraction", c.train_fraction}}},
          {"classifiers", classifiers}};
}

namespace detail {
inline void reject_unknown(const nlohmann::json& j, std::initializer_list<std::string_view> allowed,
                           const std::string& where) {
  if (!j.is_object()) throw FormatError(where + " must be an object");
  for (const auto& item : j.items()) {
    bool ok = false;
    for (auto a : allowed) ok = ok || item.key() == a;
    if (!ok) throw FormatError("unknown key '" + item.key() + "' in " + where);
  }
}
}  // namespace detail

/// Builds a config from JSON. `seed_override` replaces the file's seed and
/// becomes the default seed of classifiers that do not set their own.
inline PipelineConfig pipeline_config_from_json(const nlohmann::json& j,
                                                std::optional<std::uint64_t> seed_override = std::nullopt) {
  try {
    detail::reject_unknown(j, {"seed", "threads", "plant", "simulation", "dataset", "selection", "split", "classifiers"},
                           "config");
    PipelineConfig c;
    c.dataset.seed = seed_override ? *seed_override : j.value("seed", c.dataset.seed);
    const std::size_t threads = j.value("threads", std::size_t{0});
    c.dataset.threads = threads == 0 ? default_thread_count() : threads;
    if (j.contains("plant")) {
      detail::reject_unknown(j.at("plant"),
                             {"areas", "sync_coeff_Ps", "grc_limit", "gdb_width", "ace_delay_tau", "base_frequency"},
                             "plant");
      if (j.at("plant").contains("areas"))
        for (const auto& a : j.at("plant").at("areas"))
          detail::reject_unknown(a,
                                 {"inertia_H", "damping_D", "droop_R", "governor_Tg", "turbine_Tt", "bias_B",
                                  "integral_gain_KI"},
                                 "plant.areas");
      c.dataset.plant = j.at("plant").get<AgcParameters>();
    }
    if (j.contains("simulation")) {
      detail::reject_unknown(j.at("simulation"), {"dt", "horizon", "measurement_rate"}, "simulation");
      c.dataset.simulation = j.at("simulation").get<SimulationConfig>();
    }
    if (j.contains("dataset")) {
      const auto& d = j.at("dataset");
      detail::reject_unknown(d, {"class_counts", "ranges"}, "dataset");
      if (d.contains("class_counts"))
        c.dataset.class_counts = d.at("class_counts").get<std::array<std::size_t, kClassCount>>();
      if (d.contains("ranges")) {
        detail::reject_unknown(d.at("ranges"),
                               {"load_magnitude", "load_time", "attack_start_gap", "attack_start_latest", "duration",
                                "magnitude_a", "slope_r", "scale_lambda"},
                               "dataset.ranges");
        c.dataset.ranges = d.at("ranges").get<ScenarioRanges>();
      }
    }
    if (j.contains("selection")) {
      detail::reject_unknown(j.at("selection"), {"fdr_q"}, "selection");
      c.fdr_q = j.at("selection").value("fdr_q", c.fdr_q);
    }
    if (j.contains("split")) {
      detail::reject_unknown(j.at("split"), {"train_fraction"}, "split");
      c.train_fraction = j.at("split").value("train_fraction", c.train_fraction);
    }
    if (j.contains("classifiers")) {
      for (const auto& k : j.at("classifiers")) {
        nlohmann::json entry = k;
        if (seed_override && entry.contains("seed")) entry.erase("seed");
        c.classifiers.push_back(ml::config_from_json(entry, c.dataset.seed));
      }
    } else {
      for (auto tag : ml::kClassifierTags) c.classifiers.push_back(ml::default_config(tag, c.dataset.seed));
    }
    c.validate();
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("config: ") + e.what());
  } catch (const InvalidArgument& e) {
    throw FormatError(std::string("config: ") + e.what());
  }
}

inline PipelineConfig load_pipeline_config(const std::filesystem::path& path,
                                           std::optional<std::uint64_t> seed_override = std::nullopt) {
  try {
    return pipeline_config_from_json(io::read_json(path), seed_override);
  } catch (const FormatError& e) {
    const std::string what = e.what();
    if (what.rfind(path.string(), 0) == 0) throw;
    throw FormatError(path.string() + ": " + what);
  }
}

}  // namespace agcfdia
