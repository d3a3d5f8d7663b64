#pragma once

// Pipeline commands. Stages exchange data only through files:
//   dataset dir -> feature CSV -> mask JSON -> model JSON -> report + heatmap.

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "agc.hpp"
#include "config.hpp"
#include "dataset.hpp"
#include "evaluate.hpp"
#include "features.hpp"
#include "io.hpp"
#include "ml/classifier.hpp"
#include "selection.hpp"
#include "svg.hpp"

namespace agcfdia::pipeline {

namespace fs = std::filesystem;

/// One produced file: path relative to the manifest root, size and FNV-1a hash.
struct Artifact {
  std::string path;
  std::uintmax_t bytes = 0;
  std::string fnv1a;
};

inline Artifact describe(const fs::path& root, const fs::path& file) {
  const std::string content = io::read_file(file);
  return {fs::relative(file, root).generic_string(), content.size(), io::hex64(io::fnv1a(content))};
}

inline nlohmann::json to_json(const Artifact& a) {
  return {{"path", a.path}, {"bytes", a.bytes}, {"fnv1a", a.fnv1a}};
}

/// Run manifest: every file under `root` (except the manifest itself) in
/// lexicographic order, with the seed and config hash.
inline nlohmann::json write_manifest(const fs::path& root, std::string_view command, const PipelineConfig& config,
                                     const nlohmann::json& timings = nullptr) {
  std::vector<fs::path> files;
  for (const auto& e : fs::recursive_directory_iterator(root))
    if (e.is_regular_file() && e.path().filename() != "manifest.json") files.push_back(e.path());
  std::sort(files.begin(), files.end(),
            [&](const fs::path& a, const fs::path& b) { return a.generic_string() < b.generic_string(); });
  nlohmann::json artifacts = nlohmann::json::array();
  for (const auto& f : files) artifacts.push_back(to_json(describe(root, f)));
  nlohmann::json m{{"format", "agcfdia-manifest"},
                   {"version", 1},
                   {"command", command},
                   {"seed", config.seed()},
                   {"config_hash", config_hash(config.dataset)},
                   {"pipeline_config_hash", io::hex64(io::fnv1a(agcfdia::to_json(config).dump()))},
                   {"config", agcfdia::to_json(config)},
                   {"artifacts", artifacts}};
  if (!timings.is_null()) m["timings_s"] = timings;
  io::write_json(root / "manifest.json", m);
  return m;
}

inline Scenario load_scenario(const fs::path& path, double horizon) {
  const auto j = io::read_json(path);
  Scenario s;
  try {
    s = j.get<Scenario>();
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(path.string() + ": " + e.what());
  } catch (const InvalidArgument& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
  try {
    validate(s, horizon);
  } catch (const InvalidArgument& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
  return s;
}

/// Writes `trajectory.csv` and `trajectory.svg` into `out_dir`.
inline Trajectory simulate(const PipelineConfig& config, const fs::path& scenario_path, const fs::path& out_dir) {
  const Scenario scenario = load_scenario(scenario_path, config.dataset.simulation.horizon);
  const Trajectory traj = agcfdia::simulate(config.dataset.plant, config.dataset.simulation, scenario);
  fs::create_directories(out_dir);
  write_trajectory_csv((out_dir / "trajectory.csv").string(), traj);
  std::string title = "load " + evaluate::fixed2(scenario.load_magnitude) + " pu in area " +
                      std::to_string(scenario.load_area);
  if (scenario.attack)
    title += ", " + std::string(to_string(scenario.attack->kind)) + " attack on " +
             std::string(to_string(scenario.attack->target));
  io::write_file(out_dir / "trajectory.svg", svg::trajectory_plot(traj, title));
  return traj;
}

/// Generates the dataset into `out_dir` (meta.json, samples.csv, manifest.json).
inline Dataset gen_dataset(const PipelineConfig& config, const fs::path& out_dir) {
  Dataset ds = generate_dataset(config.dataset);
  save(ds, out_dir);
  write_manifest(out_dir, "gen-dataset", config);
  return ds;
}

/// Stratified train/test split into `out_dir/train` and `out_dir/test`.
inline std::pair<Dataset, Dataset> split_dataset(const PipelineConfig& config, const fs::path& dataset_dir,
                                                 const fs::path& out_dir) {
  auto parts = split(load(dataset_dir), config.train_fraction, config.seed());
  save(parts.first, out_dir / "train");
  save(parts.second, out_dir / "test");
  return parts;
}

inline features::FeatureMatrix featurize(const fs::path& dataset_dir, const fs::path& out_csv,
                                         std::size_t threads = default_thread_count()) {
  auto fm = features::featurize(load(dataset_dir), threads);
  features::write_csv(out_csv, fm);
  return fm;
}

inline selection::SelectionMask select(const fs::path& train_csv, double q, const fs::path& out_json,
                                       std::size_t threads = default_thread_count()) {
  auto mask = selection::fit_mask(features::read_csv(train_csv), q, threads);
  selection::save_mask(out_json, mask);
  return mask;
}

inline ml::Model train(const fs::path& train_csv, const fs::path& mask_json, const ml::ClassifierConfig& classifier,
                       const fs::path& out_model, std::size_t threads = default_thread_count()) {
  const auto fm = selection::apply_mask(selection::load_mask(mask_json), features::read_csv(train_csv));
  auto model = ml::train(classifier, fm.values, fm.labels, fm.names, threads);
  ml::save_model(out_model, model);
  return model;
}

inline evaluate::EvaluationReport evaluate_model(const ml::Model& model, const features::FeatureMatrix& test,
                                                 std::size_t threads = default_thread_count()) {
  if (!model.feature_names().empty() && model.feature_names() != test.names)
    throw DimensionMismatch("test columns do not match the features the model was trained on");
  const auto predicted = model.predict(test.values, threads);
  return evaluate::metrics(evaluate::confusion(test.labels, predicted),
                           std::string(ml::display_name(model.tag())));
}

inline std::string_view extension(evaluate::Format f) {
  switch (f) {
    case evaluate::Format::Json: return "json";
    case evaluate::Format::Csv: return "csv";
    case evaluate::Format::Table: return "txt";
  }
  return "txt";
}

/// Writes `report.<ext>` and `confusion.svg` into `out_dir`.
inline evaluate::EvaluationReport evaluate(const fs::path& model_json, const fs::path& test_csv,
                                           const fs::path& mask_json, const fs::path& out_dir,
                                           evaluate::Format format = evaluate::Format::Json,
                                           std::size_t threads = default_thread_count()) {
  const auto model = ml::load_model(model_json);
  const auto test = selection::apply_mask(selection::load_mask(mask_json), features::read_csv(test_csv));
  auto report = evaluate_model(model, test, threads);
  io::write_file(out_dir / ("report." + std::string(extension(format))), evaluate::render(report, format));
  io::write_file(out_dir / "confusion.svg", svg::confusion_heatmap(report));
  return report;
}

struct BenchOptions {
  evaluate::Format format = evaluate::Format::Csv;
  bool record_timings = false;  // timings break byte-identical reruns
};

struct BenchResult {
  std::vector<evaluate::EvaluationReport> reports;  // in configured classifier order
  selection::SelectionMask mask;
  std::size_t train_rows = 0;
  std::size_t test_rows = 0;
  nlohmann::json manifest;
};

/// Full pipeline over every configured classifier. Each stage reads the
/// previous stage's files, so a rerun from any intermediate is identical.
///
/// out_dir/
///   dataset/  split/{train,test}/  features/{train,test}.csv  mask.json
///   models/<tag>.json  reports/<tag>.{json,svg}  bench.<ext>  manifest.json
inline BenchResult bench(const PipelineConfig& config, const fs::path& out_dir, const BenchOptions& options = {}) {
  config.validate();
  const std::size_t threads = config.dataset.threads;
  nlohmann::json timings = nlohmann::json::object();
  auto timed = [&](const char* stage, auto&& fn) {
    const auto t0 = std::chrono::steady_clock::now();
    fn();
    timings[stage] = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  };

  if (fs::exists(out_dir)) {
    for (const auto* sub : {"dataset", "split", "features", "models", "reports"}) fs::remove_all(out_dir / sub);
    fs::remove(out_dir / "mask.json");
    fs::remove(out_dir / "manifest.json");
    for (const auto* ext : {"json", "csv", "txt"}) fs::remove(out_dir / ("bench." + std::string(ext)));
  }
  fs::create_directories(out_dir);

  BenchResult result;
  timed("generate", [&] { save(generate_dataset(config.dataset), out_dir / "dataset"); });
  timed("split", [&] {
    auto parts = split_dataset(config, out_dir / "dataset", out_dir / "split");
    result.train_rows = parts.first.samples.size();
    result.test_rows = parts.second.samples.size();
  });
  timed("featurize", [&] {
    featurize(out_dir / "split" / "train", out_dir / "features" / "train.csv", threads);
    featurize(out_dir / "split" / "test", out_dir / "features" / "test.csv", threads);
  });
  timed("select",
        [&] { result.mask = select(out_dir / "features" / "train.csv", config.fdr_q, out_dir / "mask.json", threads); });

  const auto test = selection::apply_mask(selection::load_mask(out_dir / "mask.json"),
                                          features::read_csv(out_dir / "features" / "test.csv"));
  for (const auto& classifier : config.classifiers) {
    const std::string tag(ml::tag_of(classifier));
    const fs::path model_path = out_dir / "models" / (tag + ".json");
    timed(("train_" + tag).c_str(), [&] {
      train(out_dir / "features" / "train.csv", out_dir / "mask.json", classifier, model_path, threads);
    });
    timed(("evaluate_" + tag).c_str(), [&] {
      auto report = evaluate_model(ml::load_model(model_path), test, threads);
      io::write_json(out_dir / "reports" / (tag + ".json"), evaluate::to_json(report));
      io::write_file(out_dir / "reports" / (tag + ".svg"), svg::confusion_heatmap(report));
      result.reports.push_back(std::move(report));
    });
  }
  io::write_file(out_dir / ("bench." + std::string(extension(options.format))),
                 evaluate::render(result.reports, options.format));
  result.manifest = write_manifest(out_dir, "bench", config, options.record_timings ? timings : nlohmann::json());
  return result;
}

}  // namespace agcfdia::pipeline
