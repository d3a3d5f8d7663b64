#pragma once

// Randomized scenario generation, labeled dataset assembly, stratified
// splitting and the on-disk dataset directory.
//
// Directory layout:
//   meta.json    format tag, seed, config, histogram, redraws, per-sample scenarios
//   samples.csv  sample_id,label,channel,t,value   (one row per point, channels f1,f2,ptie)

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "agc.hpp"
#include "attack.hpp"
#include "errors.hpp"
#include "io.hpp"
#include "parallel.hpp"
#include "random.hpp"

namespace agcfdia {

inline constexpr int kClassCount = 4;

struct Range {
  double lo = 0.0;
  double hi = 0.0;

  friend bool operator==(const Range&, const Range&) = default;
};

struct ScenarioRanges {
  Range load_magnitude{0.01, 0.10};   // pu
  Range load_time{5.0, 20.0};         // s
  double attack_start_gap = 2.0;      // attack starts no earlier than load_time + gap
  double attack_start_latest = 45.0;  // s
  Range duration{10.0, 30.0};         // s
  Range magnitude_a{0.005, 0.05};     // |a|, Hz or pu
  Range slope_r{0.0005, 0.005};       // |r|, per second
  Range scale_lambda{0.1, 0.5};       // |lambda|

  void validate() const {
    for (const Range* r : {&load_magnitude, &load_time, &duration, &magnitude_a, &slope_r, &scale_lambda})
      if (!(r->lo <= r->hi) || !std::isfinite(r->lo) || !std::isfinite(r->hi))
        throw InvalidArgument("randomization ranges must satisfy lo <= hi");
    if (!(load_time.hi + attack_start_gap <= attack_start_latest))
      throw InvalidArgument("attack start window is empty");
    if (!(duration.lo > 0)) throw InvalidArgument("attack duration must be positive");
  }

  friend bool operator==(const ScenarioRanges&, const ScenarioRanges&) = default;
};

struct DatasetConfig {
  std::array<std::size_t, kClassCount> class_counts{200, 700, 700, 800};
  std::uint64_t seed = 20240521;
  ScenarioRanges ranges;
  AgcParameters plant;
  SimulationConfig simulation;
  std::size_t threads = default_thread_count();  // not part of the fingerprint

  void validate() const {
    ranges.validate();
    plant.validate();
    simulation.validate();
    if (ranges.attack_start_latest >= simulation.horizon)
      throw InvalidArgument("attacks must start inside the horizon");
  }
};

struct Sample {
  std::size_t id = 0;  // index in the generated dataset
  int label = 0;
  Scenario scenario;
  Trajectory trajectory;

  friend bool operator==(const Sample&, const Sample&) = default;
};

struct DatasetMetadata {
  std::uint64_t seed = 0;
  std::string config_hash;
  nlohmann::json config;  // creation parameters
  std::array<std::size_t, kClassCount> redraws{};

  friend bool operator==(const DatasetMetadata&, const DatasetMetadata&) = default;
};

struct Dataset {
  std::vector<Sample> samples;
  DatasetMetadata metadata;

  std::array<std::size_t, kClassCount> histogram() const {
    std::array<std::size_t, kClassCount> h{};
    for (const auto& s : samples) ++h.at(static_cast<std::size_t>(s.label));
    return h;
  }

  friend bool operator==(const Dataset&, const Dataset&) = default;
};

inline void to_json(nlohmann::json& j, const Range& r) { j = nlohmann::json::array({r.lo, r.hi}); }
inline void from_json(const nlohmann::json& j, Range& r) {
  if (!j.is_array() || j.size() != 2) throw FormatError("a range must be [lo, hi]");
  r.lo = j[0].get<double>();
  r.hi = j[1].get<double>();
}

inline void to_json(nlohmann::json& j, const ScenarioRanges& r) {
  j = nlohmann::json{{"load_magnitude", r.load_magnitude},
                     {"load_time", r.load_time},
                     {"attack_start_gap", r.attack_start_gap},
                     {"attack_start_latest", r.attack_start_latest},
                     {"duration", r.duration},
                     {"magnitude_a", r.magnitude_a},
                     {"slope_r", r.slope_r},
                     {"scale_lambda", r.scale_lambda}};
}

inline void from_json(const nlohmann::json& j, ScenarioRanges& r) {
  if (j.contains("load_magnitude")) r.load_magnitude = j.at("load_magnitude").get<Range>();
  if (j.contains("load_time")) r.load_time = j.at("load_time").get<Range>();
  r.attack_start_gap = j.value("attack_start_gap", r.attack_start_gap);
  r.attack_start_latest = j.value("attack_start_latest", r.attack_start_latest);
  if (j.contains("duration")) r.duration = j.at("duration").get<Range>();
  if (j.contains("magnitude_a")) r.magnitude_a = j.at("magnitude_a").get<Range>();
  if (j.contains("slope_r")) r.slope_r = j.at("slope_r").get<Range>();
  if (j.contains("scale_lambda")) r.scale_lambda = j.at("scale_lambda").get<Range>();
}

inline nlohmann::json config_json(const DatasetConfig& c) {
  return nlohmann::json{{"class_counts", c.class_counts},
                        {"seed", c.seed},
                        {"ranges", c.ranges},
                        {"plant", c.plant},
                        {"simulation", c.simulation}};
}

inline std::string config_hash(const DatasetConfig& c) {
  return io::hex64(io::fnv1a(config_json(c).dump()));
}

/// Draws one scenario of the given class. Draw order is fixed so a stream
/// position fully determines the result.
inline Scenario sample_scenario(Rng& rng, int label, const ScenarioRanges& ranges = {}) {
  if (label < 0 || label >= kClassCount) throw InvalidArgument("label must be in 0..3");
  Scenario s;
  s.label = label;
  s.load_area = 1 + static_cast<int>(rng.below(2));
  s.load_magnitude = rng.uniform(ranges.load_magnitude.lo, ranges.load_magnitude.hi);
  s.load_time = rng.uniform(ranges.load_time.lo, ranges.load_time.hi);
  if (label == 0) return s;

  AttackSpec a;
  a.target = kChannels[static_cast<std::size_t>(label - 1)];
  a.kind = kAttackKinds[rng.below(kAttackKinds.size())];
  a.start_t = rng.uniform(s.load_time + ranges.attack_start_gap, ranges.attack_start_latest);
  a.duration = rng.uniform(ranges.duration.lo, ranges.duration.hi);
  a.magnitude_a = rng.signed_magnitude(ranges.magnitude_a.lo, ranges.magnitude_a.hi);
  a.slope_r = rng.signed_magnitude(ranges.slope_r.lo, ranges.slope_r.hi);
  a.scale_lambda = rng.signed_magnitude(ranges.scale_lambda.lo, ranges.scale_lambda.hi);
  s.attack = a;
  return s;
}

/// Generates class_counts[c] samples per class. Sample i draws from its own
/// stream seeded by (seed, i, label), so output does not depend on the
/// thread schedule. Scenarios whose simulation blows up are redrawn from
/// the same stream.
inline Dataset generate_dataset(const DatasetConfig& config) {
  config.validate();

  std::vector<int> labels;
  for (int c = 0; c < kClassCount; ++c)
    labels.insert(labels.end(), config.class_counts[static_cast<std::size_t>(c)], c);

  Dataset ds;
  ds.samples.resize(labels.size());
  std::vector<std::size_t> redraws(labels.size(), 0);
  // A single sample may not exceed its whole class budget.
  std::array<std::size_t, kClassCount> budget{};
  for (int c = 0; c < kClassCount; ++c) budget[c] = 10 * config.class_counts[c];

  parallel_for(
      labels.size(),
      [&](std::size_t i) {
        const int label = labels[i];
        Rng rng(derive_seed(config.seed, {i, static_cast<std::uint64_t>(label)}));
        for (;;) {
          Scenario sc = sample_scenario(rng, label, config.ranges);
          try {
            ds.samples[i] = Sample{i, label, sc, simulate(config.plant, config.simulation, sc)};
            return;
          } catch (const NonFiniteState&) {
            if (++redraws[i] > budget[label])
              throw GenerationExhausted("class " + std::to_string(label) +
                                        " exceeded its redraw budget");
          }
        }
      },
      config.threads);

  for (std::size_t i = 0; i < labels.size(); ++i) {
    ds.metadata.redraws[labels[i]] += redraws[i];
  }
  for (int c = 0; c < kClassCount; ++c)
    if (ds.metadata.redraws[c] > budget[c])
      throw GenerationExhausted("class " + std::to_string(c) + " exceeded its redraw budget");
  ds.metadata.seed = config.seed;
  ds.metadata.config = config_json(config);
  ds.metadata.config_hash = config_hash(config);
  return ds;
}

/// Stratified split: each class is shuffled by `seed` and its first
/// round(fraction * n_c) members go to the training part. Both parts keep
/// the original sample order.
inline std::pair<Dataset, Dataset> split(const Dataset& ds, double train_fraction, std::uint64_t seed) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0))
    throw InvalidArgument("train_fraction must lie in (0, 1)");
  std::vector<char> in_train(ds.samples.size(), 0);
  for (int c = 0; c < kClassCount; ++c) {
    std::vector<std::size_t> members;
    for (std::size_t i = 0; i < ds.samples.size(); ++i)
      if (ds.samples[i].label == c) members.push_back(i);
    Rng rng(derive_seed(seed, {0x5b117ULL, static_cast<std::uint64_t>(c)}));
    rng.shuffle(members);
    const auto n_train = static_cast<std::size_t>(
        std::llround(train_fraction * static_cast<double>(members.size())));
    for (std::size_t k = 0; k < n_train; ++k) in_train[members[k]] = 1;
  }
  Dataset train, test;
  train.metadata = test.metadata = ds.metadata;
  for (std::size_t i = 0; i < ds.samples.size(); ++i)
    (in_train[i] ? train : test).samples.push_back(ds.samples[i]);
  return {std::move(train), std::move(test)};
}

inline void save(const Dataset& ds, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create '" + dir.string() + "': " + ec.message());

  nlohmann::json meta{{"format", "agcfdia-dataset"},
                      {"version", 1},
                      {"seed", ds.metadata.seed},
                      {"config_hash", ds.metadata.config_hash},
                      {"config", ds.metadata.config},
                      {"histogram", ds.histogram()},
                      {"redraws", ds.metadata.redraws},
                      {"sample_count", ds.samples.size()}};
  auto& entries = meta["samples"] = nlohmann::json::array();
  for (const auto& s : ds.samples)
    entries.push_back({{"sample_id", s.id},
                       {"label", s.label},
                       {"points", s.trajectory.size()},
                       {"scenario", s.scenario}});
  io::write_json(dir / "meta.json", meta);

  std::string csv = "sample_id,label,channel,t,value\n";
  for (const auto& s : ds.samples) {
    const std::string prefix = std::to_string(s.id) + "," + std::to_string(s.label) + ",";
    for (auto c : kChannels) {
      const auto& values = s.trajectory.channel(c);
      for (std::size_t k = 0; k < values.size(); ++k) {
        csv += prefix;
        csv += to_string(c);
        csv += ',';
        csv += io::format_exact(s.trajectory.t[k]);
        csv += ',';
        csv += io::format_exact(values[k]);
        csv += '\n';
      }
    }
  }
  io::write_file(dir / "samples.csv", csv);
}

inline Dataset load(const std::filesystem::path& dir) {
  const auto meta = io::read_json(dir / "meta.json");
  Dataset ds;
  try {
    if (meta.at("format").get<std::string>() != "agcfdia-dataset")
      throw FormatError("meta.json is not a dataset manifest");
    ds.metadata.seed = meta.at("seed").get<std::uint64_t>();
    ds.metadata.config_hash = meta.at("config_hash").get<std::string>();
    ds.metadata.config = meta.at("config");
    ds.metadata.redraws = meta.at("redraws").get<std::array<std::size_t, kClassCount>>();
    const auto& entries = meta.at("samples");
    ds.samples.resize(entries.size());
    for (std::size_t i = 0; i < entries.size(); ++i) {
      auto& s = ds.samples[i];
      s.id = entries[i].at("sample_id").get<std::size_t>();
      s.label = entries[i].at("label").get<int>();
      s.scenario = entries[i].at("scenario").get<Scenario>();
      const auto points = entries[i].at("points").get<std::size_t>();
      s.trajectory.t.reserve(points);
      for (auto c : kChannels) s.trajectory.channel(c).reserve(points);
      if (s.label < 0 || s.label >= kClassCount || s.label != s.scenario.label)
        throw FormatError("inconsistent label in meta.json", i);
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("meta.json: ") + e.what());
  }

  const std::string text = io::read_file(dir / "samples.csv");
  if (!text.empty() && text.back() != '\n') throw FormatError("samples.csv: truncated final record");
  io::LineReader reader(text);
  std::string_view line;
  if (!reader.next(line) || line != "sample_id,label,channel,t,value")
    throw FormatError("samples.csv: missing or wrong header", 0);

  std::vector<std::string_view> fields;
  std::size_t record = 0;
  std::size_t sample_pos = 0;
  while (reader.next(line)) {
    ++record;
    if (line.empty()) continue;
    io::split_fields(line, fields);
    if (fields.size() != 5) throw FormatError("samples.csv: expected 5 fields", record);
    const auto id = static_cast<std::size_t>(io::parse_int(fields[0], record));
    // Rows are grouped by sample in meta.json order.
    if (sample_pos < ds.samples.size() && ds.samples[sample_pos].id != id) ++sample_pos;
    if (sample_pos >= ds.samples.size() || ds.samples[sample_pos].id != id)
      throw FormatError("samples.csv: unexpected sample_id", record);
    auto& s = ds.samples[sample_pos];
    if (io::parse_int(fields[1], record) != s.label)
      throw FormatError("samples.csv: label disagrees with meta.json", record);
    const Channel ch = channel_from_string(fields[2]);
    const double t = io::parse_double(fields[3], record);
    const double v = io::parse_double(fields[4], record);
    auto& values = s.trajectory.channel(ch);
    if (ch == Channel::F1) {
      s.trajectory.t.push_back(t);
    } else if (values.size() >= s.trajectory.t.size() || s.trajectory.t[values.size()] != t) {
      throw FormatError("samples.csv: time base differs between channels", record);
    }
    values.push_back(v);
  }

  for (std::size_t i = 0; i < ds.samples.size(); ++i) {
    const auto& s = ds.samples[i];
    const auto expected = meta["samples"][i]["points"].get<std::size_t>();
    if (s.trajectory.t.size() != expected || s.trajectory.f1.size() != expected ||
        s.trajectory.f2.size() != expected || s.trajectory.ptie.size() != expected)
      throw FormatError("samples.csv: truncated or incomplete sample", i);
  }
  return ds;
}

}  // namespace agcfdia
