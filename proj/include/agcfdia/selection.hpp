#pragma once

// Per-feature Kruskal-Wallis p-values and Benjamini-Hochberg filtration.
// Masks are fitted on training rows only and then projected onto any matrix.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <filesystem>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include <boost/math/special_functions/gamma.hpp>
#include <json.hpp>

#include "errors.hpp"
#include "features.hpp"
#include "io.hpp"
#include "parallel.hpp"

namespace agcfdia::selection {

/// Upper tail of the chi-square distribution.
inline double chi_square_sf(double x, double dof) {
  if (!(x > 0.0)) return 1.0;
  return boost::math::gamma_q(0.5 * dof, 0.5 * x);
}

/// Average ranks (1-based) with ties sharing their mean rank. Also returns
/// sum over tie groups of (t^3 - t).
inline std::vector<double> average_ranks(std::span<const double> values, double& tie_term) {
  const std::size_t n = values.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  std::vector<double> ranks(n);
  tie_term = 0.0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i + 1;
    while (j < n && values[order[j]] == values[order[i]]) ++j;
    const double avg = 0.5 * static_cast<double>(i + 1 + j);  // mean of ranks i+1..j
    for (std::size_t k = i; k < j; ++k) ranks[order[k]] = avg;
    const double t = static_cast<double>(j - i);
    tie_term += t * t * t - t;
    i = j;
  }
  return ranks;
}

struct KruskalWallis {
  double statistic = 0.0;  // tie-corrected H
  double dof = 0.0;
  double p_value = 1.0;
};

/// Kruskal-Wallis H test across the classes present in `labels` (0..3).
/// Every present class needs at least two samples; a constant column gives p = 1.
inline KruskalWallis kruskal_wallis(std::span<const double> values, std::span<const int> labels) {
  if (values.size() != labels.size()) throw DimensionMismatch("values and labels differ in length");
  std::array<std::size_t, 4> counts{};
  for (int y : labels) {
    if (y < 0 || y > 3) throw LabelOutOfRange("label outside 0..3");
    ++counts[static_cast<std::size_t>(y)];
  }
  std::size_t groups = 0;
  for (auto c : counts) {
    if (c == 1) throw DegenerateLabels("a class has fewer than two samples");
    if (c >= 2) ++groups;
  }
  if (groups < 2) throw DegenerateLabels("fewer than two classes present");

  double tie_term = 0.0;
  const auto ranks = average_ranks(values, tie_term);
  const double n = static_cast<double>(values.size());
  const double correction = 1.0 - tie_term / (n * n * n - n);
  KruskalWallis out;
  out.dof = static_cast<double>(groups - 1);
  if (correction <= 0.0) return out;  // every value tied

  std::array<double, 4> rank_sums{};
  for (std::size_t i = 0; i < ranks.size(); ++i) rank_sums[static_cast<std::size_t>(labels[i])] += ranks[i];
  double h = 0.0;
  for (std::size_t c = 0; c < 4; ++c)
    if (counts[c] > 0) h += rank_sums[c] * rank_sums[c] / static_cast<double>(counts[c]);
  h = 12.0 / (n * (n + 1.0)) * h - 3.0 * (n + 1.0);
  out.statistic = std::max(0.0, h / correction);
  out.p_value = chi_square_sf(out.statistic, out.dof);
  return out;
}

inline double feature_p_value(std::span<const double> values, std::span<const int> labels) {
  return kruskal_wallis(values, labels).p_value;
}

/// Keep-mask of the Benjamini-Hochberg step-up procedure at level q: with
/// k the largest rank such that p_(k) <= k q / m, every p <= p_(k) is kept.
inline std::vector<bool> benjamini_hochberg(std::span<const double> p_values, double q) {
  if (!(q > 0.0 && q < 1.0)) throw InvalidArgument("q must lie in (0, 1)");
  for (double p : p_values)
    if (!(p >= 0.0 && p <= 1.0)) throw InvalidArgument("p-values must lie in [0, 1]");
  const std::size_t m = p_values.size();
  std::vector<double> sorted(p_values.begin(), p_values.end());
  std::sort(sorted.begin(), sorted.end());
  double cutoff = -1.0;
  for (std::size_t k = m; k >= 1; --k) {
    if (sorted[k - 1] <= static_cast<double>(k) / static_cast<double>(m) * q) {
      cutoff = sorted[k - 1];
      break;
    }
  }
  std::vector<bool> keep(m);
  for (std::size_t i = 0; i < m; ++i) keep[i] = p_values[i] <= cutoff;
  return keep;
}

struct SelectionMask {
  std::vector<std::size_t> kept_indices;  // ascending, into the fitted columns
  std::vector<std::string> names;         // names of all fitted columns
  std::vector<double> p_values;           // one per fitted column
  double fdr_q = 0.05;

  std::vector<std::string> kept_names() const {
    std::vector<std::string> out;
    for (auto i : kept_indices) out.push_back(names[i]);
    return out;
  }

  friend bool operator==(const SelectionMask&, const SelectionMask&) = default;
};

inline SelectionMask fit_mask(const features::FeatureMatrix& train, double q,
                              std::size_t threads = default_thread_count()) {
  train.validate();
  if (train.rows() == 0) throw InvalidArgument("cannot fit a mask on an empty matrix");
  SelectionMask mask;
  mask.fdr_q = q;
  mask.names = train.names;
  mask.p_values.resize(train.cols());
  parallel_for(
      train.cols(),
      [&](std::size_t c) { mask.p_values[c] = feature_p_value(train.values.column(c), train.labels); },
      threads);
  const auto keep = benjamini_hochberg(mask.p_values, q);
  for (std::size_t c = 0; c < keep.size(); ++c)
    if (keep[c]) mask.kept_indices.push_back(c);
  return mask;
}

/// Projects the columns kept by `mask`; the matrix must carry the same header
/// the mask was fitted on.
inline features::FeatureMatrix apply_mask(const SelectionMask& mask, const features::FeatureMatrix& fm) {
  fm.validate();
  if (fm.names != mask.names)
    throw DimensionMismatch("matrix columns do not match the columns the mask was fitted on");
  features::FeatureMatrix out;
  out.labels = fm.labels;
  for (auto i : mask.kept_indices) out.names.push_back(fm.names[i]);
  std::vector<double> data;
  data.reserve(fm.rows() * mask.kept_indices.size());
  for (std::size_t r = 0; r < fm.rows(); ++r) {
    const auto row = fm.values.row(r);
    for (auto i : mask.kept_indices) data.push_back(row[i]);
  }
  out.values = Matrix(fm.rows(), mask.kept_indices.size(), std::move(data));
  return out;
}

/// {"q", "kept", "p_values": {name: p}} plus the fitted column order.
inline nlohmann::json to_json(const SelectionMask& mask) {
  nlohmann::json p = nlohmann::json::object();
  nlohmann::json order = nlohmann::json::array();
  for (std::size_t i = 0; i < mask.names.size(); ++i) {
    order.push_back(mask.names[i]);
    p[mask.names[i]] = mask.p_values[i];
  }
  return {{"format", "agcfdia-mask"}, {"version", 1},       {"q", mask.fdr_q},
          {"kept", mask.kept_names()}, {"columns", order}, {"p_values", p}};
}

inline SelectionMask mask_from_json(const nlohmann::json& j) {
  try {
    if (j.at("format").get<std::string>() != "agcfdia-mask") throw FormatError("not a mask file");
    SelectionMask mask;
    mask.fdr_q = j.at("q").get<double>();
    mask.names = j.at("columns").get<std::vector<std::string>>();
    for (const auto& n : mask.names) mask.p_values.push_back(j.at("p_values").at(n).get<double>());
    const auto kept = j.at("kept").get<std::vector<std::string>>();
    std::size_t next = 0;
    for (const auto& k : kept) {
      while (next < mask.names.size() && mask.names[next] != k) ++next;
      if (next == mask.names.size()) throw FormatError("kept feature '" + k + "' is not a column");
      mask.kept_indices.push_back(next++);
    }
    return mask;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("mask: ") + e.what());
  }
}

inline void save_mask(const std::filesystem::path& path, const SelectionMask& mask) {
  io::write_json(path, to_json(mask));
}

inline SelectionMask load_mask(const std::filesystem::path& path) {
  return mask_from_json(io::read_json(path));
}

}  // namespace agcfdia::selection
