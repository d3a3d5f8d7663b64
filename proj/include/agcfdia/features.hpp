#pragma once

// Statistical and spectral feature catalog: 100 features per measurement
// channel, 300 per sample. Kernels are pure functions of a series.

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <cstddef>
#include <filesystem>
#include <mutex>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include <fftw3.h>

#include "agc.hpp"
#include "dataset.hpp"
#include "errors.hpp"
#include "io.hpp"
#include "matrix.hpp"
#include "parallel.hpp"

namespace agcfdia::features {

using Series = std::span<const double>;

inline constexpr std::size_t kFftOrders = 65;
inline constexpr std::size_t kPerChannel = 100;
inline constexpr std::size_t kTotal = 3 * kPerChannel;
inline constexpr std::size_t kMinLength = 130;

namespace detail {

inline void require_length(Series x, std::size_t min, const char* kernel) {
  if (x.size() < min)
    throw LengthError(std::string(kernel) + " needs at least " + std::to_string(min) +
                      " points, got " + std::to_string(x.size()));
}

inline double mean(Series x) {
  return std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
}

/// Population variance, two-pass.
inline double variance(Series x, double mu) {
  double acc = 0.0;
  for (double v : x) acc += (v - mu) * (v - mu);
  return acc / static_cast<double>(x.size());
}

inline std::vector<double> sorted(Series x) {
  std::vector<double> s(x.begin(), x.end());
  std::sort(s.begin(), s.end());
  return s;
}

}  // namespace detail

/// Linear-interpolation quantile of an ascending sequence, q in [0, 1].
inline double quantile_sorted(std::span<const double> s, double q) {
  const double h = q * static_cast<double>(s.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(h));
  if (lo + 1 >= s.size()) return s.back();
  const double frac = h - static_cast<double>(lo);
  return s[lo] + frac * (s[lo + 1] - s[lo]);
}

/// mean, median, variance, std, skewness, excess kurtosis, max, min, sum.
/// Variance is the 1/n estimator; a constant series has zero skew and kurtosis.
inline std::array<double, 9> basic_stats(Series x) {
  detail::require_length(x, 2, "basic_stats");
  const double n = static_cast<double>(x.size());
  const double sum = std::accumulate(x.begin(), x.end(), 0.0);
  const double mu = sum / n;
  double m2 = 0.0, m3 = 0.0, m4 = 0.0;
  for (double v : x) {
    const double d = v - mu;
    const double d2 = d * d;
    m2 += d2;
    m3 += d2 * d;
    m4 += d2 * d2;
  }
  m2 /= n;
  m3 /= n;
  m4 /= n;
  const double skew = m2 > 0.0 ? m3 / std::pow(m2, 1.5) : 0.0;
  const double kurt = m2 > 0.0 ? m4 / (m2 * m2) - 3.0 : 0.0;
  const auto s = detail::sorted(x);
  return {mu, quantile_sorted(s, 0.5), m2, std::sqrt(m2), skew, kurt, s.back(), s.front(), sum};
}

/// abs energy, abs sum of changes, mean abs change, and mean/std of the
/// absolute changes whose both endpoints lie in the [q0.25, q0.75] corridor.
inline std::array<double, 5> energy_change(Series x) {
  detail::require_length(x, 2, "energy_change");
  double energy = 0.0;
  for (double v : x) energy += v * v;
  double abs_changes = 0.0;
  for (std::size_t t = 1; t < x.size(); ++t) abs_changes += std::abs(x[t] - x[t - 1]);

  const auto s = detail::sorted(x);
  const double lo = quantile_sorted(s, 0.25);
  const double hi = quantile_sorted(s, 0.75);
  std::vector<double> corridor;
  for (std::size_t t = 1; t < x.size(); ++t) {
    const bool a = x[t - 1] >= lo && x[t - 1] <= hi;
    const bool b = x[t] >= lo && x[t] <= hi;
    if (a && b) corridor.push_back(std::abs(x[t] - x[t - 1]));
  }
  double cq_mean = 0.0, cq_std = 0.0;
  if (!corridor.empty()) {
    cq_mean = detail::mean(corridor);
    cq_std = std::sqrt(detail::variance(corridor, cq_mean));
  }
  return {energy, abs_changes, abs_changes / static_cast<double>(x.size() - 1), cq_mean, cq_std};
}

/// Sample entropy with Chebyshev distance, self-matches excluded; templates
/// start at indices [0, n - m) for both lengths m and m + 1. Undefined cases
/// (no matches of either length) give 0, as does a constant series.
inline double sample_entropy(Series x, std::size_t m = 2, double r_factor = 0.2) {
  const std::size_t n = x.size();
  if (n <= m + 1) return 0.0;
  const double mu = detail::mean(x);
  const double r = r_factor * std::sqrt(detail::variance(x, mu));
  std::size_t matches_m = 0, matches_m1 = 0;
  const std::size_t templates = n - m;
  for (std::size_t i = 0; i + 1 < templates; ++i) {
    for (std::size_t j = i + 1; j < templates; ++j) {
      bool close = true;
      for (std::size_t k = 0; k < m; ++k) {
        if (std::abs(x[i + k] - x[j + k]) > r) {
          close = false;
          break;
        }
      }
      if (!close) continue;
      ++matches_m;
      if (std::abs(x[i + m] - x[j + m]) <= r) ++matches_m1;
    }
  }
  if (matches_m == 0 || matches_m1 == 0) return 0.0;
  return -std::log(static_cast<double>(matches_m1) / static_cast<double>(matches_m));
}

/// Complexity estimate sqrt(sum of squared first differences), optionally on
/// the z-scored series (0 for a constant series).
inline double cid_ce(Series x, bool normalize) {
  double scale = 1.0, shift = 0.0;
  if (normalize) {
    shift = detail::mean(x);
    const double sd = std::sqrt(detail::variance(x, shift));
    if (sd == 0.0) return 0.0;
    scale = 1.0 / sd;
  }
  double acc = 0.0;
  for (std::size_t t = 1; t < x.size(); ++t) {
    const double d = ((x[t] - shift) - (x[t - 1] - shift)) * scale;
    acc += d * d;
  }
  return std::sqrt(acc);
}

/// sample entropy (m=2, r=0.2 std), normalized CID-CE, raw CID-CE.
inline std::array<double, 3> entropy_complexity(Series x) {
  detail::require_length(x, 4, "entropy_complexity");
  return {sample_entropy(x), cid_ce(x, true), cid_ce(x, false)};
}

/// Autocorrelation at lags 1..max_lag normalized by n and the series variance.
inline std::vector<double> autocorrelation(Series x, std::size_t max_lag) {
  const double n = static_cast<double>(x.size());
  const double mu = detail::mean(x);
  const double var = detail::variance(x, mu);
  std::vector<double> acf(max_lag, 0.0);
  if (var == 0.0) return acf;
  for (std::size_t k = 1; k <= max_lag; ++k) {
    double acc = 0.0;
    for (std::size_t t = 0; t + k < x.size(); ++t) acc += (x[t] - mu) * (x[t + k] - mu);
    acf[k - 1] = acc / (n * var);
  }
  return acf;
}

/// Third-order statistic mean_t x(t + 2 lag) x(t + lag) x(t).
inline double c3(Series x, std::size_t lag) {
  const std::size_t terms = x.size() - 2 * lag;
  double acc = 0.0;
  for (std::size_t t = 0; t < terms; ++t) acc += x[t + 2 * lag] * x[t + lag] * x[t];
  return acc / static_cast<double>(terms);
}

/// Variance of the autocorrelation over lags 1..32, then C3 at lags 1, 2, 3.
inline std::array<double, 4> autocorr_c3(Series x) {
  detail::require_length(x, 97, "autocorr_c3");
  const auto acf = autocorrelation(x, 32);
  const double acf_mean = detail::mean(acf);
  return {detail::variance(acf, acf_mean), c3(x, 1), c3(x, 2), c3(x, 3)};
}

/// One-sided DFT magnitudes |X_k|, k = 0..n/2, of the raw series.
inline std::vector<double> magnitude_spectrum(Series x) {
  static std::mutex planner_mutex;  // FFTW planning is not thread-safe
  const int n = static_cast<int>(x.size());
  const std::size_t bins = x.size() / 2 + 1;
  double* in = fftw_alloc_real(x.size());
  fftw_complex* out = fftw_alloc_complex(bins);
  fftw_plan plan;
  {
    std::lock_guard lock(planner_mutex);
    plan = fftw_plan_dft_r2c_1d(n, in, out, FFTW_ESTIMATE);
  }
  std::copy(x.begin(), x.end(), in);
  fftw_execute(plan);
  std::vector<double> mag(bins);
  for (std::size_t k = 0; k < bins; ++k) mag[k] = std::hypot(out[k][0], out[k][1]);
  {
    std::lock_guard lock(planner_mutex);
    fftw_destroy_plan(plan);
  }
  fftw_free(in);
  fftw_free(out);
  return mag;
}

/// Centroid, variance, skewness and (non-excess) kurtosis of the bin index
/// weighted by spectral magnitude.
inline std::array<double, 4> spectrum_moments(std::span<const double> mag) {
  double total = 0.0, m1 = 0.0;
  for (std::size_t k = 0; k < mag.size(); ++k) {
    total += mag[k];
    m1 += static_cast<double>(k) * mag[k];
  }
  if (total == 0.0) return {0.0, 0.0, 0.0, 0.0};
  const double centroid = m1 / total;
  double c2 = 0.0, c3 = 0.0, c4 = 0.0;
  for (std::size_t k = 0; k < mag.size(); ++k) {
    const double d = static_cast<double>(k) - centroid;
    const double w = mag[k] / total;
    c2 += w * d * d;
    c3 += w * d * d * d;
    c4 += w * d * d * d * d;
  }
  if (c2 == 0.0) return {centroid, 0.0, 0.0, 0.0};
  return {centroid, c2, c3 / std::pow(c2, 1.5), c4 / (c2 * c2)};
}

/// |X_k| for k = 0..64, then the four spectrum moments.
inline std::array<double, 69> fft_features(Series x) {
  detail::require_length(x, kMinLength, "fft_features");
  const auto mag = magnitude_spectrum(x);
  std::array<double, 69> out{};
  std::copy_n(mag.begin(), kFftOrders, out.begin());
  const auto moments = spectrum_moments(mag);
  std::copy(moments.begin(), moments.end(), out.begin() + kFftOrders);
  return out;
}

inline constexpr std::array<double, 8> kPercentiles{10, 20, 30, 40, 60, 70, 80, 90};
inline constexpr std::array<double, 2> kLargeStdRatios{0.25, 0.35};

/// Percentiles 10..90 (without the median) and the large-std flags
/// [std > r (max - min)] for r = 0.25, 0.35.
inline std::array<double, 10> percentiles_large_std(Series x) {
  detail::require_length(x, 2, "percentiles_large_std");
  const auto s = detail::sorted(x);
  std::array<double, 10> out{};
  for (std::size_t i = 0; i < kPercentiles.size(); ++i)
    out[i] = quantile_sorted(s, kPercentiles[i] / 100.0);
  const double sd = std::sqrt(detail::variance(x, detail::mean(x)));
  const double range = s.back() - s.front();
  for (std::size_t i = 0; i < kLargeStdRatios.size(); ++i)
    out[8 + i] = sd > kLargeStdRatios[i] * range ? 1.0 : 0.0;
  return out;
}

/// Feature names of one channel block, as "<feature>__<params>".
inline const std::vector<std::string>& channel_feature_names() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> v = {
        "mean__none", "median__none", "variance__none", "standard_deviation__none",
        "skewness__none", "kurtosis__none", "maximum__none", "minimum__none", "sum_values__none",
        "abs_energy__none", "absolute_sum_of_changes__none", "mean_abs_change__none",
        "change_quantiles__ql=0.25_qh=0.75_isabs=true_f=mean",
        "change_quantiles__ql=0.25_qh=0.75_isabs=true_f=std",
        "sample_entropy__m=2_r=0.2", "cid_ce__normalize=true", "cid_ce__normalize=false",
        "agg_autocorrelation__f=var_maxlag=32", "c3__lag=1", "c3__lag=2", "c3__lag=3"};
    for (std::size_t k = 0; k < kFftOrders; ++k)
      v.push_back("fft_coefficient__k=" + std::to_string(k) + "_attr=abs");
    for (const char* agg : {"centroid", "variance", "skew", "kurtosis"})
      v.push_back(std::string("fft_aggregated__aggtype=") + agg);
    for (double p : kPercentiles) v.push_back("quantile__q=0." + std::to_string(static_cast<int>(p) / 10));
    v.push_back("large_standard_deviation__r=0.25");
    v.push_back("large_standard_deviation__r=0.35");
    return v;
  }();
  return names;
}

/// The 300 global names "<channel>__<feature>__<params>", F1 block first.
inline const std::vector<std::string>& feature_names() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> v;
    for (auto c : kChannels)
      for (const auto& f : channel_feature_names()) v.push_back(std::string(to_string(c)) + "__" + f);
    return v;
  }();
  return names;
}

/// All 100 features of one channel in registry order (raw, may be non-finite).
inline std::array<double, kPerChannel> channel_features(Series x) {
  std::array<double, kPerChannel> out{};
  auto it = out.begin();
  auto put = [&it](const auto& block) { it = std::copy(block.begin(), block.end(), it); };
  put(basic_stats(x));
  put(energy_change(x));
  put(entropy_complexity(x));
  put(autocorr_c3(x));
  put(fft_features(x));
  put(percentiles_large_std(x));
  return out;
}

struct FeatureVector {
  std::vector<double> values;       // kTotal entries in registry order
  std::size_t replaced_nonfinite = 0;  // entries forced to 0
};

inline FeatureVector extract_sample(const Trajectory& traj) {
  FeatureVector fv;
  fv.values.reserve(kTotal);
  for (auto c : kChannels) {
    const auto& series = traj.channel(c);
    detail::require_length(series, kMinLength, "extract_sample");
    for (double v : channel_features(series)) {
      if (!std::isfinite(v)) {
        v = 0.0;
        ++fv.replaced_nonfinite;
      }
      fv.values.push_back(v);
    }
  }
  return fv;
}

struct FeatureMatrix {
  std::vector<std::string> names;
  Matrix values;            // rows = samples
  std::vector<int> labels;  // aligned with rows

  std::size_t rows() const { return values.rows(); }
  std::size_t cols() const { return values.cols(); }

  void validate() const {
    if (names.size() != values.cols()) throw DimensionMismatch("header and column count differ");
    if (labels.size() != values.rows()) throw DimensionMismatch("label count differs from rows");
  }

  friend bool operator==(const FeatureMatrix&, const FeatureMatrix&) = default;
};

inline FeatureMatrix featurize(const Dataset& ds, std::size_t threads = default_thread_count()) {
  FeatureMatrix fm;
  fm.names = feature_names();
  std::vector<FeatureVector> rows(ds.samples.size());
  parallel_for(
      ds.samples.size(), [&](std::size_t i) { rows[i] = extract_sample(ds.samples[i].trajectory); },
      threads);
  std::vector<double> data;
  data.reserve(rows.size() * kTotal);
  for (const auto& r : rows) data.insert(data.end(), r.values.begin(), r.values.end());
  fm.values = Matrix(rows.size(), kTotal, std::move(data));
  for (const auto& s : ds.samples) fm.labels.push_back(s.label);
  return fm;
}

/// Header: feature names then `label`; values in shortest round-trip form.
inline void write_csv(const std::filesystem::path& path, const FeatureMatrix& fm) {
  fm.validate();
  std::string out;
  for (const auto& n : fm.names) {
    out += n;
    out += ',';
  }
  out += "label\n";
  for (std::size_t r = 0; r < fm.rows(); ++r) {
    for (double v : fm.values.row(r)) {
      out += io::format_exact(v);
      out += ',';
    }
    out += std::to_string(fm.labels[r]);
    out += '\n';
  }
  io::write_file(path, out);
}

inline FeatureMatrix read_csv(const std::filesystem::path& path) {
  const std::string text = io::read_file(path);
  io::LineReader reader(text);
  std::string_view line;
  if (!reader.next(line)) throw FormatError(path.string() + ": empty feature matrix", 0);
  std::vector<std::string_view> fields;
  io::split_fields(line, fields);
  if (fields.size() < 2 || fields.back() != "label")
    throw FormatError(path.string() + ": last column must be 'label'", 0);
  FeatureMatrix fm;
  for (std::size_t i = 0; i + 1 < fields.size(); ++i) fm.names.emplace_back(fields[i]);
  const std::size_t cols = fm.names.size();
  std::vector<double> data;
  std::size_t record = 0;
  while (reader.next(line)) {
    ++record;
    if (line.empty()) continue;
    io::split_fields(line, fields);
    if (fields.size() != cols + 1)
      throw FormatError(path.string() + ": wrong field count", record);
    for (std::size_t i = 0; i < cols; ++i) data.push_back(io::parse_double(fields[i], record));
    const auto label = io::parse_int(fields[cols], record);
    if (label < 0 || label > 3) throw FormatError(path.string() + ": label out of range", record);
    fm.labels.push_back(static_cast<int>(label));
  }
  fm.values = Matrix(fm.labels.size(), cols, std::move(data));
  return fm;
}

}  // namespace agcfdia::features
