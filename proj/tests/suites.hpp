#pragma once

// Check suites shared by the unit tests and the acceptance binary. Each
// returns a verdict plus a one-line detail for reporting.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <agcfdia/agc.hpp>
#include <agcfdia/evaluate.hpp>
#include <agcfdia/features.hpp>
#include <agcfdia/ml/classifier.hpp>
#include <agcfdia/selection.hpp>

#include "oracles/linear_agc.hpp"
#include "oracles/ml_oracles.hpp"
#include "oracles/naive_features.hpp"
#include "oracles/selection_oracles.hpp"

namespace suites {

struct Verdict {
  bool pass = true;
  std::string detail;
};

// ---- metric reproduction ------------------------------------------------------

using Percent = std::array<std::array<double, 4>, 4>;
inline constexpr std::array<double, 4> kTestCounts{40, 140, 140, 160};

inline const Percent kDecisionTreePercent{{{100, 0, 0, 0},
                                           {0, 82.76, 11.72, 5.52},
                                           {0.74, 7.42, 86.67, 5.17},
                                           {0, 3.80, 4.43, 91.77}}};
inline const Percent kRandomForestPercent{{{97.62, 2.38, 0, 0},
                                           {0, 91.03, 5.52, 3.45},
                                           {0, 2.22, 95.56, 2.22},
                                           {0, 0.63, 0.63, 98.74}}};

inline agcfdia::evaluate::EvaluationReport table_report(const Percent& pct, const char* name) {
  return agcfdia::evaluate::metrics(agcfdia::evaluate::counts_from_percent(pct, kTestCounts), name);
}

// ---- random series ---------------------------------------------------------------

/// AR(1) noise plus a sinusoid, a step and an offset, with random scales.
inline std::vector<double> random_series(std::mt19937_64& rng, std::size_t n) {
  std::normal_distribution<double> g(0.0, 1.0);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double scale = std::pow(10.0, -3.0 + 3.0 * u(rng));
  const double offset = (u(rng) - 0.5) * 4.0 * scale;
  const double phi = 0.98 * u(rng);
  const double freq = 0.5 * u(rng), amp = 2.0 * u(rng) * scale;
  const std::size_t step_at = static_cast<std::size_t>(u(rng) * static_cast<double>(n));
  const double step = (u(rng) - 0.5) * 3.0 * scale;
  std::vector<double> x(n);
  double ar = 0.0;
  for (std::size_t t = 0; t < n; ++t) {
    ar = phi * ar + scale * g(rng);
    x[t] = offset + ar + amp * std::sin(freq * static_cast<double>(t)) + (t >= step_at ? step : 0.0);
  }
  return x;
}

// ---- feature oracles -----------------------------------------------------------

struct FeatureComparison {
  std::array<double, 100> worst_error{};  // scaled error per feature
  std::size_t series = 0;
};

/// |a - b| measured against the tolerance of feature i: relative 1e-9
/// (1e-6 for sample entropy) of the oracle value, with an absolute floor of
/// 1e-12 times the feature's natural magnitude for values that cancel to ~0.
inline double scaled_error(std::size_t i, double got, double want, double magnitude) {
  const double rel = i == 14 ? 1e-6 : 1e-9;
  const double tol = rel * std::abs(want) + 1e-12 * magnitude;
  return std::abs(got - want) / tol;
}

inline FeatureComparison compare_features(std::size_t count, std::size_t length, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  FeatureComparison out;
  out.series = count;
  for (std::size_t s = 0; s < count; ++s) {
    const auto x = random_series(rng, length);
    const auto got = agcfdia::features::channel_features(x);
    const auto want = oracle::channel_features(x);
    double max_abs = 0.0, energy = 0.0;
    for (double v : x) {
      max_abs = std::max(max_abs, std::abs(v));
      energy += v * v;
    }
    for (std::size_t i = 0; i < 100; ++i) {
      // natural magnitude: sums scale with n, moments with powers of max|x|
      double magnitude = 1.0;
      if (i == 8 || i == 10 || (i >= 21 && i < 86)) magnitude = static_cast<double>(length) * max_abs;
      else if (i == 9) magnitude = energy;
      else if (i == 2) magnitude = max_abs * max_abs;
      else if (i >= 18 && i <= 20) magnitude = max_abs * max_abs * max_abs;
      else if (i < 14 || i >= 90) magnitude = max_abs;
      out.worst_error[i] = std::max(out.worst_error[i], scaled_error(i, got[i], want[i], magnitude));
    }
  }
  return out;
}

inline Verdict feature_oracle_suite(std::size_t count = 100, std::size_t length = 800, std::uint64_t seed = 7) {
  const auto cmp = compare_features(count, length, seed);
  const auto& names = agcfdia::features::channel_feature_names();
  std::size_t worst = 0, failing = 0;
  for (std::size_t i = 0; i < 100; ++i) {
    if (cmp.worst_error[i] > cmp.worst_error[worst]) worst = i;
    if (!(cmp.worst_error[i] <= 1.0)) ++failing;
  }
  std::ostringstream os;
  os << failing << "/100 features outside tolerance over " << count << " series; worst " << names[worst]
     << " at " << cmp.worst_error[worst] << " x tolerance";
  return {failing == 0, os.str()};
}

// ---- BH oracle ---------------------------------------------------------------------

inline Verdict bh_oracle_suite(std::size_t trials = 1000, std::uint64_t seed = 11) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> len(1, 500);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const std::array<double, 5> qs{0.01, 0.05, 0.1, 0.2, 0.5};
  std::size_t mismatches = 0, monotonicity = 0, bonferroni = 0;
  for (std::size_t t = 0; t < trials; ++t) {
    const std::size_t m = len(rng);
    std::vector<double> p(m);
    const double signal = u(rng);  // fraction of small p-values
    for (auto& v : p) v = u(rng) < signal ? std::pow(u(rng), 6.0) : u(rng);
    if (t % 10 == 0 && m > 1) p[m / 2] = p[0];  // exact ties
    std::vector<bool> previous(m, false);
    for (double q : qs) {
      const auto keep = agcfdia::selection::benjamini_hochberg(p, q);
      if (keep != oracle::bh_adjusted(p, q)) ++mismatches;
      const auto bonf = oracle::bonferroni(p, q);
      for (std::size_t i = 0; i < m; ++i) {
        if (previous[i] && !keep[i]) ++monotonicity;
        if (bonf[i] && !keep[i]) ++bonferroni;
      }
      previous = keep;
    }
  }
  std::ostringstream os;
  os << trials << " vectors x " << qs.size() << " levels: " << mismatches << " oracle mismatches, " << monotonicity
     << " monotonicity violations, " << bonferroni << " Bonferroni-superset violations";
  return {mismatches == 0 && monotonicity == 0 && bonferroni == 0, os.str()};
}

// ---- simulator invariants ------------------------------------------------------------

inline bool zero_fixed_point() {
  agcfdia::AgcParameters p;
  const auto s0 = agcfdia::SystemState::zero(p, 0.005);
  auto s = s0;
  for (int n = 0; n < 1000; ++n) s = agcfdia::step_dynamics(s, p, {0.0, 0.0}, s.true_channels(), 0.005);
  agcfdia::SimulationConfig cfg;
  agcfdia::Scenario quiet;
  const auto traj = agcfdia::simulate(p, cfg, quiet);
  bool zero = traj.size() == 800;
  for (auto c : agcfdia::kChannels)
    for (double v : traj.channel(c)) zero = zero && v == 0.0;
  return zero && s.delta_f == s0.delta_f && s.delta_Pm == s0.delta_Pm && s.delta_Pv == s0.delta_Pv &&
         s.integrator_x == s0.integrator_x && s.delta_Ptie == s0.delta_Ptie;
}

/// Random scenario with every attack kind, moderate loads and attacks.
inline agcfdia::Scenario random_scenario(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  agcfdia::Scenario s;
  s.load_area = u(rng) < 0.5 ? 1 : 2;
  s.load_magnitude = (u(rng) < 0.5 ? -1.0 : 1.0) * (0.01 + 0.09 * u(rng));
  s.load_time = 5.0 + 20.0 * u(rng);
  const int label = static_cast<int>(u(rng) * 4.0);
  s.label = label;
  if (label > 0) {
    agcfdia::AttackSpec a;
    a.target = agcfdia::kChannels[static_cast<std::size_t>(label - 1)];
    a.kind = agcfdia::kAttackKinds[static_cast<std::size_t>(u(rng) * 5.0)];
    a.start_t = s.load_time + 2.0 + 30.0 * u(rng);
    a.duration = 5.0 + 30.0 * u(rng);
    a.magnitude_a = (u(rng) - 0.5) * 0.04;
    a.slope_r = (u(rng) - 0.5) * 0.004;
    a.scale_lambda = (u(rng) - 0.5) * 1.0;
    s.attack = a;
  }
  return s;
}

inline Verdict grc_bound_suite(std::size_t scenarios = 100, std::uint64_t seed = 5) {
  std::mt19937_64 rng(seed);
  agcfdia::AgcParameters p;
  agcfdia::SimulationConfig cfg;
  double worst = 0.0;
  std::size_t violations = 0;
  for (std::size_t k = 0; k < scenarios; ++k) {
    const auto sc = random_scenario(rng);
    std::array<double, 2> prev{};
    bool first = true;
    agcfdia::simulate(p, cfg, sc, [&](std::size_t, const agcfdia::SystemState& s) {
      if (!first)
        for (int i = 0; i < 2; ++i) {
          const double jump = std::abs(s.delta_Pm[i] - prev[i]);
          worst = std::max(worst, jump);
          if (jump > p.grc_limit * cfg.dt + 1e-15) ++violations;
        }
      prev = s.delta_Pm;
      first = false;
    });
  }
  std::ostringstream os;
  os << scenarios << " scenarios, largest step " << worst << " vs bound " << p.grc_limit * cfg.dt << ", "
     << violations << " violations";
  return {violations == 0, os.str()};
}

inline Verdict deadband_suite(std::size_t inputs = 1000000, std::uint64_t seed = 3) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> width(0.0, 0.01);
  std::uniform_real_distribution<double> scale(0.0, 3.0);
  std::uniform_real_distribution<double> sign(-1.0, 1.0);
  std::size_t violations = 0;
  for (std::size_t k = 0; k < inputs; ++k) {
    const double w = width(rng);
    const double u = sign(rng) * scale(rng) * w;  // about a third inside the band
    const double y = agcfdia::deadband(u, w);
    const bool inside = std::abs(u) <= w / 2;
    if ((y == 0.0) != inside) ++violations;
    if (agcfdia::deadband(-u, w) != -y) ++violations;
  }
  std::ostringstream os;
  os << inputs << " inputs, " << violations << " violations of zero-iff-inside-band or odd symmetry";
  return {violations == 0, os.str()};
}

/// Largest deviation of simulate() from the linear reference relative to the
/// largest reference magnitude, over all three channels.
inline double linear_limit_error(double load, int area, double load_time) {
  agcfdia::AgcParameters p;
  p.gdb_width = 0.0;
  p.grc_limit = std::numeric_limits<double>::infinity();
  p.ace_delay_tau = 0.0;
  agcfdia::SimulationConfig cfg;
  agcfdia::Scenario sc;
  sc.load_area = area;
  sc.load_magnitude = load;
  sc.load_time = load_time;
  const auto traj = agcfdia::simulate(p, cfg, sc);
  const auto ref = oracle::linear_reference(p, cfg, area, load, load_time);
  double worst = 0.0;
  for (std::size_t c = 0; c < 3; ++c) {
    const auto& got = traj.channel(agcfdia::kChannels[c]);
    double peak = 0.0, diff = 0.0;
    for (std::size_t k = 0; k < got.size(); ++k) {
      peak = std::max(peak, std::abs(ref[c][k]));
      diff = std::max(diff, std::abs(got[k] - ref[c][k]));
    }
    worst = std::max(worst, peak > 0 ? diff / peak : diff);
  }
  return worst;
}

inline Verdict linear_limit_suite() {
  double worst = 0.0;
  for (double load : {0.001, 0.01, -0.02})
    for (int area : {1, 2}) worst = std::max(worst, linear_limit_error(load, area, 10.0));
  std::ostringstream os;
  os << "max relative deviation from linear reference " << worst << " (tolerance 1e-6)";
  return {worst <= 1e-6, os.str()};
}

// ---- ML properties ------------------------------------------------------------------------

struct Toy {
  agcfdia::Matrix X;
  std::vector<int> y;
};

/// Four overlapping Gaussian blobs in `d` dimensions with distinct rows.
inline Toy toy_problem(std::size_t n, std::size_t d, std::uint64_t seed, double spread = 1.0) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, spread);
  Toy t;
  t.X = agcfdia::Matrix(n, d);
  for (std::size_t r = 0; r < n; ++r) {
    const int label = static_cast<int>(r % 4);
    t.y.push_back(label);
    for (std::size_t c = 0; c < d; ++c)
      t.X(r, c) = g(rng) + (c % 4 == static_cast<std::size_t>(label) ? 2.0 : 0.0) + 0.1 * static_cast<double>(c);
  }
  return t;
}

/// Small-but-real hyperparameters so the suite runs in seconds.
inline agcfdia::ml::ClassifierConfig quick_config(std::string_view tag, std::uint64_t seed) {
  auto cfg = agcfdia::ml::default_config(tag, seed);
  if (auto* rf = std::get_if<agcfdia::ml::RandomForestConfig>(&cfg)) rf->n_trees = 60;
  if (auto* gbt = std::get_if<agcfdia::ml::GbtConfig>(&cfg)) gbt->n_rounds = 40;
  return cfg;
}

inline Verdict determinism_suite() {
  const auto toy = toy_problem(240, 12, 21);
  std::size_t differing = 0;
  std::string which;
  for (auto tag : agcfdia::ml::kClassifierTags) {
    const auto cfg = quick_config(tag, 99);
    const auto a = agcfdia::ml::train(cfg, toy.X, toy.y, {}, 1);
    const auto b = agcfdia::ml::train(cfg, toy.X, toy.y, {}, 4);
    const bool same = agcfdia::ml::to_json(a).dump() == agcfdia::ml::to_json(b).dump() &&
                      a.predict_scores(toy.X) == b.predict_scores(toy.X);
    if (!same) {
      ++differing;
      which += std::string(which.empty() ? "" : ",") + std::string(tag);
    }
  }
  return {differing == 0, differing == 0 ? "six classifiers byte-identical across reruns and thread counts"
                                         : "non-deterministic: " + which};
}

inline Verdict softmax_gradient_suite(std::size_t trials = 1000, std::uint64_t seed = 17) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, 3.0);
  double worst = 0.0;
  for (std::size_t t = 0; t < trials; ++t) {
    agcfdia::ml::Scores z{};
    for (auto& v : z) v = g(rng);
    const int label = static_cast<int>(t % 4);
    const auto analytic = agcfdia::ml::cross_entropy_gradient(z, label);
    const auto numeric = oracle::numeric_gradient(
        [&](const std::array<double, 4>& w) { return agcfdia::ml::cross_entropy(w, label); }, z);
    for (std::size_t i = 0; i < 4; ++i) worst = std::max(worst, std::abs(analytic[i] - numeric[i]));
  }
  std::ostringstream os;
  os << "max |analytic - central difference| " << worst << " over " << trials << " logit vectors";
  return {worst <= 1e-6, os.str()};
}

inline Verdict tree_training_accuracy_suite() {
  const auto toy = toy_problem(400, 6, 23, 2.0);
  const auto model = agcfdia::ml::train(agcfdia::ml::DecisionTreeConfig{}, toy.X, toy.y);
  const auto pred = model.predict(toy.X);
  std::size_t wrong = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) wrong += pred[i] != toy.y[i];
  return {wrong == 0, std::to_string(wrong) + " training errors on 400 distinct overlapping rows"};
}

inline Verdict argmax_suite() {
  using agcfdia::ml::argmax;
  bool ok = argmax(std::array<double, 4>{0.25, 0.25, 0.25, 0.25}) == 0 &&
            argmax(std::array<double, 4>{0.1, 0.7, 0.1, 0.1}) == 1 &&
            argmax(std::array<double, 4>{0.0, 0.4, 0.4, 0.2}) == 1;
  // shifting every score by a constant keeps the decision (GBT margins, NB log-joints)
  const auto toy = toy_problem(200, 8, 29);
  std::size_t changed = 0;
  for (auto tag : {"gbt", "gnb"}) {
    const auto model = agcfdia::ml::train(quick_config(tag, 3), toy.X, toy.y);
    for (const auto& s : model.predict_scores(toy.X)) {
      auto shifted = s;
      for (auto& v : shifted) v += 12.5;
      changed += argmax(shifted) != argmax(s);
    }
  }
  ok = ok && changed == 0;
  return {ok, "tie -> lowest class; constant shift changed " + std::to_string(changed) + " decisions"};
}

inline Verdict standardization_suite() {
  const auto toy = toy_problem(240, 6, 31);
  agcfdia::Matrix scaled(toy.X.rows(), toy.X.cols());
  for (std::size_t r = 0; r < toy.X.rows(); ++r)
    for (std::size_t c = 0; c < toy.X.cols(); ++c)
      scaled(r, c) = 10.0 * (static_cast<double>(c) + 1.0) * toy.X(r, c) - 3.0 * static_cast<double>(c);
  std::size_t changed = 0;
  for (auto tag : {"knn", "svm"}) {
    const auto cfg = quick_config(tag, 5);
    const auto a = agcfdia::ml::train(cfg, toy.X, toy.y).predict(toy.X);
    const auto b = agcfdia::ml::train(cfg, scaled, toy.y).predict(scaled);
    for (std::size_t i = 0; i < a.size(); ++i) changed += a[i] != b[i];
  }
  return {changed == 0, "affine per-feature rescaling changed " + std::to_string(changed) + " KNN/SVM predictions"};
}

}  // namespace suites
