#pragma once

// Linear state-space reference of the two-area loop (no dead-band, no rate
// limit, no delay) stepped by forward Euler on an Eigen matrix:
//   z = [df1, df2, Pm1, Pm2, Pv1, Pv2, x1, x2, Ptie],  z' = A z + E load.

#include <array>
#include <cstddef>
#include <vector>

#include <Eigen/Dense>

#include <agcfdia/agc.hpp>

namespace oracle {

struct LinearModel {
  Eigen::Matrix<double, 9, 9> A = Eigen::Matrix<double, 9, 9>::Zero();
  Eigen::Matrix<double, 9, 2> E = Eigen::Matrix<double, 9, 2>::Zero();
};

inline LinearModel linear_model(const agcfdia::AgcParameters& p) {
  enum { F1, F2, PM1, PM2, PV1, PV2, X1, X2, TIE };
  LinearModel m;
  const int f[2] = {F1, F2}, pm[2] = {PM1, PM2}, pv[2] = {PV1, PV2}, x[2] = {X1, X2};
  const double sign[2] = {1.0, -1.0};
  for (int i = 0; i < 2; ++i) {
    const auto& a = p.area[static_cast<std::size_t>(i)];
    const double g = p.base_frequency / (2.0 * a.inertia_H);
    m.A(f[i], pm[i]) = g;
    m.A(f[i], TIE) = -sign[i] * g;
    m.A(f[i], f[i]) = -g * a.damping_D;
    m.E(f[i], i) = -g;
    m.A(pm[i], pv[i]) = 1.0 / a.turbine_Tt;
    m.A(pm[i], pm[i]) = -1.0 / a.turbine_Tt;
    m.A(pv[i], x[i]) = 1.0 / a.governor_Tg;
    m.A(pv[i], f[i]) = -1.0 / (a.droop_R * a.governor_Tg);
    m.A(pv[i], pv[i]) = -1.0 / a.governor_Tg;
    m.A(x[i], TIE) = -a.integral_gain_KI * sign[i];
    m.A(x[i], f[i]) = -a.integral_gain_KI * a.bias_B;
  }
  m.A(TIE, F1) = p.sync_coeff_Ps;
  m.A(TIE, F2) = -p.sync_coeff_Ps;
  return m;
}

/// Samples (df1, df2, Ptie) at the measurement rate, like simulate().
inline std::array<std::vector<double>, 3> linear_reference(const agcfdia::AgcParameters& p,
                                                           const agcfdia::SimulationConfig& cfg,
                                                           int load_area, double load, double load_time) {
  const auto m = linear_model(p);
  const Eigen::Matrix<double, 9, 9> step = Eigen::Matrix<double, 9, 9>::Identity() + cfg.dt * m.A;
  Eigen::Matrix<double, 9, 1> z = Eigen::Matrix<double, 9, 1>::Zero();
  std::array<std::vector<double>, 3> out;
  const std::size_t steps = cfg.step_count(), decim = cfg.decimation();
  for (std::size_t n = 0; n < steps; ++n) {
    const double t = static_cast<double>(n) * cfg.dt;
    if (n % decim == 0) {
      out[0].push_back(z(0));
      out[1].push_back(z(1));
      out[2].push_back(z(8));
    }
    Eigen::Vector2d u = Eigen::Vector2d::Zero();
    if (t >= load_time) u(load_area - 1) = load;
    z = step * z + cfg.dt * (m.E * u);
  }
  return out;
}

}  // namespace oracle
