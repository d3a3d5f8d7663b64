#pragma once

// Nonlinear two-area automatic generation control loop.
//
// Per area i (Hz for frequency, pu for power):
//   swing      (2 H_i / f0) dDf_i/dt = DPm_i - DPD_i - s_i DPtie - D_i Df_i
//   turbine    T_t dDPm_i/dt = DPv_i - DPm_i            (rate limited, GRC)
//   governor   T_g dDPv_i/dt = db(x_i - Df_i / R_i) - DPv_i   (dead-band, GDB)
//   integral   dx_i/dt = -K_I,i * ACE_i(t - tau)
//   ACE_i      = s_i DPtie_meas + B_i Df_i_meas,   B_i = 1/R_i + D_i
//   tie line   dDPtie/dt = Ps (Df_1 - Df_2),       s_1 = +1, s_2 = -1
//
// ACE is formed from the measured (possibly attacked) channels; everything
// else uses the true plant state.

#include <array>
#include <cmath>
#include <cstddef>
#include <cstdio>
#include <fstream>
#include <limits>
#include <string>
#include <vector>

#include <json.hpp>

#include "attack.hpp"
#include "errors.hpp"

namespace agcfdia {

struct AreaParameters {
  double inertia_H = 5.0;         // pu s
  double damping_D = 0.00833;     // pu/Hz
  double droop_R = 2.4;           // Hz/pu
  double governor_Tg = 0.08;      // s
  double turbine_Tt = 0.3;        // s
  double bias_B = 1.0 / 2.4 + 0.00833;  // pu/Hz
  double integral_gain_KI = 0.15; // 1/s

  friend bool operator==(const AreaParameters&, const AreaParameters&) = default;
};

struct AgcParameters {
  std::array<AreaParameters, 2> area{};
  double sync_coeff_Ps = 0.545;  // pu/(Hz s)
  double grc_limit = 0.05;       // pu/s
  double gdb_width = 0.0006;     // pu, total width
  double ace_delay_tau = 2.0;    // s
  double base_frequency = 60.0;  // Hz

  /// Frequency bias recomputed from droop and damping.
  static double bias_for(const AreaParameters& a) { return 1.0 / a.droop_R + a.damping_D; }

  AgcParameters& recompute_bias() {
    for (auto& a : area) a.bias_B = bias_for(a);
    return *this;
  }

  void validate() const {
    for (const auto& a : area) {
      if (!(a.inertia_H > 0 && a.damping_D > 0 && a.droop_R > 0 && a.governor_Tg > 0 &&
            a.turbine_Tt > 0 && a.integral_gain_KI > 0))
        throw InvalidArgument("area parameters must be strictly positive");
      const double b = bias_for(a);
      if (!(std::abs(a.bias_B - b) <= 1e-12 * std::abs(b)))
        throw InvalidArgument("bias_B must equal 1/droop_R + damping_D");
    }
    if (!(sync_coeff_Ps > 0 && base_frequency > 0))
      throw InvalidArgument("sync_coeff_Ps and base_frequency must be positive");
    if (!(grc_limit > 0)) throw InvalidArgument("grc_limit must be positive");
    if (!(gdb_width >= 0)) throw InvalidArgument("gdb_width must be non-negative");
    if (!(ace_delay_tau >= 0) || !std::isfinite(ace_delay_tau))
      throw InvalidArgument("ace_delay_tau must be non-negative");
  }

  friend bool operator==(const AgcParameters&, const AgcParameters&) = default;
};

struct SimulationConfig {
  double dt = 0.005;              // s
  double horizon = 80.0;          // s
  double measurement_rate = 10.0; // Hz

  std::size_t step_count() const { return static_cast<std::size_t>(std::llround(horizon / dt)); }
  std::size_t decimation() const {
    return static_cast<std::size_t>(std::llround(1.0 / (dt * measurement_rate)));
  }
  std::size_t sample_count() const { return step_count() / decimation(); }

  void validate() const {
    if (!(dt > 0) || !(horizon > 0) || !(measurement_rate > 0))
      throw InvalidArgument("dt, horizon and measurement_rate must be positive");
    const double steps = horizon / dt;
    if (std::abs(steps - std::round(steps)) > 1e-9 * steps)
      throw InvalidArgument("horizon must be an integer multiple of dt");
    const double per_sample = 1.0 / (dt * measurement_rate);
    if (per_sample < 1.0 - 1e-9 || std::abs(per_sample - std::round(per_sample)) > 1e-9 * per_sample)
      throw InvalidArgument("measurement_rate must divide 1/dt");
    if (step_count() % decimation() != 0)
      throw InvalidArgument("horizon must hold a whole number of measurement samples");
  }

  friend bool operator==(const SimulationConfig&, const SimulationConfig&) = default;
};

/// Fixed-length FIFO holding the ACE history of both areas.
class AceDelayLine {
 public:
  AceDelayLine() = default;
  explicit AceDelayLine(std::size_t delay_steps)
      : buffer_{std::vector<double>(delay_steps, 0.0), std::vector<double>(delay_steps, 0.0)} {}

  std::size_t delay_steps() const { return buffer_[0].size(); }

  /// Pushes the current ACE pair and returns the pair pushed delay_steps() calls ago.
  std::array<double, 2> push(const std::array<double, 2>& ace) {
    if (delay_steps() == 0) return ace;
    std::array<double, 2> out{buffer_[0][head_], buffer_[1][head_]};
    buffer_[0][head_] = ace[0];
    buffer_[1][head_] = ace[1];
    head_ = (head_ + 1) % delay_steps();
    return out;
  }

  bool all_finite() const {
    for (const auto& b : buffer_)
      for (double v : b)
        if (!std::isfinite(v)) return false;
    return true;
  }

  friend bool operator==(const AceDelayLine&, const AceDelayLine&) = default;

 private:
  std::array<std::vector<double>, 2> buffer_{};
  std::size_t head_ = 0;
};

struct SystemState {
  std::array<double, 2> delta_f{};       // Hz
  std::array<double, 2> delta_Pm{};      // pu
  std::array<double, 2> delta_Pv{};      // pu
  std::array<double, 2> integrator_x{};  // pu
  double delta_Ptie = 0.0;               // pu, flow from area 1 to area 2
  AceDelayLine ace_delay;

  /// Equilibrium state with a delay line sized round(tau / dt).
  static SystemState zero(const AgcParameters& p, double dt) {
    SystemState s;
    s.ace_delay = AceDelayLine(static_cast<std::size_t>(std::llround(p.ace_delay_tau / dt)));
    return s;
  }

  ChannelValues true_channels() const { return {delta_f[0], delta_f[1], delta_Ptie}; }

  bool all_finite() const {
    for (int i = 0; i < 2; ++i)
      if (!std::isfinite(delta_f[i]) || !std::isfinite(delta_Pm[i]) ||
          !std::isfinite(delta_Pv[i]) || !std::isfinite(integrator_x[i]))
        return false;
    return std::isfinite(delta_Ptie) && ace_delay.all_finite();
  }

  friend bool operator==(const SystemState&, const SystemState&) = default;
};

struct Trajectory {
  std::vector<double> t;
  std::vector<double> f1;    // Hz
  std::vector<double> f2;    // Hz
  std::vector<double> ptie;  // pu

  std::size_t size() const { return t.size(); }

  const std::vector<double>& channel(Channel c) const {
    return c == Channel::F1 ? f1 : c == Channel::F2 ? f2 : ptie;
  }
  std::vector<double>& channel(Channel c) {
    return c == Channel::F1 ? f1 : c == Channel::F2 ? f2 : ptie;
  }

  friend bool operator==(const Trajectory&, const Trajectory&) = default;
};

/// Dead-zone: zero inside [-width/2, width/2], slope one outside.
inline double deadband(double u, double width) {
  const double half = 0.5 * width;
  if (std::abs(u) <= half) return 0.0;
  return u > 0 ? u - half : u + half;
}

/// Clamps `candidate` to within max_rate * dt of `prev`.
inline double rate_limit(double prev, double candidate, double max_rate, double dt) {
  const double step = max_rate * dt;
  if (candidate > prev + step) return prev + step;
  if (candidate < prev - step) return prev - step;
  return candidate;
}

/// One forward-Euler step of the closed loop. `load` is the per-area load
/// disturbance in pu; `measured` is what the control center receives.
inline SystemState step_dynamics(const SystemState& s, const AgcParameters& p,
                                 const std::array<double, 2>& load, const ChannelValues& measured,
                                 double dt, std::size_t step_index = 0) {
  constexpr std::array<double, 2> tie_sign{1.0, -1.0};
  SystemState next = s;

  const std::array<double, 2> ace{
      tie_sign[0] * measured.ptie + p.area[0].bias_B * measured.f1,
      tie_sign[1] * measured.ptie + p.area[1].bias_B * measured.f2};
  const auto ace_delayed = next.ace_delay.push(ace);

  for (int i = 0; i < 2; ++i) {
    const auto& a = p.area[i];
    const double df = p.base_frequency / (2.0 * a.inertia_H) *
                      (s.delta_Pm[i] - load[i] - tie_sign[i] * s.delta_Ptie -
                       a.damping_D * s.delta_f[i]);
    const double dpm = (s.delta_Pv[i] - s.delta_Pm[i]) / a.turbine_Tt;
    const double governor_drive = s.integrator_x[i] - deadband(s.delta_f[i] / a.droop_R, p.gdb_width);
    const double dpv = (governor_drive - s.delta_Pv[i]) / a.governor_Tg;
    const double dx = -a.integral_gain_KI * ace_delayed[i];

    next.delta_f[i] = s.delta_f[i] + dt * df;
    next.delta_Pm[i] = rate_limit(s.delta_Pm[i], s.delta_Pm[i] + dt * dpm, p.grc_limit, dt);
    next.delta_Pv[i] = s.delta_Pv[i] + dt * dpv;
    next.integrator_x[i] = s.integrator_x[i] + dt * dx;
  }
  next.delta_Ptie = s.delta_Ptie + dt * p.sync_coeff_Ps * (s.delta_f[0] - s.delta_f[1]);

  if (!next.all_finite()) throw NonFiniteState(step_index);
  return next;
}

inline std::array<double, 2> load_at(const Scenario& sc, double t) {
  std::array<double, 2> load{0.0, 0.0};
  if (t >= sc.load_time) load[sc.load_area - 1] = sc.load_magnitude;
  return load;
}

/// Runs the closed loop over the horizon. `observer(step, state)` sees the
/// state before every step and once more after the last one.
template <typename Observer>
Trajectory simulate(const AgcParameters& params, const SimulationConfig& config,
                    const Scenario& scenario, Observer&& observer) {
  params.validate();
  config.validate();
  validate(scenario, config.horizon);

  const std::size_t steps = config.step_count();
  const std::size_t decim = config.decimation();
  Trajectory traj;
  const std::size_t samples = config.sample_count();
  traj.t.reserve(samples);
  traj.f1.reserve(samples);
  traj.f2.reserve(samples);
  traj.ptie.reserve(samples);

  SystemState state = SystemState::zero(params, config.dt);
  for (std::size_t n = 0; n < steps; ++n) {
    observer(n, static_cast<const SystemState&>(state));
    const double t = static_cast<double>(n) * config.dt;
    const ChannelValues measured = apply_to_channels(scenario.attack, t, state.true_channels());
    if (n % decim == 0) {
      traj.t.push_back(static_cast<double>(n / decim) / config.measurement_rate);
      traj.f1.push_back(measured.f1);
      traj.f2.push_back(measured.f2);
      traj.ptie.push_back(measured.ptie);
    }
    state = step_dynamics(state, params, load_at(scenario, t), measured, config.dt, n);
  }
  observer(steps, static_cast<const SystemState&>(state));
  return traj;
}

inline Trajectory simulate(const AgcParameters& params, const SimulationConfig& config,
                           const Scenario& scenario) {
  return simulate(params, config, scenario, [](std::size_t, const SystemState&) {});
}

/// CSV with header `t,f1,f2,ptie` and 9 significant digits.
inline void write_trajectory_csv(std::ostream& os, const Trajectory& traj) {
  os << "t,f1,f2,ptie\n";
  char buf[128];
  for (std::size_t i = 0; i < traj.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%.9g,%.9g,%.9g,%.9g\n", traj.t[i], traj.f1[i], traj.f2[i],
                  traj.ptie[i]);
    os << buf;
  }
}

inline void write_trajectory_csv(const std::string& path, const Trajectory& traj) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open '" + path + "' for writing");
  write_trajectory_csv(os, traj);
  if (!os) throw IoError("failed writing '" + path + "'");
}

inline void to_json(nlohmann::json& j, const AreaParameters& a) {
  j = nlohmann::json{{"inertia_H", a.inertia_H},         {"damping_D", a.damping_D},
                     {"droop_R", a.droop_R},             {"governor_Tg", a.governor_Tg},
                     {"turbine_Tt", a.turbine_Tt},       {"bias_B", a.bias_B},
                     {"integral_gain_KI", a.integral_gain_KI}};
}

/// Missing keys keep their defaults; a missing bias is recomputed.
inline void from_json(const nlohmann::json& j, AreaParameters& a) {
  a.inertia_H = j.value("inertia_H", a.inertia_H);
  a.damping_D = j.value("damping_D", a.damping_D);
  a.droop_R = j.value("droop_R", a.droop_R);
  a.governor_Tg = j.value("governor_Tg", a.governor_Tg);
  a.turbine_Tt = j.value("turbine_Tt", a.turbine_Tt);
  a.integral_gain_KI = j.value("integral_gain_KI", a.integral_gain_KI);
  a.bias_B = j.contains("bias_B") ? j.at("bias_B").get<double>() : AgcParameters::bias_for(a);
}

inline void to_json(nlohmann::json& j, const AgcParameters& p) {
  j = nlohmann::json{{"areas", {p.area[0], p.area[1]}},
                     {"sync_coeff_Ps", p.sync_coeff_Ps},
                     {"grc_limit", p.grc_limit},
                     {"gdb_width", p.gdb_width},
                     {"ace_delay_tau", p.ace_delay_tau},
                     {"base_frequency", p.base_frequency}};
}

inline void from_json(const nlohmann::json& j, AgcParameters& p) {
  if (j.contains("areas")) {
    const auto& areas = j.at("areas");
    if (!areas.is_array() || areas.size() != 2)
      throw FormatError("plant.areas must be an array of two objects");
    p.area[0] = areas[0].get<AreaParameters>();
    p.area[1] = areas[1].get<AreaParameters>();
  }
  p.sync_coeff_Ps = j.value("sync_coeff_Ps", p.sync_coeff_Ps);
  p.grc_limit = j.value("grc_limit", p.grc_limit);
  p.gdb_width = j.value("gdb_width", p.gdb_width);
  p.ace_delay_tau = j.value("ace_delay_tau", p.ace_delay_tau);
  p.base_frequency = j.value("base_frequency", p.base_frequency);
}

inline void to_json(nlohmann::json& j, const SimulationConfig& c) {
  j = nlohmann::json{{"dt", c.dt}, {"horizon", c.horizon}, {"measurement_rate", c.measurement_rate}};
}

inline void from_json(const nlohmann::json& j, SimulationConfig& c) {
  c.dt = j.value("dt", c.dt);
  c.horizon = j.value("horizon", c.horizon);
  c.measurement_rate = j.value("measurement_rate", c.measurement_rate);
}

}  // namespace agcfdia
