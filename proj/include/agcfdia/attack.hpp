#pragma once

// False-data-injection waveforms applied to the measurement stream that
// reaches the control center.

#include <array>
#include <cmath>
#include <optional>
#include <string>
#include <string_view>

#include <json.hpp>

#include "errors.hpp"

namespace agcfdia {

enum class Channel { F1 = 0, F2 = 1, PTIE = 2 };

enum class AttackKind { STEP, RAMP, PULSE, SCALING, COMBINED };

inline constexpr std::array<Channel, 3> kChannels{Channel::F1, Channel::F2, Channel::PTIE};
inline constexpr std::array<AttackKind, 5> kAttackKinds{AttackKind::STEP, AttackKind::RAMP,
                                                        AttackKind::PULSE, AttackKind::SCALING,
                                                        AttackKind::COMBINED};

inline std::string_view to_string(Channel c) {
  switch (c) {
    case Channel::F1: return "f1";
    case Channel::F2: return "f2";
    case Channel::PTIE: return "ptie";
  }
  return "?";
}

inline std::string_view to_string(AttackKind k) {
  switch (k) {
    case AttackKind::STEP: return "step";
    case AttackKind::RAMP: return "ramp";
    case AttackKind::PULSE: return "pulse";
    case AttackKind::SCALING: return "scaling";
    case AttackKind::COMBINED: return "combined";
  }
  return "?";
}

inline Channel channel_from_string(std::string_view s) {
  for (auto c : kChannels)
    if (to_string(c) == s) return c;
  throw FormatError("unknown channel '" + std::string(s) + "'");
}

inline AttackKind attack_kind_from_string(std::string_view s) {
  for (auto k : kAttackKinds)
    if (to_string(k) == s) return k;
  throw FormatError("unknown attack kind '" + std::string(s) + "'");
}

/// Class label attached to an attack on a given channel (0 is "no attack").
inline int label_for(Channel c) { return static_cast<int>(c) + 1; }

struct AttackSpec {
  Channel target = Channel::F1;
  AttackKind kind = AttackKind::STEP;
  double start_t = 0.0;
  double duration = 1.0;
  double magnitude_a = 0.0;   // additive level, Hz or pu
  double slope_r = 0.0;       // units per second
  double scale_lambda = 0.0;  // multiplicative factor is (1 + lambda)

  friend bool operator==(const AttackSpec&, const AttackSpec&) = default;
};

struct Scenario {
  int load_area = 1;
  double load_magnitude = 0.0;  // pu
  double load_time = 0.0;       // s
  std::optional<AttackSpec> attack;
  int label = 0;

  friend bool operator==(const Scenario&, const Scenario&) = default;
};

inline void validate(const AttackSpec& spec, double horizon) {
  if (!(spec.start_t >= 0.0 && spec.start_t < horizon))
    throw InvalidArgument("attack start_t must lie in [0, horizon)");
  if (!(spec.duration > 0.0) || !std::isfinite(spec.duration))
    throw InvalidArgument("attack duration must be positive and finite");
  if (!std::isfinite(spec.magnitude_a) || !std::isfinite(spec.slope_r) ||
      !std::isfinite(spec.scale_lambda))
    throw InvalidArgument("attack parameters must be finite");
}

inline void validate(const Scenario& s, double horizon) {
  if (s.load_area != 1 && s.load_area != 2) throw InvalidArgument("load_area must be 1 or 2");
  if (!std::isfinite(s.load_magnitude) || !std::isfinite(s.load_time) || s.load_time < 0.0)
    throw InvalidArgument("load disturbance must be finite with load_time >= 0");
  if (s.label < 0 || s.label > 3) throw InvalidArgument("label must be in 0..3");
  if (s.attack) {
    validate(*s.attack, horizon);
    if (s.label != label_for(s.attack->target))
      throw InvalidArgument("label does not match the attacked channel");
  } else if (s.label != 0) {
    throw InvalidArgument("a scenario without an attack must carry label 0");
  }
}

/// Value seen at the control center when `spec` acts on a channel whose
/// true value is `v` at time `t`.
inline double apply_attack(const AttackSpec& spec, double t, double v) {
  const double t0 = spec.start_t;
  if (t < t0) return v;
  const bool in_window = t < t0 + spec.duration;
  const double ramp = spec.slope_r * ((in_window ? t : t0 + spec.duration) - t0);
  switch (spec.kind) {
    case AttackKind::STEP:
      return v + spec.magnitude_a;
    case AttackKind::RAMP:
      return v + ramp;
    case AttackKind::PULSE:
      return in_window ? v + spec.magnitude_a : v;
    case AttackKind::SCALING:
      return in_window ? v * (1.0 + spec.scale_lambda) : v;
    case AttackKind::COMBINED:
      return (in_window ? v * (1.0 + spec.scale_lambda) : v) + ramp;
  }
  return v;
}

struct ChannelValues {
  double f1 = 0.0;
  double f2 = 0.0;
  double ptie = 0.0;

  double& operator[](Channel c) { return c == Channel::F1 ? f1 : c == Channel::F2 ? f2 : ptie; }
  double operator[](Channel c) const {
    return c == Channel::F1 ? f1 : c == Channel::F2 ? f2 : ptie;
  }

  friend bool operator==(const ChannelValues&, const ChannelValues&) = default;
};

/// Only the targeted channel is touched; the others are copied through.
inline ChannelValues apply_to_channels(const std::optional<AttackSpec>& spec, double t,
                                       ChannelValues truth) {
  if (spec) truth[spec->target] = apply_attack(*spec, t, truth[spec->target]);
  return truth;
}

// JSON, lower_snake_case keys.

inline void to_json(nlohmann::json& j, const AttackSpec& a) {
  j = nlohmann::json{{"target", std::string(to_string(a.target))},
                     {"kind", std::string(to_string(a.kind))},
                     {"start_t", a.start_t},
                     {"duration", a.duration},
                     {"magnitude_a", a.magnitude_a},
                     {"slope_r", a.slope_r},
                     {"scale_lambda", a.scale_lambda}};
}

inline void from_json(const nlohmann::json& j, AttackSpec& a) {
  a.target = channel_from_string(j.at("target").get<std::string>());
  a.kind = attack_kind_from_string(j.at("kind").get<std::string>());
  a.start_t = j.at("start_t").get<double>();
  a.duration = j.at("duration").get<double>();
  a.magnitude_a = j.value("magnitude_a", 0.0);
  a.slope_r = j.value("slope_r", 0.0);
  a.scale_lambda = j.value("scale_lambda", 0.0);
}

inline void to_json(nlohmann::json& j, const Scenario& s) {
  j = nlohmann::json{{"load_area", s.load_area},
                     {"load_magnitude", s.load_magnitude},
                     {"load_time", s.load_time},
                     {"attack", nullptr},
                     {"label", s.label}};
  if (s.attack) j["attack"] = *s.attack;
}

inline void from_json(const nlohmann::json& j, Scenario& s) {
  s.load_area = j.at("load_area").get<int>();
  s.load_magnitude = j.at("load_magnitude").get<double>();
  s.load_time = j.at("load_time").get<double>();
  s.attack.reset();
  if (j.contains("attack") && !j.at("attack").is_null()) s.attack = j.at("attack").get<AttackSpec>();
  s.label = j.contains("label") ? j.at("label").get<int>()
                                : (s.attack ? label_for(s.attack->target) : 0);
}

}  // namespace agcfdia
