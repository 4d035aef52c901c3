#pragma once

#include "ddrf/linalg.hpp"

#include <json.hpp>

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#ifndef DDRF_DEFAULT_CONFIG
#define DDRF_DEFAULT_CONFIG "data/register.json"
#endif

namespace ddrf {

enum class Species { C13, N14 };

// Alternative gate settings for one spin (e.g. a higher-power RF drive).
struct GateRegime {
  int n_pulses = 0;
  double tau_us = 0;
  double rabi_hz = 0;
  double rf_pi_duration_us = 0;
  double gate_duration_us = 0;
  double init_fidelity = 1;
};

// All frequencies are ordinary frequencies in Hz.
struct NuclearSpinParams {
  std::string label;
  Species species = Species::C13;
  double omega0 = 0;
  double omega_m1 = 0;
  double omega_p1 = 0;
  double a_par = 0;
  double a_perp = 0;
  double t2_star_ms0 = 0;  // ms
  double t2_star_ms1 = 0;  // ms
  double t2_echo = 0;      // s
  int n_pulses = 2;
  double tau = 0;  // us
  double rabi = 0;
  double rf_pi_duration = 0;  // us
  double gate_duration = 0;   // us
  double init_fidelity = 1;
  std::map<std::string, GateRegime> regimes;

  NuclearSpinParams with_regime(const std::string& name) const {
    auto it = regimes.find(name);
    if (it == regimes.end()) throw ConfigError("spin " + label + " has no regime '" + name + "'");
    NuclearSpinParams s = *this;
    const GateRegime& r = it->second;
    s.n_pulses = r.n_pulses;
    s.tau = r.tau_us;
    s.rabi = r.rabi_hz;
    s.rf_pi_duration = r.rf_pi_duration_us;
    s.gate_duration = r.gate_duration_us;
    s.init_fidelity = r.init_fidelity;
    return s;
  }
};

// Spectator spin known only by its couplings; precesses at the bulk Larmor frequency for ms=0.
struct ExtraSpin {
  std::string label;
  double a_par = 0;
  double a_perp = 0;
};

struct RegisterConfig {
  double b_field = 0;    // gauss
  double gamma_c13 = 0;  // Hz/gauss
  double electron_init_fidelity = 1;
  double readout_fidelity_bright = 1;
  double readout_fidelity_dark = 1;
  std::vector<NuclearSpinParams> spins;
  std::map<std::string, double> bell_fidelities;
  std::map<std::string, std::vector<ExtraSpin>> crosstalk_extras;
  std::vector<std::string> ghz_order;

  double larmor() const { return gamma_c13 * b_field; }

  const NuclearSpinParams& spin(const std::string& label) const {
    for (const auto& s : spins)
      if (s.label == label) return s;
    throw UnknownSpin("unknown spin: " + label);
  }
};

struct Hyperfine {
  double a_par;
  double a_perp;
};

// Secular relations between the three precession frequencies and the couplings.
inline Hyperfine hyperfine_from_frequencies(double omega0, double omega_m1, double omega_p1) {
  if (!(omega0 > 0)) throw DegenerateInput("omega0 must be positive");
  const double a_par = (omega_p1 * omega_p1 - omega_m1 * omega_m1) / (4.0 * omega0);
  const double rad =
      (omega_p1 * omega_p1 + omega_m1 * omega_m1 - 2.0 * omega0 * omega0 - 2.0 * a_par * a_par) / 2.0;
  if (rad < -100.0) throw NegativeRadicand("inconsistent precession frequencies");
  return {a_par, rad > 0 ? std::sqrt(rad) : 0.0};
}

inline double quantization_axis_angle(const NuclearSpinParams& s) {
  return std::atan2(s.a_perp, s.omega0 - s.a_par);
}

inline double precession_frequency(const NuclearSpinParams& s, int ms) {
  switch (ms) {
    case 0: return s.omega0;
    case -1: return std::hypot(s.a_perp, s.omega0 - s.a_par);
    case 1: return std::hypot(s.a_perp, s.omega0 + s.a_par);
  }
  throw DegenerateInput("ms must be 0, -1 or +1");
}

// Spin whose ms=-1 axis is tilted by beta; omega_m1 and omega_p1 follow from the couplings.
inline NuclearSpinParams make_tilted_spin(const std::string& label, double omega_l, double a_par,
                                          double beta) {
  NuclearSpinParams s;
  s.label = label;
  s.omega0 = omega_l;
  s.a_par = a_par;
  s.a_perp = (omega_l - a_par) * std::tan(beta);
  s.omega_m1 = precession_frequency(s, -1);
  s.omega_p1 = precession_frequency(s, 1);
  return s;
}

inline void validate(const RegisterConfig& cfg) {
  std::set<std::string> labels;
  for (const auto& s : cfg.spins) {
    if (!labels.insert(s.label).second) throw ConfigError("duplicate spin label " + s.label);
    if (!(s.omega0 > 0 && s.omega_m1 > 0 && s.omega_p1 > 0))
      throw ConfigError(s.label + ": frequencies must be positive");
    if (s.a_perp < 0) throw ConfigError(s.label + ": a_perp must be non-negative");
    if (s.n_pulses <= 0 || s.n_pulses % 2) throw ConfigError(s.label + ": n_pulses must be positive and even");
    for (const auto& [name, r] : s.regimes)
      if (r.n_pulses <= 0 || r.n_pulses % 2)
        throw ConfigError(s.label + "/" + name + ": n_pulses must be positive and even");
    if (s.species == Species::C13) {
      const Hyperfine h = hyperfine_from_frequencies(s.omega0, s.omega_m1, s.omega_p1);
      if (std::abs(h.a_par - s.a_par) > 2.0 || std::abs(h.a_perp - s.a_perp) > 2.0)
        throw ConfigError(s.label + ": stored couplings disagree with precession frequencies");
      if (std::abs(cfg.larmor() - s.omega0) > 30.0)
        throw ConfigError(s.label + ": omega0 disagrees with gamma * B");
    }
  }
}

inline RegisterConfig config_from_json(const nlohmann::json& j) {
  RegisterConfig cfg;
  try {
    cfg.b_field = j.at("b_field_gauss");
    cfg.gamma_c13 = j.at("gamma_c13_hz_per_gauss");
    cfg.electron_init_fidelity = j.at("electron_init_fidelity");
    cfg.readout_fidelity_bright = j.value("readout_fidelity_bright", 1.0);
    cfg.readout_fidelity_dark = j.value("readout_fidelity_dark", 1.0);
    for (const auto& js : j.at("spins")) {
      NuclearSpinParams s;
      s.label = js.at("label");
      const std::string sp = js.value("species", "C13");
      if (sp == "C13") s.species = Species::C13;
      else if (sp == "N14") s.species = Species::N14;
      else throw ConfigError("unknown species " + sp);
      s.omega0 = js.at("omega0_hz");
      s.omega_m1 = js.at("omega_m1_hz");
      s.omega_p1 = js.at("omega_p1_hz");
      s.a_par = js.at("a_par_hz");
      s.a_perp = js.at("a_perp_hz");
      s.t2_star_ms0 = js.at("t2_star_ms0_ms");
      s.t2_star_ms1 = js.at("t2_star_ms1_ms");
      s.t2_echo = js.at("t2_echo_s");
      s.n_pulses = js.at("n_pulses");
      s.tau = js.at("tau_us");
      s.rabi = js.at("rabi_hz");
      s.rf_pi_duration = js.at("rf_pi_duration_us");
      s.gate_duration = js.value("gate_duration_us", 0.0);
      s.init_fidelity = js.at("init_fidelity");
      if (js.contains("regimes"))
        for (const auto& [name, jr] : js.at("regimes").items()) {
          GateRegime r;
          r.n_pulses = jr.at("n_pulses");
          r.tau_us = jr.at("tau_us");
          r.rabi_hz = jr.at("rabi_hz");
          r.rf_pi_duration_us = jr.at("rf_pi_duration_us");
          r.gate_duration_us = jr.value("gate_duration_us", 0.0);
          r.init_fidelity = jr.at("init_fidelity");
          s.regimes[name] = r;
        }
      cfg.spins.push_back(std::move(s));
    }
    if (j.contains("bell_fidelities"))
      for (const auto& [k, v] : j.at("bell_fidelities").items()) cfg.bell_fidelities[k] = v.get<double>();
    if (j.contains("crosstalk_extras"))
      for (const auto& [k, arr] : j.at("crosstalk_extras").items())
        for (const auto& e : arr) cfg.crosstalk_extras[k].push_back({e.at("label"), e.at("a_par_hz"), e.at("a_perp_hz")});
    if (j.contains("ghz_order")) cfg.ghz_order = j.at("ghz_order").get<std::vector<std::string>>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed register config: ") + e.what());
  }
  validate(cfg);
  return cfg;
}

inline std::string default_config_path() {
  if (const char* env = std::getenv("DDRF_SIM_CONFIG"); env && *env) return env;
  return DDRF_DEFAULT_CONFIG;
}

inline RegisterConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open register config " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("cannot parse " + path + ": " + e.what());
  }
  return config_from_json(j);
}

inline RegisterConfig load_default_config() { return load_config(default_config_path()); }

}  // namespace ddrf
