#pragma once

#include "ddrf/dynamics.hpp"
#include "ddrf/linalg.hpp"
#include "ddrf/register.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <iostream>
#include <limits>
#include <map>
#include <random>
#include <string>
#include <vector>

namespace ddrf {

struct MonteCarloConfig {
  int samples = 500;
  std::uint64_t seed = 1;
  double crosstalk_window = 5000;  // Hz
  bool dephasing = true;
  bool crosstalk = true;
  bool optimize_rabi = true;
  double rabi_search = 0.10;  // relative half-width of the Rabi calibration window
};

// Angular Gaussian width sqrt2/T2*, returned as an ordinary frequency.
inline double sample_detuning(double t2_star_s, double draw) {
  if (!(t2_star_s > 0)) throw DegenerateInput("T2* must be positive");
  return draw * std::sqrt(2.0) / t2_star_s / two_pi;
}

namespace detail {
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}
}  // namespace detail

// Unit Gaussian that depends only on (seed, sample, spin).
inline double gaussian_draw(std::uint64_t seed, std::uint64_t sample, std::uint64_t spin) {
  const std::uint64_t key =
      detail::splitmix64(detail::splitmix64(detail::splitmix64(seed) ^ sample) ^ (spin * 0xd1b54a32d192ed03ULL));
  std::mt19937_64 eng(key);
  std::normal_distribution<double> nd(0.0, 1.0);
  return nd(eng);
}

// Spectator spins for a Bell simulation: register spins within the window of the target's
// ms=-1 frequency plus configured extra spins, or the nearest register spin if that is empty.
inline std::vector<NuclearSpinParams> crosstalk_spins(const RegisterConfig& cfg, const NuclearSpinParams& target,
                                                      double window) {
  std::vector<NuclearSpinParams> out;
  const NuclearSpinParams* nearest = nullptr;
  double best = std::numeric_limits<double>::infinity();
  for (const auto& s : cfg.spins) {
    if (s.label == target.label) continue;
    const double d = std::abs(s.omega_m1 - target.omega_m1);
    if (d <= window) out.push_back(s);
    if (d < best) best = d, nearest = &s;
  }
  if (auto it = cfg.crosstalk_extras.find(target.label); it != cfg.crosstalk_extras.end())
    for (const auto& e : it->second) {
      NuclearSpinParams s;
      s.label = e.label;
      s.omega0 = cfg.larmor();
      s.a_par = e.a_par;
      s.a_perp = e.a_perp;
      s.omega_m1 = precession_frequency(s, -1);
      s.omega_p1 = precession_frequency(s, 1);
      // dephasing of unlisted spins is unknown; borrow the target's
      s.t2_star_ms0 = target.t2_star_ms0;
      s.t2_star_ms1 = target.t2_star_ms1;
      out.push_back(s);
    }
  if (out.empty() && nearest) out.push_back(*nearest);
  return out;
}

// The DDRF gate acting on every nuclear spin of (electron, spins...) at once.
inline Mat register_gate(const std::vector<NuclearSpinParams>& spins, const GateParams& g,
                         const std::vector<double>& detunings) {
  Mat a = Mat::Identity(1, 1), b = Mat::Identity(1, 1);
  for (std::size_t i = 0; i < spins.size(); ++i) {
    const Branches br = ddrf_branches(spins[i], g, detunings[i]);
    a = kron(a, br.v0);
    b = kron(b, br.v1);
  }
  const Eigen::Index h = a.rows();
  Mat u = Mat::Zero(2 * h, 2 * h);
  u.topLeftCorner(h, h) = a;
  u.bottomRightCorner(h, h) = b;
  return u;
}

// Trace out the electron and re-prepare it in |0>.
inline Mat reset_electron(const Mat& rho) {
  const Eigen::Index h = rho.rows() / 2;
  Mat out = Mat::Zero(rho.rows(), rho.cols());
  out.topLeftCorner(h, h) = rho.topLeftCorner(h, h) + rho.bottomRightCorner(h, h);
  return out;
}

struct AzimuthFidelity {
  double fidelity;
  double azimuth;
};

// Overlap of a 2-qubit state with (|0+> + |1->)/sqrt2, maximized over a z rotation of the nucleus.
inline AzimuthFidelity bell_fidelity_best_azimuth(const Mat& rho2) {
  const Vec b = ghz_state(2);
  cd f0 = 0, f1 = 0;
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) {
      const cd term = std::conj(b(i)) * rho2(i, j) * b(j);
      const int ni = i & 1, nj = j & 1;
      if (ni == nj) f0 += term;
      else if (ni == 0) f1 += term;
    }
  return {f0.real() + 2.0 * std::abs(f1), std::arg(f1)};
}

inline double bell_fidelity_at_azimuth(const Mat& rho2, double azimuth) {
  Mat r = embed(rot_z(azimuth), 1, 2);
  return state_fidelity(ghz_state(2), r * rho2 * r.adjoint());
}

// Single-spin entangling block from |0>|up> with no dephasing: electron pi/2 about y, then the gate.
inline double entangle_block_fidelity(const NuclearSpinParams& s, const GateParams& g) {
  const Mat u = ddrf_piecewise(s, g) * electron_rotation(pi / 2, pi / 2, 2);
  return bell_fidelity_best_azimuth(pure_density(u.col(0))).fidelity;
}

struct BellSimResult {
  double mean = 0;
  double stderr_ = 0;
  double rabi_hz = 0;
  double azimuth = 0;
  std::vector<std::string> crosstalk;
};

namespace detail {
struct BellSim {
  const NuclearSpinParams& target;
  std::vector<NuclearSpinParams> spins;  // target first
  MonteCarloConfig mc;
  bool perfect_init;
  std::vector<std::vector<double>> detunings;  // [sample][spin]

  double init_axis = 0;  // second init gate axis, calibrated in simulate_bell_fidelity

  Mat apply_gate(const Mat& rho, double rabi, double axis, const std::vector<double>& det) const {
    GateParams g = gate_for_spin(target);
    g.rabi = rabi;
    g.axis_phase = axis;
    const Mat u = register_gate(spins, g, det);
    return u * rho * u.adjoint();
  }

  // Register state after the init block (electron back in |0>).
  Mat initialized(double rabi, double axis, const std::vector<double>& det) const {
    const int n = int(spins.size()) + 1;
    const Eigen::Index h = (Eigen::Index(1) << n) / 2;
    Mat rho = Mat::Zero(2 * h, 2 * h);
    if (perfect_init) {
      // target |up>, spectators mixed
      const Eigen::Index hs = h / 2;
      rho.topLeftCorner(hs, hs) = Mat::Identity(hs, hs) / double(hs);
      return rho;
    }
    rho.topLeftCorner(h, h) = Mat::Identity(h, h) / double(h);
    // swap electron polarization onto the target
    auto erot = [&](double ax) {
      const Mat u = electron_rotation(ax, pi / 2, n);
      rho = u * rho * u.adjoint();
    };
    erot(pi / 2);
    rho = apply_gate(rho, rabi, pi / 2, det);
    erot(0);
    rho = apply_gate(rho, rabi, axis, det);
    return reset_electron(rho);
  }

  // Target |up> population after a noiseless init block.
  double init_polarization(double rabi, double axis) const {
    const std::vector<double> zero(spins.size(), 0.0);
    return partial_trace_keep(initialized(rabi, axis, zero), {1})(0, 0).real();
  }

  // The second gate's axis has to absorb the z rotation left by the first gate. Ideally that is
  // N phi_tau, but tilted spins pick up more, so scan and refine like a phase calibration.
  void calibrate_init_axis(double rabi) {
    if (perfect_init) return;
    double best = 0, fbest = -1;
    for (int k = 0; k < 72; ++k) {
      const double a = two_pi * k / 72;
      const double f = init_polarization(rabi, a);
      if (f > fbest) fbest = f, best = a;
    }
    double lo = best - two_pi / 72, hi = best + two_pi / 72;
    while (hi - lo > 1e-6) {
      const double m1 = lo + (hi - lo) / 3, m2 = hi - (hi - lo) / 3;
      if (init_polarization(rabi, m1) > init_polarization(rabi, m2)) hi = m2;
      else lo = m1;
    }
    init_axis = wrap_2pi(0.5 * (lo + hi));
  }

  // Two-qubit (electron, target) state for one sample at the given Rabi rate.
  Mat run(double rabi, std::size_t sample) const {
    const int n = int(spins.size()) + 1;
    const std::vector<double>& det = detunings[sample];
    Mat rho = initialized(rabi, init_axis, det);
    const Mat u = electron_rotation(pi / 2, pi / 2, n);
    rho = apply_gate(u * rho * u.adjoint(), rabi, pi / 2, det);
    return partial_trace_keep(rho, {0, 1});
  }

  Mat mean_state(double rabi) const {
    Mat acc = Mat::Zero(4, 4);
    for (std::size_t i = 0; i < detunings.size(); ++i) acc += run(rabi, i);
    return acc / double(detunings.size());
  }
};
}  // namespace detail

inline BellSimResult simulate_bell_fidelity(const RegisterConfig& cfg, const NuclearSpinParams& target,
                                            const MonteCarloConfig& mc) {
  if (mc.samples < 1) throw DegenerateInput("samples must be >= 1");
  detail::BellSim sim{target, {target}, mc, target.species == Species::N14, {}};
  if (mc.crosstalk)
    for (auto& s : crosstalk_spins(cfg, target, mc.crosstalk_window)) sim.spins.push_back(s);
  const int samples = mc.dephasing ? mc.samples : 1;
  sim.detunings.assign(std::size_t(samples), std::vector<double>(sim.spins.size(), 0.0));
  if (mc.dephasing)
    for (int i = 0; i < samples; ++i)
      for (std::size_t j = 0; j < sim.spins.size(); ++j)
        sim.detunings[std::size_t(i)][j] =
            sample_detuning(sim.spins[j].t2_star_ms1 * 1e-3, gaussian_draw(mc.seed, std::uint64_t(i), j));

  const double nominal = target.rabi;
  sim.calibrate_init_axis(nominal);
  auto objective = [&](double rabi) { return bell_fidelity_best_azimuth(sim.mean_state(rabi)).fidelity; };
  double rabi = nominal;
  if (mc.optimize_rabi) {
    // golden-section maximization
    const double gr = (std::sqrt(5.0) - 1.0) / 2.0;
    double lo = nominal * (1 - mc.rabi_search), hi = nominal * (1 + mc.rabi_search);
    double c = hi - gr * (hi - lo), d = lo + gr * (hi - lo);
    double fc = objective(c), fd = objective(d);
    while (hi - lo > 1e-4 * nominal) {
      if (fc > fd) {
        hi = d, d = c, fd = fc;
        c = hi - gr * (hi - lo);
        fc = objective(c);
      } else {
        lo = c, c = d, fc = fd;
        d = lo + gr * (hi - lo);
        fd = objective(d);
      }
    }
    rabi = fc > fd ? c : d;
    if (objective(nominal) >= std::max(fc, fd)) rabi = nominal;
  }

  BellSimResult res;
  res.rabi_hz = rabi;
  std::vector<Mat> states;
  Mat mean = Mat::Zero(4, 4);
  for (std::size_t i = 0; i < sim.detunings.size(); ++i) {
    states.push_back(sim.run(rabi, i));
    mean += states.back();
  }
  mean /= double(states.size());
  res.azimuth = bell_fidelity_best_azimuth(mean).azimuth;
  double s1 = 0, s2 = 0;
  for (const auto& r : states) {
    const double f = bell_fidelity_at_azimuth(r, res.azimuth);
    s1 += f;
    s2 += f * f;
  }
  const double n = double(states.size());
  res.mean = s1 / n;
  res.stderr_ = n > 1 ? std::sqrt(std::max(0.0, (s2 - s1 * s1 / n) / (n - 1)) / n) : 0.0;
  for (std::size_t j = 1; j < sim.spins.size(); ++j) res.crosstalk.push_back(sim.spins[j].label);
  return res;
}

// Ideal CROT on (e, j) followed by a uniform two-qubit Pauli twirl with weight p.
inline Mat apply_depolarizing_gate(const Mat& rho, int e, int j, double p) {
  if (!(p >= 0.0 && p <= 1.0)) throw InvalidProbability("p must lie in [0, 1]");
  const int n = qubit_count(rho);
  const Mat u = controlled_pair(rot_phi(pi / 2, pi / 2), rot_phi(-pi / 2, pi / 2), e, j, n);
  Mat out = (1.0 - p) * (u * rho * u.adjoint());
  if (p == 0.0) return out;
  static const char labels[] = {'I', 'X', 'Y', 'Z'};
  Mat tw = Mat::Zero(rho.rows(), rho.cols());
  for (char a : labels)
    for (char b : labels) {
      std::string s(std::size_t(n), 'I');
      s[std::size_t(e)] = a;
      s[std::size_t(j)] = b;
      tw += pauli_conjugate(rho, s);
    }
  return out + (p / 16.0) * tw;
}

inline double error_probability(double f_bell, double f_init_e, double f_init_j) {
  const double den = 1.0 - 4.0 * f_init_e * f_init_j;
  if (std::abs(den) < 1e-12) throw DegenerateDenominator("1 - 4 F_e F_j vanishes");
  double p = 1.0 - (1.0 - 4.0 * f_bell) / den;
  if (p < 0.0 || p > 1.0) {
    if (p < -1e-6 || p > 1.0 + 1e-6) throw InvalidProbability("error probability outside [0, 1]");
    std::cerr << "warning: clamping error probability " << p << "\n";
    p = std::clamp(p, 0.0, 1.0);
  }
  return p;
}

inline double gate_fidelity(double p) { return 1.0 - 0.75 * p; }

// Diagonal product state: electron |0> with F_e, each nucleus |up> with its F_j.
inline Mat product_init_state(double f_e, const std::vector<double>& f_nuc) {
  Mat rho = Mat::Identity(1, 1);
  auto mix = [](double f) {
    Mat2 m = Mat2::Zero();
    m(0, 0) = f;
    m(1, 1) = 1 - f;
    return Mat(m);
  };
  rho = kron(rho, mix(f_e));
  for (double f : f_nuc) rho = kron(rho, mix(f));
  return rho;
}

// Weight handed to the twirl of each noisy CROT. `gate_infidelity` uses 1 - F_gate = 3p/4,
// `error_probability` uses the inverted p itself.
enum class ChannelWeight { gate_infidelity, error_probability };

struct GhzPrediction {
  int n_qubits;
  double init_fidelity;
  double ghz_fidelity;
};

// One row per prefix of `order`, each built from the product initial state and noisy CROTs.
inline std::vector<GhzPrediction> predict_ghz(const RegisterConfig& cfg, const std::vector<std::string>& order,
                                              const std::map<std::string, double>& bell,
                                              ChannelWeight weight = ChannelWeight::gate_infidelity) {
  std::vector<double> f_init, p;
  for (const auto& label : order) {
    const NuclearSpinParams& s = cfg.spin(label);
    auto it = bell.find(label);
    if (it == bell.end()) throw UnknownSpin("no Bell fidelity for " + label);
    f_init.push_back(s.init_fidelity);
    const double pj = error_probability(it->second, cfg.electron_init_fidelity, s.init_fidelity);
    p.push_back(weight == ChannelWeight::gate_infidelity ? 1.0 - gate_fidelity(pj) : pj);
  }
  std::vector<GhzPrediction> rows;
  for (std::size_t m = 1; m <= order.size(); ++m) {
    const int n = int(m) + 1;
    std::vector<double> fi(f_init.begin(), f_init.begin() + std::ptrdiff_t(m));
    Mat rho = product_init_state(cfg.electron_init_fidelity, fi);
    double init = cfg.electron_init_fidelity;
    for (double f : fi) init *= f;
    const Mat r = electron_rotation(pi / 2, pi / 2, n);
    rho = r * rho * r.adjoint();
    for (int j = 1; j < n; ++j) rho = apply_depolarizing_gate(rho, 0, j, p[std::size_t(j - 1)]);
    rows.push_back({n, init, state_fidelity(ghz_state(n), rho)});
  }
  return rows;
}

}  // namespace ddrf
