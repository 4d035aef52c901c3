#pragma once

#include "ddrf/linalg.hpp"
#include "ddrf/register.hpp"

#include <cmath>
#include <functional>
#include <string>
#include <utility>
#include <vector>

namespace ddrf {

// One DDRF gate: N electron pi pulses with spacing 2 tau and K = N+1 phase-stepped RF pulses.
struct GateParams {
  int n_pulses = 2;
  double tau = 0;            // s
  double rabi = 0;           // Hz
  double rf_freq = 0;        // Hz
  double axis_phase = 0;     // rad
  bool conditional = true;
  double phase_advance = 0;  // rad accumulated per tau between frames, 2 pi (wL - w1) tau
  int rf_pulse_count() const { return n_pulses + 1; }
};

inline void check_gate(const GateParams& g) {
  if (g.n_pulses <= 0 || g.n_pulses % 2) throw InvalidGate("n_pulses must be positive and even");
  if (!(g.tau > 0)) throw InvalidGate("tau must be positive");
}

// Gate resonant with the spin's ms=-1 frequency, Rabi rate from the spin record.
inline GateParams gate_for_spin(const NuclearSpinParams& s, double axis_phase = 0.0, bool conditional = true) {
  GateParams g;
  g.n_pulses = s.n_pulses;
  g.tau = s.tau * 1e-6;
  g.rabi = s.rabi;
  g.rf_freq = s.omega_m1;
  g.axis_phase = axis_phase;
  g.conditional = conditional;
  g.phase_advance = two_pi * (s.omega0 - s.omega_m1) * g.tau;
  return g;
}

// Rabi rate that makes the closed-form gate a +-pi/2 conditional rotation.
inline double quarter_turn_rabi(int n_pulses, double tau_s) { return 1.0 / (4.0 * n_pulses * tau_s); }

inline std::vector<double> rf_phase_schedule(const GateParams& g, double phi_tau) {
  const int K = g.rf_pulse_count();
  std::vector<double> ph(static_cast<std::size_t>(K));
  for (int k = 1; k <= K; ++k) {
    double p = g.axis_phase + (k - 1) * phi_tau;
    if (g.conditional && k % 2 == 1) p += pi;
    ph[k - 1] = wrap_2pi(p);
  }
  return ph;
}

// Free precession in the ms=0 branch (ideal regime, rotating frame at w1).
inline Mat2 segment_u0(double omega_l, double omega1, double t) { return rot_z(two_pi * (omega_l - omega1) * t); }
// Resonant drive in the ms=-1 branch.
inline Mat2 segment_u1(double rabi, double t, double phi) { return rot_phi(two_pi * rabi * t, phi); }

inline Mat branch_sum(const Mat2& v0, const Mat2& v1) {
  return controlled_pair(v0, v1, 0, 1, 2);
}

struct Branches {
  Mat2 v0;  // electron in |0>
  Mat2 v1;  // electron in |1>
};

inline Branches crot_branches_closed(const NuclearSpinParams& s, const GateParams& g) {
  check_gate(g);
  const double theta = two_pi * g.n_pulses * g.rabi * g.tau;
  const Mat2 vz = rot_z(two_pi * g.n_pulses * (s.omega0 - s.omega_m1) * g.tau);
  const double sgn = g.conditional ? -1.0 : 1.0;
  return {vz * rot_phi(theta, g.axis_phase), vz * rot_phi(sgn * theta, g.axis_phase)};
}

inline Mat crot_closed_form(const NuclearSpinParams& s, const GateParams& g) {
  const Branches b = crot_branches_closed(s, g);
  return branch_sum(b.v0, b.v1);
}

// Piecewise-constant evolution with electron-state-dependent quantization axes.
// Segments alternate between the two branch Hamiltonians (electron pi pulses are ideal and
// instantaneous); at each switch the frame is re-aligned from the old axis to the new one.
// `detuning` shifts both nuclear frequencies (Hz) without changing the gate.
inline Branches ddrf_branches(const NuclearSpinParams& s, const GateParams& g, double detuning = 0.0) {
  check_gate(g);
  const double beta = quantization_axis_angle(s);
  const double cb = std::cos(beta), sb = std::sin(beta);
  const double w = two_pi * g.rf_freq;
  const double d0 = two_pi * (s.omega0 + detuning) - w;
  const double d1 = two_pi * (s.omega_m1 + detuning) - w;
  const double om = two_pi * g.rabi;
  const std::vector<double> ph = rf_phase_schedule(g, g.phase_advance);
  const int K = g.rf_pulse_count();

  // quantization axes (x, z components; y is zero)
  const double ax[2][2] = {{0.0, 1.0}, {sb, cb}};

  Mat2 out[2];
  for (int start = 0; start < 2; ++start) {
    Mat2 u = Mat2::Identity();
    int br = start;
    double t = 0;
    for (int k = 1; k <= K; ++k) {
      const double dt = (k == 1 || k == K) ? g.tau : 2.0 * g.tau;
      const double c = std::cos(ph[k - 1]), sn = std::sin(ph[k - 1]);
      if (br == 0) {
        u = su2_exp(om * c, om * sn, d0, dt) * u;
      } else {
        const double o = om * cb;
        u = su2_exp(d1 * sb + o * c * cb, o * sn, d1 * cb - o * c * sb, dt) * u;
      }
      t += dt;
      if (k < K) {
        const int nb = 1 - br;
        u = su2_exp(-w * ax[nb][0], 0, -w * ax[nb][1], t) * su2_exp(w * ax[br][0], 0, w * ax[br][1], t) * u;
        br = nb;
      }
    }
    out[start] = u;
  }
  return {out[0], out[1]};
}

inline Mat ddrf_piecewise(const NuclearSpinParams& s, const GateParams& g, double detuning = 0.0) {
  const Branches b = ddrf_branches(s, g, detuning);
  return branch_sum(b.v0, b.v1);
}

inline Mat electron_rotation(double axis_phase, double angle, int n_qubits) {
  return embed(rot_phi(angle, axis_phase), 0, n_qubits);
}

// Ideal conditional +-pi/2 rotation about y between the electron and nuclear qubit j.
inline Mat ideal_crot(int j, int n_qubits) {
  return controlled_pair(rot_phi(pi / 2, pi / 2), rot_phi(-pi / 2, pi / 2), 0, j, n_qubits);
}

// (|0>|+>^(n-1) + |1>|->^(n-1))/sqrt2 with |+-> = (|up> +- |down>)/sqrt2.
inline Vec ghz_state(int n_qubits) {
  Vec plus(2), minus(2);
  plus << 1, 1;
  minus << 1, -1;
  plus /= std::sqrt(2.0);
  minus /= std::sqrt(2.0);
  Vec a(2), b(2);
  a << 1, 0;
  b << 0, 1;
  Mat ka = a, kb = b;
  for (int k = 1; k < n_qubits; ++k) {
    ka = kron(ka, plus);
    kb = kron(kb, minus);
  }
  return (ka + kb) / std::sqrt(2.0);
}

inline Mat pure_density(const Vec& psi) { return psi * psi.adjoint(); }

inline double state_fidelity(const Vec& target, const Mat& rho) {
  return std::real(target.dot(rho * target));
}

struct CircuitOp {
  std::string label;
  std::function<Mat(const Mat&)> apply;
  Eigen::Index dim = 0;
};

inline CircuitOp unitary_op(std::string label, Mat u) {
  const Eigen::Index d = u.rows();
  return {std::move(label), [u = std::move(u)](const Mat& rho) -> Mat { return u * rho * u.adjoint(); }, d};
}

inline Mat compose_circuit(const std::vector<CircuitOp>& ops, const Mat& initial) {
  Mat rho = initial;
  for (const auto& op : ops) {
    if (op.dim != rho.rows()) throw DimensionMismatch("operation '" + op.label + "' has wrong dimension");
    rho = op.apply(rho);
  }
  return rho;
}

// pi/2 on the electron, then one ideal CROT per nuclear qubit.
inline std::vector<CircuitOp> ghz_circuit(int n_qubits) {
  std::vector<CircuitOp> ops;
  ops.push_back(unitary_op("Ry(pi/2) e", electron_rotation(pi / 2, pi / 2, n_qubits)));
  for (int j = 1; j < n_qubits; ++j) ops.push_back(unitary_op("CROT e-" + std::to_string(j), ideal_crot(j, n_qubits)));
  return ops;
}

inline Mat ground_state(int n_qubits) {
  const Eigen::Index d = Eigen::Index(1) << n_qubits;
  Mat rho = Mat::Zero(d, d);
  rho(0, 0) = 1;
  return rho;
}

}  // namespace ddrf
