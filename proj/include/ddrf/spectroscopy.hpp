#pragma once

#include "ddrf/dynamics.hpp"
#include "ddrf/linalg.hpp"
#include "ddrf/register.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace ddrf {

struct SpectrumPoint {
  double rf_freq;
  double amplitude;
  double phase_offset;
};

struct CosineFit {
  double a;
  double amplitude;
  double phi0;
};

// Linear least squares of a + A cos(phi + phi0) on the basis {1, cos, sin}.
inline CosineFit fit_cosine(const std::vector<double>& phases, const std::vector<double>& values) {
  if (phases.size() != values.size()) throw DimensionMismatch("phases and values differ in length");
  const Eigen::Index n = Eigen::Index(phases.size());
  if (n < 3) throw DegenerateDesign("need at least three phases");
  Eigen::MatrixXd m(n, 3);
  Eigen::VectorXd y(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    m(i, 0) = 1.0;
    m(i, 1) = std::cos(phases[std::size_t(i)]);
    m(i, 2) = std::sin(phases[std::size_t(i)]);
    y(i) = values[std::size_t(i)];
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const auto& sv = svd.singularValues();
  if (sv(2) < 1e-9 * sv(0)) throw DegenerateDesign("phases do not span cos/sin");
  const Eigen::Vector3d b = svd.solve(y);
  const double amp = std::hypot(b(1), b(2));
  double phi0 = amp > 1e-12 ? std::atan2(-b(2), b(1)) : 0.0;
  phi0 = wrap_2pi(phi0);
  return {b(0), amp, phi0};
}

// n points over [0, 2 pi] inclusive of both ends.
inline std::vector<double> phase_grid(int n = 19) {
  std::vector<double> g(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) g[std::size_t(i)] = two_pi * i / (n - 1);
  return g;
}

struct SpectrumSequence {
  int n_pulses = 48;
  double tau = 0;           // s
  double larmor = 0;        // Hz, sets the per-pulse phase step for each RF frequency
  double axis_phase = 0;
};

// Rabi rate implied by an RF pi-pulse duration.
inline double rabi_from_pi_duration(double rf_pi_us) { return 1.0 / (2.0 * rf_pi_us * 1e-6); }

// Electron coherence rho_01 after the sequence, starting from |+> with all nuclei mixed.
// Each spin contributes an independent factor tr(V0 V1^dagger)/2.
inline cd electron_coherence(const std::vector<NuclearSpinParams>& spins, const SpectrumSequence& seq,
                             double rf_freq) {
  cd c = 0.5;
  for (const auto& s : spins) {
    GateParams g;
    g.n_pulses = seq.n_pulses;
    g.tau = seq.tau;
    g.rabi = s.rabi;
    g.rf_freq = rf_freq;
    g.axis_phase = seq.axis_phase;
    g.conditional = true;
    g.phase_advance = two_pi * (seq.larmor - rf_freq) * seq.tau;
    const Branches b = ddrf_branches(s, g);
    c *= (b.v0 * b.v1.adjoint()).trace() / 2.0;
  }
  return c;
}

// Spins carry their own `rabi`; frequencies are scanned independently.
inline std::vector<SpectrumPoint> simulate_spectrum(const std::vector<NuclearSpinParams>& spins,
                                                    const SpectrumSequence& seq, const std::vector<double>& freqs,
                                                    const std::vector<double>& phases) {
  std::vector<SpectrumPoint> out;
  out.reserve(freqs.size());
  std::vector<double> p(phases.size());
  for (double f : freqs) {
    const cd c = electron_coherence(spins, seq, f);
    // P(phi) for projection onto (|0> + e^{i phi}|1>)/sqrt2
    for (std::size_t i = 0; i < phases.size(); ++i) p[i] = 0.5 + std::real(c * std::polar(1.0, phases[i]));
    const CosineFit fit = fit_cosine(phases, p);
    out.push_back({f, fit.amplitude, fit.phi0});
  }
  return out;
}

struct Dip {
  double center;  // depth-weighted centroid, Hz
  double min_amplitude;
  double lo, hi;
};

// Contiguous runs of points with amplitude below `threshold`. A strongly driven resonance
// splits into a doublet around its center, so the centroid is a better locator than the minimum.
inline std::vector<Dip> find_dips(const std::vector<SpectrumPoint>& pts, double threshold) {
  std::vector<Dip> dips;
  std::size_t i = 0;
  while (i < pts.size()) {
    if (pts[i].amplitude >= threshold) {
      ++i;
      continue;
    }
    double w = 0, wf = 0, mn = pts[i].amplitude;
    const std::size_t start = i;
    for (; i < pts.size() && pts[i].amplitude < threshold; ++i) {
      const double d = threshold - pts[i].amplitude;
      w += d;
      wf += d * pts[i].rf_freq;
      mn = std::min(mn, pts[i].amplitude);
    }
    dips.push_back({wf / w, mn, pts[start].rf_freq, pts[i - 1].rf_freq});
  }
  return dips;
}

struct ResonanceLists {
  std::vector<double> conditional;    // w1 + m / tau
  std::vector<double> unconditional;  // w1 + (2p+1) / (2 tau)
};

inline ResonanceLists resonance_frequencies(double omega1, double tau_s, int m_lo, int m_hi, int p_lo, int p_hi) {
  if (!(tau_s > 0)) throw DegenerateInput("tau must be positive");
  ResonanceLists r;
  for (int m = m_lo; m <= m_hi; ++m) r.conditional.push_back(omega1 + m / tau_s);
  for (int p = p_lo; p <= p_hi; ++p) r.unconditional.push_back(omega1 + (2 * p + 1) / (2 * tau_s));
  return r;
}

inline double ac_stark_shift(double rabi, double rf_freq, double omega_m1) {
  const double det = rf_freq - omega_m1;
  if (det == 0.0) throw ZeroDetuning("RF frequency equals the precession frequency");
  return rabi * rabi / (2.0 * det);
}

}  // namespace ddrf
