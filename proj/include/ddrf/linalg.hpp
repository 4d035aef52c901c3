#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <complex>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

namespace ddrf {

using cd = std::complex<double>;
using Mat = Eigen::MatrixXcd;
using Vec = Eigen::VectorXcd;
using Mat2 = Eigen::Matrix2cd;

constexpr double pi = std::numbers::pi;
constexpr double two_pi = 2.0 * std::numbers::pi;

// Error families map onto CLI exit codes: config 2, degenerate input 3, numerics 4.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct ConfigError : Error {
  using Error::Error;
};
struct DegenerateInput : Error {
  using Error::Error;
};
struct NumericalFailure : Error {
  using Error::Error;
};

#define DDRF_ERROR(Name, Base)    \
  struct Name : Base {            \
    using Base::Base;             \
  };

DDRF_ERROR(UnknownSpin, ConfigError)
DDRF_ERROR(NegativeRadicand, DegenerateInput)
DDRF_ERROR(InvalidGate, DegenerateInput)
DDRF_ERROR(DimensionMismatch, DegenerateInput)
DDRF_ERROR(InvalidProbability, DegenerateInput)
DDRF_ERROR(DegenerateDenominator, DegenerateInput)
DDRF_ERROR(ZeroDetuning, DegenerateInput)
DDRF_ERROR(DegenerateDesign, DegenerateInput)
DDRF_ERROR(Infeasible, DegenerateInput)
DDRF_ERROR(SingularSystem, DegenerateInput)
DDRF_ERROR(MalformedSchedule, DegenerateInput)
DDRF_ERROR(NoValidCount, DegenerateInput)
DDRF_ERROR(InvalidShape, DegenerateInput)
DDRF_ERROR(NoDetections, DegenerateInput)
DDRF_ERROR(NonPositiveSignal, DegenerateInput)
DDRF_ERROR(MissingOperator, DegenerateInput)
DDRF_ERROR(NonConvergence, NumericalFailure)

#undef DDRF_ERROR

namespace pauli {
inline Mat2 I() { return Mat2::Identity(); }
inline Mat2 X() {
  Mat2 m;
  m << 0, 1, 1, 0;
  return m;
}
inline Mat2 Y() {
  Mat2 m;
  m << 0, cd(0, -1), cd(0, 1), 0;
  return m;
}
inline Mat2 Z() {
  Mat2 m;
  m << 1, 0, 0, -1;
  return m;
}
inline Mat2 by_label(char c) {
  switch (c) {
    case 'I': return I();
    case 'X': return X();
    case 'Y': return Y();
    case 'Z': return Z();
  }
  throw std::invalid_argument(std::string("bad Pauli label: ") + c);
}
}  // namespace pauli

// exp(-i t (h . sigma)/2) for a real 3-vector h, i.e. a rotation by |h| t about h.
inline Mat2 su2_exp(double hx, double hy, double hz, double t) {
  const double n = std::sqrt(hx * hx + hy * hy + hz * hz);
  if (n == 0.0) return Mat2::Identity();
  const double a = 0.5 * n * t;
  const double c = std::cos(a), s = std::sin(a);
  const double x = hx / n, y = hy / n, z = hz / n;
  const cd i(0, 1);
  Mat2 m;
  m << c - i * s * z, -i * s * (x - i * y), -i * s * (x + i * y), c + i * s * z;
  return m;
}

// Rotation R_phi(theta) = exp(-i theta (cos phi Ix + sin phi Iy)).
inline Mat2 rot_phi(double theta, double phi) {
  return su2_exp(std::cos(phi), std::sin(phi), 0.0, theta);
}
inline Mat2 rot_z(double theta) { return su2_exp(0, 0, 1, theta); }

inline Mat kron(const Mat& a, const Mat& b) {
  Mat out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < a.cols(); ++j)
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  return out;
}

// Single-qubit operator on qubit q of an n-qubit register (qubit 0 is the most significant).
inline Mat embed(const Mat2& op, int q, int n) {
  Mat out = Mat::Identity(1, 1);
  for (int k = 0; k < n; ++k) out = kron(out, k == q ? Mat(op) : Mat(Mat2::Identity()));
  return out;
}

// |0><0| (x) A + |1><1| (x) B on (control c, target t) of an n-qubit register.
inline Mat controlled_pair(const Mat2& a, const Mat2& b, int c, int t, int n) {
  const Eigen::Index dim = Eigen::Index(1) << n;
  Mat out = Mat::Zero(dim, dim);
  const int cs = n - 1 - c, ts = n - 1 - t;
  for (Eigen::Index col = 0; col < dim; ++col) {
    const int cb = int((col >> cs) & 1), tb = int((col >> ts) & 1);
    const Mat2& m = cb ? b : a;
    for (int r = 0; r < 2; ++r) {
      const Eigen::Index row = (col & ~(Eigen::Index(1) << ts)) | (Eigen::Index(r) << ts);
      out(row, col) += m(r, tb);
    }
  }
  return out;
}

// Number of qubits of a 2^n square matrix.
inline int qubit_count(const Mat& m) {
  int n = 0;
  while ((Eigen::Index(1) << n) < m.rows()) ++n;
  if ((Eigen::Index(1) << n) != m.rows() || m.rows() != m.cols()) throw DimensionMismatch("not a 2^n square matrix");
  return n;
}

namespace detail {
// P|x> = phase(x)|x ^ flip> for a Pauli string, one label per qubit.
struct PauliAction {
  Eigen::Index flip = 0;
  std::vector<cd> phase;
};
inline PauliAction pauli_action(const std::string& labels) {
  const int n = int(labels.size());
  const Eigen::Index d = Eigen::Index(1) << n;
  PauliAction a;
  a.phase.assign(std::size_t(d), cd(1, 0));
  for (int q = 0; q < n; ++q) {
    const int sh = n - 1 - q;
    const char c = labels[std::size_t(q)];
    if (c == 'X' || c == 'Y') a.flip |= Eigen::Index(1) << sh;
    if (c == 'I' || c == 'X') continue;
    if (c != 'Y' && c != 'Z') throw std::invalid_argument(std::string("bad Pauli label: ") + c);
    for (Eigen::Index x = 0; x < d; ++x) {
      const bool bit = (x >> sh) & 1;
      if (c == 'Z') a.phase[std::size_t(x)] *= bit ? -1.0 : 1.0;
      else a.phase[std::size_t(x)] *= bit ? cd(0, -1) : cd(0, 1);
    }
  }
  return a;
}
}  // namespace detail

// P rho P^dagger without forming P.
inline Mat pauli_conjugate(const Mat& rho, const std::string& labels) {
  if (int(labels.size()) != qubit_count(rho)) throw DimensionMismatch("Pauli string length mismatch");
  const auto a = detail::pauli_action(labels);
  Mat out(rho.rows(), rho.cols());
  for (Eigen::Index y = 0; y < rho.cols(); ++y)
    for (Eigen::Index x = 0; x < rho.rows(); ++x)
      out(x ^ a.flip, y ^ a.flip) = a.phase[std::size_t(x)] * std::conj(a.phase[std::size_t(y)]) * rho(x, y);
  return out;
}

// tr(P rho).
inline double pauli_expectation(const Mat& rho, const std::string& labels) {
  if (int(labels.size()) != qubit_count(rho)) throw DimensionMismatch("Pauli string length mismatch");
  const auto a = detail::pauli_action(labels);
  cd acc = 0;
  for (Eigen::Index x = 0; x < rho.rows(); ++x) acc += a.phase[std::size_t(x)] * rho(x, x ^ a.flip);
  return acc.real();
}

// Trace out every qubit not listed in `keep` (kept qubits retain their order).
inline Mat partial_trace_keep(const Mat& rho, const std::vector<int>& keep) {
  const int n = qubit_count(rho);
  const int k = int(keep.size());
  const Eigen::Index dk = Eigen::Index(1) << k;
  Mat out = Mat::Zero(dk, dk);
  Eigen::Index keep_mask = 0;
  for (int q : keep) keep_mask |= Eigen::Index(1) << (n - 1 - q);
  auto compress = [&](Eigen::Index x) {
    Eigen::Index r = 0;
    for (int i = 0; i < k; ++i) r = (r << 1) | ((x >> (n - 1 - keep[std::size_t(i)])) & 1);
    return r;
  };
  for (Eigen::Index x = 0; x < rho.rows(); ++x)
    for (Eigen::Index y = 0; y < rho.cols(); ++y)
      if ((x & ~keep_mask) == (y & ~keep_mask)) out(compress(x), compress(y)) += rho(x, y);
  return out;
}

inline double unitarity_error(const Mat& u) {
  return (u.adjoint() * u - Mat::Identity(u.rows(), u.cols())).cwiseAbs().maxCoeff();
}

// Multiply a by the phase that matches b on b's largest-magnitude entry.
inline Mat align_global_phase(const Mat& a, const Mat& b) {
  Eigen::Index r = 0, c = 0;
  b.cwiseAbs().maxCoeff(&r, &c);
  if (std::abs(a(r, c)) == 0.0) return a;
  cd ph = b(r, c) / a(r, c);
  ph /= std::abs(ph);
  return a * ph;
}

inline double max_diff_up_to_phase(const Mat& a, const Mat& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) throw DimensionMismatch("operator shapes differ");
  return (align_global_phase(a, b) - b).cwiseAbs().maxCoeff();
}

inline double wrap_2pi(double x) {
  double r = std::fmod(x, two_pi);
  if (r < 0) r += two_pi;
  if (r >= two_pi) r -= two_pi;
  return r;
}

}  // namespace ddrf
