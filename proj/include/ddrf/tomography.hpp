#pragma once

#include "ddrf/dynamics.hpp"
#include "ddrf/linalg.hpp"

#include <unsupported/Eigen/LevenbergMarquardt>

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

namespace ddrf {

struct ExpectationRecord {
  std::string pauli;  // one label per qubit, electron first
  double value = 0;
  double stderr_ = 0;
  bool corrected = false;
};

struct OutcomeProbabilities {
  double plus;
  double minus;
};

// Photon probabilities of the plain (A) and pi-flipped (B) readout passes.
inline OutcomeProbabilities electron_outcome_probabilities(double pA, double pB) {
  const double s = pA + pB;
  if (!(s > 0)) throw NoDetections("no photon detections in either pass");
  return {pA / s, pB / s};
}

// Identity on the electron sums the two conditional branches; X/Y/Z take the difference.
inline double assemble_expectation(char electron_basis, double p_plus, double p_minus, double cond_plus,
                                   double cond_minus) {
  if (electron_basis == 'I') return p_plus * cond_plus + p_minus * cond_minus;
  return p_plus * cond_plus - p_minus * cond_minus;
}

inline double single_qubit_correction(double z_expectation) {
  if (!(z_expectation > 0)) throw NonPositiveSignal("<Z> must be positive");
  return std::sqrt(z_expectation);
}

inline double multi_qubit_correction(double joint, const std::vector<double>& marginals,
                                     const std::vector<double>& single_c) {
  if (marginals.size() != single_c.size()) throw DimensionMismatch("one marginal per single-qubit factor");
  double prod = 1.0;
  for (std::size_t j = 0; j < marginals.size(); ++j) {
    if (!(marginals[j] > 0) || !(single_c[j] > 0)) throw NonPositiveSignal("marginals and factors must be positive");
    prod *= marginals[j] / single_c[j];
  }
  return joint / prod;
}

// Divide by the product of per-qubit factors over the non-identity positions.
inline ExpectationRecord correct_expectation(const ExpectationRecord& r, const std::vector<double>& c_per_qubit,
                                             double extra = 1.0) {
  if (c_per_qubit.size() != r.pauli.size()) throw DimensionMismatch("one correction factor per qubit");
  double c = extra;
  for (std::size_t q = 0; q < r.pauli.size(); ++q)
    if (r.pauli[q] != 'I') c *= c_per_qubit[q];
  if (!(c > 0)) throw NonPositiveSignal("correction factor must be positive");
  return {r.pauli, r.value / c, r.stderr_ / c, true};
}

using ExpectationMap = std::map<std::string, ExpectationRecord>;

inline ExpectationMap to_map(const std::vector<ExpectationRecord>& v) {
  ExpectationMap m;
  for (const auto& r : v) m[r.pauli] = r;
  return m;
}

enum class BellKind { electron_nuclear, nuclear_nuclear };

struct FidelityEstimate {
  double value;
  double stderr_;
};

inline FidelityEstimate bell_fidelity(const ExpectationMap& m, BellKind kind) {
  const std::vector<std::pair<std::string, double>> terms =
      kind == BellKind::electron_nuclear ? std::vector<std::pair<std::string, double>>{{"XZ", 1}, {"YY", 1}, {"ZX", 1}}
                                         : std::vector<std::pair<std::string, double>>{{"XX", 1}, {"YY", -1}, {"ZZ", 1}};
  double f = 1.0, var = 0.0;
  for (const auto& [p, c] : terms) {
    auto it = m.find(p);
    if (it == m.end()) throw MissingOperator("missing expectation " + p);
    f += c * it->second.value;
    var += it->second.stderr_ * it->second.stderr_;
  }
  return {f / 4.0, std::sqrt(var) / 4.0};
}

inline std::string pauli_label(std::uint64_t code, int n) {
  static const char L[] = {'I', 'X', 'Y', 'Z'};
  std::string s(std::size_t(n), 'I');
  for (int q = n - 1; q >= 0; --q, code >>= 2) s[std::size_t(q)] = L[code & 3];
  return s;
}

struct PauliTerm {
  std::string pauli;
  int coeff;  // ideal expectation, +-1
};

// Brute-force enumeration of the Pauli strings with nonzero expectation on |GHZ_n>.
inline std::vector<PauliTerm> ghz_operator_set(int n) {
  if (n < 2) throw DegenerateInput("need at least two qubits");
  const Mat rho = pure_density(ghz_state(n));
  std::vector<PauliTerm> out;
  const std::uint64_t total = std::uint64_t(1) << (2 * n);
  for (std::uint64_t c = 0; c < total; ++c) {
    const std::string p = pauli_label(c, n);
    const double v = pauli_expectation(rho, p);
    if (std::abs(v) > 1e-9) out.push_back({p, v > 0 ? 1 : -1});
  }
  return out;
}

inline FidelityEstimate ghz_fidelity(const ExpectationMap& m, const std::vector<PauliTerm>& set) {
  double f = 0, var = 0;
  for (const auto& t : set) {
    if (t.pauli.find_first_not_of('I') == std::string::npos) {
      f += t.coeff;
      continue;
    }
    auto it = m.find(t.pauli);
    if (it == m.end()) throw MissingOperator("missing expectation " + t.pauli);
    f += t.coeff * it->second.value;
    var += it->second.stderr_ * it->second.stderr_;
  }
  const double norm = double(set.size());
  return {f / norm, std::sqrt(var) / norm};
}

struct WitnessResult {
  bool entangled;
  double significance;
};

inline WitnessResult witness_ghz(double fidelity, double stderr_) {
  if (!(stderr_ > 0)) throw DegenerateInput("standard error must be positive");
  return {fidelity > 0.5, (fidelity - 0.5) / stderr_};
}

// Simulation front end: electron measured in its basis (Z when the label is I), nuclear
// operator evaluated on each conditioned branch, then the same assembly as measured data.
inline double simulate_expectation(const Mat& rho, const std::string& pauli) {
  const int n = qubit_count(rho);
  if (int(pauli.size()) != n) throw DimensionMismatch("Pauli string length mismatch");
  const char eb = pauli[0];
  const std::string ebasis = std::string(1, eb == 'I' ? 'Z' : eb) + std::string(std::size_t(n - 1), 'I');
  std::string nuc = pauli;
  nuc[0] = 'I';
  std::string joint = nuc;
  joint[0] = eb == 'I' ? 'Z' : eb;
  // photon probability of pass A is P(M=+1); pass B flips the electron first
  const double e = pauli_expectation(rho, ebasis);
  const double pA = (1 + e) / 2, pB = (1 - e) / 2;
  const OutcomeProbabilities p = electron_outcome_probabilities(pA, pB);
  const double o = pauli_expectation(rho, nuc), j = pauli_expectation(rho, joint);
  // tr(P+- (x) O rho) = (<O> +- <sigma O>)/2
  const double c_plus = p.plus > 0 ? (o + j) / 2 / p.plus : 0.0;
  const double c_minus = p.minus > 0 ? (o - j) / 2 / p.minus : 0.0;
  return assemble_expectation(eb, p.plus, p.minus, c_plus, c_minus);
}

struct ShotRecord {
  std::string basis;
  char sequence = 'A';
  bool photon = false;
  std::vector<int> nuclear;  // +-1 per nuclear qubit
};

inline std::vector<ShotRecord> read_shots_csv(std::istream& in) {
  std::vector<ShotRecord> out;
  std::string line;
  bool header = true;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    if (header) {
      header = false;
      if (line.rfind("basis", 0) == 0) continue;
    }
    std::vector<std::string> f;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) f.push_back(cell);
    if (f.size() < 3) throw DegenerateInput("shot line " + std::to_string(lineno) + ": too few columns");
    ShotRecord r;
    r.basis = f[0];
    if (f[1] != "A" && f[1] != "B") throw DegenerateInput("shot line " + std::to_string(lineno) + ": sequence must be A or B");
    r.sequence = f[1][0];
    if (f[2] != "0" && f[2] != "1") throw DegenerateInput("shot line " + std::to_string(lineno) + ": photon must be 0 or 1");
    r.photon = f[2] == "1";
    if (f.size() > 3 && !f[3].empty()) {
      std::stringstream os(f[3]);
      std::string v;
      while (std::getline(os, v, ';')) {
        const int k = std::stoi(v);
        if (k != 1 && k != -1) throw DegenerateInput("shot line " + std::to_string(lineno) + ": outcomes must be +-1");
        r.nuclear.push_back(k);
      }
    }
    out.push_back(std::move(r));
  }
  return out;
}

// Shot averages per basis with binomial errors propagated to first order.
inline std::vector<ExpectationRecord> expectations_from_shots(const std::vector<ShotRecord>& shots) {
  struct Acc {
    double nA = 0, kA = 0, nB = 0, kB = 0;
    double sum_plus = 0, m_plus = 0, sum_minus = 0, m_minus = 0;
  };
  std::map<std::string, Acc> by;
  for (const auto& s : shots) {
    Acc& a = by[s.basis];
    const std::size_t nn = s.basis.size() - 1;
    int prod = 1;
    if (s.photon) {
      if (s.nuclear.size() != nn) throw DegenerateInput("basis " + s.basis + ": need one outcome per nuclear qubit");
      for (std::size_t q = 0; q < nn; ++q)
        if (s.basis[q + 1] != 'I') prod *= s.nuclear[q];
    }
    if (s.sequence == 'A') {
      a.nA += 1;
      if (s.photon) a.kA += 1, a.sum_plus += prod, a.m_plus += 1;
    } else {
      a.nB += 1;
      if (s.photon) a.kB += 1, a.sum_minus += prod, a.m_minus += 1;
    }
  }
  std::vector<ExpectationRecord> out;
  for (const auto& [basis, a] : by) {
    if (a.nA == 0 || a.nB == 0) throw NoDetections("basis " + basis + " lacks one of the two passes");
    const double pA = a.kA / a.nA, pB = a.kB / a.nB;
    const OutcomeProbabilities p = electron_outcome_probabilities(pA, pB);
    const double cp = a.m_plus > 0 ? a.sum_plus / a.m_plus : 0.0;
    const double cm = a.m_minus > 0 ? a.sum_minus / a.m_minus : 0.0;
    const double v = assemble_expectation(basis[0], p.plus, p.minus, cp, cm);
    const double vpA = pA * (1 - pA) / a.nA, vpB = pB * (1 - pB) / a.nB;
    const double s = pA + pB;
    const double var_pp = (pB * pB * vpA + pA * pA * vpB) / (s * s * s * s);
    const double vcp = a.m_plus > 0 ? (1 - cp * cp) / a.m_plus : 0.0;
    const double vcm = a.m_minus > 0 ? (1 - cm * cm) / a.m_minus : 0.0;
    const double dpp = basis[0] == 'I' ? cp - cm : cp + cm;
    const double var = dpp * dpp * var_pp + p.plus * p.plus * vcp + p.minus * p.minus * vcm;
    out.push_back({basis, v, std::sqrt(var), false});
  }
  return out;
}

inline void write_expectations_csv(std::ostream& os, const std::vector<ExpectationRecord>& recs) {
  os << "pauli_string,value,stderr\n";
  char buf[96];
  for (const auto& r : recs) {
    std::snprintf(buf, sizeof buf, "%s,%.9g,%.9g\n", r.pauli.c_str(), r.value, r.stderr_);
    os << buf;
  }
}

struct DecayFit {
  double A, B, T, n;
  double sA, sB, sT, sn;
  int iterations;
};

namespace detail {
// Free parameters in order A, B, log T, log n; fixed ones are dropped.
struct DecayFunctor {
  using Scalar = double;
  using InputType = Eigen::VectorXd;
  using ValueType = Eigen::VectorXd;
  using JacobianType = Eigen::MatrixXd;
  using QRSolver = Eigen::ColPivHouseholderQR<JacobianType>;
  enum { InputsAtCompileTime = Eigen::Dynamic, ValuesAtCompileTime = Eigen::Dynamic };

  const std::vector<double>& t;
  const std::vector<double>& y;
  std::optional<double> fixA, fixB;

  int inputs() const { return 2 + !fixA + !fixB; }
  int values() const { return int(t.size()); }

  void unpack(const Eigen::VectorXd& p, double& A, double& B, double& lT, double& ln) const {
    int k = 0;
    A = fixA ? *fixA : p(k++);
    B = fixB ? *fixB : p(k++);
    lT = p(k++);
    ln = p(k++);
  }
  int operator()(const Eigen::VectorXd& p, Eigen::VectorXd& r) const {
    double A, B, lT, ln;
    unpack(p, A, B, lT, ln);
    for (std::size_t i = 0; i < t.size(); ++i)
      r(Eigen::Index(i)) = A + B * std::exp(-std::pow(t[i] / std::exp(lT), std::exp(ln))) - y[i];
    return 0;
  }
  int df(const Eigen::VectorXd& p, Eigen::MatrixXd& J) const {
    double A, B, lT, ln;
    unpack(p, A, B, lT, ln);
    (void)A;
    const double T = std::exp(lT), n = std::exp(ln);
    for (std::size_t i = 0; i < t.size(); ++i) {
      const double u = t[i] / T, un = std::pow(u, n), ex = std::exp(-un);
      int k = 0;
      const Eigen::Index r = Eigen::Index(i);
      if (!fixA) J(r, k++) = 1.0;
      if (!fixB) J(r, k++) = ex;
      J(r, k++) = B * ex * un * n;  // d/dlogT
      J(r, k++) = u > 0 ? -B * ex * un * std::log(u) * n : 0.0;
    }
    return 0;
  }
};
}  // namespace detail

// f(t) = A + B exp(-(t/T)^n) by Levenberg-Marquardt; A and/or B may be held fixed.
inline DecayFit fit_decay(const std::vector<double>& times, const std::vector<double>& values,
                          std::optional<double> fix_A = std::nullopt, std::optional<double> fix_B = std::nullopt) {
  if (times.size() != values.size()) throw DimensionMismatch("times and values differ in length");
  if (times.size() < 4) throw DegenerateInput("need at least four points");
  for (std::size_t i = 0; i < times.size(); ++i)
    if (!(times[i] > 0) || (i && !(times[i] > times[i - 1]))) throw DegenerateInput("times must be positive and increasing");

  // starting point: A from the tail, B from the head, T where the curve crosses 1/e of its span
  const double a0 = fix_A.value_or(values.back());
  const double b0 = fix_B.value_or(values.front() - a0);
  double t0 = times[times.size() / 2];
  for (std::size_t i = 0; i < times.size(); ++i)
    if (b0 != 0 && (values[i] - a0) / b0 < std::exp(-1.0)) {
      t0 = times[i];
      break;
    }
  detail::DecayFunctor f{times, values, fix_A, fix_B};
  Eigen::VectorXd p(f.inputs());
  int k = 0;
  if (!fix_A) p(k++) = a0;
  if (!fix_B) p(k++) = b0;
  p(k++) = std::log(t0);
  p(k++) = 0.0;

  Eigen::LevenbergMarquardt<detail::DecayFunctor> lm(f);
  lm.setMaxfev(2000);
  const auto status = lm.minimize(p);
  using Status = Eigen::LevenbergMarquardtSpace::Status;
  if (status == Status::ImproperInputParameters || status == Status::TooManyFunctionEvaluation ||
      status == Status::UserAsked)
    throw NonConvergence("decay fit did not converge");

  Eigen::MatrixXd J(f.values(), f.inputs());
  f.df(p, J);
  Eigen::VectorXd r(f.values());
  f(p, r);
  const Eigen::MatrixXd jtj = J.transpose() * J;
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(jtj);
  const auto& sv = svd.singularValues();
  if (!(sv(sv.size() - 1) > 1e-12 * sv(0))) throw NonConvergence("decay parameters are not identifiable");
  const int dof = std::max(1, f.values() - f.inputs());
  const Eigen::MatrixXd cov = jtj.inverse() * (r.squaredNorm() / dof);

  DecayFit out{};
  double lT, ln;
  f.unpack(p, out.A, out.B, lT, ln);
  out.T = std::exp(lT);
  out.n = std::exp(ln);
  k = 0;
  out.sA = fix_A ? 0.0 : std::sqrt(cov(k, k)), k += !fix_A;
  out.sB = fix_B ? 0.0 : std::sqrt(cov(k, k)), k += !fix_B;
  out.sT = out.T * std::sqrt(cov(k, k)), ++k;
  out.sn = out.n * std::sqrt(cov(k, k));
  out.iterations = int(lm.iterations());
  return out;
}

}  // namespace ddrf
