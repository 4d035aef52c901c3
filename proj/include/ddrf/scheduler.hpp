#pragma once

#include "ddrf/linalg.hpp"

#include <boost/multiprecision/cpp_int.hpp>
#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace ddrf {

using Rational = boost::multiprecision::cpp_rational;

enum class OpKind { gate, echo, wait, idle };

inline const char* to_string(OpKind k) {
  switch (k) {
    case OpKind::gate: return "gate";
    case OpKind::echo: return "echo";
    case OpKind::wait: return "wait";
    case OpKind::idle: return "idle";
  }
  return "?";
}

struct TimelineOp {
  std::string spin;  // nuclear label or "electron"
  OpKind kind = OpKind::wait;
  double duration = 0;  // us
  double start = 0;     // us
};

struct RefocusResidual {
  std::string spin;
  std::size_t op_index;
  double residual;  // us
};

struct PulseSchedule {
  std::vector<TimelineOp> ops;
  std::vector<RefocusResidual> residuals;
  double spacing = 0;  // us, the t actually used
};

// Symbolic timeline. Variables: x_i gate on spin i, e_i echo on spin i, w_k wait, t spacing.
struct Var {
  char kind;  // 'x', 'e', 'w', 't'
  int index;  // 1-based; 0 for t
  auto operator<=>(const Var&) const = default;
};

inline std::string to_string(const Var& v) {
  return v.kind == 't' ? std::string("t") : std::string(1, v.kind) + std::to_string(v.index);
}

// Canonical interleaving for n spins:
// entangle x1..xn | w1 e1 t e2 t .. en t | x1 w2 x2 .. wn xn | e1 w(n+1) e2 .. en w(2n) | x1..xn
inline std::vector<Var> echo_timeline(int n) {
  std::vector<Var> tl;
  for (int i = 1; i <= n; ++i) tl.push_back({'x', i});
  tl.push_back({'w', 1});
  for (int i = 1; i <= n; ++i) {
    tl.push_back({'e', i});
    tl.push_back({'t', 0});
  }
  for (int i = 1; i <= n; ++i) {
    if (i > 1) tl.push_back({'w', i});
    tl.push_back({'x', i});
  }
  for (int i = 1; i <= n; ++i) {
    tl.push_back({'e', i});
    tl.push_back({'w', n + i});
  }
  for (int i = 1; i <= n; ++i) tl.push_back({'x', i});
  return tl;
}

// One refocusing condition: free evolution before an echo equals free evolution after it.
// Terms common to both sides are cancelled.
struct EchoEquation {
  int spin;
  std::map<Var, int> lhs, rhs;
};

inline std::vector<EchoEquation> build_echo_system(int n) {
  if (n < 1) throw DegenerateInput("need at least one spin");
  const std::vector<Var> tl = echo_timeline(n);
  std::vector<EchoEquation> eqs;
  auto owner = [](const Var& v) { return (v.kind == 'x' || v.kind == 'e') ? v.index : 0; };
  for (int pass = 0; pass < 2; ++pass)
    for (int i = 1; i <= n; ++i) {
      // the pass-th echo on spin i
      int seen = 0;
      std::size_t p = 0;
      for (std::size_t k = 0; k < tl.size(); ++k)
        if (tl[k].kind == 'e' && tl[k].index == i && seen++ == pass) p = k;
      std::size_t a = p, b = p;
      while (owner(tl[--a]) != i) {}
      while (owner(tl[++b]) != i) {}
      EchoEquation eq{i, {}, {}};
      for (std::size_t k = a + 1; k < p; ++k) eq.lhs[tl[k]] += 1;
      for (std::size_t k = p + 1; k < b; ++k) eq.rhs[tl[k]] += 1;
      for (auto it = eq.lhs.begin(); it != eq.lhs.end();) {
        auto jt = eq.rhs.find(it->first);
        if (jt == eq.rhs.end()) {
          ++it;
          continue;
        }
        const int c = std::min(it->second, jt->second);
        it->second -= c;
        jt->second -= c;
        if (jt->second == 0) eq.rhs.erase(jt);
        if (it->second == 0) it = eq.lhs.erase(it);
        else ++it;
      }
      eqs.push_back(std::move(eq));
    }
  return eqs;
}

namespace detail {
// Exact Gauss-Jordan; returns nullopt when singular.
inline std::optional<std::vector<Rational>> solve_exact(std::vector<std::vector<Rational>> a, std::vector<Rational> b) {
  const std::size_t n = b.size();
  for (std::size_t c = 0; c < n; ++c) {
    std::size_t piv = c;
    while (piv < n && a[piv][c] == 0) ++piv;
    if (piv == n) return std::nullopt;
    std::swap(a[piv], a[c]);
    std::swap(b[piv], b[c]);
    for (std::size_t r = 0; r < n; ++r) {
      if (r == c || a[r][c] == 0) continue;
      const Rational f = a[r][c] / a[c][c];
      for (std::size_t k = c; k < n; ++k) a[r][k] -= f * a[c][k];
      b[r] -= f * b[c];
    }
  }
  for (std::size_t i = 0; i < n; ++i) b[i] /= a[i][i];
  return b;
}

inline Rational exact(double v) { return Rational(v); }
}  // namespace detail

struct EchoSolution {
  std::vector<Rational> waits;  // w1..w2n, us
  Rational spacing;             // us
};

// Waits for the canonical interleaving. t starts at `spacing` (default max e_i) and grows by
// 3/2 per retry until every wait is non-negative.
inline EchoSolution solve_echo_timings(const std::vector<double>& x, const std::vector<double>& e,
                                       std::optional<double> spacing = std::nullopt, int max_retries = 32) {
  const int n = int(x.size());
  if (n < 1 || e.size() != x.size()) throw DegenerateInput("need matching gate and echo durations");
  for (std::size_t i = 0; i < x.size(); ++i)
    if (!(x[i] > 0) || !(e[i] > 0)) throw DegenerateInput("durations must be positive");
  const auto eqs = build_echo_system(n);
  const std::size_t nw = std::size_t(2 * n);
  Rational t = detail::exact(spacing.value_or(*std::max_element(e.begin(), e.end())));
  if (t <= 0) throw DegenerateInput("spacing must be positive");
  for (int attempt = 0; attempt <= max_retries; ++attempt) {
    std::vector<std::vector<Rational>> a(nw, std::vector<Rational>(nw, Rational(0)));
    std::vector<Rational> b(nw, Rational(0));
    for (std::size_t r = 0; r < eqs.size(); ++r) {
      auto add = [&](const std::map<Var, int>& side, int sign) {
        for (const auto& [v, c] : side) {
          const Rational k = Rational(sign * c);
          switch (v.kind) {
            case 'w': a[r][std::size_t(v.index - 1)] += k; break;
            case 'x': b[r] -= k * detail::exact(x[std::size_t(v.index - 1)]); break;
            case 'e': b[r] -= k * detail::exact(e[std::size_t(v.index - 1)]); break;
            case 't': b[r] -= k * t; break;
          }
        }
      };
      add(eqs[r].lhs, 1);
      add(eqs[r].rhs, -1);
    }
    auto w = detail::solve_exact(a, b);
    if (!w) throw SingularSystem("echo system is rank deficient");
    if (std::all_of(w->begin(), w->end(), [](const Rational& v) { return v >= 0; })) return {*w, t};
    t *= Rational(3, 2);
  }
  throw Infeasible("no non-negative waits within the spacing search");
}

// Lay out the timeline with start times.
inline PulseSchedule emit_schedule(const std::vector<std::string>& labels, const std::vector<double>& x,
                                   const std::vector<double>& e, const EchoSolution& sol) {
  const int n = int(labels.size());
  PulseSchedule s;
  s.spacing = sol.spacing.convert_to<double>();
  Rational clock = 0;
  for (const Var& v : echo_timeline(n)) {
    TimelineOp op;
    Rational d;
    switch (v.kind) {
      case 'x':
        op.spin = labels[std::size_t(v.index - 1)], op.kind = OpKind::gate, d = detail::exact(x[std::size_t(v.index - 1)]);
        break;
      case 'e':
        op.spin = labels[std::size_t(v.index - 1)], op.kind = OpKind::echo, d = detail::exact(e[std::size_t(v.index - 1)]);
        break;
      case 'w': op.spin = "electron", op.kind = OpKind::wait, d = sol.waits[std::size_t(v.index - 1)]; break;
      default: op.spin = "electron", op.kind = OpKind::idle, d = sol.spacing; break;
    }
    op.start = clock.convert_to<double>();
    op.duration = d.convert_to<double>();
    clock += d;
    s.ops.push_back(op);
  }
  return s;
}

// (echo center - end of previous op on the spin) - (start of next op on the spin - echo center)
inline std::vector<RefocusResidual> verify_refocus(const PulseSchedule& s) {
  std::vector<RefocusResidual> out;
  for (std::size_t k = 0; k < s.ops.size(); ++k) {
    const TimelineOp& op = s.ops[k];
    if (op.kind != OpKind::echo) continue;
    std::optional<std::size_t> prev, next;
    for (std::size_t j = k; j-- > 0;)
      if (s.ops[j].spin == op.spin) {
        prev = j;
        break;
      }
    for (std::size_t j = k + 1; j < s.ops.size(); ++j)
      if (s.ops[j].spin == op.spin) {
        next = j;
        break;
      }
    if (!prev || !next) throw MalformedSchedule("echo on " + op.spin + " lacks flanking operations");
    const double center = op.start + op.duration / 2;
    const double before = center - (s.ops[*prev].start + s.ops[*prev].duration);
    const double after = s.ops[*next].start - center;
    out.push_back({op.spin, k, before - after});
  }
  return out;
}

inline PulseSchedule schedule_echoes(const std::vector<std::string>& labels, const std::vector<double>& x,
                                     const std::vector<double>& e, std::optional<double> spacing = std::nullopt) {
  if (labels.size() != x.size()) throw DegenerateInput("one label per spin required");
  const EchoSolution sol = solve_echo_timings(x, e, spacing);
  PulseSchedule s = emit_schedule(labels, x, e, sol);
  s.residuals = verify_refocus(s);
  return s;
}

inline nlohmann::json schedule_to_json(const PulseSchedule& s) {
  nlohmann::json ops = nlohmann::json::array();
  for (const auto& op : s.ops)
    ops.push_back({{"spin", op.spin}, {"kind", to_string(op.kind)}, {"start_us", op.start}, {"duration_us", op.duration}});
  nlohmann::json res = nlohmann::json::array();
  for (const auto& r : s.residuals) res.push_back({{"spin", r.spin}, {"op_index", r.op_index}, {"residual_us", r.residual}});
  return {{"spacing_us", s.spacing}, {"ops", ops}, {"refocus_residuals", res}};
}

struct PeriodCount {
  long n;
  double t_pulse;  // us
  Rational t_pulse_exact;
};

// Largest whole number of RF periods strictly shorter than tau; interior pulses use twice that.
inline PeriodCount rf_period_count(double rf_freq, double tau_us, bool halve) {
  if (!(rf_freq > 0)) throw DegenerateInput("RF frequency must be positive");
  const Rational periods = detail::exact(rf_freq) * detail::exact(tau_us) / Rational(1000000);
  using boost::multiprecision::cpp_int;
  cpp_int fl = boost::multiprecision::numerator(periods) / boost::multiprecision::denominator(periods);
  if (Rational(fl) == periods) fl -= 1;
  if (fl < 1) throw NoValidCount("tau is shorter than one RF period");
  const long n = fl.convert_to<long>() * (halve ? 1 : 2);
  const Rational t = Rational(n) * Rational(1000000) / detail::exact(rf_freq);
  return {n, t.convert_to<double>(), t};
}

// Flat-top pulse from t0 to t0 + length with erf edges of width `rise` (all in us).
inline double erf_envelope(double t, double rise, double t0, double length) {
  if (!(rise > 0) || !(length > 2 * rise)) throw InvalidShape("need rise > 0 and length > 2 rise");
  return -0.5 * std::erf(2 * (rise - t + t0) / rise) - 0.5 * std::erf(2 * (rise + t - t0 - length) / rise);
}

}  // namespace ddrf
