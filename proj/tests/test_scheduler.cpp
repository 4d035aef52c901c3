#include "ddrf/scheduler.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace ddrf;

namespace {
using Side = std::map<Var, int>;
Var x(int i) { return {'x', i}; }
Var e(int i) { return {'e', i}; }
Var w(int i) { return {'w', i}; }
const Var t{'t', 0};

std::vector<std::string> names(std::size_t n) {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back("S" + std::to_string(i + 1));
  return out;
}
}  // namespace

TEST(EchoSystem, ThreeSpinsMatchPrintedEquations) {
  const auto eqs = build_echo_system(3);
  ASSERT_EQ(eqs.size(), 6u);
  const std::vector<std::pair<Side, Side>> want = {
      {{{x(2), 1}, {x(3), 1}, {w(1), 1}}, {{t, 3}, {e(2), 1}, {e(3), 1}}},
      {{{x(3), 1}, {w(1), 1}, {e(1), 1}}, {{t, 1}, {e(3), 1}, {x(1), 1}, {w(2), 1}}},
      {{{w(1), 1}, {e(1), 1}, {e(2), 1}, {t, 1}}, {{x(1), 1}, {w(2), 1}, {x(2), 1}, {w(3), 1}}},
      {{{w(2), 1}, {x(2), 1}, {w(3), 1}, {x(3), 1}}, {{w(4), 1}, {e(2), 1}, {w(5), 1}, {e(3), 1}, {w(6), 1}}},
      {{{w(3), 1}, {x(3), 1}, {e(1), 1}, {w(4), 1}}, {{w(5), 1}, {e(3), 1}, {w(6), 1}, {x(1), 1}}},
      {{{e(1), 1}, {w(4), 1}, {e(2), 1}, {w(5), 1}}, {{w(6), 1}, {x(1), 1}, {x(2), 1}}},
  };
  for (std::size_t k = 0; k < 6; ++k) {
    EXPECT_EQ(eqs[k].lhs, want[k].first) << "equation " << k;
    EXPECT_EQ(eqs[k].rhs, want[k].second) << "equation " << k;
  }
}

TEST(EchoSystem, SizeScalesWithSpins) {
  for (int n = 1; n <= 8; ++n) EXPECT_EQ(build_echo_system(n).size(), std::size_t(2 * n));
  EXPECT_THROW(build_echo_system(0), DegenerateInput);
}

TEST(Solver, SymmetricInstanceSatisfiesEveryEquation) {
  const double X = 600, E = 900;
  const auto sol = solve_echo_timings({X, X, X}, {E, E, E}, 1000.0);
  EXPECT_EQ(sol.spacing, Rational(1000));
  const auto eqs = build_echo_system(3);
  auto value = [&](const Side& side) {
    Rational v = 0;
    for (const auto& [var, c] : side) {
      switch (var.kind) {
        case 'x': v += c * Rational(X); break;
        case 'e': v += c * Rational(E); break;
        case 'w': v += c * sol.waits[std::size_t(var.index - 1)]; break;
        default: v += c * sol.spacing;
      }
    }
    return v;
  };
  for (const auto& eq : eqs) EXPECT_EQ(value(eq.lhs), value(eq.rhs));
  // first printed relation: w1 = 3t + 2E - 2X
  EXPECT_EQ(sol.waits[0], Rational(3 * 1000 + 2 * 900 - 2 * 600));
}

TEST(Solver, RegisterDurationsRefocusExactly) {
  // gate and echo durations of C5, C2, C6
  const std::vector<double> xs = {419, 635, 888}, es = {1606, 1096, 1173};
  const auto sol = solve_echo_timings(xs, es);
  const auto s = emit_schedule(names(3), xs, es, sol);
  const double w1 = sol.waits[0].convert_to<double>(), t = sol.spacing.convert_to<double>();
  EXPECT_LT(std::abs(xs[1] + xs[2] + w1 - 3 * t - es[1] - es[2]), 1e-6);
  for (const auto& r : verify_refocus(s)) EXPECT_LT(std::abs(r.residual), 1e-6) << r.spin;
}

TEST(Solver, GrowsSpacingWhenNeeded) {
  // long gates and short echoes force a negative first wait at t = max e
  const auto sol = solve_echo_timings({2000, 2000, 2000}, {100, 100, 100});
  EXPECT_GT(sol.spacing, Rational(100));
  for (const auto& w : sol.waits) EXPECT_GE(w, 0);
}

TEST(Solver, InfeasibleWithinBound) {
  EXPECT_THROW(solve_echo_timings({2000, 2000, 2000}, {100, 100, 100}, std::nullopt, 0), Infeasible);
  EXPECT_THROW(solve_echo_timings({1, 2}, {1}), DegenerateInput);
  EXPECT_THROW(solve_echo_timings({1, -2}, {1, 1}), DegenerateInput);
}

TEST(Solver, SingleSpin) {
  const auto s = schedule_echoes({"S1"}, {500}, {800});
  ASSERT_EQ(s.residuals.size(), 2u);
  for (const auto& r : s.residuals) EXPECT_LT(std::abs(r.residual), 1e-9);
}

TEST(Solver, RandomInstancesRefocus) {
  std::mt19937_64 rng(99);
  std::uniform_real_distribution<double> u(20, 2000);
  std::uniform_int_distribution<int> nspin(2, 6);
  int infeasible = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const int n = nspin(rng);
    std::vector<double> xs, es;
    for (int i = 0; i < n; ++i) {
      xs.push_back(std::round(u(rng) * 1000) / 1000);
      es.push_back(std::round(u(rng) * 1000) / 1000);
    }
    try {
      const auto s = schedule_echoes(names(std::size_t(n)), xs, es);
      ASSERT_EQ(s.residuals.size(), std::size_t(2 * n));
      for (const auto& r : s.residuals) ASSERT_LT(std::abs(r.residual), 1e-6) << trial;
      for (std::size_t k = 1; k < s.ops.size(); ++k)
        ASSERT_GE(s.ops[k].start, s.ops[k - 1].start + s.ops[k - 1].duration - 1e-9);
    } catch (const Infeasible&) {
      ++infeasible;
    }
  }
  EXPECT_EQ(infeasible, 0);
}

TEST(Refocus, PerturbedWaitShiftsFlankingResiduals) {
  const std::vector<double> xs = {419, 635, 888}, es = {1606, 1096, 1173};
  const auto s = schedule_echoes(names(3), xs, es);
  // stretch w2 by 1 us and push everything after it
  std::size_t k = 0;
  int seen = 0;
  for (; k < s.ops.size(); ++k)
    if (s.ops[k].kind == OpKind::wait && ++seen == 2) break;
  PulseSchedule p = s;
  p.ops[k].duration += 1;
  for (std::size_t j = k + 1; j < p.ops.size(); ++j) p.ops[j].start += 1;
  const auto res = verify_refocus(p);
  for (const auto& r : res) {
    // locate the flanking ops on this spin
    std::size_t prev = r.op_index, next = r.op_index;
    while (p.ops[--prev].spin != r.spin) {}
    while (p.ops[++next].spin != r.spin) {}
    double want = 0;
    if (prev < k && k < r.op_index) want = 1;
    if (r.op_index < k && k < next) want = -1;
    EXPECT_NEAR(r.residual, want, 1e-9) << r.spin << " @" << r.op_index;
  }
}

TEST(Refocus, MalformedWhenEchoLacksNeighbour) {
  PulseSchedule s;
  s.ops = {{"S1", OpKind::gate, 10, 0}, {"S1", OpKind::echo, 5, 10}};
  EXPECT_THROW(verify_refocus(s), MalformedSchedule);
}

TEST(Json, ScheduleExport) {
  const auto s = schedule_echoes(names(2), {300, 400}, {500, 600});
  const auto j = schedule_to_json(s);
  ASSERT_EQ(j["ops"].size(), s.ops.size());
  EXPECT_EQ(j["ops"][0]["kind"], "gate");
  EXPECT_EQ(j["refocus_residuals"].size(), 4u);
}

TEST(PeriodCount, AmplifierExample) {
  const auto c = rf_period_count(218828, 39.356, true);
  EXPECT_EQ(c.n, 8);
  EXPECT_NEAR(c.t_pulse, 36.558, 1e-3);
  EXPECT_EQ(rf_period_count(218828, 39.356, false).n, 16);
}

TEST(PeriodCount, StrictInequalityAndExactness) {
  // tau exactly 5 periods of 250 kHz
  EXPECT_EQ(rf_period_count(250000, 20, true).n, 4);
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> f(1e5, 1e6), tau(5, 100);
  for (int i = 0; i < 200; ++i) {
    const double rf = std::round(f(rng)), tu = std::round(tau(rng) * 1000) / 1000;
    if (rf * tu * 1e-6 < 1.001) continue;
    const auto c = rf_period_count(rf, tu, true);
    EXPECT_LT(c.t_pulse_exact, Rational(tu));
    EXPECT_EQ(c.t_pulse_exact * Rational(rf), Rational(c.n) * 1000000);
  }
  EXPECT_THROW(rf_period_count(1000, 500, true), NoValidCount);
  EXPECT_THROW(rf_period_count(0, 500, true), DegenerateInput);
}

TEST(Envelope, Shape) {
  EXPECT_NEAR(erf_envelope(500, 7.5, 0, 1000), 1.0, 1e-6);
  EXPECT_NEAR(erf_envelope(0, 7.5, 0, 1000), 0.5 * (1 - std::erf(2.0)), 1e-12);
  EXPECT_NEAR(erf_envelope(0, 7.5, 0, 1000), 0.0023, 1e-4);
  for (double s = 0; s < 100; s += 3.7) EXPECT_NEAR(erf_envelope(s, 7.5, 0, 1000), erf_envelope(1000 - s, 7.5, 0, 1000), 1e-14);
  EXPECT_THROW(erf_envelope(0, 0, 0, 10), InvalidShape);
  EXPECT_THROW(erf_envelope(0, 5, 0, 10), InvalidShape);
}

TEST(Envelope, AreaDeficitIndependentOfLength) {
  auto area = [](double len) {
    const double rise = 7.5, dt = 0.01;
    double a = 0;
    for (double s = -50; s < len + 50; s += dt) a += erf_envelope(s, rise, 0, len) * dt;
    return a;
  };
  const double c1 = (400 - area(400)) / 15, c2 = (1500 - area(1500)) / 15;
  EXPECT_NEAR(c1, c2, 1e-6);
}
