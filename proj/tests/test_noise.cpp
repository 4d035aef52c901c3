#include "ddrf/noise.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace ddrf;

namespace {
Mat random_density(int n, std::mt19937_64& rng) {
  std::normal_distribution<double> nd;
  const Eigen::Index d = Eigen::Index(1) << n;
  Mat a(d, d);
  for (Eigen::Index i = 0; i < d; ++i)
    for (Eigen::Index j = 0; j < d; ++j) a(i, j) = cd(nd(rng), nd(rng));
  Mat r = a * a.adjoint();
  return r / r.trace().real();
}

// Bell fidelity of the two-qubit entangling block run on a product initial state.
double forward_bell(double fe, double fj, double p) {
  Mat rho = product_init_state(fe, {fj});
  const Mat r = electron_rotation(pi / 2, pi / 2, 2);
  rho = r * rho * r.adjoint();
  rho = apply_depolarizing_gate(rho, 0, 1, p);
  return state_fidelity(ghz_state(2), rho);
}
}  // namespace

TEST(Detuning, Width) {
  EXPECT_EQ(sample_detuning(0.012, 0.0), 0.0);
  EXPECT_NEAR(sample_detuning(0.012, 1.0), 18.757, 1e-3);
  EXPECT_THROW(sample_detuning(0.0, 1.0), DegenerateInput);
}

TEST(Detuning, DrawsAreCenteredAndReproducible) {
  const int n = 100000;
  double s = 0, s2 = 0;
  for (int i = 0; i < n; ++i) {
    const double d = gaussian_draw(42, std::uint64_t(i), 0);
    s += d;
    s2 += d * d;
  }
  EXPECT_LT(std::abs(s / n), 3.0 / std::sqrt(double(n)));
  EXPECT_NEAR(s2 / n, 1.0, 0.02);
  EXPECT_EQ(gaussian_draw(42, 17, 3), gaussian_draw(42, 17, 3));
  EXPECT_NE(gaussian_draw(42, 17, 3), gaussian_draw(42, 17, 4));
  EXPECT_NE(gaussian_draw(42, 17, 3), gaussian_draw(43, 17, 3));
}

TEST(Channel, ZeroWeightIsIdealCrot) {
  std::mt19937_64 rng(5);
  const Mat rho = random_density(3, rng);
  const Mat u = controlled_pair(rot_phi(pi / 2, pi / 2), rot_phi(-pi / 2, pi / 2), 0, 2, 3);
  EXPECT_EQ((apply_depolarizing_gate(rho, 0, 2, 0.0) - u * rho * u.adjoint()).cwiseAbs().maxCoeff(), 0.0);
}

TEST(Channel, TracePreservingAndHermitian) {
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(0, 1);
  for (int t = 0; t < 50; ++t) {
    const Mat rho = random_density(3, rng);
    const Mat out = apply_depolarizing_gate(rho, 0, 1 + t % 2, u(rng));
    EXPECT_NEAR(out.trace().real(), 1.0, 1e-12);
    EXPECT_NEAR(out.trace().imag(), 0.0, 1e-12);
    EXPECT_LT((out - out.adjoint()).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(Channel, FullTwirlMixesThePair) {
  Vec psi = Vec::Zero(8);
  psi(5) = 1;  // |1 0 1>
  const Mat out = apply_depolarizing_gate(pure_density(psi), 0, 2, 1.0);
  const Mat pair = partial_trace_keep(out, {0, 2});
  EXPECT_LT((pair - Mat::Identity(4, 4) / 4.0).cwiseAbs().maxCoeff(), 1e-14);
  const Mat spectator = partial_trace_keep(out, {1});
  EXPECT_NEAR(spectator(0, 0).real(), 1.0, 1e-14);
}

TEST(Channel, RejectsBadProbability) {
  EXPECT_THROW(apply_depolarizing_gate(Mat::Identity(4, 4) / 4.0, 0, 1, 1.2), InvalidProbability);
  EXPECT_THROW(apply_depolarizing_gate(Mat::Identity(4, 4) / 4.0, 0, 1, -0.1), InvalidProbability);
}

TEST(ErrorProbability, AmplifierRow) {
  const double p = error_probability(0.972, 0.998, 0.983);
  EXPECT_NEAR(p, 0.0123, 2e-4);
  EXPECT_NEAR(gate_fidelity(p), 0.991, 5e-4);
  EXPECT_NEAR(gate_fidelity(0.0123), 0.9908, 1e-4);
}

TEST(ErrorProbability, Limits) {
  EXPECT_NEAR(error_probability(0.25, 0.99, 0.97), 1.0, 1e-15);
  EXPECT_EQ(gate_fidelity(0), 1.0);
  EXPECT_EQ(gate_fidelity(1), 0.25);
  EXPECT_THROW(error_probability(0.9, 0.5, 0.5), DegenerateDenominator);
  EXPECT_THROW(error_probability(0.99, 0.9, 0.9), InvalidProbability);
}

TEST(ErrorProbability, ForwardModelRoundTrip) {
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> u(0, 1);
  for (int t = 0; t < 100; ++t) {
    const double fe = 0.9 + 0.1 * u(rng), fj = 0.8 + 0.2 * u(rng), p = u(rng);
    EXPECT_NEAR(error_probability(forward_bell(fe, fj, p), fe, fj), p, 1e-9);
  }
  // noiseless gate returns the init-limited Bell fidelity
  EXPECT_NEAR(forward_bell(0.998, 0.983, 0.0), 0.998 * 0.983, 1e-12);
}

TEST(Ghz, PerfectInputsGiveUnitFidelity) {
  RegisterConfig cfg = load_default_config();
  cfg.electron_init_fidelity = 1.0;
  std::map<std::string, double> bell;
  for (auto& s : cfg.spins) {
    s.init_fidelity = 1.0;
    bell[s.label] = 1.0;
  }
  for (auto w : {ChannelWeight::gate_infidelity, ChannelWeight::error_probability})
    for (const auto& row : predict_ghz(cfg, cfg.ghz_order, bell, w)) {
      EXPECT_NEAR(row.init_fidelity, 1.0, 1e-15);
      EXPECT_NEAR(row.ghz_fidelity, 1.0, 1e-12);
    }
}

TEST(Ghz, InitColumnIsProduct) {
  const RegisterConfig cfg = load_default_config();
  const auto rows = predict_ghz(cfg, cfg.ghz_order, cfg.bell_fidelities);
  ASSERT_EQ(rows.size(), 7u);
  double f = cfg.electron_init_fidelity;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    f *= cfg.spin(cfg.ghz_order[i]).init_fidelity;
    EXPECT_EQ(rows[i].n_qubits, int(i) + 2);
    EXPECT_NEAR(rows[i].init_fidelity, f, 1e-15);
  }
  EXPECT_NEAR(rows[0].init_fidelity, 0.978, 1e-3);
  EXPECT_NEAR(rows[1].init_fidelity, 0.963, 1e-3);
  EXPECT_NEAR(rows[6].init_fidelity, 0.855, 1e-3);
}

TEST(Ghz, TwirlWeightConventionsAreOrdered) {
  const RegisterConfig cfg = load_default_config();
  const auto a = predict_ghz(cfg, cfg.ghz_order, cfg.bell_fidelities, ChannelWeight::gate_infidelity);
  const auto b = predict_ghz(cfg, cfg.ghz_order, cfg.bell_fidelities, ChannelWeight::error_probability);
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_GT(a[i].ghz_fidelity, b[i].ghz_fidelity);
  // with the literal weight the two-qubit row reproduces the input Bell fidelity
  EXPECT_NEAR(b[0].ghz_fidelity, cfg.bell_fidelities.at("C5"), 1e-9);
}

TEST(Ghz, UnknownSpin) {
  const RegisterConfig cfg = load_default_config();
  EXPECT_THROW(predict_ghz(cfg, {"C5", "C9"}, cfg.bell_fidelities), UnknownSpin);
  EXPECT_THROW(predict_ghz(cfg, {"C5"}, {}), UnknownSpin);
}

TEST(BellState, AzimuthChoiceMaximizesOverlap) {
  // rotate the ideal state's nucleus by a known angle; the analytic azimuth undoes it
  const Mat rho = pure_density(ghz_state(2));
  const Mat r = embed(rot_z(-0.8), 1, 2);
  const Mat rot = r * rho * r.adjoint();
  const auto best = bell_fidelity_best_azimuth(rot);
  EXPECT_NEAR(best.fidelity, 1.0, 1e-12);
  EXPECT_NEAR(bell_fidelity_at_azimuth(rot, best.azimuth), 1.0, 1e-12);
  for (double a = 0; a < two_pi; a += 0.1) EXPECT_LE(bell_fidelity_at_azimuth(rot, a), best.fidelity + 1e-12);
}

TEST(Crosstalk, WindowAndFallback) {
  const RegisterConfig cfg = load_default_config();
  const auto c1 = crosstalk_spins(cfg, cfg.spin("C1").with_regime("amplifier"), 5000);
  ASSERT_EQ(c1.size(), 1u);  // nothing within the window, nearest register spin instead
  EXPECT_EQ(c1[0].label, "C5");
  const auto c7 = crosstalk_spins(cfg, cfg.spin("C7"), 5000);
  std::vector<std::string> labels;
  for (const auto& s : c7) labels.push_back(s.label);
  EXPECT_NE(std::find(labels.begin(), labels.end(), "U1"), labels.end());
  EXPECT_NE(std::find(labels.begin(), labels.end(), "U2"), labels.end());
}

TEST(BellSim, NoiselessLimit) {
  const RegisterConfig cfg = load_default_config();
  MonteCarloConfig mc;
  mc.samples = 1;
  mc.dephasing = false;
  mc.crosstalk = false;
  const auto r = simulate_bell_fidelity(cfg, cfg.spin("C1").with_regime("amplifier"), mc);
  EXPECT_NEAR(r.mean, 1.0, 1e-3);
  EXPECT_TRUE(r.crosstalk.empty());
}

TEST(BellSim, DeterministicForSeed) {
  const RegisterConfig cfg = load_default_config();
  MonteCarloConfig mc;
  mc.samples = 8;
  mc.seed = 1234;
  mc.optimize_rabi = false;
  const auto s = cfg.spin("C1").with_regime("amplifier");
  const auto a = simulate_bell_fidelity(cfg, s, mc), b = simulate_bell_fidelity(cfg, s, mc);
  EXPECT_EQ(a.mean, b.mean);
  EXPECT_EQ(a.stderr_, b.stderr_);
  mc.seed = 1235;
  EXPECT_NE(simulate_bell_fidelity(cfg, s, mc).mean, a.mean);
  mc.samples = 0;
  EXPECT_THROW(simulate_bell_fidelity(cfg, s, mc), DegenerateInput);
}

TEST(BellSim, SampleDoublingIsStatisticallyConsistent) {
  const RegisterConfig cfg = load_default_config();
  MonteCarloConfig mc;
  mc.samples = 40;
  mc.optimize_rabi = false;
  const auto s = cfg.spin("C1").with_regime("amplifier");
  const auto a = simulate_bell_fidelity(cfg, s, mc);
  mc.samples = 80;
  const auto b = simulate_bell_fidelity(cfg, s, mc);
  EXPECT_LT(std::abs(a.mean - b.mean), 3 * std::hypot(a.stderr_, b.stderr_) + 1e-12);
}

namespace {
// Tilted test spin at 432 kHz Larmor, 50 kHz parallel coupling, four-pulse quarter-turn gate.
double tilt_infidelity(double beta) {
  const auto s = make_tilted_spin("T", 432000, 50000, beta);
  GateParams g;
  g.n_pulses = 4;
  g.tau = 19.88e-6;
  g.rabi = quarter_turn_rabi(g.n_pulses, g.tau);
  g.rf_freq = s.omega_m1;
  g.axis_phase = pi / 2;
  g.phase_advance = two_pi * (s.omega0 - s.omega_m1) * g.tau;
  return 1 - entangle_block_fidelity(s, g);
}
}  // namespace

TEST(Tilt, InfidelityGrowsWithAxisAngle) {
  double last = -1;
  for (int i = 0; i <= 200; ++i) {
    const double v = tilt_infidelity(0.2 * i / 200);
    EXPECT_GT(v, last) << i;
    last = v;
  }
}
