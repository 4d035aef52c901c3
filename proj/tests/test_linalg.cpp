#include "ddrf/linalg.hpp"

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

// Dense Pauli string, built the slow way.
Mat dense_pauli(const std::string& s) {
  Mat m = Mat::Identity(1, 1);
  for (char c : s) m = kron(m, pauli::by_label(c));
  return m;
}
}  // namespace

TEST(Su2, FullTurnIsMinusIdentity) {
  EXPECT_LT((su2_exp(0.3, -0.2, 0.9, two_pi / std::sqrt(0.09 + 0.04 + 0.81)) + Mat2::Identity()).cwiseAbs().maxCoeff(),
            1e-12);
}

TEST(Su2, MatchesGenericExponential) {
  const double hx = 0.7, hy = -1.1, hz = 0.4, t = 0.83;
  Mat2 h = hx * pauli::X() + hy * pauli::Y() + hz * pauli::Z();
  // power series; |h t/2| is small enough that 40 terms are exact to rounding
  Mat2 term = Mat2::Identity(), acc = Mat2::Identity();
  for (int k = 1; k < 40; ++k) {
    term = term * (cd(0, -t / 2) * h) / double(k);
    acc += term;
  }
  EXPECT_LT((su2_exp(hx, hy, hz, t) - acc).cwiseAbs().maxCoeff(), 1e-13);
}

TEST(Rotation, PiAboutXIsMinusIX) {
  Mat2 want = cd(0, -1) * pauli::X();
  EXPECT_LT((rot_phi(pi, 0) - want).cwiseAbs().maxCoeff(), 1e-14);
}

TEST(Embed, MostSignificantQubitFirst) {
  Mat e = embed(pauli::X(), 0, 2);
  EXPECT_LT((e - kron(pauli::X(), Mat2::Identity())).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(ControlledPair, MatchesBlockForm) {
  const Mat2 a = rot_phi(0.4, 1.0), b = rot_phi(-1.3, 0.2);
  Mat want = Mat::Zero(4, 4);
  want.topLeftCorner(2, 2) = a;
  want.bottomRightCorner(2, 2) = b;
  EXPECT_LT((controlled_pair(a, b, 0, 1, 2) - want).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(ControlledPair, NonAdjacentQubitsAgreeWithPermutedKron) {
  const Mat2 a = rot_phi(0.4, 1.0), b = rot_phi(-1.3, 0.2);
  Mat2 p0 = Mat2::Zero(), p1 = Mat2::Zero();
  p0(0, 0) = 1;
  p1(1, 1) = 1;
  // control 0, target 2, spectator 1
  Mat want = kron(kron(p0, Mat2::Identity()), a) + kron(kron(p1, Mat2::Identity()), b);
  EXPECT_LT((controlled_pair(a, b, 0, 2, 3) - want).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(Pauli, ConjugationAndExpectationMatchDenseProducts) {
  std::mt19937_64 rng(7);
  const Mat rho = random_density(3, rng);
  for (const std::string s : {"XYZ", "IZY", "YYI", "ZIX", "III"}) {
    const Mat p = dense_pauli(s);
    EXPECT_LT((pauli_conjugate(rho, s) - p * rho * p.adjoint()).cwiseAbs().maxCoeff(), 1e-14) << s;
    EXPECT_NEAR(pauli_expectation(rho, s), (p * rho).trace().real(), 1e-14) << s;
  }
}

TEST(Pauli, LengthMismatchThrows) {
  EXPECT_THROW(pauli_expectation(Mat::Identity(4, 4) / 4.0, "XYZ"), DimensionMismatch);
}

TEST(PartialTrace, ProductStateFactorizes) {
  std::mt19937_64 rng(3);
  const Mat a = random_density(1, rng), b = random_density(1, rng), c = random_density(1, rng);
  const Mat abc = kron(kron(a, b), c);
  EXPECT_LT((partial_trace_keep(abc, {0, 2}) - kron(a, c)).cwiseAbs().maxCoeff(), 1e-14);
  EXPECT_LT((partial_trace_keep(abc, {1}) - b).cwiseAbs().maxCoeff(), 1e-14);
}

TEST(GlobalPhase, DifferenceIgnoresPhase) {
  const Mat u = embed(rot_phi(0.3, 0.1), 1, 2);
  EXPECT_LT(max_diff_up_to_phase(u * std::polar(1.0, 2.1), u), 1e-14);
  EXPECT_GT(max_diff_up_to_phase(embed(rot_phi(0.4, 0.1), 1, 2), u), 1e-3);
}

TEST(Wrap, IntoHalfOpenInterval) {
  EXPECT_NEAR(wrap_2pi(-0.5), two_pi - 0.5, 1e-15);
  EXPECT_EQ(wrap_2pi(two_pi), 0.0);
  EXPECT_NEAR(wrap_2pi(3 * pi), pi, 1e-14);
}
