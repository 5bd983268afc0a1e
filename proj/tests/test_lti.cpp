#include <gtest/gtest.h>

#include <random>

#include "hankel_mpc/lti.hpp"
#include "hankel_mpc/trajectory.hpp"

namespace hmpc {
namespace {

Matrix random_matrix(Index r, Index c, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> ud(-1.0, 1.0);
  Matrix out(r, c);
  for (Index i = 0; i < out.size(); ++i) out.data()[i] = ud(rng);
  return out;
}

LtiSystem double_integrator() {
  Matrix a(2, 2), b(2, 1), c(1, 2), d = Matrix::Zero(1, 1);
  a << 1, 1, 0, 1;
  b << 0, 1;
  c << 1, 0;
  return LtiSystem(a, b, c, d);
}

TEST(LtiSystem, RejectsBadInputs) {
  const Matrix a = Matrix::Identity(2, 2);
  EXPECT_THROW(LtiSystem(a, Matrix::Ones(3, 1), Matrix::Ones(1, 2), Matrix::Zero(1, 1)),
               std::invalid_argument);
  Matrix b(2, 1);
  b << 1, 1;
  // (I, b) is not controllable.
  EXPECT_THROW(LtiSystem(a, b, Matrix::Identity(2, 2), Matrix::Zero(2, 1)), std::domain_error);
}

TEST(LtiSystem, SimulateMatchesHandRecursion) {
  const auto sys = double_integrator();
  Matrix u(1, 4);
  u << 1, 0, -1, 2;
  const auto sim = simulate(sys, Vector::Zero(2), u);
  // Position sequence of a double integrator from rest: 0, 0, 1, 2.
  EXPECT_NEAR(sim.outputs(0, 0), 0.0, 1e-15);
  EXPECT_NEAR(sim.outputs(0, 1), 0.0, 1e-15);
  EXPECT_NEAR(sim.outputs(0, 2), 1.0, 1e-15);
  EXPECT_NEAR(sim.outputs(0, 3), 2.0, 1e-15);
  EXPECT_EQ(sim.states.cols(), 5);
}

TEST(LtiSystem, LagOfDoubleIntegratorIsTwo) {
  EXPECT_EQ(lag(double_integrator()), 2);
  const Matrix c = Matrix::Identity(2, 2);
  const auto full = LtiSystem(double_integrator().a(), double_integrator().b(), c,
                              Matrix::Zero(2, 1));
  EXPECT_EQ(lag(full), 1);
}

TEST(ExtendedRealization, DoubleIntegratorCoefficients) {
  // y_k = 2 y_{k-1} - y_{k-2} + u_{k-2}
  const auto real = extended_realization(double_integrator(), 2);
  ASSERT_EQ(real.dim(), 4);
  Matrix expected_c(1, 4);
  expected_c << 1, 0, -1, 2;
  EXPECT_TRUE(real.c.isApprox(expected_c, 1e-12)) << real.c;
  EXPECT_NEAR(real.d(0, 0), 0.0, 1e-12);
  EXPECT_TRUE(real.a.bottomRows(1).isApprox(real.c, 1e-15));
}

TEST(ExtendedRealization, WindowBelowLagIsRejected) {
  EXPECT_THROW(extended_realization(double_integrator(), 1), std::domain_error);
}

TEST(ExtendedRealization, ReproducesPlantOutputsOnRandomSystems) {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    const Index n = 2 + trial % 4, m = 1 + trial % 2, p = 1 + (trial / 2) % 2;
    const auto sys = random_system(n, m, p, rng);
    const int l = lag(sys) + trial % 2;
    const auto real = extended_realization(sys, l);
    const Index steps = 40;
    const Matrix u = random_matrix(m, l + steps, rng);
    const Vector x0 = random_matrix(n, 1, rng);
    const auto sim = simulate(sys, x0, u);
    const auto xi0 = extended_state_from_history(u.leftCols(l), sim.outputs.leftCols(l));
    const Matrix y = simulate_extended(real, xi0.values(), u.rightCols(steps));
    EXPECT_LE((y - sim.outputs.rightCols(steps)).cwiseAbs().maxCoeff(), 1e-9) << "trial " << trial;
  }
}

TEST(ExtendedRealization, FromCoefficientsRoundTrip) {
  std::mt19937_64 rng(8);
  const auto sys = random_system(3, 2, 2, rng);
  const int l = lag(sys);
  const auto real = extended_realization(sys, l);
  Matrix theta(2, real.dim() + 2);
  theta << real.c, real.d;
  const auto rebuilt = realization_from_coefficients(theta, l, 2, 2);
  EXPECT_TRUE(rebuilt.a.isApprox(real.a, 1e-14));
  EXPECT_TRUE(rebuilt.b.isApprox(real.b, 1e-14));
}

TEST(ExtendedRealization, DisturbanceEntersOutputWindow) {
  const auto real = extended_realization(double_integrator(), 2);
  Matrix u = Matrix::Zero(1, 3), d = Matrix::Zero(1, 3);
  d(0, 0) = 1.0;
  const Matrix y = simulate_extended(real, Vector::Zero(4), u, d);
  // Unit kick on y_0 then free double-integrator recursion: 1, 2, 3.
  EXPECT_NEAR(y(0, 0), 1.0, 1e-12);
  EXPECT_NEAR(y(0, 1), 2.0, 1e-12);
  EXPECT_NEAR(y(0, 2), 3.0, 1e-12);
}

// Property: controllability of the window pair holds exactly when p*l == n,
// checked against the direct Kalman rank.
TEST(ExtendedRealization, ControllabilityIffSquareObservability) {
  std::mt19937_64 rng(21);
  int square = 0, nonsquare = 0;
  for (int trial = 0; trial < 40; ++trial) {
    const Index n = 1 + trial % 5, m = 1 + trial % 2, p = 1 + (trial / 3) % 3;
    const auto sys = random_system(n, m, p, rng);
    const int l = lag(sys) + (trial % 3 == 0 ? 1 : 0);
    const Index nxi = (m + p) * l;
    const bool direct = extended_controllability_rank(sys, l) == nxi;
    EXPECT_EQ(extended_pair_controllable(sys, l), direct) << "n=" << n << " p=" << p << " l=" << l;
    EXPECT_EQ(direct, p * l == n);
    (p * l == n ? square : nonsquare)++;
  }
  EXPECT_GT(square, 0);
  EXPECT_GT(nonsquare, 0);
}

TEST(Equilibrium, ModelCheckMatchesConstruction) {
  std::mt19937_64 rng(2);
  const auto sys = random_system(3, 1, 1, rng);
  Vector us(1);
  us << 0.7;
  const Matrix i_minus_a = Matrix::Identity(3, 3) - sys.a();
  const Vector xs = i_minus_a.lu().solve(sys.b() * us);
  const Vector ys = sys.c() * xs + sys.d() * us;
  EXPECT_TRUE(is_equilibrium_model(sys, us, ys));
  EXPECT_FALSE(is_equilibrium_model(sys, us, ys + Vector::Constant(1, 0.1)));
}

TEST(RandomSystem, RespectsSpectralRadiusAndStructure) {
  std::mt19937_64 rng(13);
  for (int trial = 0; trial < 10; ++trial) {
    const auto sys = random_system(4, 2, 1, rng, 0.8);
    const double rho = sys.a().eigenvalues().cwiseAbs().maxCoeff();
    EXPECT_NEAR(rho, 0.8, 1e-9);
    EXPECT_TRUE(is_controllable(sys.a(), sys.b()));
    EXPECT_TRUE(is_observable(sys.a(), sys.c()));
  }
}

}  // namespace
}  // namespace hmpc
