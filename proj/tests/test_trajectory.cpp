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

TEST(Hankel, LayoutOfScalarSequence) {
  Matrix x(1, 5);
  x << 1, 2, 3, 4, 5;
  const auto h = hankel(x, 3);
  Matrix expected(3, 3);
  expected << 1, 2, 3, 2, 3, 4, 3, 4, 5;
  EXPECT_EQ(h.data, expected);
  EXPECT_THROW(hankel(x, 6), std::invalid_argument);
}

TEST(Hankel, StacksVectorSamplesBlockwise) {
  Matrix x(2, 3);
  x << 1, 2, 3, 10, 20, 30;
  const auto h = hankel(x, 2);
  Matrix expected(4, 2);
  expected << 1, 2, 10, 20, 2, 3, 20, 30;
  EXPECT_EQ(h.data, expected);
}

TEST(PersistentExcitation, RandomInputAtMinimumLength) {
  std::mt19937_64 rng(4);
  for (Index m = 1; m <= 3; ++m) {
    for (int order = 1; order <= 6; ++order) {
      const Index len = minimum_length_for_excitation(m, order);
      EXPECT_TRUE(is_persistently_exciting(random_matrix(m, len, rng), order));
      EXPECT_FALSE(is_persistently_exciting(random_matrix(m, len - 1, rng), order));
    }
  }
  EXPECT_FALSE(is_persistently_exciting(Matrix::Ones(1, 20), 2));
}

TEST(ExtendedState, WindowsAndSelector) {
  Matrix uw(1, 2), yw(2, 2);
  uw << 1, 2;
  yw << 3, 4, 5, 6;
  const auto xi = extended_state_from_history(uw, yw);
  Vector expected(6);
  expected << 1, 2, 3, 5, 4, 6;
  EXPECT_EQ(xi.values(), expected);
  EXPECT_EQ(xi.output_window(), yw);
  EXPECT_EQ(xi.last_output(), Vector(yw.col(1)));
  EXPECT_EQ(Vector(output_selector(2, 1, 2) * xi.values()), xi.last_output());
}

TEST(DataBank, ShiftedStatesAlign) {
  std::mt19937_64 rng(9);
  const auto sys = random_system(2, 1, 1, rng);
  const Matrix u = random_matrix(1, 30, rng);
  const auto sim = simulate(sys, Vector::Zero(2), u);
  const auto bank = build_data_bank(IoTrajectory(u, sim.outputs), 5, 2);
  EXPECT_EQ(bank.xi.cols(), 28);
  EXPECT_EQ(bank.xi.rightCols(27), bank.xi_plus.leftCols(27));
  EXPECT_EQ(bank.z.rows(), bank.xi_dim() + 1);
  EXPECT_EQ(bank.hu.data.rows(), 7);
  EXPECT_THROW(build_data_bank(IoTrajectory(u.leftCols(6), sim.outputs.leftCols(6)), 5, 2),
               std::invalid_argument);
}

TEST(DataBank, WarnsWhenInputIsNotExciting) {
  std::mt19937_64 rng(10);
  const auto sys = random_system(2, 1, 1, rng);
  const Matrix u = Matrix::Ones(1, 60);
  const auto sim = simulate(sys, Vector::Zero(2), u);
  const auto bank = build_data_bank(IoTrajectory(u, sim.outputs), 5, 2, 2);
  ASSERT_TRUE(bank.warning.has_value());
  EXPECT_EQ(bank.warning->order, 9);
  EXPECT_EQ(bank.warning->rank, 1);
}

// Property: with persistently exciting data, a window is in the Hankel image
// iff it is a trajectory of the plant. Positive samples come from the plant
// simulated from random initial states; negative samples perturb one output.
TEST(FundamentalLemma, MembershipMatchesModelOracle) {
  std::mt19937_64 rng(31);
  for (int trial = 0; trial < 15; ++trial) {
    const Index n = 2 + trial % 3, m = 1 + trial % 2, p = 1 + (trial / 2) % 2;
    const auto sys = random_system(n, m, p, rng);
    const int depth = 6;
    const Index len = minimum_length_for_excitation(m, depth + static_cast<int>(n)) + 5;
    const Matrix ud = random_matrix(m, len, rng);
    const auto data = simulate(sys, random_matrix(n, 1, rng), ud);
    const auto hu = hankel(ud, depth);
    const auto hy = hankel(data.outputs, depth);

    const Matrix uc = random_matrix(m, depth, rng);
    const auto candidate = simulate(sys, random_matrix(n, 1, rng), uc);
    const auto in = trajectory_coefficients(hu, hy, uc, candidate.outputs);
    EXPECT_TRUE(in.feasible) << "trial " << trial << " residual " << in.residual;

    Matrix yc = candidate.outputs;
    yc(0, depth - 1) += 0.05;
    const auto out = trajectory_coefficients(hu, hy, uc, yc);
    EXPECT_FALSE(out.feasible) << "trial " << trial;
  }
}

TEST(Equilibrium, DataCheckAgreesWithModelCheck) {
  std::mt19937_64 rng(17);
  const auto sys = random_system(3, 1, 1, rng);
  const Matrix u = random_matrix(1, 80, rng);
  const auto sim = simulate(sys, Vector::Zero(3), u);
  const int l = lag(sys);
  const auto bank = build_data_bank(IoTrajectory(u, sim.outputs), 6, l);
  Vector us(1);
  us << 0.3;
  const Vector xs = (Matrix::Identity(3, 3) - sys.a()).lu().solve(sys.b() * us);
  const Vector ys = sys.c() * xs + sys.d() * us;
  EXPECT_TRUE(is_equilibrium_data(bank, us, ys, l));
  EXPECT_FALSE(is_equilibrium_data(bank, us, ys.array() + 0.2, l));
}

// rank [xi; u] = n + m*l + m, which is full exactly when p*l == n.
TEST(DataBank, ZRankMatchesStateCount) {
  std::mt19937_64 rng(23);
  for (int trial = 0; trial < 12; ++trial) {
    const Index n = 2 + trial % 3, m = 1 + trial % 2, p = 1 + (trial / 3) % 2;
    const auto sys = random_system(n, m, p, rng);
    const int l = lag(sys);
    const Matrix u = random_matrix(m, 120, rng);
    const auto sim = simulate(sys, random_matrix(n, 1, rng), u);
    const auto bank = build_data_bank(IoTrajectory(u, sim.outputs), 4, l);
    EXPECT_EQ(numerical_rank(bank.z), n + m * l + m) << "trial " << trial;
    EXPECT_EQ(z_full_row_rank(bank), p * l == n) << "trial " << trial;
  }
}

}  // namespace
}  // namespace hmpc
