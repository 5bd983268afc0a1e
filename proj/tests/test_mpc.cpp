#include <gtest/gtest.h>

#include <random>

#include "hankel_mpc/mpc.hpp"
#include "support.hpp"

namespace hmpc {
namespace {

using namespace hmpc::testing;

struct Setup {
  LtiSystem sys;
  DataBank bank;
  MpcConfig cfg;
};

// Random p*l == n plant with a synthesized certificate and a bounded input box.
Setup certified_setup(std::uint64_t seed, int horizon = 6) {
  std::mt19937_64 rng(seed);
  auto sys = square_system(2, 1, 1, rng);
  const int l = lag(sys);
  auto bank = make_bank(sys, horizon, l, rng);
  MpcConfig cfg;
  cfg.horizon = horizon;
  cfg.window = l;
  cfg.q = Matrix::Identity(1, 1);
  cfg.r = 0.1 * Matrix::Identity(1, 1);
  cfg.u_s = Vector::Constant(1, 0.2);
  cfg.y_s = equilibrium_output(sys, cfg.u_s);
  cfg.u_box = Box::symmetric(1, 2.0);
  cfg.y_box = Box::unbounded(1);
  const auto res = synthesize(bank, cfg.q, cfg.r);
  EXPECT_TRUE(res.ok()) << res.message;
  cfg.terminal_p = res.ingredients->p;
  cfg.beta = terminal_set_radius(cfg.terminal_p, steady_extended_state(cfg.u_s, cfg.y_s, l),
                                 cfg.u_box, cfg.y_box);
  cfg.mode = TerminalMode::full;
  return {std::move(sys), std::move(bank), std::move(cfg)};
}

TEST(Ocp, VariableCountsForDemoSizes) {
  std::mt19937_64 rng(1);
  const auto sys = random_system(4, 2, 2, rng);
  const Matrix u = random_matrix(2, 100, rng);
  const auto sim = simulate(sys, Vector::Zero(4), u);
  const auto bank = build_data_bank(IoTrajectory(u, sim.outputs), 15, 2);
  MpcConfig cfg;
  cfg.horizon = 15;
  cfg.window = 2;
  cfg.q = Matrix::Identity(2, 2);
  cfg.r = 5e-3 * Matrix::Identity(2, 2);
  cfg.u_box = Box::symmetric(2, 2.0);
  cfg.y_box = Box::unbounded(2);
  cfg.u_s = Vector::Ones(2);
  cfg.y_s = Vector::Zero(2);
  cfg.mode = TerminalMode::none;
  const auto ocp = build_ocp(bank, cfg, steady_extended_state(cfg.u_s, cfg.y_s, 2));
  EXPECT_EQ(ocp.n_alpha, 84);
  EXPECT_EQ(ocp.program.variables() - ocp.n_alpha, 68);
  EXPECT_EQ(ocp.program.cones.nonneg, 60);
}

TEST(Ocp, EquilibriumHistoryHasZeroCost) {
  const auto s = certified_setup(2);
  const auto hist = steady_extended_state(s.cfg.u_s, s.cfg.y_s, s.cfg.window);
  const auto solver = default_solver();
  const auto sol = solve_ocp(build_ocp(s.bank, s.cfg, hist), s.bank, *solver);
  ASSERT_EQ(sol.status, SolveStatus::optimal);
  EXPECT_NEAR(sol.cost, 0.0, 1e-6);
  EXPECT_LE((sol.u_bar.colwise() - s.cfg.u_s).cwiseAbs().maxCoeff(), 1e-6);
}

TEST(Ocp, SolutionLiesInHankelImage) {
  const auto s = certified_setup(3);
  std::mt19937_64 rng(30);
  const Matrix uw = random_matrix(1, s.cfg.window, rng, 0.5);
  const auto sim = simulate(s.sys, random_matrix(2, 1, rng, 0.5), uw);
  const auto hist = extended_state_from_history(uw, sim.outputs);
  const auto solver = default_solver();
  const auto sol = solve_ocp(build_ocp(s.bank, s.cfg, hist), s.bank, *solver);
  ASSERT_EQ(sol.status, SolveStatus::optimal);
  const double scale = 1.0 + std::sqrt(sol.u_bar.squaredNorm() + sol.y_bar.squaredNorm());
  EXPECT_LE(sol.hankel_residual, 1e-6 * scale);
  // xi_L is the last l samples of the prediction.
  EXPECT_NEAR(sol.xi_l(s.cfg.window - 1), sol.u_bar(0, s.cfg.horizon - 1), 1e-12);
  EXPECT_NEAR(sol.xi_l(2 * s.cfg.window - 1), sol.y_bar(0, s.cfg.horizon - 1), 1e-12);
  // Inside the terminal ellipsoid.
  const Vector d =
      sol.xi_l - steady_extended_state(s.cfg.u_s, s.cfg.y_s, s.cfg.window).values();
  EXPECT_LE(d.dot(s.cfg.terminal_p * d), s.cfg.beta * (1.0 + 1e-6));
}

TEST(Ocp, DroppingInitializationLowersCost) {
  auto s = certified_setup(4);
  // Without the initialization rows the past window is free; a small alpha
  // penalty keeps the minimizer unique.
  s.cfg.lambda_alpha = 1e-6;
  std::mt19937_64 rng(40);
  const Matrix uw = random_matrix(1, s.cfg.window, rng);
  const auto sim = simulate(s.sys, random_matrix(2, 1, rng), uw);
  const auto hist = extended_state_from_history(uw, sim.outputs);
  const OcpBuilder builder(s.bank, s.cfg);
  const auto solver = default_solver();
  const auto with = solve_ocp(builder.build(hist), s.bank, *solver);
  const auto without = solve_ocp(builder.build_unconstrained_start(), s.bank, *solver);
  ASSERT_EQ(with.status, SolveStatus::optimal);
  ASSERT_EQ(without.status, SolveStatus::optimal);
  EXPECT_LT(without.cost, with.cost - 1e-6);
}

TEST(Ocp, UnreachableSetpointIsInfeasible) {
  auto s = certified_setup(5);
  s.cfg.u_box = Box{Vector::Constant(1, s.cfg.u_s(0) + 0.5), Vector::Constant(1, 5.0)};
  s.cfg.terminal_p = Matrix::Identity(2 * s.cfg.window, 2 * s.cfg.window);
  s.cfg.beta = 0.01;
  const auto hist = steady_extended_state(s.cfg.u_s, s.cfg.y_s, s.cfg.window);
  const auto solver = default_solver();
  const auto step = mpc_step(s.bank, s.cfg, hist, *solver);
  EXPECT_EQ(step.solution.status, SolveStatus::infeasible);
  EXPECT_EQ(step.u.size(), 0);
}

TEST(Ocp, MissingTerminalCostIsRejected) {
  auto s = certified_setup(6);
  s.cfg.terminal_p = Matrix();
  EXPECT_THROW(OcpBuilder(s.bank, s.cfg), std::invalid_argument);
  s.cfg.mode = TerminalMode::none;
  EXPECT_NO_THROW(OcpBuilder(s.bank, s.cfg));
}

TEST(ClosedLoop, EquilibriumStartStaysPut) {
  const auto s = certified_setup(7);
  const Index n = 2;
  const Vector xs =
      (Matrix::Identity(n, n) - s.sys.a()).lu().solve(s.sys.b() * s.cfg.u_s);
  ClosedLoopOptions opt;
  opt.steps = 10;
  opt.warmup_u = s.cfg.u_s.replicate(1, s.cfg.window);
  const auto trace = run_closed_loop(s.sys, xs, s.bank, s.cfg, opt);
  ASSERT_EQ(trace.steps.size(), 10u);
  for (const auto& st : trace.steps) EXPECT_NEAR(st.u(0), s.cfg.u_s(0), 1e-6);
  EXPECT_EQ(trace.outcome, Outcome::converged);
  const auto rep = diagnostics(trace, s.cfg);
  EXPECT_LE(rep.max_margin, 1e-6);
  EXPECT_FALSE(rep.decay_rate.has_value());
}

// Property over several certified setups: feasibility persists, the cost
// decreases by at least the stage cost, constraints hold and predictions
// match the plant.
TEST(ClosedLoop, NominalRunsSatisfyStabilityDiagnostics) {
  for (std::uint64_t seed = 10; seed < 15; ++seed) {
    const auto s = certified_setup(seed);
    std::mt19937_64 rng(seed * 7);
    ClosedLoopOptions opt;
    opt.steps = 30;
    const auto trace = run_closed_loop(s.sys, random_matrix(2, 1, rng, 0.3), s.bank, s.cfg, opt);
    ASSERT_NE(trace.outcome, Outcome::infeasible) << "seed " << seed;
    const auto rep = diagnostics(trace, s.cfg);
    EXPECT_TRUE(rep.recursively_feasible);
    EXPECT_TRUE(rep.decrease_checked);
    EXPECT_LE(rep.max_margin, rep.margin_tol) << "seed " << seed;
    EXPECT_LE(rep.u_violation, 1e-8);
    EXPECT_LE(rep.prediction_error, 1e-6);
    if (trace.outcome == Outcome::converged && rep.decay_rate) {
      EXPECT_LT(*rep.decay_rate, 1.0);
    }
  }
}

TEST(Diagnostics, RelaxedDecreaseCheckWithRegularization) {
  auto s = certified_setup(20);
  s.cfg.lambda_alpha = 1e-4;
  std::mt19937_64 rng(21);
  ClosedLoopOptions opt;
  opt.steps = 5;
  const auto trace = run_closed_loop(s.sys, random_matrix(2, 1, rng, 0.3), s.bank, s.cfg, opt);
  const auto rep = diagnostics(trace, s.cfg);
  EXPECT_FALSE(rep.decrease_checked);
  EXPECT_TRUE(rep.decrease_ok);
}

TEST(TerminalMode, ParseRoundTrip) {
  for (auto mode : {TerminalMode::full, TerminalMode::cost_only, TerminalMode::none}) {
    EXPECT_EQ(parse_terminal_mode(to_string(mode)), mode);
  }
  EXPECT_THROW(parse_terminal_mode("sometimes"), std::invalid_argument);
}

}  // namespace
}  // namespace hmpc
