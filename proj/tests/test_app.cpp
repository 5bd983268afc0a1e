#include <gtest/gtest.h>

#include <filesystem>
#include <sstream>

#include "hankel_mpc/app.hpp"

namespace hmpc {
namespace {

namespace fs = std::filesystem;

fs::path fresh_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("hankel_mpc_test_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

TEST(Builtin, FourTankEquilibriumAndLag) {
  const LtiSystem sys = app::builtin_plant("four-tank-style");
  const io::Problem pr = app::builtin_problem("four-tank-style");
  EXPECT_TRUE(is_equilibrium_model(sys, pr.u_s, pr.y_s));
  const Vector xs = (Matrix::Identity(4, 4) - sys.a()).lu().solve(sys.b() * pr.u_s);
  EXPECT_NEAR((sys.c() * xs - pr.y_s).norm(), 0.0, 1e-12);
  EXPECT_EQ(lag(sys), 2);
  EXPECT_TRUE(extended_pair_controllable(sys, 2));
  EXPECT_LT(sys.a().eigenvalues().cwiseAbs().maxCoeff(), 1.0);
  EXPECT_THROW(app::builtin_plant("three-tank"), app::CommandError);
}

TEST(Uniform, MatchesBitRecipe) {
  std::mt19937_64 a(42), b(42);
  for (int i = 0; i < 1000; ++i) {
    const double v = app::uniform(a, -3.0, 5.0);
    const double ref = -3.0 + 8.0 * (static_cast<double>(b() >> 11) / 9007199254740992.0);
    EXPECT_EQ(v, ref);
    EXPECT_GE(v, -3.0);
    EXPECT_LT(v, 5.0);
  }
}

TEST(ResolvePlant, RandomSpecIsSeeded) {
  const LtiSystem a = app::resolve_plant("random:3,2,1", 7);
  const LtiSystem b = app::resolve_plant("random:3,2,1", 7);
  EXPECT_EQ(a.a(), b.a());
  EXPECT_EQ(a.states(), 3);
  EXPECT_EQ(a.inputs(), 2);
  EXPECT_EQ(a.outputs(), 1);
  try {
    app::resolve_plant("random:3,2", 0);
    FAIL();
  } catch (const app::CommandError& e) {
    EXPECT_EQ(e.code(), app::kUsage);
  }
  EXPECT_THROW(app::resolve_plant("/nonexistent/plant.json", 0), app::CommandError);
}

TEST(GenerateData, NoiseEnergyMatchesRealizationResidual) {
  const LtiSystem sys = app::builtin_plant("four-tank-style");
  app::DataOptions opt;
  opt.seed = 4;
  opt.noise_energy = 0.37;
  const IoTrajectory noisy = app::generate_data(sys, opt);
  opt.noise_energy = 0.0;
  const IoTrajectory clean = app::generate_data(sys, opt);
  EXPECT_EQ(noisy.u(), clean.u());

  // Output-recursion residual of the noisy data is exactly the injected noise.
  const auto real = extended_realization(sys, 2);
  double energy = 0.0;
  for (Index k = 2; k < noisy.length(); ++k) {
    const auto xi = extended_state_from_history(noisy.u().middleCols(k - 2, 2),
                                                noisy.y().middleCols(k - 2, 2));
    const Vector d = noisy.y().col(k) - real.c * xi.values() - real.d * noisy.u().col(k);
    energy += d.squaredNorm();
  }
  EXPECT_NEAR(energy, 0.37, 1e-10);

  double clean_energy = 0.0;
  for (Index k = 2; k < clean.length(); ++k) {
    const auto xi = extended_state_from_history(clean.u().middleCols(k - 2, 2),
                                                clean.y().middleCols(k - 2, 2));
    clean_energy += (clean.y().col(k) - real.c * xi.values() - real.d * clean.u().col(k)).squaredNorm();
  }
  EXPECT_LT(clean_energy, 1e-24);
}

TEST(Tracking, BandAndSettleTime) {
  ClosedLoopTrace trace;
  const Vector us = Vector::Ones(1), ys = Vector::Constant(1, 2.0);
  const double devs[] = {0.5, 0.001, 0.02, 0.004, 0.003, 0.0};
  int t = 1;
  for (double d : devs) {
    StepRecord s;
    s.t = t++;
    s.u = us * (1.0 + d);
    s.y = ys;
    trace.steps.push_back(s);
  }
  const auto tr = app::tracking(trace, us, ys, 0.005);
  ASSERT_TRUE(tr.settled_at);
  EXPECT_EQ(*tr.settled_at, 4);
  EXPECT_NEAR(tr.final_offset, 0.0, 1e-15);

  trace.steps.back().status = SolveStatus::infeasible;
  EXPECT_FALSE(app::tracking(trace, us, ys, 0.005).tracked());
}

TEST(Commands, PipelineOnRandomSystem) {
  const fs::path dir = fresh_dir("pipeline");
  std::ostringstream log;

  app::GenDataArgs gen;
  gen.plant = "random:2,1,1";
  gen.data.length = 60;
  gen.data.seed = 3;
  gen.out = dir;
  ASSERT_EQ(app::cmd_gen_data(gen, log), app::kOk);
  const io::json gm = io::read_json(dir / "gen-data.manifest.json");
  EXPECT_EQ(gm.at("outputs").at("data").at("hash"), io::file_hash(dir / "data.csv"));

  const std::string first = io::read_file(dir / "data.csv");
  ASSERT_EQ(app::cmd_gen_data(gen, log), app::kOk);
  EXPECT_EQ(io::read_file(dir / "data.csv"), first);

  const LtiSystem sys = app::resolve_plant(gen.plant, gen.data.seed);
  io::Problem pr;
  pr.u_s = Vector::Constant(1, 0.2);
  pr.y_s = (sys.c() * (Matrix::Identity(2, 2) - sys.a()).lu().solve(sys.b() * pr.u_s) +
            sys.d() * pr.u_s);
  pr.u_box = Box::symmetric(1, 2.0);
  pr.y_box = Box::unbounded(1);
  io::write_json(dir / "problem.json", io::problem_to_json(pr));

  app::CheckArgs check;
  check.data = dir / "data.csv";
  check.window = lag(sys);
  check.horizon = 6;
  check.order = 2;
  check.problem = dir / "problem.json";
  check.out = dir;
  const int check_code = app::cmd_check(check, log);
  const io::json report = io::read_json(dir / "check.json");
  EXPECT_EQ(check_code == app::kOk, report.at("passed").get<bool>());

  app::DesignArgs design;
  design.data = dir / "data.csv";
  design.window = lag(sys);
  design.problem = dir / "problem.json";
  design.plant = gen.plant;
  design.seed = gen.data.seed;
  design.q_scale = 1.0;
  design.r_scale = 0.1;
  design.out = dir;
  ASSERT_EQ(app::cmd_design(design, log), app::kOk) << log.str();
  const io::Certificate cert = io::certificate_from_json(io::read_json(dir / "certificate.json"));
  ASSERT_TRUE(cert.ingredients.report);
  EXPECT_TRUE(cert.ingredients.report->passed());
  EXPECT_EQ(cert.ingredients.report->realization_source, "oracle");

  app::RunArgs run;
  run.data = dir / "data.csv";
  run.cert = dir / "certificate.json";
  run.plant = gen.plant;
  run.seed = gen.data.seed;
  run.horizon = 6;
  run.steps = 30;
  run.timing = false;
  run.x0 = Vector::Zero(2);
  run.out = dir;
  const app::RunOutput out = app::execute_run(run, log);
  EXPECT_EQ(out.code, app::kOk);
  EXPECT_TRUE(out.diagnostics.recursively_feasible);
  for (const char* f : {"trace.csv", "summary.json", "inputs.svg", "outputs.svg", "run.manifest.json"}) {
    EXPECT_TRUE(fs::exists(dir / f)) << f;
  }
  const io::json rm = io::read_json(dir / "run.manifest.json");
  EXPECT_EQ(rm.at("inputs").at("certificate").at("hash"), io::file_hash(dir / "certificate.json"));
  EXPECT_EQ(rm.at("inputs").at("data").at("hash"), gm.at("outputs").at("data").at("hash"));

  // Trace CSV: header, l warm-up rows, one row per step.
  std::istringstream csv(io::read_file(dir / "trace.csv"));
  std::string line;
  std::getline(csv, line);
  EXPECT_EQ(line, "t,u_1,y_1,cost,solver_ms,status");
  Index rows = 0;
  while (std::getline(csv, line)) ++rows;
  EXPECT_EQ(rows, lag(sys) + 30);
}

TEST(Commands, CheckFailsOnShortData) {
  const fs::path dir = fresh_dir("short");
  std::ostringstream log;
  app::GenDataArgs gen;
  gen.plant = "four-tank-style";
  gen.data.length = 30;
  gen.out = dir;
  ASSERT_EQ(app::cmd_gen_data(gen, log), app::kOk);
  app::CheckArgs check;
  check.data = dir / "data.csv";
  check.horizon = 10;
  check.order = 4;
  check.out = dir;
  EXPECT_EQ(app::cmd_check(check, log), app::kInfeasible);
  EXPECT_FALSE(io::read_json(dir / "check.json").at("passed").get<bool>());
}

TEST(Commands, RunRequiresCertificateForTerminalModes) {
  const fs::path dir = fresh_dir("nocert");
  std::ostringstream log;
  app::GenDataArgs gen;
  gen.out = dir;
  ASSERT_EQ(app::cmd_gen_data(gen, log), app::kOk);
  app::RunArgs run;
  run.data = dir / "data.csv";
  run.out = dir;
  run.mode = TerminalMode::cost_only;
  try {
    app::cmd_run(run, log);
    FAIL();
  } catch (const app::CommandError& e) {
    EXPECT_EQ(e.code(), app::kUsage);
  }
}

TEST(Commands, InfeasibleFirstStepExitsWithTwo) {
  const fs::path dir = fresh_dir("infeasible");
  std::ostringstream log;
  app::GenDataArgs gen;
  gen.out = dir;
  ASSERT_EQ(app::cmd_gen_data(gen, log), app::kOk);
  // Near-zero inputs cannot lift the outputs into [5, 6] within the horizon.
  io::Problem pr = app::builtin_problem("four-tank-style");
  pr.u_box = Box::symmetric(2, 1e-9);
  pr.y_box.lower = Vector::Constant(2, 5.0);
  pr.y_box.upper = Vector::Constant(2, 6.0);
  io::write_json(dir / "problem.json", io::problem_to_json(pr));
  app::RunArgs run;
  run.data = dir / "data.csv";
  run.problem = dir / "problem.json";
  run.mode = TerminalMode::none;
  run.steps = 5;
  run.out = dir;
  EXPECT_EQ(app::cmd_run(run, log), app::kInfeasible) << log.str();
  EXPECT_NE(log.str().find("history"), std::string::npos);
}

}  // namespace
}  // namespace hmpc
