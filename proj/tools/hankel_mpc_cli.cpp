#include <CLI11.hpp>

#include <iostream>
#include <sstream>

#include "hankel_mpc/app.hpp"

namespace {

using namespace hmpc;

Vector parse_vector(const std::string& text) {
  std::vector<double> vals;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    std::size_t used = 0;
    const double v = std::stod(item, &used);
    if (used != item.size()) throw std::invalid_argument("bad number: " + item);
    vals.push_back(v);
  }
  if (vals.empty()) throw std::invalid_argument("empty vector");
  return Eigen::Map<Vector>(vals.data(), static_cast<Index>(vals.size()));
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App cli{"Data-driven MPC with terminal ingredients"};
  cli.set_version_flag("--version", hmpc::app::kVersion);
  cli.require_subcommand(1);

  app::GenDataArgs gen;
  auto* gen_cmd = cli.add_subcommand("gen-data", "Simulate a plant and record input/output data");
  gen_cmd->add_option("--plant", gen.plant, "four-tank-style, random:n,m,p or a plant JSON file");
  gen_cmd->add_option("--length", gen.data.length, "Number of samples")->check(CLI::PositiveNumber);
  gen_cmd->add_option("--input-bound", gen.data.input_bound, "Inputs are uniform in [-b, b]");
  gen_cmd->add_option("--noise", gen.data.noise_energy, "Total equation-error energy");
  gen_cmd->add_option("--seed", gen.data.seed);
  gen_cmd->add_option("--out", gen.out, "Output directory");

  app::CheckArgs check;
  auto* check_cmd = cli.add_subcommand("check", "Check data assumptions");
  check_cmd->add_option("--data", check.data)->required();
  check_cmd->add_option("--window", check.window)->check(CLI::PositiveNumber);
  check_cmd->add_option("--horizon", check.horizon)->check(CLI::PositiveNumber);
  check_cmd->add_option("--order", check.order, "Known or bounded state dimension");
  check_cmd->add_option("--box", check.problem, "Problem JSON (setpoint and constraints)");
  check_cmd->add_option("--out", check.out);

  app::DesignArgs design;
  auto* design_cmd = cli.add_subcommand("design", "Synthesize terminal cost, gain and set");
  design_cmd->add_option("--data", design.data)->required();
  design_cmd->add_option("--window", design.window)->check(CLI::PositiveNumber);
  design_cmd->add_option("--box", design.problem, "Problem JSON (setpoint and constraints)");
  design_cmd->add_option("--plant", design.plant, "Plant used as verification oracle");
  design_cmd->add_option("--q", design.q_scale, "Output weight Q = q I");
  design_cmd->add_option("--r", design.r_scale, "Input weight R = r I");
  design_cmd->add_option("--dbar", design.dbar, "Noise energy bound");
  design_cmd->add_option("--gamma", design.gamma, "Fixed performance level (no bisection)");
  design_cmd->add_option("--gamma-max", design.gamma_max);
  design_cmd->add_flag("--zero-gain", design.zero_gain, "Fix the terminal gain to zero");
  design_cmd->add_option("--seed", design.seed);
  design_cmd->add_option("--out", design.out);

  app::RunArgs run;
  std::string mode = "full", x0;
  auto* run_cmd = cli.add_subcommand("run", "Closed-loop simulation");
  run_cmd->add_option("--data", run.data)->required();
  run_cmd->add_option("--cert", run.cert, "Certificate from design");
  run_cmd->add_option("--box", run.problem, "Problem JSON overriding the certificate");
  run_cmd->add_option("--plant", run.plant);
  run_cmd->add_option("--x0", x0, "Initial plant state, comma separated");
  run_cmd->add_option("--steps", run.steps)->check(CLI::PositiveNumber);
  run_cmd->add_option("--horizon", run.horizon)->check(CLI::PositiveNumber);
  run_cmd->add_option("--window", run.window)->check(CLI::PositiveNumber);
  run_cmd->add_option("--lambda-alpha", run.lambda_alpha);
  run_cmd->add_option("--terminal-mode", mode)->check(CLI::IsMember({"full", "cost-only", "none"}));
  run_cmd->add_option("--q", run.q_scale);
  run_cmd->add_option("--r", run.r_scale);
  run_cmd->add_flag("!--no-timing", run.timing, "Write solver_ms as 0");
  run_cmd->add_option("--seed", run.seed);
  run_cmd->add_option("--out", run.out);

  app::ReproduceArgs repro;
  auto* repro_cmd = cli.add_subcommand("reproduce", "Run the full pipeline and write a report");
  repro_cmd->add_option("--seed", repro.seed);
  repro_cmd->add_option("--steps", repro.steps)->check(CLI::PositiveNumber);
  repro_cmd->add_option("--out", repro.out);

  try {
    cli.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = cli.exit(e);
    return code == 0 ? 0 : app::kUsage;
  }

  try {
    if (*gen_cmd) {
      std::filesystem::create_directories(gen.out);
      return app::cmd_gen_data(gen, std::cout);
    }
    if (*check_cmd) {
      std::filesystem::create_directories(check.out);
      return app::cmd_check(check, std::cout);
    }
    if (*design_cmd) {
      std::filesystem::create_directories(design.out);
      return app::cmd_design(design, std::cout);
    }
    if (*run_cmd) {
      run.mode = parse_terminal_mode(mode);
      if (!x0.empty()) run.x0 = parse_vector(x0);
      std::filesystem::create_directories(run.out);
      return app::cmd_run(run, std::cout);
    }
    return app::cmd_reproduce(repro, std::cout);
  } catch (const app::CommandError& e) {
    std::cerr << "error [" << e.stage() << "]: " << e.what() << "\n";
    return e.code();
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return app::kUsage;
  }
}
