#pragma once

#include <optional>
#include <string>
#include <vector>

#include "hankel_mpc/conic.hpp"
#include "hankel_mpc/synthesis.hpp"

namespace hmpc {

/// full: terminal cost and terminal set; cost_only: terminal cost, no set;
/// none: neither.
enum class TerminalMode { full, cost_only, none };

std::string_view to_string(TerminalMode mode);
TerminalMode parse_terminal_mode(std::string_view text);

struct MpcConfig {
  int horizon = 0;
  int window = 0;
  Matrix q;
  Matrix r;
  Box u_box;
  Box y_box;
  Vector u_s;
  Vector y_s;
  double lambda_alpha = 0.0;
  TerminalMode mode = TerminalMode::full;
  Matrix terminal_p;  // used unless mode == none
  double beta = std::numeric_limits<double>::infinity();

  void validate(const DataBank& bank) const;
};

/// Quadratic program over x = [alpha; u_-l..u_{L-1}; y_-l..y_{L-1}].
struct Ocp {
  ConeProgram program;
  Index n_alpha = 0;
  Index u_off = 0;
  Index y_off = 0;
  int horizon = 0;
  int window = 0;
  Index m = 0, p = 0;
  bool terminal_set = false;
};

/// Builds the program once per (bank, cfg); only the initialization rows
/// change between closed-loop steps.
class OcpBuilder {
 public:
  OcpBuilder(const DataBank& bank, MpcConfig cfg);

  Ocp build(const ExtendedState& history) const;
  /// Same program without the initialization rows.
  Ocp build_unconstrained_start() const;

  const MpcConfig& config() const { return cfg_; }

 private:
  MpcConfig cfg_;
  Ocp base_;
  Index init_row_ = 0;
};

Ocp build_ocp(const DataBank& bank, const MpcConfig& cfg, const ExtendedState& history);

struct MpcSolution {
  Matrix u_bar;  // m x L
  Matrix y_bar;  // p x L
  Vector alpha;
  Vector xi_l;
  double cost = 0.0;
  SolveStatus status = SolveStatus::numerical_failure;
  int iterations = 0;
  /// ||[Hu; Hy] alpha - [u; y]|| over the full window.
  double hankel_residual = 0.0;
};

MpcSolution solve_ocp(const Ocp& ocp, const DataBank& bank, const ConicSolver& solver);

struct StepResult {
  Vector u;
  MpcSolution solution;
};

StepResult mpc_step(const DataBank& bank, const MpcConfig& cfg, const ExtendedState& history,
                    const ConicSolver& solver);

enum class Outcome { converged, infeasible, diverged, not_converged };

std::string_view to_string(Outcome outcome);

struct StepRecord {
  int t = 0;
  Vector xi;
  Vector u;
  Vector y;
  Vector y_predicted;
  double cost = 0.0;
  double solver_ms = 0.0;
  SolveStatus status = SolveStatus::optimal;
};

struct ClosedLoopTrace {
  int window = 0;
  Matrix warmup_u;  // m x l
  Matrix warmup_y;  // p x l
  std::vector<StepRecord> steps;
  Vector final_xi;
  Outcome outcome = Outcome::not_converged;
  std::optional<int> converged_at;
  std::optional<int> failed_at;
  SolveStatus failure_status = SolveStatus::optimal;
};

struct ClosedLoopOptions {
  int steps = 30;
  /// Inputs applied for the first l samples; zero when empty.
  Matrix warmup_u;
  double convergence_tol = 1e-4;
  int convergence_steps = 5;
  double divergence_factor = 1e6;
  bool stop_when_converged = false;
  const ConicSolver* solver = nullptr;
};

ClosedLoopTrace run_closed_loop(const LtiSystem& plant, const Vector& x0, const DataBank& bank,
                                const MpcConfig& cfg, const ClosedLoopOptions& options = {});

struct DiagnosticsReport {
  std::vector<double> margins;  // cost-decrease margins, one per step pair
  double max_margin = 0.0;
  double margin_tol = 0.0;
  bool decrease_checked = false;  // only with lambda_alpha == 0
  bool decrease_ok = true;
  bool recursively_feasible = true;
  double u_violation = 0.0;
  double y_violation = 0.0;
  double prediction_error = 0.0;  // max |y_pred_0 - y_t|
  std::optional<double> decay_rate;
  double decay_r2 = 0.0;
  Index decay_points = 0;
};

DiagnosticsReport diagnostics(const ClosedLoopTrace& trace, const MpcConfig& cfg);

}  // namespace hmpc
