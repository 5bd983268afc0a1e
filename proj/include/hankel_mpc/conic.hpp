#pragma once

#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "hankel_mpc/linalg.hpp"

namespace hmpc {

/// Cone K = R+^nonneg x SOC(soc[0]) x ... x PSD(psd[0]) x ...
///
/// A second-order cone of size k holds (t, x) with ||x|| <= t. A PSD block of
/// order n is stored as svec: lower triangle, column by column, with
/// off-diagonal entries scaled by sqrt(2) so that inner products match the
/// trace inner product.
struct ConeDims {
  Index nonneg = 0;
  std::vector<Index> soc;
  std::vector<Index> psd;

  Index size() const;
  /// Barrier degree: nonneg + #soc + sum of psd orders.
  Index degree() const;
};

/// minimize 1/2 x'Px + q'x + offset  s.t.  Gx + s = h, s in K,  Ax = b.
struct ConeProgram {
  Matrix p;
  Vector q;
  Matrix a;
  Vector b;
  Matrix g;
  Vector h;
  ConeDims cones;
  double offset = 0.0;

  Index variables() const { return q.size(); }
  double objective(const Vector& x) const;
  void validate() const;
};

enum class SolveStatus { optimal, infeasible, numerical_failure };

std::string_view to_string(SolveStatus status);

struct ConicSolution {
  SolveStatus status = SolveStatus::numerical_failure;
  /// On numerical_failure x holds the last primal iterate (possibly empty).
  Vector x, y, z, s;
  double objective = 0.0;
  double gap = 0.0;
  double primal_residual = 0.0;
  double dual_residual = 0.0;
  int iterations = 0;
  std::string message;
};

struct SolverSettings {
  double abstol = 1e-10;
  double reltol = 1e-10;
  double feastol = 1e-10;
  // Accepted when the iteration stalls before reaching the tolerances above.
  double fallback_tol = 1e-7;
  int max_iterations = 120;
  double step_fraction = 0.99;
  // Phase-one optimum above this marks the problem infeasible.
  double infeasibility_tol = 1e-7;
};

/// Backend contract: solve a ConeProgram, report status without throwing on
/// infeasibility or numerical trouble.
class ConicSolver {
 public:
  virtual ~ConicSolver() = default;
  virtual ConicSolution solve(const ConeProgram& program) const = 0;
  virtual std::string_view name() const = 0;
};

/// Dense primal-dual path-following method with Nesterov-Todd scaling and a
/// Mehrotra corrector. Dependent equality rows are removed up front; when the
/// main iteration fails, a phase-one program separates infeasibility from
/// numerical failure.
class InteriorPointSolver final : public ConicSolver {
 public:
  explicit InteriorPointSolver(SolverSettings settings = {}) : settings_(settings) {}

  ConicSolution solve(const ConeProgram& program) const override;
  std::string_view name() const override { return "nt-ipm"; }

  const SolverSettings& settings() const { return settings_; }

 private:
  SolverSettings settings_;
};

/// Known backends: "nt-ipm".
std::unique_ptr<ConicSolver> make_solver(std::string_view name, SolverSettings settings = {});

/// Backend named by HANKEL_MPC_SOLVER, or "nt-ipm" when unset.
std::unique_ptr<ConicSolver> default_solver();

Index svec_size(Index order);
Vector svec(const Matrix& sym);
Matrix smat(const Vector& v, Index order);

}  // namespace hmpc
