#pragma once

#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "hankel_mpc/conic.hpp"
#include "hankel_mpc/lti.hpp"
#include "hankel_mpc/trajectory.hpp"

namespace hmpc {

/// Per-coordinate bounds; infinite entries mean "unbounded".
struct Box {
  Vector lower;
  Vector upper;

  static Box unbounded(Index dim);
  static Box symmetric(Index dim, double bound);

  Index dim() const { return lower.size(); }
  bool bounded() const;
  bool contains(const Vector& x, double slack = 0.0) const;
  /// Strictly inside on every bounded coordinate.
  bool interior(const Vector& x) const;
  /// Largest amount by which x leaves the box (0 when inside).
  double violation(const Vector& x) const;
};

/// Known structure of the window realization:
///   xi+ = A' xi + B_w w + B' u,  w = Delta [xi; u],  Delta = [G.. F.. D].
struct KnownPart {
  Matrix a_prime;
  Matrix b_prime;
  Matrix b_w;
};

KnownPart known_part(int window, Index inputs, Index outputs);

struct UncertaintyMultiplier {
  Matrix p_dw;      // (n_xi + m + p) square
  Matrix p_dw_bar;  // (2 n_xi + m) square
  Matrix b_w;
  double d_bar = 0.0;
};

UncertaintyMultiplier uncertainty_multiplier(const DataBank& bank, double d_bar = 0.0);

/// [Delta'; I]' P_dw [Delta'; I] for a candidate Delta (p x (n_xi + m)).
Matrix multiplier_residual(const UncertaintyMultiplier& mult, const Matrix& delta);

/// Delta = B_w' Xi+ Z^+, the parameters explaining noise-free data.
Matrix recover_parameters(const DataBank& bank);

/// The block LMI as an affine map of the decision variables. The matrix is
/// symmetric of order 3 n_xi + 2 m + p and must be negative definite.
struct TerminalLmi {
  KnownPart known;
  Matrix p_bar;  // normalized multiplier
  double multiplier_scale = 1.0;
  Matrix q_r;    // Q^{1/2} T_y
  Matrix r_r;    // R^{1/2}
  Index n_xi = 0, m = 0, p = 0;

  Index order() const { return 3 * n_xi + 2 * m + p; }
  Matrix evaluate(const Matrix& x, const Matrix& gain_var, double tau) const;
};

TerminalLmi assemble_lmi(const KnownPart& kp, const UncertaintyMultiplier& mult, const Matrix& q,
                         const Matrix& r);

struct VerificationReport {
  std::string realization_source;  // "oracle" or "data"
  double decrease_max_eig = 0.0;
  double invariance_max_ratio = 0.0;  // max ||A_K d||_P^2 / beta on boundary samples
  double admissibility_violation = 0.0;
  Index samples = 0;
  bool decrease_ok = false;
  bool invariance_ok = false;
  bool admissible_ok = false;

  bool passed() const { return decrease_ok && invariance_ok && admissible_ok; }
};

struct TerminalIngredients {
  Matrix p;
  Matrix k;
  double beta = std::numeric_limits<double>::infinity();
  double gamma = 0.0;
  Matrix x;
  Matrix m;
  double tau = 0.0;
  double margin = 0.0;
  double x_condition = 0.0;
  double d_bar = 0.0;
  std::optional<VerificationReport> report;
};

struct GammaProbe {
  double gamma = 0.0;
  double margin = 0.0;
  SolveStatus status = SolveStatus::numerical_failure;
};

enum class SynthesisFailure { none, z_rank, infeasible, solver_failure, recovery };

std::string_view to_string(SynthesisFailure failure);

struct SynthesisOptions {
  double d_bar = 0.0;
  /// Fixed gamma; when unset, bisection over [gamma_min, gamma_max].
  std::optional<double> gamma;
  double gamma_min = 1e-2;
  double gamma_max = 1e6;
  double rel_tol = 1e-3;
  int max_iterations = 40;
  /// Fix M = 0, i.e. K = 0.
  bool zero_gain = false;
  double margin = 1e-7;
  double max_condition = 1e10;
  const ConicSolver* solver = nullptr;
};

struct SynthesisResult {
  std::optional<TerminalIngredients> ingredients;
  SynthesisFailure failure = SynthesisFailure::none;
  std::string message;
  std::vector<GammaProbe> probes;

  bool ok() const { return ingredients.has_value(); }
};

SynthesisResult synthesize(const DataBank& bank, const Matrix& q, const Matrix& r,
                           const SynthesisOptions& options = {});

/// Largest beta with {||xi - xi_s||_P^2 <= beta} inside U^l x Y^l, shrunk by
/// (1 - 1e-9); +inf when no coordinate is bounded. Throws when xi_s is not
/// strictly inside the box.
double terminal_set_radius(const Matrix& p, const ExtendedState& xi_s, const Box& u_box,
                           const Box& y_box);

/// Box on the extended state: U repeated l times over Y repeated l times.
Box extended_box(const Box& u_box, const Box& y_box, int window);

/// (A + B K)' P (A + B K) - P + K' R K + (C + D K)' Q (C + D K)
Matrix decrease_matrix(const ExtendedRealization& real, const Matrix& p, const Matrix& k,
                       const Matrix& q, const Matrix& r);

struct VerificationOptions {
  Index samples = 10000;
  std::uint64_t seed = 1;
  double decrease_tol = 1e-7;
  double slack = 1e-9;
};

VerificationReport verify_terminal_ingredients(const TerminalIngredients& ti,
                                               const ExtendedRealization& real,
                                               const Matrix& q, const Matrix& r,
                                               const Vector& u_s, const Vector& y_s,
                                               const Box& u_box, const Box& y_box,
                                               const VerificationOptions& options = {});

/// Window realization recovered from the data bank (pure data mode).
ExtendedRealization realization_from_data(const DataBank& bank);

}  // namespace hmpc
