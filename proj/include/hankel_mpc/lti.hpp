#pragma once

#include <cstdint>
#include <random>

#include "hankel_mpc/linalg.hpp"

namespace hmpc {

/// Discrete-time plant x+ = A x + B u, y = C x + D u.
///
/// Used to generate data, to close the loop in simulation and as an
/// independent oracle in tests. The controller never reads these matrices.
/// Construction rejects dimension mismatches and pairs that are not
/// controllable/observable.
class LtiSystem {
 public:
  LtiSystem(Matrix a, Matrix b, Matrix c, Matrix d);

  const Matrix& a() const { return a_; }
  const Matrix& b() const { return b_; }
  const Matrix& c() const { return c_; }
  const Matrix& d() const { return d_; }

  Index states() const { return a_.rows(); }
  Index inputs() const { return b_.cols(); }
  Index outputs() const { return c_.rows(); }

 private:
  Matrix a_, b_, c_, d_;
};

/// Time runs along columns: states is n x (T+1), outputs is p x T.
struct SimulationResult {
  Matrix states;
  Matrix outputs;
};

SimulationResult simulate(const LtiSystem& sys, const Vector& x0, const Matrix& u);

/// Stacked [C; CA; ...; CA^{l-1}].
Matrix observability_matrix(const LtiSystem& sys, int window);

/// Smallest l in [1, n] with rank(observability_matrix(l)) = n.
int lag(const LtiSystem& sys);

/// Window realization on the extended state
/// xi_k = (u_{k-l}, ..., u_{k-1}, y_{k-l}, ..., y_{k-1}):
///   xi_{k+1} = a xi_k + b u_k,  y_k = c xi_k + d u_k.
struct ExtendedRealization {
  Matrix a, b, c, d;
  int window = 0;
  Index inputs = 0;
  Index outputs = 0;

  Index dim() const { return (inputs + outputs) * window; }
};

/// Requires window >= lag(sys). The output recursion coefficients are read
/// off C A^l pinv(Phi_l) and the Markov parameters, so the result is exact
/// up to rounding.
ExtendedRealization extended_realization(const LtiSystem& sys, int window);

/// Builds the realization from known output-recursion coefficients
/// `theta` = [G_l ... G_1, F_l ... F_1, D] (p x ((m+p)l + m)).
ExtendedRealization realization_from_coefficients(const Matrix& theta, int window, Index inputs,
                                                  Index outputs);

/// Outputs of the window realization from extended state xi0 under input u.
/// `disturbance` (p x T, may be empty) is added to each new output before it
/// enters the window.
Matrix simulate_extended(const ExtendedRealization& real, const Vector& xi0, const Matrix& u,
                         const Matrix& disturbance = Matrix());

/// True iff some x_s satisfies x_s = A x_s + B u_s and y_s = C x_s + D u_s.
bool is_equilibrium_model(const LtiSystem& sys, const Vector& u_s, const Vector& y_s);

/// Controllability of the window realization, decided by p*l == n.
bool extended_pair_controllable(const LtiSystem& sys, int window);

/// Direct rank of the controllability matrix of the window realization.
Index extended_controllability_rank(const LtiSystem& sys, int window);

/// Random controllable/observable system with entries U[-1,1] and A rescaled
/// to the requested spectral radius.
LtiSystem random_system(Index n, Index m, Index p, std::mt19937_64& rng,
                        double spectral_radius = 0.9);

bool is_controllable(const Matrix& a, const Matrix& b);
bool is_observable(const Matrix& a, const Matrix& c);

}  // namespace hmpc
