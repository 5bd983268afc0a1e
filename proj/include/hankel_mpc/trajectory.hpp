#pragma once

#include <optional>
#include <string>

#include "hankel_mpc/linalg.hpp"

namespace hmpc {

/// One measured input-output record. Columns are time samples.
class IoTrajectory {
 public:
  IoTrajectory(Matrix u, Matrix y);

  const Matrix& u() const { return u_; }
  const Matrix& y() const { return y_; }
  Index length() const { return u_.cols(); }
  Index inputs() const { return u_.rows(); }
  Index outputs() const { return y_.rows(); }

 private:
  Matrix u_, y_;
};

/// Depth-L Hankel matrix of a q-dimensional sequence; column j is the stacked
/// window x_j, ..., x_{j+L-1}.
struct HankelMatrix {
  int depth = 0;
  Index dim = 0;
  Matrix data;
};

HankelMatrix hankel(const Matrix& x, int depth);

/// rank(H_order(u)) == m * order.
bool is_persistently_exciting(const Matrix& u, int order);

/// Extended state (u-window over y-window, oldest sample first in each block).
class ExtendedState {
 public:
  ExtendedState(Vector values, int window, Index inputs, Index outputs);

  const Vector& values() const { return values_; }
  int window() const { return window_; }
  Index inputs() const { return m_; }
  Index outputs() const { return p_; }
  Index dim() const { return values_.size(); }

  /// m x l and p x l views of the two windows.
  Matrix input_window() const;
  Matrix output_window() const;
  /// The most recent output (T_y xi).
  Vector last_output() const;

 private:
  Vector values_;
  int window_;
  Index m_, p_;
};

/// Selector T_y with y_{t-1} = T_y xi_t.
Matrix output_selector(int window, Index inputs, Index outputs);

ExtendedState extended_state_from_history(const Matrix& u_window, const Matrix& y_window);
ExtendedState steady_extended_state(const Vector& u_s, const Vector& y_s, int window);

/// Raised when the recorded input is not persistently exciting of the
/// requested order. The bank is still usable.
struct ExcitationWarning {
  int order = 0;
  Index rank = 0;
  Index required = 0;
  std::string message;
};

/// Offline data for prediction and terminal design.
struct DataBank {
  IoTrajectory data;
  HankelMatrix hu;      // depth L + l
  HankelMatrix hy;      // depth L + l
  Matrix xi;            // xi_l ... xi_{N-1}
  Matrix xi_plus;       // xi_{l+1} ... xi_N
  Matrix u;             // u_l ... u_{N-1}
  Matrix z;             // [xi; u]
  int horizon = 0;
  int window = 0;
  std::optional<ExcitationWarning> warning;

  Index length() const { return data.length(); }
  Index inputs() const { return data.inputs(); }
  Index outputs() const { return data.outputs(); }
  Index xi_dim() const { return (inputs() + outputs()) * window; }
};

/// Requires N >= L + l and N >= l + 1. When `order_bound` (an upper bound
/// on n) is given, persistency of excitation of order L + l + n is checked
/// and a failure is stored as a warning.
DataBank build_data_bank(const IoTrajectory& traj, int horizon, int window,
                         std::optional<int> order_bound = std::nullopt);

struct MembershipResult {
  bool feasible = false;
  Vector alpha;
  double residual = 0.0;
};

/// Minimum-norm alpha with [Hu; Hy] alpha = [u_bar; y_bar]; feasible iff the
/// residual is at most 1e-8 * (1 + ||[u_bar; y_bar]||).
MembershipResult trajectory_coefficients(const HankelMatrix& hu, const HankelMatrix& hy,
                                         const Matrix& u_bar, const Matrix& y_bar);
MembershipResult trajectory_coefficients(const DataBank& bank, const Matrix& u_bar,
                                         const Matrix& y_bar);

bool z_full_row_rank(const DataBank& bank);

/// The constant sequence (u_s, y_s) of length l + 1 is a trajectory of the
/// data-generating system.
bool is_equilibrium_data(const DataBank& bank, const Vector& u_s, const Vector& y_s, int window);

/// Data length at which a generic random input is persistently exciting of
/// the given order: (m + 1) * order - 1.
Index minimum_length_for_excitation(Index inputs, int order);

}  // namespace hmpc
