#include "hankel_mpc/trajectory.hpp"

#include <stdexcept>
#include <string>

namespace hmpc {

namespace {

void require(bool cond, const std::string& what) {
  if (!cond) throw std::invalid_argument(what);
}

Matrix stack_window(const Matrix& x, Index start, int length) {
  const Index q = x.rows();
  Matrix out(q * length, 1);
  for (int i = 0; i < length; ++i) out.block(i * q, 0, q, 1) = x.col(start + i);
  return out;
}

// Columns xi_first ... xi_last of the extended-state sequence of (u, y).
Matrix extended_states(const IoTrajectory& traj, int window, Index first, Index last) {
  const Index m = traj.inputs(), p = traj.outputs();
  const Index nxi = (m + p) * window;
  Matrix out(nxi, last - first + 1);
  for (Index k = first; k <= last; ++k) {
    out.block(0, k - first, m * window, 1) = stack_window(traj.u(), k - window, window);
    out.block(m * window, k - first, p * window, 1) = stack_window(traj.y(), k - window, window);
  }
  return out;
}

Vector flatten(const Matrix& seq) {
  return Eigen::Map<const Vector>(seq.data(), seq.size());
}

}  // namespace

IoTrajectory::IoTrajectory(Matrix u, Matrix y) : u_(std::move(u)), y_(std::move(y)) {
  require(u_.cols() >= 1, "trajectory must contain at least one sample");
  require(u_.cols() == y_.cols(), "input and output sequences differ in length");
  require(u_.rows() >= 1 && y_.rows() >= 1, "trajectory dimensions must be positive");
}

HankelMatrix hankel(const Matrix& x, int depth) {
  require(depth >= 1, "Hankel depth must be >= 1");
  require(depth <= x.cols(), "Hankel depth exceeds sequence length");
  const Index q = x.rows();
  const Index cols = x.cols() - depth + 1;
  HankelMatrix h{depth, q, Matrix(q * depth, cols)};
  for (Index j = 0; j < cols; ++j) {
    for (int i = 0; i < depth; ++i) h.data.block(i * q, j, q, 1) = x.col(j + i);
  }
  return h;
}

bool is_persistently_exciting(const Matrix& u, int order) {
  require(order >= 1, "order must be >= 1");
  if (order > u.cols()) return false;
  const HankelMatrix h = hankel(u, order);
  return numerical_rank(h.data) == u.rows() * order;
}

ExtendedState::ExtendedState(Vector values, int window, Index inputs, Index outputs)
    : values_(std::move(values)), window_(window), m_(inputs), p_(outputs) {
  require(window >= 1 && inputs >= 1 && outputs >= 1, "extended state dimensions must be positive");
  require(values_.size() == (inputs + outputs) * window, "extended state has wrong dimension");
}

Matrix ExtendedState::input_window() const {
  return Eigen::Map<const Matrix>(values_.data(), m_, window_);
}

Matrix ExtendedState::output_window() const {
  return Eigen::Map<const Matrix>(values_.data() + m_ * window_, p_, window_);
}

Vector ExtendedState::last_output() const { return values_.tail(p_); }

Matrix output_selector(int window, Index inputs, Index outputs) {
  const Index nxi = (inputs + outputs) * window;
  Matrix t = Matrix::Zero(outputs, nxi);
  t.rightCols(outputs).setIdentity();
  return t;
}

ExtendedState extended_state_from_history(const Matrix& u_window, const Matrix& y_window) {
  require(u_window.cols() == y_window.cols(), "input and output windows differ in length");
  require(u_window.cols() >= 1, "window must hold at least one sample");
  const int l = static_cast<int>(u_window.cols());
  Vector xi(u_window.size() + y_window.size());
  xi << flatten(u_window), flatten(y_window);
  return ExtendedState(std::move(xi), l, u_window.rows(), y_window.rows());
}

ExtendedState steady_extended_state(const Vector& u_s, const Vector& y_s, int window) {
  require(window >= 1, "window must be >= 1");
  return extended_state_from_history(u_s.replicate(1, window), y_s.replicate(1, window));
}

Index minimum_length_for_excitation(Index inputs, int order) {
  return (inputs + 1) * order - 1;
}

DataBank build_data_bank(const IoTrajectory& traj, int horizon, int window,
                         std::optional<int> order_bound) {
  require(horizon >= 1 && window >= 1, "horizon and window must be >= 1");
  const Index n = traj.length();
  require(n >= horizon + window, "data shorter than horizon + window");
  require(n >= window + 1, "data shorter than window + 1");

  DataBank bank{traj,
                hankel(traj.u(), horizon + window),
                hankel(traj.y(), horizon + window),
                extended_states(traj, window, window, n - 1),
                extended_states(traj, window, window + 1, n),
                traj.u().rightCols(n - window),
                Matrix(),
                horizon,
                window,
                std::nullopt};
  bank.z.resize(bank.xi.rows() + bank.u.rows(), bank.xi.cols());
  bank.z << bank.xi, bank.u;

  if (order_bound) {
    const int order = horizon + window + *order_bound;
    const Index required = traj.inputs() * order;
    Index rank = 0;
    if (order <= n) rank = numerical_rank(hankel(traj.u(), order).data);
    if (rank != required) {
      bank.warning = ExcitationWarning{
          order, rank, required,
          "input is not persistently exciting of order " + std::to_string(order) + " (rank " +
              std::to_string(rank) + " of " + std::to_string(required) + ")"};
    }
  }
  return bank;
}

MembershipResult trajectory_coefficients(const HankelMatrix& hu, const HankelMatrix& hy,
                                         const Matrix& u_bar, const Matrix& y_bar) {
  require(hu.depth == hy.depth && hu.data.cols() == hy.data.cols(), "Hankel matrices disagree");
  require(u_bar.rows() == hu.dim && y_bar.rows() == hy.dim, "trajectory dimension mismatch");
  require(u_bar.cols() == hu.depth && y_bar.cols() == hy.depth,
          "trajectory length must equal the Hankel depth");
  Matrix h(hu.data.rows() + hy.data.rows(), hu.data.cols());
  h << hu.data, hy.data;
  Vector w(h.rows());
  w << flatten(u_bar), flatten(y_bar);
  MembershipResult out;
  out.alpha = pseudo_inverse(h) * w;
  out.residual = (h * out.alpha - w).norm();
  out.feasible = out.residual <= 1e-8 * (1.0 + w.norm());
  return out;
}

MembershipResult trajectory_coefficients(const DataBank& bank, const Matrix& u_bar,
                                         const Matrix& y_bar) {
  return trajectory_coefficients(bank.hu, bank.hy, u_bar, y_bar);
}

bool z_full_row_rank(const DataBank& bank) {
  return numerical_rank(bank.z) == bank.z.rows();
}

bool is_equilibrium_data(const DataBank& bank, const Vector& u_s, const Vector& y_s, int window) {
  require(u_s.size() == bank.inputs() && y_s.size() == bank.outputs(), "setpoint has wrong size");
  require(window >= 1, "window must be >= 1");
  const int depth = window + 1;
  require(depth <= bank.hu.depth, "bank depth must be at least window + 1");
  const auto hu = hankel(bank.data.u(), depth);
  const auto hy = hankel(bank.data.y(), depth);
  return trajectory_coefficients(hu, hy, u_s.replicate(1, depth), y_s.replicate(1, depth))
      .feasible;
}

}  // namespace hmpc
