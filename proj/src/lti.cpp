#include "hankel_mpc/lti.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace hmpc {

namespace {

void require(bool cond, const std::string& what) {
  if (!cond) throw std::invalid_argument(what);
}

// Guards the random generator against draws that are controllable/observable
// only in exact arithmetic.
bool well_conditioned(const Matrix& m) {
  Eigen::BDCSVD<Matrix> svd(m);
  const Vector& sv = svd.singularValues();
  return sv(sv.size() - 1) >= 1e-4 * sv(0);
}

double spectral_radius_of(const Matrix& a) {
  Eigen::EigenSolver<Matrix> es(a, false);
  return es.eigenvalues().cwiseAbs().maxCoeff();
}

}  // namespace

bool is_controllable(const Matrix& a, const Matrix& b) {
  return numerical_rank(controllability_matrix(a, b)) == a.rows();
}

bool is_observable(const Matrix& a, const Matrix& c) {
  return numerical_rank(controllability_matrix(a.transpose(), c.transpose())) == a.rows();
}

LtiSystem::LtiSystem(Matrix a, Matrix b, Matrix c, Matrix d)
    : a_(std::move(a)), b_(std::move(b)), c_(std::move(c)), d_(std::move(d)) {
  require(a_.rows() > 0 && a_.rows() == a_.cols(), "A must be square and non-empty");
  require(b_.rows() == a_.rows() && b_.cols() > 0, "B must have n rows and m >= 1 columns");
  require(c_.cols() == a_.rows() && c_.rows() > 0, "C must have n columns and p >= 1 rows");
  require(d_.rows() == c_.rows() && d_.cols() == b_.cols(), "D must be p x m");
  require(a_.allFinite() && b_.allFinite() && c_.allFinite() && d_.allFinite(),
          "system matrices must be finite");
  if (!is_controllable(a_, b_)) throw std::domain_error("(A, B) is not controllable");
  if (!is_observable(a_, c_)) throw std::domain_error("(A, C) is not observable");
}

SimulationResult simulate(const LtiSystem& sys, const Vector& x0, const Matrix& u) {
  require(x0.size() == sys.states(), "x0 has wrong dimension");
  require(u.rows() == sys.inputs(), "input sequence has wrong dimension");
  const Index steps = u.cols();
  SimulationResult out{Matrix(sys.states(), steps + 1), Matrix(sys.outputs(), steps)};
  out.states.col(0) = x0;
  for (Index k = 0; k < steps; ++k) {
    out.outputs.col(k) = sys.c() * out.states.col(k) + sys.d() * u.col(k);
    out.states.col(k + 1) = sys.a() * out.states.col(k) + sys.b() * u.col(k);
  }
  return out;
}

Matrix observability_matrix(const LtiSystem& sys, int window) {
  require(window >= 1, "window must be >= 1");
  const Index p = sys.outputs();
  Matrix phi(p * window, sys.states());
  Matrix block = sys.c();
  for (int i = 0; i < window; ++i) {
    phi.middleRows(i * p, p) = block;
    block = block * sys.a();
  }
  return phi;
}

int lag(const LtiSystem& sys) {
  const Index n = sys.states();
  for (int l = 1; l <= n; ++l) {
    if (numerical_rank(observability_matrix(sys, l)) == n) return l;
  }
  throw std::domain_error("no window up to n gives a full-rank observability matrix");
}

ExtendedRealization realization_from_coefficients(const Matrix& theta, int window, Index inputs,
                                                  Index outputs) {
  const Index m = inputs, p = outputs, l = window;
  const Index nxi = (m + p) * l;
  require(window >= 1, "window must be >= 1");
  require(theta.rows() == p && theta.cols() == nxi + m, "coefficient matrix has wrong shape");
  ExtendedRealization r;
  r.window = window;
  r.inputs = m;
  r.outputs = p;
  r.a = Matrix::Zero(nxi, nxi);
  r.b = Matrix::Zero(nxi, m);
  const Index yoff = m * l;
  for (Index i = 0; i + 1 < l; ++i) {
    r.a.block(i * m, (i + 1) * m, m, m).setIdentity();
    r.a.block(yoff + i * p, yoff + (i + 1) * p, p, p).setIdentity();
  }
  r.a.bottomRows(p) = theta.leftCols(nxi);
  r.b.block((l - 1) * m, 0, m, m).setIdentity();
  r.b.bottomRows(p) = theta.rightCols(m);
  r.c = theta.leftCols(nxi);
  r.d = theta.rightCols(m);
  return r;
}

ExtendedRealization extended_realization(const LtiSystem& sys, int window) {
  require(window >= 1, "window must be >= 1");
  if (window < lag(sys)) throw std::domain_error("window is shorter than the system lag");
  const Index n = sys.states(), m = sys.inputs(), p = sys.outputs();
  const Index l = window;

  const Matrix phi = observability_matrix(sys, window);
  if (numerical_rank(phi) != n) {
    throw std::domain_error("observability matrix is numerically rank deficient");
  }
  const Matrix phi_pinv = pseudo_inverse(phi);

  // Toeplitz map from the input window to the output window at zero state.
  Matrix toeplitz = Matrix::Zero(p * l, m * l);
  for (Index i = 0; i < l; ++i) {
    toeplitz.block(i * p, i * m, p, m) = sys.d();
    Matrix ca = sys.c();
    for (Index j = i - 1; j >= 0; --j) {
      toeplitz.block(i * p, j * m, p, m) = ca * sys.b();
      ca = ca * sys.a();
    }
  }

  // Reachability of the state at the window end from the window inputs.
  Matrix reach(n, m * l);
  Matrix block = sys.b();
  for (Index j = l - 1; j >= 0; --j) {
    reach.middleCols(j * m, m) = block;
    block = sys.a() * block;
  }
  Matrix a_pow = Matrix::Identity(n, n);
  for (Index i = 0; i < l; ++i) a_pow = a_pow * sys.a();

  const Matrix f_win = sys.c() * a_pow * phi_pinv;
  const Matrix g_win = sys.c() * reach - f_win * toeplitz;
  Matrix theta(p, (m + p) * l + m);
  theta << g_win, f_win, sys.d();
  return realization_from_coefficients(theta, window, m, p);
}

Matrix simulate_extended(const ExtendedRealization& real, const Vector& xi0, const Matrix& u,
                         const Matrix& disturbance) {
  require(xi0.size() == real.dim(), "xi0 has wrong dimension");
  require(u.rows() == real.inputs, "input sequence has wrong dimension");
  const bool disturbed = disturbance.size() > 0;
  if (disturbed) {
    require(disturbance.rows() == real.outputs && disturbance.cols() == u.cols(),
            "disturbance has wrong shape");
  }
  Matrix y(real.outputs, u.cols());
  Vector xi = xi0;
  for (Index k = 0; k < u.cols(); ++k) {
    Vector next = real.a * xi + real.b * u.col(k);
    if (disturbed) next.tail(real.outputs) += disturbance.col(k);
    y.col(k) = next.tail(real.outputs);
    xi = std::move(next);
  }
  return y;
}

bool is_equilibrium_model(const LtiSystem& sys, const Vector& u_s, const Vector& y_s) {
  require(u_s.size() == sys.inputs() && y_s.size() == sys.outputs(), "setpoint has wrong size");
  const Index n = sys.states();
  Matrix lhs(n + sys.outputs(), n);
  lhs << Matrix::Identity(n, n) - sys.a(), sys.c();
  Vector rhs(n + sys.outputs());
  rhs << sys.b() * u_s, y_s - sys.d() * u_s;
  const Vector x_s = lhs.completeOrthogonalDecomposition().solve(rhs);
  return (lhs * x_s - rhs).norm() <= 1e-8 * (1.0 + rhs.norm());
}

bool extended_pair_controllable(const LtiSystem& sys, int window) {
  if (window < lag(sys)) throw std::domain_error("window is shorter than the system lag");
  return sys.outputs() * window == sys.states();
}

Index extended_controllability_rank(const LtiSystem& sys, int window) {
  const auto real = extended_realization(sys, window);
  return numerical_rank(controllability_matrix(real.a, real.b));
}

LtiSystem random_system(Index n, Index m, Index p, std::mt19937_64& rng, double spectral_radius) {
  require(n >= 1 && m >= 1 && p >= 1, "dimensions must be positive");
  std::uniform_real_distribution<double> unif(-1.0, 1.0);
  auto draw = [&](Index r, Index c) {
    Matrix out(r, c);
    for (Index j = 0; j < c; ++j)
      for (Index i = 0; i < r; ++i) out(i, j) = unif(rng);
    return out;
  };
  for (int attempt = 0; attempt < 1000; ++attempt) {
    Matrix a = draw(n, n);
    const double rho = spectral_radius_of(a);
    if (rho < 1e-6) continue;
    a *= spectral_radius / rho;
    Matrix b = draw(n, m);
    Matrix c = draw(p, n);
    Matrix d = draw(p, m);
    if (well_conditioned(controllability_matrix(a, b)) &&
        well_conditioned(controllability_matrix(a.transpose(), c.transpose()))) {
      return LtiSystem(std::move(a), std::move(b), std::move(c), std::move(d));
    }
  }
  throw std::runtime_error("failed to draw a controllable/observable system");
}

}  // namespace hmpc
