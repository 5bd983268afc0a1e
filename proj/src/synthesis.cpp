#include "hankel_mpc/synthesis.hpp"

#include <cmath>
#include <random>
#include <stdexcept>

namespace hmpc {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void require(bool cond, const char* what) {
  if (!cond) throw std::invalid_argument(what);
}

// Upper caps keeping the margin program bounded; tau enters against the
// normalized multiplier, X against the trace bound.
constexpr double kTauCap = 1e6;
constexpr double kTraceCap = 1e6;

struct MarginProgram {
  ConeProgram program;
  Index x_off = 0, m_off = 0, tau_off = 0, gamma_off = 0, s_off = 0;
  Index n_xi = 0, m = 0;
  bool zero_gain = false;
};

struct MarginSolution {
  SolveStatus status = SolveStatus::numerical_failure;
  double margin = -kInf;
  Matrix x, gain_var;
  double tau = 0.0;
};

MarginProgram build_margin_program(const TerminalLmi& lmi, double gamma, bool zero_gain) {
  MarginProgram mp;
  mp.n_xi = lmi.n_xi;
  mp.m = lmi.m;
  mp.zero_gain = zero_gain;
  const Index nxi = lmi.n_xi, m = lmi.m;
  const Index tx = svec_size(nxi);
  const Index nm = zero_gain ? 0 : m * nxi;
  mp.x_off = 0;
  mp.m_off = tx;
  mp.tau_off = tx + nm;
  mp.gamma_off = mp.tau_off + 1;
  mp.s_off = mp.gamma_off + tx;
  const Index nvar = mp.s_off + 1;

  const Index order = lmi.order();
  const Index t2 = svec_size(2 * nxi), tl = svec_size(order);
  const Index rows = 5 + tx + t2 + tl;

  ConeProgram& prog = mp.program;
  prog.p = Matrix::Zero(nvar, nvar);
  prog.q = Vector::Zero(nvar);
  prog.q(mp.s_off) = -1.0;
  prog.a = Matrix::Zero(0, nvar);
  prog.b = Vector::Zero(0);
  prog.g = Matrix::Zero(rows, nvar);
  prog.h = Vector::Zero(rows);
  prog.cones.nonneg = 5;
  prog.cones.psd = {nxi, 2 * nxi, order};

  const Vector id_x = svec(Matrix::Identity(nxi, nxi));
  // tau >= 0, tau <= cap, trace(Gamma) + s <= gamma^2, trace(X) <= cap; the
  // cap rows are divided by their right-hand sides.
  const double x_cap = kTraceCap * static_cast<double>(nxi);
  prog.g(0, mp.tau_off) = -1.0;
  prog.g(1, mp.tau_off) = 1.0 / kTauCap;
  prog.h(1) = 1.0;
  prog.g.block(2, mp.gamma_off, 1, tx) = id_x.transpose();
  prog.g(2, mp.s_off) = 1.0;
  prog.h(2) = gamma * gamma;
  prog.g.block(3, mp.x_off, 1, tx) = id_x.transpose() / x_cap;
  prog.h(3) = 1.0;
  // s >= -1 keeps the feasible set bounded; only the sign of s matters.
  prog.g(4, mp.s_off) = -1.0;
  prog.h(4) = 1.0;

  // X - s I >= 0
  Index row = 5;
  prog.g.block(row, mp.x_off, tx, tx) = -Matrix::Identity(tx, tx);
  prog.g.block(row, mp.s_off, tx, 1) = id_x;
  row += tx;

  // [[Gamma, I], [I, X]] - s I >= 0
  {
    Matrix h0 = Matrix::Zero(2 * nxi, 2 * nxi);
    h0.topRightCorner(nxi, nxi).setIdentity();
    h0.bottomLeftCorner(nxi, nxi).setIdentity();
    prog.h.segment(row, t2) = svec(h0);
    for (Index k = 0; k < tx; ++k) {
      Vector e = Vector::Zero(tx);
      e(k) = 1.0;
      const Matrix ek = smat(e, nxi);
      Matrix blk = Matrix::Zero(2 * nxi, 2 * nxi);
      blk.topLeftCorner(nxi, nxi) = ek;
      prog.g.block(row, mp.gamma_off + k, t2, 1) = -svec(blk);
      blk.setZero();
      blk.bottomRightCorner(nxi, nxi) = ek;
      prog.g.block(row, mp.x_off + k, t2, 1) = -svec(blk);
    }
    prog.g.block(row, mp.s_off, t2, 1) = svec(Matrix::Identity(2 * nxi, 2 * nxi));
    row += t2;
  }

  // -LMI(X, M, tau) - s I >= 0
  {
    const Matrix zx = Matrix::Zero(nxi, nxi), zm = Matrix::Zero(m, nxi);
    const Matrix l0 = lmi.evaluate(zx, zm, 0.0);
    prog.h.segment(row, tl) = -svec(l0);
    for (Index k = 0; k < tx; ++k) {
      Vector e = Vector::Zero(tx);
      e(k) = 1.0;
      prog.g.block(row, mp.x_off + k, tl, 1) = svec(lmi.evaluate(smat(e, nxi), zm, 0.0) - l0);
    }
    for (Index k = 0; k < nm; ++k) {
      Matrix e = Matrix::Zero(m, nxi);
      e.data()[k] = 1.0;
      prog.g.block(row, mp.m_off + k, tl, 1) = svec(lmi.evaluate(zx, e, 0.0) - l0);
    }
    prog.g.block(row, mp.tau_off, tl, 1) = svec(lmi.evaluate(zx, zm, 1.0) - l0);
    prog.g.block(row, mp.s_off, tl, 1) = svec(Matrix::Identity(order, order));
  }
  return mp;
}

// Margin recomputed from the candidate itself, independent of solver status.
double verified_margin(const TerminalLmi& lmi, double gamma, const Matrix& x,
                       const Matrix& gain_var, double tau, const Matrix& gamma_var) {
  const Index nxi = x.rows();
  Matrix coupling(2 * nxi, 2 * nxi);
  coupling << gamma_var, Matrix::Identity(nxi, nxi), Matrix::Identity(nxi, nxi), x;
  const double margin = std::min({min_eigenvalue(x), min_eigenvalue(coupling),
                                  min_eigenvalue(-lmi.evaluate(x, gain_var, tau)),
                                  gamma * gamma - gamma_var.trace()});
  if (!(tau >= 0.0) || !std::isfinite(margin)) return -kInf;
  return margin;
}

MarginSolution solve_margin(const TerminalLmi& lmi, double gamma, bool zero_gain,
                            const ConicSolver& solver) {
  const MarginProgram mp = build_margin_program(lmi, gamma, zero_gain);
  const ConicSolution sol = solver.solve(mp.program);
  MarginSolution out;
  out.status = sol.status;
  if (sol.x.size() != mp.program.variables()) return out;
  const Index nxi = mp.n_xi, m = mp.m, tx = svec_size(nxi);
  out.x = smat(sol.x.segment(mp.x_off, tx), nxi);
  out.gain_var = Matrix::Zero(m, nxi);
  if (!zero_gain) out.gain_var = Eigen::Map<const Matrix>(sol.x.data() + mp.m_off, m, nxi);
  out.tau = sol.x(mp.tau_off);
  const Matrix gamma_var = smat(sol.x.segment(mp.gamma_off, tx), nxi);
  out.margin = verified_margin(lmi, gamma, out.x, out.gain_var, out.tau, gamma_var);
  return out;
}

Matrix output_weight(const Matrix& q, int window, Index m, Index p) {
  const Matrix ty = output_selector(window, m, p);
  return ty.transpose() * q * ty;
}

}  // namespace

Box Box::unbounded(Index dim) {
  return Box{Vector::Constant(dim, -kInf), Vector::Constant(dim, kInf)};
}

Box Box::symmetric(Index dim, double bound) {
  return Box{Vector::Constant(dim, -bound), Vector::Constant(dim, bound)};
}

bool Box::bounded() const {
  for (Index i = 0; i < dim(); ++i) {
    if (std::isfinite(lower(i)) || std::isfinite(upper(i))) return true;
  }
  return false;
}

bool Box::contains(const Vector& x, double slack) const { return violation(x) <= slack; }

bool Box::interior(const Vector& x) const {
  require(x.size() == dim(), "point has wrong dimension");
  for (Index i = 0; i < dim(); ++i) {
    if (!(x(i) > lower(i) && x(i) < upper(i))) return false;
  }
  return true;
}

double Box::violation(const Vector& x) const {
  require(x.size() == dim(), "point has wrong dimension");
  double v = 0.0;
  for (Index i = 0; i < dim(); ++i) {
    v = std::max({v, lower(i) - x(i), x(i) - upper(i)});
  }
  return v;
}

KnownPart known_part(int window, Index inputs, Index outputs) {
  require(window >= 1 && inputs >= 1 && outputs >= 1, "dimensions must be positive");
  Matrix theta = Matrix::Zero(outputs, (inputs + outputs) * window + inputs);
  const auto r = realization_from_coefficients(theta, window, inputs, outputs);
  KnownPart kp{r.a, r.b, Matrix::Zero(r.dim(), outputs)};
  kp.b_w.bottomRows(outputs).setIdentity();
  return kp;
}

UncertaintyMultiplier uncertainty_multiplier(const DataBank& bank, double d_bar) {
  require(d_bar >= 0.0, "d_bar must be nonnegative");
  const Index nxi = bank.xi_dim(), m = bank.inputs(), p = bank.outputs();
  const KnownPart kp = known_part(bank.window, m, p);
  const Matrix& z = bank.z;
  const Matrix wx = kp.b_w.transpose() * bank.xi_plus;  // p x cols

  UncertaintyMultiplier out;
  out.b_w = kp.b_w;
  out.d_bar = d_bar;
  const Index nz = nxi + m;
  out.p_dw = Matrix::Zero(nz + p, nz + p);
  out.p_dw.topLeftCorner(nz, nz) = -z * z.transpose();
  out.p_dw.topRightCorner(nz, p) = z * wx.transpose();
  out.p_dw.bottomLeftCorner(p, nz) = wx * z.transpose();
  out.p_dw.bottomRightCorner(p, p) = -wx * wx.transpose() + d_bar * Matrix::Identity(p, p);
  out.p_dw = symmetrize(out.p_dw);

  Matrix t = Matrix::Zero(nz + p, nxi + nz);
  t.topRightCorner(nz, nz).setIdentity();
  t.bottomLeftCorner(p, nxi) = kp.b_w.transpose();
  out.p_dw_bar = symmetrize(t.transpose() * out.p_dw * t);
  return out;
}

Matrix multiplier_residual(const UncertaintyMultiplier& mult, const Matrix& delta) {
  const Index p = mult.b_w.cols();
  require(delta.rows() == p && delta.cols() + p == mult.p_dw.rows(), "Delta has wrong shape");
  Matrix v(mult.p_dw.rows(), p);
  v << delta.transpose(), Matrix::Identity(p, p);
  return symmetrize(v.transpose() * mult.p_dw * v);
}

Matrix recover_parameters(const DataBank& bank) {
  const KnownPart kp = known_part(bank.window, bank.inputs(), bank.outputs());
  return kp.b_w.transpose() * bank.xi_plus * pseudo_inverse(bank.z);
}

ExtendedRealization realization_from_data(const DataBank& bank) {
  return realization_from_coefficients(recover_parameters(bank), bank.window, bank.inputs(),
                                       bank.outputs());
}

Matrix TerminalLmi::evaluate(const Matrix& x, const Matrix& gain_var, double tau) const {
  const Index d1 = 2 * n_xi + m;
  Matrix l = Matrix::Zero(order(), order());
  l.topLeftCorner(d1, d1) = tau * p_bar;
  l.topLeftCorner(n_xi, n_xi) -= x;
  Matrix coupling(d1, n_xi);
  coupling << known.a_prime * x + known.b_prime * gain_var, x, gain_var;
  l.block(0, d1, d1, n_xi) = coupling;
  l.block(d1, d1, n_xi, n_xi) = -x;
  Matrix out_col(n_xi, p + m);
  out_col << x * q_r.transpose(), gain_var.transpose() * r_r.transpose();
  l.block(d1, d1 + n_xi, n_xi, p + m) = out_col;
  l.bottomRightCorner(p + m, p + m) = -Matrix::Identity(p + m, p + m);
  return l.selfadjointView<Eigen::Upper>();
}

TerminalLmi assemble_lmi(const KnownPart& kp, const UncertaintyMultiplier& mult, const Matrix& q,
                         const Matrix& r) {
  const Index nxi = kp.a_prime.rows(), m = kp.b_prime.cols(), p = kp.b_w.cols();
  require(q.rows() == p && q.cols() == p, "Q has wrong shape");
  require(r.rows() == m && r.cols() == m, "R has wrong shape");
  require(mult.p_dw_bar.rows() == 2 * nxi + m, "multiplier has wrong shape");
  require(min_eigenvalue(symmetrize(q)) > 0.0 && min_eigenvalue(symmetrize(r)) > 0.0,
          "Q and R must be positive definite");
  TerminalLmi lmi;
  lmi.known = kp;
  lmi.n_xi = nxi;
  lmi.m = m;
  lmi.p = p;
  const double scale = mult.p_dw_bar.cwiseAbs().maxCoeff();
  lmi.multiplier_scale = scale > 0.0 ? scale : 1.0;
  lmi.p_bar = mult.p_dw_bar / lmi.multiplier_scale;
  const Index l = nxi / (m + p);
  lmi.q_r = sym_sqrt(symmetrize(q)) * output_selector(static_cast<int>(l), m, p);
  lmi.r_r = sym_sqrt(symmetrize(r));
  return lmi;
}

std::string_view to_string(SynthesisFailure failure) {
  switch (failure) {
    case SynthesisFailure::none: return "none";
    case SynthesisFailure::z_rank: return "z-rank";
    case SynthesisFailure::infeasible: return "infeasible";
    case SynthesisFailure::solver_failure: return "solver-failure";
    case SynthesisFailure::recovery: return "recovery";
  }
  return "unknown";
}

SynthesisResult synthesize(const DataBank& bank, const Matrix& q, const Matrix& r,
                           const SynthesisOptions& options) {
  SynthesisResult result;
  if (!z_full_row_rank(bank)) {
    result.failure = SynthesisFailure::z_rank;
    result.message = "Z not full row rank";
    return result;
  }
  const Index m = bank.inputs(), p = bank.outputs();
  const KnownPart kp = known_part(bank.window, m, p);
  const TerminalLmi lmi = assemble_lmi(kp, uncertainty_multiplier(bank, options.d_bar), q, r);

  std::unique_ptr<ConicSolver> owned;
  const ConicSolver* solver = options.solver;
  if (!solver) {
    owned = default_solver();
    solver = owned.get();
  }

  auto probe = [&](double gamma) {
    MarginSolution sol = solve_margin(lmi, gamma, options.zero_gain, *solver);
    result.probes.push_back({gamma, sol.margin, sol.status});
    return sol;
  };
  auto feasible = [&](const MarginSolution& sol) {
    return sol.margin >= options.margin;
  };

  MarginSolution best;
  double best_gamma = 0.0;
  if (options.gamma) {
    require(*options.gamma > 0.0, "gamma must be positive");
    best = probe(*options.gamma);
    best_gamma = *options.gamma;
    if (!feasible(best)) {
      const bool failed = best.status == SolveStatus::numerical_failure;
      result.failure = failed ? SynthesisFailure::solver_failure : SynthesisFailure::infeasible;
      result.message = failed ? "solver failed at the requested gamma"
                              : "LMI infeasible at the requested gamma";
      return result;
    }
  } else {
    require(options.gamma_min > 0.0 && options.gamma_max > options.gamma_min,
            "invalid gamma range");
    double lo = options.gamma_min, hi = options.gamma_max;
    best = probe(hi);
    best_gamma = hi;
    if (!feasible(best)) {
      const bool failed = best.status == SolveStatus::numerical_failure;
      result.failure = failed ? SynthesisFailure::solver_failure : SynthesisFailure::infeasible;
      result.message = failed ? "solver failed at the upper end of the gamma range"
                              : "LMI infeasible at the upper end of the gamma range";
      return result;
    }
    MarginSolution low = probe(lo);
    if (feasible(low)) {
      best = std::move(low);
      best_gamma = lo;
    } else {
      for (int it = 0; it < options.max_iterations && hi > lo * (1.0 + options.rel_tol); ++it) {
        const double mid = std::sqrt(lo * hi);
        MarginSolution sol = probe(mid);
        if (feasible(sol)) {
          hi = mid;
          best = std::move(sol);
          best_gamma = mid;
        } else {
          lo = mid;
        }
      }
    }
  }

  const Eigen::SelfAdjointEigenSolver<Matrix> eig(symmetrize(best.x));
  const double ev_min = eig.eigenvalues().minCoeff(), ev_max = eig.eigenvalues().maxCoeff();
  const double cond = ev_min > 0.0 ? ev_max / ev_min : kInf;
  if (!(cond <= options.max_condition)) {
    result.failure = SynthesisFailure::recovery;
    result.message = "X is ill-conditioned (cond " + std::to_string(cond) + ")";
    return result;
  }
  const Matrix x_inv = symmetrize(eig.eigenvectors() *
                                  eig.eigenvalues().cwiseInverse().asDiagonal() *
                                  eig.eigenvectors().transpose());
  TerminalIngredients ti;
  ti.x = best.x;
  ti.m = best.gain_var;
  ti.k = best.gain_var * x_inv;
  ti.p = symmetrize(x_inv - output_weight(q, bank.window, m, p));
  ti.gamma = best_gamma;
  ti.tau = best.tau / lmi.multiplier_scale;
  ti.margin = best.margin;
  ti.x_condition = cond;
  ti.d_bar = options.d_bar;
  if (!(min_eigenvalue(ti.p) > 0.0)) {
    result.failure = SynthesisFailure::recovery;
    result.message = "recovered P is not positive definite";
    return result;
  }
  result.ingredients = std::move(ti);
  return result;
}

Box extended_box(const Box& u_box, const Box& y_box, int window) {
  const Index m = u_box.dim(), p = y_box.dim();
  Box out{Vector((m + p) * window), Vector((m + p) * window)};
  for (int i = 0; i < window; ++i) {
    out.lower.segment(i * m, m) = u_box.lower;
    out.upper.segment(i * m, m) = u_box.upper;
    out.lower.segment(m * window + i * p, p) = y_box.lower;
    out.upper.segment(m * window + i * p, p) = y_box.upper;
  }
  return out;
}

double terminal_set_radius(const Matrix& p, const ExtendedState& xi_s, const Box& u_box,
                           const Box& y_box) {
  require(u_box.dim() == xi_s.inputs() && y_box.dim() == xi_s.outputs(), "box has wrong size");
  require(p.rows() == xi_s.dim() && p.cols() == xi_s.dim(), "P has wrong shape");
  const Box box = extended_box(u_box, y_box, xi_s.window());
  const Vector& c = xi_s.values();
  double beta = kInf;
  Eigen::LLT<Matrix> llt(symmetrize(p));
  if (llt.info() != Eigen::Success) throw std::invalid_argument("P must be positive definite");
  const Matrix p_inv = llt.solve(Matrix::Identity(p.rows(), p.cols()));
  for (Index i = 0; i < box.dim(); ++i) {
    const bool lo = std::isfinite(box.lower(i)), hi = std::isfinite(box.upper(i));
    if (lo && !(c(i) > box.lower(i))) throw std::invalid_argument("setpoint is not inside the box");
    if (hi && !(c(i) < box.upper(i))) throw std::invalid_argument("setpoint is not inside the box");
    if (lo) beta = std::min(beta, std::pow(c(i) - box.lower(i), 2) / p_inv(i, i));
    if (hi) beta = std::min(beta, std::pow(box.upper(i) - c(i), 2) / p_inv(i, i));
  }
  return std::isfinite(beta) ? (1.0 - 1e-9) * beta : beta;
}

Matrix decrease_matrix(const ExtendedRealization& real, const Matrix& p, const Matrix& k,
                       const Matrix& q, const Matrix& r) {
  const Matrix ak = real.a + real.b * k;
  const Matrix ck = real.c + real.d * k;
  return symmetrize(ak.transpose() * p * ak - p + k.transpose() * r * k +
                    ck.transpose() * q * ck);
}

VerificationReport verify_terminal_ingredients(const TerminalIngredients& ti,
                                               const ExtendedRealization& real,
                                               const Matrix& q, const Matrix& r,
                                               const Vector& u_s, const Vector& y_s,
                                               const Box& u_box, const Box& y_box,
                                               const VerificationOptions& options) {
  VerificationReport rep;
  rep.realization_source = "oracle";
  rep.decrease_max_eig = max_eigenvalue(decrease_matrix(real, ti.p, ti.k, q, r));
  rep.decrease_ok = rep.decrease_max_eig <= options.decrease_tol;

  const Matrix ak = real.a + real.b * ti.k;
  const Matrix ck = real.c + real.d * ti.k;
  if (!std::isfinite(ti.beta)) {
    // Unbounded set: invariance holds iff the closed loop is P-contractive,
    // admissibility iff no bounded channel moves with xi.
    rep.invariance_max_ratio = max_eigenvalue(symmetrize(ak.transpose() * ti.p * ak - ti.p));
    rep.invariance_ok = rep.invariance_max_ratio <= options.decrease_tol;
    double worst = 0.0;
    for (Index i = 0; i < u_box.dim(); ++i) {
      if (std::isfinite(u_box.lower(i)) || std::isfinite(u_box.upper(i)))
        worst = std::max(worst, ti.k.row(i).cwiseAbs().maxCoeff());
    }
    for (Index i = 0; i < y_box.dim(); ++i) {
      if (std::isfinite(y_box.lower(i)) || std::isfinite(y_box.upper(i)))
        worst = std::max(worst, ck.row(i).cwiseAbs().maxCoeff());
    }
    rep.admissibility_violation = worst;
    rep.admissible_ok = worst <= options.slack;
    return rep;
  }

  const ExtendedState xi_s = steady_extended_state(u_s, y_s, real.window);
  const Box xbox = extended_box(u_box, y_box, real.window);
  const Matrix p_inv_sqrt = sym_sqrt(symmetrize(ti.p)).inverse();
  std::mt19937_64 rng(options.seed);
  std::normal_distribution<double> nd;
  const double root_beta = std::sqrt(ti.beta);
  Vector w(real.dim());
  double ratio = 0.0, viol = 0.0;
  for (Index s = 0; s < options.samples; ++s) {
    for (Index i = 0; i < w.size(); ++i) w(i) = nd(rng);
    const Vector d = root_beta * p_inv_sqrt * (w / w.norm());
    const Vector next = ak * d;
    ratio = std::max(ratio, next.dot(ti.p * next) / ti.beta);
    viol = std::max(viol, xbox.violation(xi_s.values() + d));
    viol = std::max(viol, u_box.violation(u_s + ti.k * d));
    viol = std::max(viol, y_box.violation(y_s + ck * d));
  }
  rep.samples = options.samples;
  rep.invariance_max_ratio = ratio;
  rep.invariance_ok = ratio <= 1.0 + options.slack;
  rep.admissibility_violation = viol;
  rep.admissible_ok = viol <= options.slack;
  return rep;
}

}  // namespace hmpc
