#include "hankel_mpc/conic.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <limits>
#include <optional>
#include <stdexcept>

namespace hmpc {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
const double kSqrt2 = std::sqrt(2.0);

struct NumericalError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Block {
  enum Kind { nonneg, soc, psd } kind;
  Index offset;
  Index size;
  Index order;  // psd only
};

std::vector<Block> make_blocks(const ConeDims& dims) {
  std::vector<Block> out;
  Index off = 0;
  if (dims.nonneg > 0) {
    out.push_back({Block::nonneg, off, dims.nonneg, 0});
    off += dims.nonneg;
  }
  for (Index k : dims.soc) {
    out.push_back({Block::soc, off, k, 0});
    off += k;
  }
  for (Index n : dims.psd) {
    out.push_back({Block::psd, off, svec_size(n), n});
    off += svec_size(n);
  }
  return out;
}

Index svec_index(Index i, Index j, Index n) {
  // i >= j
  return j * (2 * n - j + 1) / 2 + (i - j);
}

Vector identity_element(const std::vector<Block>& blocks, Index size) {
  Vector e = Vector::Zero(size);
  for (const auto& b : blocks) {
    switch (b.kind) {
      case Block::nonneg: e.segment(b.offset, b.size).setOnes(); break;
      case Block::soc: e(b.offset) = 1.0; break;
      case Block::psd:
        for (Index j = 0; j < b.order; ++j) e(b.offset + svec_index(j, j, b.order)) = 1.0;
        break;
    }
  }
  return e;
}

// Smallest t with x + t e in K.
double distance_to_cone(const Vector& x, const std::vector<Block>& blocks) {
  double t = -kInf;
  for (const auto& b : blocks) {
    const auto xb = x.segment(b.offset, b.size);
    switch (b.kind) {
      case Block::nonneg: t = std::max(t, -xb.minCoeff()); break;
      case Block::soc: t = std::max(t, xb.tail(b.size - 1).norm() - xb(0)); break;
      case Block::psd: t = std::max(t, -min_eigenvalue(smat(xb, b.order))); break;
    }
  }
  return t;
}

bool strictly_interior(const Vector& x, const std::vector<Block>& blocks) {
  for (const auto& b : blocks) {
    const auto xb = x.segment(b.offset, b.size);
    switch (b.kind) {
      case Block::nonneg:
        if (!(xb.minCoeff() > 0.0)) return false;
        break;
      case Block::soc: {
        const double t = xb(0);
        if (!(t > 0.0) || !(t * t - xb.tail(b.size - 1).squaredNorm() > 0.0)) return false;
        break;
      }
      case Block::psd:
        if (Eigen::LLT<Matrix>(smat(xb, b.order)).info() != Eigen::Success) return false;
        break;
    }
  }
  return true;
}

// Jordan product u o v.
Vector jordan_product(const Vector& u, const Vector& v, const std::vector<Block>& blocks) {
  Vector out(u.size());
  for (const auto& b : blocks) {
    const auto ub = u.segment(b.offset, b.size);
    const auto vb = v.segment(b.offset, b.size);
    auto ob = out.segment(b.offset, b.size);
    switch (b.kind) {
      case Block::nonneg: ob = ub.cwiseProduct(vb); break;
      case Block::soc:
        ob(0) = ub.dot(vb);
        ob.tail(b.size - 1) = ub(0) * vb.tail(b.size - 1) + vb(0) * ub.tail(b.size - 1);
        break;
      case Block::psd: {
        const Matrix um = smat(ub, b.order), vm = smat(vb, b.order);
        ob = svec(0.5 * (um * vm + vm * um));
        break;
      }
    }
  }
  return out;
}

// Largest alpha with point + alpha * dir in K, for `point` interior.
double soc_step(const Eigen::Ref<const Vector>& u, const Eigen::Ref<const Vector>& d) {
  const Index k = u.size();
  const double a = d(0) * d(0) - d.tail(k - 1).squaredNorm();
  const double b = 2.0 * (u(0) * d(0) - u.tail(k - 1).dot(d.tail(k - 1)));
  const double c = u(0) * u(0) - u.tail(k - 1).squaredNorm();
  if (d(0) >= d.tail(k - 1).norm()) return kInf;
  // q(alpha) = a alpha^2 + b alpha + c, q(0) = c > 0; first positive root.
  if (std::abs(a) < 1e-300) return b < 0.0 ? -c / b : kInf;
  const double disc = b * b - 4.0 * a * c;
  if (disc < 0.0) return kInf;
  const double sq = std::sqrt(disc);
  const double qq = -0.5 * (b + std::copysign(sq, b));
  double r1 = qq / a;
  double r2 = (qq != 0.0) ? c / qq : kInf;
  double best = kInf;
  for (double r : {r1, r2}) {
    if (r > 0.0 && r < best) best = r;
  }
  return best;
}

class Scaling {
 public:
  enum class Op { w, wt, winv, wtinv };

  Scaling(const Vector& s, const Vector& z, const std::vector<Block>& blocks)
      : blocks_(blocks), lambda_(s.size()) {
    for (const auto& b : blocks_) {
      const auto sb = s.segment(b.offset, b.size);
      const auto zb = z.segment(b.offset, b.size);
      switch (b.kind) {
        case Block::nonneg: {
          if (sb.minCoeff() <= 0.0 || zb.minCoeff() <= 0.0) throw NumericalError("left orthant");
          nonneg_d_ = (sb.array() / zb.array()).sqrt();
          lambda_.segment(b.offset, b.size) = (sb.array() * zb.array()).sqrt();
          break;
        }
        case Block::soc: {
          const Index k = b.size;
          const double sj = sb(0) * sb(0) - sb.tail(k - 1).squaredNorm();
          const double zj = zb(0) * zb(0) - zb.tail(k - 1).squaredNorm();
          if (sb(0) <= 0.0 || zb(0) <= 0.0 || sj <= 0.0 || zj <= 0.0) {
            throw NumericalError("left second-order cone");
          }
          const double aa = std::sqrt(sj), bb = std::sqrt(zj);
          const double beta = std::sqrt(aa / bb);
          const double cc = std::sqrt((sb.dot(zb) / (aa * bb) + 1.0) / 2.0);
          Vector w = sb / aa;
          w(0) += zb(0) / bb;
          w.tail(k - 1) -= zb.tail(k - 1) / bb;
          w /= 2.0 * cc;
          w(0) += 1.0;
          Vector v = w / std::sqrt(2.0 * w(0));
          soc_beta_.push_back(beta);
          soc_v_.push_back(v);
          lambda_.segment(b.offset, k) = apply_soc(zb, beta, v, Op::w);
          break;
        }
        case Block::psd: {
          const Index n = b.order;
          Eigen::LLT<Matrix> ls(smat(sb, n)), lz(smat(zb, n));
          if (ls.info() != Eigen::Success || lz.info() != Eigen::Success) {
            throw NumericalError("left semidefinite cone");
          }
          const Matrix lsm = ls.matrixL(), lzm = lz.matrixL();
          Eigen::JacobiSVD<Matrix> svd(lzm.transpose() * lsm, Eigen::ComputeFullU | Eigen::ComputeFullV);
          const Vector sv = svd.singularValues();
          if (sv.minCoeff() <= 0.0) throw NumericalError("degenerate semidefinite scaling");
          const Matrix r = lsm * svd.matrixV() * sv.cwiseSqrt().cwiseInverse().asDiagonal();
          const Matrix lsinv = lsm.triangularView<Eigen::Lower>().solve(Matrix::Identity(n, n));
          const Matrix rinv = sv.cwiseSqrt().asDiagonal() * svd.matrixV().transpose() * lsinv;
          psd_r_.push_back(r);
          psd_rinv_.push_back(rinv);
          psd_lambda_.push_back(sv);
          Matrix lam = sv.asDiagonal();
          lambda_.segment(b.offset, b.size) = svec(lam);
          break;
        }
      }
    }
  }

  const Vector& lambda() const { return lambda_; }

  Vector apply(const Vector& x, Op op) const {
    Vector out(x.size());
    std::size_t soc_i = 0, psd_i = 0;
    for (const auto& b : blocks_) {
      const auto xb = x.segment(b.offset, b.size);
      auto ob = out.segment(b.offset, b.size);
      switch (b.kind) {
        case Block::nonneg:
          if (op == Op::w || op == Op::wt) ob = nonneg_d_.cwiseProduct(xb);
          else ob = xb.cwiseQuotient(nonneg_d_);
          break;
        case Block::soc:
          ob = apply_soc(xb, soc_beta_[soc_i], soc_v_[soc_i], op);
          ++soc_i;
          break;
        case Block::psd: {
          const Matrix xm = smat(xb, b.order);
          const Matrix& r = psd_r_[psd_i];
          const Matrix& ri = psd_rinv_[psd_i];
          Matrix res;
          switch (op) {
            case Op::w: res = r.transpose() * xm * r; break;
            case Op::wt: res = r * xm * r.transpose(); break;
            case Op::winv: res = ri.transpose() * xm * ri; break;
            case Op::wtinv: res = ri * xm * ri.transpose(); break;
          }
          ob = svec(res);
          ++psd_i;
          break;
        }
      }
    }
    return out;
  }

  Matrix apply_columns(const Matrix& x, Op op) const {
    Matrix out(x.rows(), x.cols());
    for (Index j = 0; j < x.cols(); ++j) out.col(j) = apply(x.col(j), op);
    return out;
  }

  // lambda o\ x
  Vector lambda_divide(const Vector& x) const {
    Vector out(x.size());
    std::size_t psd_i = 0;
    for (const auto& b : blocks_) {
      const auto xb = x.segment(b.offset, b.size);
      const auto lb = lambda_.segment(b.offset, b.size);
      auto ob = out.segment(b.offset, b.size);
      switch (b.kind) {
        case Block::nonneg: ob = xb.cwiseQuotient(lb); break;
        case Block::soc: {
          const Index k = b.size;
          const double l0 = lb(0);
          const auto l1 = lb.tail(k - 1);
          const double det = l0 * l0 - l1.squaredNorm();
          const double u = l1.dot(xb.tail(k - 1));
          ob(0) = (l0 * xb(0) - u) / det;
          ob.tail(k - 1) = (-xb(0) * l1 + (det * xb.tail(k - 1) + u * l1) / l0) / det;
          break;
        }
        case Block::psd: {
          const Vector& lam = psd_lambda_[psd_i++];
          const Index n = b.order;
          for (Index j = 0; j < n; ++j)
            for (Index i = j; i < n; ++i) {
              const Index idx = svec_index(i, j, n);
              ob(idx) = 2.0 * xb(idx) / (lam(i) + lam(j));
            }
          break;
        }
      }
    }
    return out;
  }

  // Largest alpha with lambda + alpha d in K.
  double max_step(const Vector& d) const {
    double alpha = kInf;
    std::size_t psd_i = 0;
    for (const auto& b : blocks_) {
      const auto db = d.segment(b.offset, b.size);
      const auto lb = lambda_.segment(b.offset, b.size);
      switch (b.kind) {
        case Block::nonneg:
          for (Index i = 0; i < b.size; ++i) {
            if (db(i) < 0.0) alpha = std::min(alpha, -lb(i) / db(i));
          }
          break;
        case Block::soc: alpha = std::min(alpha, soc_step(lb, db)); break;
        case Block::psd: {
          const Vector isq = psd_lambda_[psd_i++].cwiseSqrt().cwiseInverse();
          const Matrix scaled = isq.asDiagonal() * smat(db, b.order) * isq.asDiagonal();
          const double mu = min_eigenvalue(scaled);
          if (mu < 0.0) alpha = std::min(alpha, -1.0 / mu);
          break;
        }
      }
    }
    return alpha;
  }

 private:
  static Vector apply_soc(const Eigen::Ref<const Vector>& x, double beta, const Vector& v, Op op) {
    const Index k = x.size();
    Vector jx = -x;
    jx(0) = x(0);
    if (op == Op::w || op == Op::wt) {
      return beta * (2.0 * v.dot(x) * v - jx);
    }
    Vector jv = -v;
    jv(0) = v(0);
    (void)k;
    return (2.0 * jv.dot(x) * jv - jx) / beta;
  }

  const std::vector<Block>& blocks_;
  Vector lambda_;
  Vector nonneg_d_;
  std::vector<double> soc_beta_;
  std::vector<Vector> soc_v_;
  std::vector<Matrix> psd_r_, psd_rinv_;
  std::vector<Vector> psd_lambda_;
};

// Saddle-point system [K A'; A 0] with K = P + Gs'Gs.
class KktSystem {
 public:
  KktSystem(const Matrix& p, const Matrix& a, const Matrix& gs) : n_(p.rows()), me_(a.rows()) {
    kkt_ = Matrix::Zero(n_ + me_, n_ + me_);
    kkt_.topLeftCorner(n_, n_) = p;
    if (gs.rows() > 0) kkt_.topLeftCorner(n_, n_).noalias() += gs.transpose() * gs;
    kkt_.topRightCorner(n_, me_) = a.transpose();
    kkt_.bottomLeftCorner(me_, n_) = a;
    lu_.compute(kkt_);
  }

  void solve(const Vector& rx, const Vector& ry, Vector& dx, Vector& dy) const {
    Vector rhs(n_ + me_);
    rhs << rx, ry;
    Vector sol = lu_.solve(rhs);
    for (int pass = 0; pass < 2; ++pass) {
      const Vector res = rhs - kkt_ * sol;
      sol += lu_.solve(res);
    }
    if (!sol.allFinite()) throw NumericalError("singular KKT system");
    dx = sol.head(n_);
    dy = sol.tail(me_);
  }

 private:
  Index n_, me_;
  Matrix kkt_;
  Eigen::PartialPivLU<Matrix> lu_;
};

struct RunResult {
  bool converged = false;
  Vector x, y, z, s;
  int iterations = 0;
  double gap = kInf, pres = kInf, dres = kInf;
  std::string message;
};

RunResult run_path_following(const Matrix& p, const Vector& q, const Matrix& a, const Vector& b,
                             const Matrix& g, const Vector& h, const ConeDims& dims,
                             const SolverSettings& st) {
  const Index n = q.size(), me = a.rows(), mg = g.rows();
  const auto blocks = make_blocks(dims);
  const double degree = static_cast<double>(dims.degree());
  RunResult out;

  // Starting point from the KKT system with W = I.
  {
    KktSystem kkt(p, a, g);
    Vector x, y;
    kkt.solve(-q + g.transpose() * h, b, x, y);
    out.x = x;
    out.y = y;
    out.s = h - g * x;
    out.z = -out.s;
  }
  if (mg == 0) {
    out.converged = true;
    out.gap = 0.0;
    out.pres = (a * out.x - b).norm();
    out.dres = (p * out.x + q + a.transpose() * out.y).norm();
    out.message = "equality-constrained QP solved directly";
    return out;
  }
  const Vector e = identity_element(blocks, mg);
  {
    const double ts = distance_to_cone(out.s, blocks);
    if (ts >= -1e-8 * std::max(out.s.norm(), 1.0)) out.s += (1.0 + ts) * e;
    const double tz = distance_to_cone(out.z, blocks);
    if (tz >= -1e-8 * std::max(out.z.norm(), 1.0)) out.z += (1.0 + tz) * e;
  }

  const double resx0 = std::max(1.0, q.norm());
  const double resy0 = std::max(1.0, b.norm());
  const double resz0 = std::max(1.0, h.norm());

  std::optional<RunResult> acceptable;
  Vector &x = out.x, &y = out.y, &s = out.s, &z = out.z;

  for (int it = 0; it <= st.max_iterations; ++it) {
    out.iterations = it;
    const Vector rx = p * x + q + a.transpose() * y + g.transpose() * z;
    const Vector ry = a * x - b;
    const Vector rz = s + g * x - h;
    const double pcost = 0.5 * x.dot(p * x) + q.dot(x);
    const double gap = s.dot(z);
    const double dcost = pcost + y.dot(ry) + z.dot(rz) - gap;
    double relgap = kInf;
    if (pcost < 0.0) relgap = gap / -pcost;
    else if (dcost > 0.0) relgap = gap / dcost;
    const double pres = std::max(ry.norm() / resy0, rz.norm() / resz0);
    const double dres = rx.norm() / resx0;
    out.gap = gap;
    out.pres = pres;
    out.dres = dres;
    if (!std::isfinite(gap) || !std::isfinite(pres) || !std::isfinite(dres)) {
      out.message = "non-finite iterate";
      break;
    }
    if (pres <= st.feastol && dres <= st.feastol && (gap <= st.abstol || relgap <= st.reltol)) {
      out.converged = true;
      out.message = "optimal";
      return out;
    }
    if (pres <= st.fallback_tol && dres <= st.fallback_tol &&
        (gap <= st.fallback_tol || relgap <= st.fallback_tol)) {
      if (!acceptable || gap < acceptable->gap) acceptable = out;
    }
    if (it == st.max_iterations) {
      out.message = "iteration limit reached";
      break;
    }

    try {
      const Scaling w(s, z, blocks);
      const Matrix gs = w.apply_columns(g, Scaling::Op::wtinv);
      const KktSystem kkt(p, a, gs);
      const Vector& lam = w.lambda();
      const double mu = gap / degree;
      const Vector lsq = jordan_product(lam, lam, blocks);

      auto newton = [&](double scale, const Vector& bs, Vector& dx, Vector& dy, Vector& dzt,
                        Vector& dst) {
        const Vector r = w.lambda_divide(bs);
        const Vector wbz = w.apply(-scale * rz, Scaling::Op::wtinv);
        kkt.solve(-scale * rx - gs.transpose() * (r - wbz), -scale * ry, dx, dy);
        dzt = gs * dx + r - wbz;
        dst = r - dzt;
      };

      Vector dx, dy, dzt, dst;
      newton(1.0, -lsq, dx, dy, dzt, dst);
      const double alpha_aff = std::min(w.max_step(dst), w.max_step(dzt));
      const double step_aff = std::min(1.0, alpha_aff);
      const double sigma = std::pow(1.0 - step_aff, 3);

      const Vector bs = -lsq - jordan_product(dst, dzt, blocks) + sigma * mu * e;
      newton(1.0 - sigma, bs, dx, dy, dzt, dst);
      const double alpha = std::min(w.max_step(dst), w.max_step(dzt));
      double step = std::min(1.0, st.step_fraction * alpha);
      const Vector ds = w.apply(dst, Scaling::Op::wt);
      const Vector dz = w.apply(dzt, Scaling::Op::winv);
      // Rounding in the unscaled update can leave an ill-conditioned cone.
      while (step > 1e-14 &&
             !(strictly_interior(s + step * ds, blocks) && strictly_interior(z + step * dz, blocks))) {
        step *= 0.7;
      }
      if (!(step > 1e-14)) {
        out.message = "step length collapsed";
        break;
      }
      x += step * dx;
      y += step * dy;
      s += step * ds;
      z += step * dz;
    } catch (const NumericalError& err) {
      out.message = err.what();
      break;
    }
  }
  if (acceptable) {
    acceptable->converged = true;
    acceptable->message = "optimal (reduced accuracy: " + out.message + ")";
    return *acceptable;
  }
  (void)n;
  (void)me;
  return out;
}

}  // namespace

Index svec_size(Index order) { return order * (order + 1) / 2; }

Vector svec(const Matrix& sym) {
  const Index n = sym.rows();
  Vector v(svec_size(n));
  Index k = 0;
  for (Index j = 0; j < n; ++j) {
    v(k++) = sym(j, j);
    for (Index i = j + 1; i < n; ++i) v(k++) = kSqrt2 * 0.5 * (sym(i, j) + sym(j, i));
  }
  return v;
}

Matrix smat(const Vector& v, Index order) {
  if (v.size() != svec_size(order)) throw std::invalid_argument("svec length does not match order");
  Matrix m(order, order);
  Index k = 0;
  for (Index j = 0; j < order; ++j) {
    m(j, j) = v(k++);
    for (Index i = j + 1; i < order; ++i) {
      m(i, j) = m(j, i) = v(k++) / kSqrt2;
    }
  }
  return m;
}

Index ConeDims::size() const {
  Index total = nonneg;
  for (Index k : soc) total += k;
  for (Index n : psd) total += svec_size(n);
  return total;
}

Index ConeDims::degree() const {
  Index total = nonneg + static_cast<Index>(soc.size());
  for (Index n : psd) total += n;
  return total;
}

double ConeProgram::objective(const Vector& x) const {
  double val = q.dot(x) + offset;
  if (p.size() > 0) val += 0.5 * x.dot(p * x);
  return val;
}

void ConeProgram::validate() const {
  const Index n = q.size();
  auto fail = [](const char* what) { throw std::invalid_argument(what); };
  if (n == 0) fail("cone program has no variables");
  if (p.rows() != n || p.cols() != n) fail("P must be n x n");
  if (a.cols() != n || a.rows() != b.size()) fail("A must be me x n with matching b");
  if (g.cols() != n || g.rows() != h.size()) fail("G must be mg x n with matching h");
  if (g.rows() != cones.size()) fail("G rows do not match the cone dimensions");
  for (Index k : cones.soc)
    if (k < 1) fail("second-order cones need size >= 1");
  for (Index k : cones.psd)
    if (k < 1) fail("semidefinite blocks need order >= 1");
  if (!p.allFinite() || !q.allFinite() || !a.allFinite() || !b.allFinite() || !g.allFinite() ||
      !h.allFinite()) {
    fail("cone program data must be finite");
  }
}

std::string_view to_string(SolveStatus status) {
  switch (status) {
    case SolveStatus::optimal: return "optimal";
    case SolveStatus::infeasible: return "infeasible";
    case SolveStatus::numerical_failure: return "numerical-failure";
  }
  return "unknown";
}

ConicSolution InteriorPointSolver::solve(const ConeProgram& program) const {
  program.validate();
  const Index n = program.variables();
  const Index me = program.a.rows();
  ConicSolution sol;

  // Drop dependent equality rows; inconsistent ones mean infeasibility.
  Matrix a = program.a;
  Vector b = program.b;
  std::vector<Index> kept;
  if (me > 0) {
    const Index rank = numerical_rank(a);
    if (rank < me) {
      const Vector x_ls = pseudo_inverse(a) * b;
      if ((a * x_ls - b).norm() > 1e-9 * (1.0 + b.norm())) {
        sol.status = SolveStatus::infeasible;
        sol.message = "inconsistent equality constraints";
        return sol;
      }
      Eigen::ColPivHouseholderQR<Matrix> qr(a.transpose());
      const auto& perm = qr.colsPermutation().indices();
      for (Index i = 0; i < rank; ++i) kept.push_back(perm(i));
      std::sort(kept.begin(), kept.end());
      Matrix ar(rank, n);
      Vector br(rank);
      for (Index i = 0; i < rank; ++i) {
        ar.row(i) = a.row(kept[i]);
        br(i) = b(kept[i]);
      }
      a = std::move(ar);
      b = std::move(br);
    }
  }

  RunResult run;
  try {
    run = run_path_following(program.p, program.q, a, b, program.g, program.h, program.cones,
                             settings_);
  } catch (const NumericalError& err) {
    run.message = err.what();
  }

  auto expand_y = [&](const Vector& yr) {
    if (kept.empty()) return yr;
    Vector y = Vector::Zero(me);
    for (std::size_t i = 0; i < kept.size(); ++i) y(kept[i]) = yr(static_cast<Index>(i));
    return y;
  };

  sol.iterations = run.iterations;
  sol.gap = run.gap;
  sol.primal_residual = run.pres;
  sol.dual_residual = run.dres;
  sol.message = run.message;
  if (run.converged) {
    sol.status = SolveStatus::optimal;
    sol.x = run.x;
    sol.y = expand_y(run.y);
    sol.z = run.z;
    sol.s = run.s;
    sol.objective = program.objective(sol.x);
    return sol;
  }

  // Phase one: minimize t subject to h - Gx + t e in K, t >= -1.
  const Index mg = program.g.rows();
  const Index nl = program.cones.nonneg;
  const auto blocks = make_blocks(program.cones);
  const Vector e = identity_element(blocks, mg);
  ConeDims dims1 = program.cones;
  dims1.nonneg += 1;
  Matrix g1 = Matrix::Zero(mg + 1, n + 1);
  Vector h1(mg + 1);
  g1.topLeftCorner(nl, n) = program.g.topRows(nl);
  g1.block(0, n, nl, 1) = -e.head(nl);
  h1.head(nl) = program.h.head(nl);
  g1(nl, n) = -1.0;
  h1(nl) = 1.0;
  g1.bottomLeftCorner(mg - nl, n) = program.g.bottomRows(mg - nl);
  g1.block(nl + 1, n, mg - nl, 1) = -e.tail(mg - nl);
  h1.tail(mg - nl) = program.h.tail(mg - nl);
  Matrix p1 = Matrix::Zero(n + 1, n + 1);
  p1.topLeftCorner(n, n).diagonal().setConstant(1e-10);
  Vector q1 = Vector::Zero(n + 1);
  q1(n) = 1.0;
  Matrix a1 = Matrix::Zero(a.rows(), n + 1);
  a1.leftCols(n) = a;

  try {
    const RunResult phase1 = run_path_following(p1, q1, a1, b, g1, h1, dims1, settings_);
    if (phase1.converged) {
      const Vector x = phase1.x.head(n);
      const double needed = distance_to_cone(program.h - program.g * x, blocks);
      const double scale = 1.0 + program.h.lpNorm<Eigen::Infinity>();
      if (needed > settings_.infeasibility_tol * scale) {
        sol.status = SolveStatus::infeasible;
        sol.message = "phase one: constraints violated by at least " + std::to_string(needed);
        return sol;
      }
    }
  } catch (const NumericalError&) {
  }
  sol.status = SolveStatus::numerical_failure;
  if (sol.message.empty()) sol.message = "no convergence";
  if (run.x.size() == n && run.x.allFinite()) sol.x = run.x;
  return sol;
}

std::unique_ptr<ConicSolver> make_solver(std::string_view name, SolverSettings settings) {
  if (name == "nt-ipm" || name.empty()) return std::make_unique<InteriorPointSolver>(settings);
  throw std::invalid_argument("unknown conic solver backend: " + std::string(name));
}

std::unique_ptr<ConicSolver> default_solver() {
  const char* env = std::getenv("HANKEL_MPC_SOLVER");
  return make_solver(env ? std::string_view(env) : std::string_view("nt-ipm"));
}

}  // namespace hmpc
