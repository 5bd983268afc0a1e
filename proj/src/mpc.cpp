#include "hankel_mpc/mpc.hpp"

#include <chrono>
#include <cmath>
#include <stdexcept>

namespace hmpc {

namespace {

void require(bool cond, const std::string& what) {
  if (!cond) throw std::invalid_argument(what);
}

// Selects xi_L = (u_{L-l..L-1}, y_{L-l..L-1}) from the decision vector.
Matrix terminal_selector(const Ocp& o, Index nvar) {
  const Index l = o.window, m = o.m, p = o.p;
  Matrix e = Matrix::Zero((m + p) * l, nvar);
  for (Index i = 0; i < l; ++i) {
    e.block(i * m, o.u_off + (o.horizon + i) * m, m, m).setIdentity();
    e.block(m * l + i * p, o.y_off + (o.horizon + i) * p, p, p).setIdentity();
  }
  return e;
}

}  // namespace

std::string_view to_string(TerminalMode mode) {
  switch (mode) {
    case TerminalMode::full: return "full";
    case TerminalMode::cost_only: return "cost-only";
    case TerminalMode::none: return "none";
  }
  return "unknown";
}

TerminalMode parse_terminal_mode(std::string_view text) {
  if (text == "full") return TerminalMode::full;
  if (text == "cost-only") return TerminalMode::cost_only;
  if (text == "none") return TerminalMode::none;
  throw std::invalid_argument("unknown terminal mode: " + std::string(text));
}

std::string_view to_string(Outcome outcome) {
  switch (outcome) {
    case Outcome::converged: return "converged";
    case Outcome::infeasible: return "infeasible";
    case Outcome::diverged: return "diverged";
    case Outcome::not_converged: return "not-converged";
  }
  return "unknown";
}

void MpcConfig::validate(const DataBank& bank) const {
  const Index m = bank.inputs(), p = bank.outputs();
  require(horizon >= 1, "horizon must be >= 1");
  require(window >= 1, "window must be >= 1");
  require(bank.horizon == horizon && bank.window == window,
          "data bank depth does not match horizon + window");
  require(q.rows() == p && q.cols() == p && r.rows() == m && r.cols() == m,
          "weights have wrong shape");
  require(min_eigenvalue(symmetrize(q)) > 0.0 && min_eigenvalue(symmetrize(r)) > 0.0,
          "Q and R must be positive definite");
  require(u_box.dim() == m && y_box.dim() == p, "constraint boxes have wrong size");
  require(u_s.size() == m && y_s.size() == p, "setpoint has wrong size");
  require(lambda_alpha >= 0.0, "lambda_alpha must be nonnegative");
  if (mode != TerminalMode::none) {
    const Index nxi = (m + p) * window;
    require(terminal_p.rows() == nxi && terminal_p.cols() == nxi,
            "terminal mode requires a terminal cost matrix of size n_xi");
  }
  if (mode == TerminalMode::full) require(!(beta <= 0.0), "terminal radius must be positive");
}

OcpBuilder::OcpBuilder(const DataBank& bank, MpcConfig cfg) : cfg_(std::move(cfg)) {
  cfg_.validate(bank);
  const Index m = bank.inputs(), p = bank.outputs();
  const Index L = cfg_.horizon, l = cfg_.window, depth = L + l;
  const Index na = bank.hu.data.cols();
  Ocp& o = base_;
  o.n_alpha = na;
  o.u_off = na;
  o.y_off = na + m * depth;
  o.horizon = static_cast<int>(L);
  o.window = static_cast<int>(l);
  o.m = m;
  o.p = p;
  const Index nvar = o.y_off + p * depth;

  Matrix h(bank.hu.data.rows() + bank.hy.data.rows(), na);
  h << bank.hu.data, bank.hy.data;
  const Matrix null_h = null_space(h);

  // Equalities: H alpha = w, null(H)' alpha = 0, initialization window.
  const Index nh = h.rows(), nn = null_h.cols(), ni = (m + p) * l;
  ConeProgram& prog = o.program;
  prog.a = Matrix::Zero(nh + nn + ni, nvar);
  prog.b = Vector::Zero(nh + nn + ni);
  prog.a.block(0, 0, nh, na) = h;
  prog.a.block(0, o.u_off, nh, nh) = -Matrix::Identity(nh, nh);
  prog.a.block(nh, 0, nn, na) = null_h.transpose();
  init_row_ = nh + nn;
  for (Index i = 0; i < l; ++i) {
    prog.a.block(init_row_ + i * m, o.u_off + i * m, m, m).setIdentity();
    prog.a.block(init_row_ + m * l + i * p, o.y_off + i * p, p, p).setIdentity();
  }

  // Cost: sum of stage costs over k = 0..L-1, terminal cost, alpha penalty.
  prog.p = Matrix::Zero(nvar, nvar);
  prog.q = Vector::Zero(nvar);
  prog.offset = 0.0;
  prog.p.topLeftCorner(na, na) = 2.0 * cfg_.lambda_alpha * Matrix::Identity(na, na);
  const Matrix& r = cfg_.r;
  const Matrix& q = cfg_.q;
  for (Index k = 0; k < L; ++k) {
    const Index iu = o.u_off + (l + k) * m, iy = o.y_off + (l + k) * p;
    prog.p.block(iu, iu, m, m) += 2.0 * r;
    prog.q.segment(iu, m) -= 2.0 * r * cfg_.u_s;
    prog.p.block(iy, iy, p, p) += 2.0 * q;
    prog.q.segment(iy, p) -= 2.0 * q * cfg_.y_s;
    prog.offset += cfg_.u_s.dot(r * cfg_.u_s) + cfg_.y_s.dot(q * cfg_.y_s);
  }
  const Matrix e = terminal_selector(o, nvar);
  const Vector xi_s = steady_extended_state(cfg_.u_s, cfg_.y_s, static_cast<int>(l)).values();
  if (cfg_.mode != TerminalMode::none) {
    const Matrix& tp = cfg_.terminal_p;
    prog.p += 2.0 * e.transpose() * tp * e;
    prog.q -= 2.0 * e.transpose() * tp * xi_s;
    prog.offset += xi_s.dot(tp * xi_s);
  }
  prog.p = symmetrize(prog.p);

  // Box constraints on k = 0..L-1 and the terminal ellipsoid.
  std::vector<std::pair<Index, double>> upper_rows;  // (variable, bound), sign folded in
  std::vector<std::pair<Index, double>> lower_rows;
  for (Index k = 0; k < L; ++k) {
    for (Index i = 0; i < m; ++i) {
      const Index v = o.u_off + (l + k) * m + i;
      if (std::isfinite(cfg_.u_box.upper(i))) upper_rows.emplace_back(v, cfg_.u_box.upper(i));
      if (std::isfinite(cfg_.u_box.lower(i))) lower_rows.emplace_back(v, cfg_.u_box.lower(i));
    }
    for (Index i = 0; i < p; ++i) {
      const Index v = o.y_off + (l + k) * p + i;
      if (std::isfinite(cfg_.y_box.upper(i))) upper_rows.emplace_back(v, cfg_.y_box.upper(i));
      if (std::isfinite(cfg_.y_box.lower(i))) lower_rows.emplace_back(v, cfg_.y_box.lower(i));
    }
  }
  const Index nlp = static_cast<Index>(upper_rows.size() + lower_rows.size());
  o.terminal_set = cfg_.mode == TerminalMode::full && std::isfinite(cfg_.beta);
  const Index nxi = e.rows();
  const Index nsoc = o.terminal_set ? nxi + 1 : 0;
  prog.g = Matrix::Zero(nlp + nsoc, nvar);
  prog.h = Vector::Zero(nlp + nsoc);
  Index row = 0;
  for (const auto& [v, b] : upper_rows) {
    prog.g(row, v) = 1.0;
    prog.h(row++) = b;
  }
  for (const auto& [v, b] : lower_rows) {
    prog.g(row, v) = -1.0;
    prog.h(row++) = -b;
  }
  prog.cones.nonneg = nlp;
  if (o.terminal_set) {
    const Eigen::LLT<Matrix> llt(symmetrize(cfg_.terminal_p));
    if (llt.info() != Eigen::Success) throw std::invalid_argument("terminal P is not positive definite");
    const Matrix lt = llt.matrixU();  // P = U' U
    prog.h(row) = std::sqrt(cfg_.beta);
    prog.g.block(row + 1, 0, nxi, nvar) = -lt * e;
    prog.h.segment(row + 1, nxi) = -lt * xi_s;
    prog.cones.soc = {nxi + 1};
  }
}

Ocp OcpBuilder::build(const ExtendedState& history) const {
  require(history.window() == base_.window && history.inputs() == base_.m &&
              history.outputs() == base_.p,
          "history does not match the configuration");
  Ocp o = base_;
  o.program.b.tail(history.dim()) = history.values();
  return o;
}

Ocp OcpBuilder::build_unconstrained_start() const {
  Ocp o = base_;
  o.program.a = base_.program.a.topRows(init_row_).eval();
  o.program.b = base_.program.b.head(init_row_).eval();
  return o;
}

Ocp build_ocp(const DataBank& bank, const MpcConfig& cfg, const ExtendedState& history) {
  return OcpBuilder(bank, cfg).build(history);
}

MpcSolution solve_ocp(const Ocp& ocp, const DataBank& bank, const ConicSolver& solver) {
  const ConicSolution sol = solver.solve(ocp.program);
  MpcSolution out;
  out.status = sol.status;
  out.iterations = sol.iterations;
  if (sol.status != SolveStatus::optimal) return out;
  const Index depth = ocp.horizon + ocp.window, m = ocp.m, p = ocp.p;
  const Vector& x = sol.x;
  out.alpha = x.head(ocp.n_alpha);
  const Vector wu = x.segment(ocp.u_off, m * depth), wy = x.segment(ocp.y_off, p * depth);
  out.u_bar = Eigen::Map<const Matrix>(wu.data() + m * ocp.window, m, ocp.horizon);
  out.y_bar = Eigen::Map<const Matrix>(wy.data() + p * ocp.window, p, ocp.horizon);
  out.xi_l = terminal_selector(ocp, x.size()) * x;
  out.cost = sol.objective;
  out.hankel_residual = std::sqrt((bank.hu.data * out.alpha - wu).squaredNorm() +
                                  (bank.hy.data * out.alpha - wy).squaredNorm());
  return out;
}

StepResult mpc_step(const DataBank& bank, const MpcConfig& cfg, const ExtendedState& history,
                    const ConicSolver& solver) {
  StepResult out;
  out.solution = solve_ocp(build_ocp(bank, cfg, history), bank, solver);
  if (out.solution.status == SolveStatus::optimal) out.u = out.solution.u_bar.col(0);
  return out;
}

ClosedLoopTrace run_closed_loop(const LtiSystem& plant, const Vector& x0, const DataBank& bank,
                                const MpcConfig& cfg, const ClosedLoopOptions& options) {
  const Index m = plant.inputs(), p = plant.outputs();
  require(bank.inputs() == m && bank.outputs() == p, "plant and data dimensions differ");
  require(x0.size() == plant.states(), "x0 has wrong dimension");
  require(options.steps >= 0, "steps must be nonnegative");
  const int l = cfg.window;
  const OcpBuilder builder(bank, cfg);
  std::unique_ptr<ConicSolver> owned;
  const ConicSolver* solver = options.solver;
  if (!solver) {
    owned = default_solver();
    solver = owned.get();
  }

  ClosedLoopTrace trace;
  trace.window = l;
  trace.warmup_u = options.warmup_u.size() ? options.warmup_u : Matrix::Zero(m, l);
  require(trace.warmup_u.rows() == m && trace.warmup_u.cols() == l, "warm-up input has wrong shape");
  const auto warm = simulate(plant, x0, trace.warmup_u);
  trace.warmup_y = warm.outputs;
  Vector x = warm.states.col(l);
  Matrix u_hist = trace.warmup_u, y_hist = trace.warmup_y;

  const Vector xi_s = steady_extended_state(cfg.u_s, cfg.y_s, l).values();
  const double tol = options.convergence_tol * (1.0 + xi_s.norm());
  Vector xi = extended_state_from_history(u_hist, y_hist).values();
  const double blowup = options.divergence_factor * (1.0 + (xi - xi_s).norm());
  int streak = 0;
  auto track = [&](const Vector& v, int t) {
    const double err = (v - xi_s).norm();
    streak = err <= tol ? streak + 1 : 0;
    if (streak >= options.convergence_steps && !trace.converged_at)
      trace.converged_at = t;
    return std::isfinite(err) && err <= blowup;
  };

  bool ok = true;
  for (int k = 0; k < options.steps && ok; ++k) {
    const int t = l + k;
    if (!track(xi, t)) {
      trace.outcome = Outcome::diverged;
      ok = false;
      break;
    }
    if (options.stop_when_converged && trace.converged_at) break;
    const auto start = std::chrono::steady_clock::now();
    const MpcSolution sol =
        solve_ocp(builder.build(ExtendedState(xi, l, m, p)), bank, *solver);
    const double ms =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start)
            .count();
    StepRecord rec;
    rec.t = t;
    rec.xi = xi;
    rec.solver_ms = ms;
    rec.status = sol.status;
    if (sol.status != SolveStatus::optimal) {
      trace.steps.push_back(std::move(rec));
      trace.outcome = Outcome::infeasible;
      trace.failed_at = t;
      trace.failure_status = sol.status;
      ok = false;
      break;
    }
    rec.u = sol.u_bar.col(0);
    rec.y = plant.c() * x + plant.d() * rec.u;
    rec.y_predicted = sol.y_bar.col(0);
    rec.cost = sol.cost;
    x = plant.a() * x + plant.b() * rec.u;
    // Shift the window.
    if (l > 1) {
      u_hist.leftCols(l - 1) = u_hist.rightCols(l - 1).eval();
      y_hist.leftCols(l - 1) = y_hist.rightCols(l - 1).eval();
    }
    u_hist.col(l - 1) = rec.u;
    y_hist.col(l - 1) = rec.y;
    xi = extended_state_from_history(u_hist, y_hist).values();
    trace.steps.push_back(std::move(rec));
  }
  trace.final_xi = xi;
  if (ok) {
    if (!track(xi, l + options.steps)) {
      trace.outcome = Outcome::diverged;
    } else {
      trace.outcome = trace.converged_at ? Outcome::converged : Outcome::not_converged;
    }
  }
  return trace;
}

DiagnosticsReport diagnostics(const ClosedLoopTrace& trace, const MpcConfig& cfg) {
  DiagnosticsReport rep;
  const auto& steps = trace.steps;
  std::vector<const StepRecord*> solved;
  for (const auto& s : steps) {
    if (s.status == SolveStatus::optimal) solved.push_back(&s);
  }
  rep.recursively_feasible = !steps.empty() && solved.size() == steps.size();
  if (!steps.empty() && steps.front().status != SolveStatus::optimal) rep.recursively_feasible = false;

  const double j0 = solved.empty() ? 0.0 : solved.front()->cost;
  rep.margin_tol = 1e-6 * (1.0 + std::abs(j0));
  rep.decrease_checked = cfg.lambda_alpha == 0.0;
  for (std::size_t i = 0; i + 1 < solved.size(); ++i) {
    const StepRecord& a = *solved[i];
    const StepRecord& b = *solved[i + 1];
    const Vector du = a.u - cfg.u_s, dy = a.y - cfg.y_s;
    const double margin = b.cost - a.cost + du.dot(cfg.r * du) + dy.dot(cfg.q * dy);
    rep.margins.push_back(margin);
    rep.max_margin = std::max(rep.max_margin, margin);
  }
  rep.decrease_ok = !rep.decrease_checked || rep.max_margin <= rep.margin_tol;

  for (const auto* s : solved) {
    rep.u_violation = std::max(rep.u_violation, cfg.u_box.violation(s->u));
    rep.y_violation = std::max(rep.y_violation, cfg.y_box.violation(s->y));
    rep.prediction_error =
        std::max(rep.prediction_error, (s->y_predicted - s->y).cwiseAbs().maxCoeff());
  }

  // Log-linear fit of ||xi_t - xi_s|| over samples above the numerical floor.
  const Vector xi_s = steady_extended_state(cfg.u_s, cfg.y_s, cfg.window).values();
  const double floor = 1e-7 * (1.0 + xi_s.norm());
  std::vector<double> ts, logs;
  auto add = [&](double t, const Vector& xi) {
    const double e = (xi - xi_s).norm();
    if (e > floor) {
      ts.push_back(t);
      logs.push_back(std::log(e));
    }
  };
  for (const auto& s : steps) add(s.t, s.xi);
  if (trace.final_xi.size()) add(trace.window + static_cast<double>(steps.size()), trace.final_xi);
  rep.decay_points = static_cast<Index>(ts.size());
  if (ts.size() >= 3) {
    const Index n = static_cast<Index>(ts.size());
    Matrix a(n, 2);
    Vector b(n);
    for (Index i = 0; i < n; ++i) {
      a(i, 0) = 1.0;
      a(i, 1) = ts[i];
      b(i) = logs[i];
    }
    const Vector coef = a.colPivHouseholderQr().solve(b);
    rep.decay_rate = std::exp(coef(1));
    const double mean = b.mean();
    const double ss_tot = (b.array() - mean).square().sum();
    const double ss_res = (a * coef - b).squaredNorm();
    rep.decay_r2 = ss_tot > 0.0 ? 1.0 - ss_res / ss_tot : 1.0;
  }
  return rep;
}

}  // namespace hmpc
