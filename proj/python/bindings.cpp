#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <sstream>

#include "hankel_mpc/app.hpp"

namespace py = pybind11;
using namespace hmpc;

namespace {

py::dict trace_to_dict(const ClosedLoopTrace& trace) {
  const Index steps = static_cast<Index>(trace.steps.size());
  const Index m = trace.warmup_u.rows(), p = trace.warmup_y.rows();
  Matrix u(m, steps), y(p, steps);
  Vector cost(steps);
  for (Index t = 0; t < steps; ++t) {
    u.col(t) = trace.steps[t].u;
    y.col(t) = trace.steps[t].y;
    cost(t) = trace.steps[t].cost;
  }
  py::dict out;
  out["warmup_u"] = Matrix(trace.warmup_u);
  out["warmup_y"] = Matrix(trace.warmup_y);
  out["u"] = std::move(u);
  out["y"] = std::move(y);
  out["cost"] = std::move(cost);
  out["outcome"] = std::string(to_string(trace.outcome));
  out["converged_at"] = trace.converged_at;
  out["failed_at"] = trace.failed_at;
  return out;
}

}  // namespace

PYBIND11_MODULE(_core, mod) {
  mod.attr("__version__") = app::kVersion;

  py::class_<LtiSystem>(mod, "LtiSystem")
      .def(py::init<Matrix, Matrix, Matrix, Matrix>(), py::arg("a"), py::arg("b"), py::arg("c"),
           py::arg("d"))
      .def_property_readonly("a", &LtiSystem::a)
      .def_property_readonly("b", &LtiSystem::b)
      .def_property_readonly("c", &LtiSystem::c)
      .def_property_readonly("d", &LtiSystem::d)
      .def_property_readonly("states", &LtiSystem::states)
      .def_property_readonly("inputs", &LtiSystem::inputs)
      .def_property_readonly("outputs", &LtiSystem::outputs);

  mod.def("builtin_plant", [](const std::string& name) { return app::builtin_plant(name); },
          py::arg("name") = "four-tank-style");
  mod.def("resolve_plant", &app::resolve_plant, py::arg("spec"), py::arg("seed") = 0);
  mod.def(
      "simulate",
      [](const LtiSystem& sys, const Vector& x0, const Matrix& u) {
        SimulationResult r = simulate(sys, x0, u);
        return py::make_tuple(std::move(r.states), std::move(r.outputs));
      },
      py::arg("system"), py::arg("x0"), py::arg("u"));
  mod.def("lag", &lag);
  mod.def("extended_pair_controllable", &extended_pair_controllable, py::arg("system"),
          py::arg("window"));

  mod.def("hankel", [](const Matrix& x, int depth) { return hankel(x, depth).data; },
          py::arg("x"), py::arg("depth"));
  mod.def("is_persistently_exciting", &is_persistently_exciting, py::arg("u"), py::arg("order"));

  mod.def(
      "generate_data",
      [](const LtiSystem& plant, Index length, double input_bound, std::uint64_t seed,
         double noise_energy) {
        const IoTrajectory traj =
            app::generate_data(plant, {length, input_bound, seed, noise_energy});
        return py::make_tuple(Matrix(traj.u()), Matrix(traj.y()));
      },
      py::arg("plant"), py::arg("length") = 100, py::arg("input_bound") = 1.0,
      py::arg("seed") = 0, py::arg("noise_energy") = 0.0);

  py::class_<DataBank>(mod, "DataBank")
      .def(py::init([](const Matrix& u, const Matrix& y, int horizon, int window,
                       std::optional<int> order_bound) {
             return build_data_bank(IoTrajectory(u, y), horizon, window, order_bound);
           }),
           py::arg("u"), py::arg("y"), py::arg("horizon"), py::arg("window"),
           py::arg("order_bound") = py::none())
      .def_readonly("horizon", &DataBank::horizon)
      .def_readonly("window", &DataBank::window)
      .def_readonly("z", &DataBank::z)
      .def_property_readonly("xi_dim", &DataBank::xi_dim)
      .def_property_readonly("z_full_row_rank", &z_full_row_rank)
      .def_property_readonly("warning", [](const DataBank& b) -> std::optional<std::string> {
        if (!b.warning) return std::nullopt;
        return b.warning->message;
      });

  py::class_<TerminalIngredients>(mod, "TerminalIngredients")
      .def_readonly("p", &TerminalIngredients::p)
      .def_readonly("k", &TerminalIngredients::k)
      .def_readonly("gamma", &TerminalIngredients::gamma)
      .def_readonly("beta", &TerminalIngredients::beta)
      .def_readonly("margin", &TerminalIngredients::margin)
      .def_readonly("x_condition", &TerminalIngredients::x_condition);

  mod.def(
      "synthesize",
      [](const DataBank& bank, const Matrix& q, const Matrix& r, double d_bar,
         std::optional<double> gamma, bool zero_gain) {
        SynthesisOptions opt;
        opt.d_bar = d_bar;
        opt.gamma = gamma;
        opt.zero_gain = zero_gain;
        SynthesisResult res = synthesize(bank, q, r, opt);
        if (!res.ok()) throw std::runtime_error(std::string(to_string(res.failure)) + ": " + res.message);
        return *res.ingredients;
      },
      py::arg("bank"), py::arg("q"), py::arg("r"), py::arg("d_bar") = 0.0,
      py::arg("gamma") = py::none(), py::arg("zero_gain") = false);

  mod.def(
      "terminal_set_radius",
      [](const Matrix& p, const Vector& u_s, const Vector& y_s, int window, const Vector& u_lo,
         const Vector& u_hi, const Vector& y_lo, const Vector& y_hi) {
        return terminal_set_radius(p, steady_extended_state(u_s, y_s, window), Box{u_lo, u_hi},
                                   Box{y_lo, y_hi});
      },
      py::arg("p"), py::arg("u_s"), py::arg("y_s"), py::arg("window"), py::arg("u_lower"),
      py::arg("u_upper"), py::arg("y_lower"), py::arg("y_upper"));

  mod.def(
      "run_closed_loop",
      [](const LtiSystem& plant, const Vector& x0, const DataBank& bank, const Matrix& q,
         const Matrix& r, const Vector& u_s, const Vector& y_s, const Vector& u_lo,
         const Vector& u_hi, std::optional<Matrix> terminal_p, double beta,
         const std::string& mode, double lambda_alpha, int steps) {
        MpcConfig cfg;
        cfg.horizon = bank.horizon;
        cfg.window = bank.window;
        cfg.q = q;
        cfg.r = r;
        cfg.u_box = Box{u_lo, u_hi};
        cfg.y_box = Box::unbounded(y_s.size());
        cfg.u_s = u_s;
        cfg.y_s = y_s;
        cfg.lambda_alpha = lambda_alpha;
        cfg.mode = parse_terminal_mode(mode);
        if (terminal_p) cfg.terminal_p = *terminal_p;
        cfg.beta = beta;
        ClosedLoopOptions opt;
        opt.steps = steps;
        return trace_to_dict(run_closed_loop(plant, x0, bank, cfg, opt));
      },
      py::arg("plant"), py::arg("x0"), py::arg("bank"), py::arg("q"), py::arg("r"),
      py::arg("u_s"), py::arg("y_s"), py::arg("u_lower"), py::arg("u_upper"),
      py::arg("terminal_p") = py::none(),
      py::arg("beta") = std::numeric_limits<double>::infinity(), py::arg("mode") = "full",
      py::arg("lambda_alpha") = 0.0, py::arg("steps") = 30);

  mod.def(
      "reproduce",
      [](const std::filesystem::path& out, std::uint64_t seed, int steps) {
        std::ostringstream log;
        const int code = app::cmd_reproduce({seed, steps, out}, log);
        return py::make_tuple(code, log.str());
      },
      py::arg("out"), py::arg("seed") = 1, py::arg("steps") = 200);
}
