#include "hankel_mpc/app.hpp"

#include <cmath>
#include <iomanip>
#include <ostream>
#include <sstream>

namespace hmpc::app {

namespace {

using io::json;

Matrix scaled_identity(Index n, double s) { return s * Matrix::Identity(n, n); }

json file_entry(const fs::path& path) {
  return json{{"path", path.filename().string()}, {"hash", io::file_hash(path)}};
}

// Writes <out>/<command>.manifest.json and returns it.
json write_manifest(const fs::path& out, const std::string& command, std::uint64_t seed,
                    const json& config, const std::vector<std::pair<std::string, fs::path>>& inputs,
                    const std::vector<std::pair<std::string, fs::path>>& outputs) {
  json in = json::object(), outj = json::object();
  for (const auto& [name, path] : inputs) in[name] = file_entry(path);
  for (const auto& [name, path] : outputs) outj[name] = file_entry(path);
  json m{{"command", command},
         {"version", kVersion},
         {"seed", seed},
         {"config", config},
         {"config_hash", io::hash_hex(io::fnv1a(config.dump()))},
         {"inputs", std::move(in)},
         {"outputs", std::move(outj)}};
  io::write_json(out / (command + ".manifest.json"), m);
  return m;
}

io::Problem load_problem(const std::optional<fs::path>& path, Index m, Index p) {
  if (path) return io::problem_from_json(io::read_json(*path), m, p);
  return io::Problem{Vector::Zero(m), Vector::Zero(p), Box::unbounded(m), Box::unbounded(p)};
}

std::string format_vector(const Vector& v) {
  std::ostringstream os;
  os << '(';
  for (Index i = 0; i < v.size(); ++i) os << (i ? ", " : "") << io::format_double(v(i));
  os << ')';
  return os.str();
}

int exit_for(SynthesisFailure f) {
  switch (f) {
    case SynthesisFailure::z_rank:
    case SynthesisFailure::infeasible: return kInfeasible;
    default: return kSolverFailure;
  }
}

}  // namespace

double uniform(std::mt19937_64& rng, double lo, double hi) {
  const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
  return lo + (hi - lo) * u;
}

LtiSystem builtin_plant(std::string_view name) {
  if (name != "four-tank-style") throw CommandError(kUsage, "plant", "unknown builtin plant: " + std::string(name));
  Matrix a(4, 4), b(4, 2), c = Matrix::Zero(2, 4), d = Matrix::Zero(2, 2);
  a << 0.921, 0, 0.041, 0,  //
      0, 0.918, 0, 0.033,   //
      0, 0, 0.924, 0,       //
      0, 0, 0, 0.937;
  // Direct gains chosen so that u = (1, 1) holds y = (0.65, 0.77) at rest.
  const double b11 = 0.65 * 0.079 - 0.001 - 0.041 * (0.061 / 0.076);
  const double b22 = 0.77 * 0.082 - 0.001 - 0.033 * (0.072 / 0.063);
  b << b11, 0.001,  //
      0.001, b22,   //
      0, 0.061,     //
      0.072, 0;
  c(0, 0) = 1.0;
  c(1, 1) = 1.0;
  return LtiSystem(a, b, c, d);
}

io::Problem builtin_problem(std::string_view name) {
  if (name != "four-tank-style") throw CommandError(kUsage, "plant", "unknown builtin plant: " + std::string(name));
  io::Problem pr;
  pr.u_s = Vector::Ones(2);
  pr.y_s = Vector(2);
  pr.y_s << 0.65, 0.77;
  pr.u_box = Box::symmetric(2, 2.0);
  pr.y_box = Box::unbounded(2);
  return pr;
}

LtiSystem resolve_plant(const std::string& spec, std::uint64_t seed) {
  if (spec == "four-tank-style") return builtin_plant(spec);
  if (spec.rfind("random:", 0) == 0) {
    int n = 0, m = 0, p = 0;
    char c1 = 0, c2 = 0;
    std::istringstream ss(spec.substr(7));
    if (!(ss >> n >> c1 >> m >> c2 >> p) || c1 != ',' || c2 != ',' || n < 1 || m < 1 || p < 1) {
      throw CommandError(kUsage, "plant", "expected random:n,m,p, got " + spec);
    }
    std::mt19937_64 rng(seed);
    return random_system(n, m, p, rng);
  }
  if (!fs::exists(spec)) throw CommandError(kUsage, "plant", "unknown plant: " + spec);
  return io::plant_from_json(io::read_json(spec));
}

IoTrajectory generate_data(const LtiSystem& plant, const DataOptions& options) {
  if (options.length < 1) throw CommandError(kUsage, "gen-data", "data length must be positive");
  if (options.noise_energy < 0.0) throw CommandError(kUsage, "gen-data", "noise energy must be nonnegative");
  std::mt19937_64 rng(options.seed);
  const Index m = plant.inputs(), p = plant.outputs(), n = options.length;
  Matrix u(m, n);
  for (Index k = 0; k < n; ++k)
    for (Index i = 0; i < m; ++i) u(i, k) = uniform(rng, -options.input_bound, options.input_bound);
  const Vector x0 = Vector::Zero(plant.states());
  if (options.noise_energy == 0.0) return IoTrajectory(u, simulate(plant, x0, u).outputs);

  // Equation-error noise enters the output recursion of the window realization.
  const int l = lag(plant);
  if (n <= l) throw CommandError(kUsage, "gen-data", "data too short for noise injection");
  Matrix d(p, n - l);
  for (Index k = 0; k < d.cols(); ++k)
    for (Index i = 0; i < p; ++i) d(i, k) = uniform(rng, -1.0, 1.0);
  d *= std::sqrt(options.noise_energy) / d.norm();
  const auto head = simulate(plant, x0, u.leftCols(l));
  const auto real = extended_realization(plant, l);
  const auto xi0 = extended_state_from_history(u.leftCols(l), head.outputs);
  Matrix y(p, n);
  y.leftCols(l) = head.outputs;
  y.rightCols(n - l) = simulate_extended(real, xi0.values(), u.rightCols(n - l), d);
  return IoTrajectory(u, y);
}

int cmd_gen_data(const GenDataArgs& args, std::ostream& log) {
  const LtiSystem plant = resolve_plant(args.plant, args.data.seed);
  const IoTrajectory traj = generate_data(plant, args.data);
  std::ostringstream csv;
  io::write_trajectory_csv(csv, traj);
  const fs::path data = args.out / "data.csv";
  io::write_file(data, csv.str());
  const json config{{"plant", args.plant},
                    {"length", args.data.length},
                    {"input_bound", args.data.input_bound},
                    {"noise_energy", args.data.noise_energy}};
  write_manifest(args.out, "gen-data", args.data.seed, config, {}, {{"data", data}});
  const int order = static_cast<int>(std::min<Index>(traj.length(), 15 + 2 + plant.states()));
  log << "gen-data: wrote " << traj.length() << " samples to " << data.string()
      << " (input persistently exciting of order " << order << ": "
      << (is_persistently_exciting(traj.u(), order) ? "yes" : "no") << ")\n";
  return kOk;
}

int cmd_check(const CheckArgs& args, std::ostream& log) {
  const IoTrajectory traj = io::read_trajectory_csv(args.data);
  const Index m = traj.inputs(), p = traj.outputs();
  json report{{"samples", traj.length()}, {"inputs", m}, {"outputs", p},
              {"window", args.window}, {"horizon", args.horizon}};
  bool passed = true;

  json pe = json::array();
  std::vector<int> orders{args.horizon + args.window};
  if (args.order) orders.push_back(args.horizon + args.window + *args.order);
  for (int order : orders) {
    Index rank = 0;
    if (order <= traj.length()) rank = numerical_rank(hankel(traj.u(), order).data);
    const bool ok = rank == m * order;
    passed = passed && ok;
    pe.push_back(json{{"order", order}, {"rank", rank}, {"required", m * order}, {"ok", ok}});
  }
  report["persistent_excitation"] = std::move(pe);

  const DataBank bank = build_data_bank(traj, args.horizon, args.window);
  const Index z_rank = numerical_rank(bank.z);
  const bool z_ok = z_rank == bank.z.rows();
  passed = passed && z_ok;
  report["z"] = json{{"rank", z_rank}, {"rows", bank.z.rows()}, {"full_row_rank", z_ok}};

  if (args.order) {
    const bool square = p * args.window == *args.order;
    passed = passed && square;
    report["window_pair"] = json{{"p_times_l", p * args.window}, {"n", *args.order},
                                 {"controllable", square}};
  }
  if (args.problem) {
    const io::Problem pr = load_problem(args.problem, m, p);
    const bool eq = is_equilibrium_data(bank, pr.u_s, pr.y_s, args.window);
    passed = passed && eq;
    report["equilibrium"] = json{{"u_s", io::vector_to_json(pr.u_s)},
                                 {"y_s", io::vector_to_json(pr.y_s)},
                                 {"is_equilibrium", eq}};
  }
  report["passed"] = passed;
  const fs::path out = args.out / "check.json";
  io::write_json(out, report);
  json config{{"window", args.window}, {"horizon", args.horizon},
              {"order", args.order ? json(*args.order) : json(nullptr)}};
  std::vector<std::pair<std::string, fs::path>> inputs{{"data", args.data}};
  if (args.problem) inputs.emplace_back("problem", *args.problem);
  write_manifest(args.out, "check", 0, config, inputs, {{"report", out}});
  log << "check: " << (passed ? "passed" : "FAILED") << " (" << out.string() << ")\n";
  return passed ? kOk : kInfeasible;
}

int cmd_design(const DesignArgs& args, std::ostream& log) {
  const IoTrajectory traj = io::read_trajectory_csv(args.data);
  const Index m = traj.inputs(), p = traj.outputs();
  const DataBank bank = build_data_bank(traj, 1, args.window);
  const io::Problem pr = load_problem(args.problem, m, p);
  if (!(args.q_scale > 0.0 && args.r_scale > 0.0)) {
    throw CommandError(kUsage, "design", "weights must be positive");
  }
  const Matrix q = scaled_identity(p, args.q_scale), r = scaled_identity(m, args.r_scale);

  SynthesisOptions opt;
  opt.d_bar = args.dbar;
  opt.gamma = args.gamma;
  opt.gamma_max = args.gamma_max;
  opt.zero_gain = args.zero_gain;
  const auto solver = default_solver();
  opt.solver = solver.get();
  const SynthesisResult res = synthesize(bank, q, r, opt);
  if (!res.ok()) {
    log << "design: " << to_string(res.failure) << ": " << res.message << "\n";
    return exit_for(res.failure);
  }

  io::Certificate cert;
  cert.ingredients = *res.ingredients;
  cert.q = q;
  cert.r = r;
  cert.window = args.window;
  cert.u_s = pr.u_s;
  cert.y_s = pr.y_s;
  cert.u_box = pr.u_box;
  cert.y_box = pr.y_box;
  cert.zero_gain = args.zero_gain;
  cert.probes = res.probes;
  auto& ti = cert.ingredients;
  try {
    ti.beta = terminal_set_radius(ti.p, steady_extended_state(pr.u_s, pr.y_s, args.window),
                                  pr.u_box, pr.y_box);
  } catch (const std::invalid_argument& e) {
    throw CommandError(kUsage, "design", e.what());
  }

  ExtendedRealization real;
  std::string source = "data";
  if (args.plant) {
    real = extended_realization(resolve_plant(*args.plant, args.seed), args.window);
    source = "oracle";
  } else {
    real = realization_from_data(bank);
  }
  VerificationOptions vo;
  vo.seed = args.seed + 1;
  VerificationReport rep =
      verify_terminal_ingredients(ti, real, q, r, pr.u_s, pr.y_s, pr.u_box, pr.y_box, vo);
  rep.realization_source = source;
  ti.report = rep;

  const fs::path out = args.out / "certificate.json";
  io::write_json(out, io::certificate_to_json(cert));
  json config{{"window", args.window}, {"q_scale", args.q_scale}, {"r_scale", args.r_scale},
              {"dbar", args.dbar}, {"gamma", args.gamma ? json(*args.gamma) : json(nullptr)},
              {"gamma_max", args.gamma_max}, {"zero_gain", args.zero_gain},
              {"plant", args.plant ? json(*args.plant) : json(nullptr)}};
  std::vector<std::pair<std::string, fs::path>> inputs{{"data", args.data}};
  if (args.problem) inputs.emplace_back("problem", *args.problem);
  write_manifest(args.out, "design", args.seed, config, inputs, {{"certificate", out}});
  log << "design: gamma = " << io::format_double(ti.gamma)
      << ", beta = " << (std::isfinite(ti.beta) ? io::format_double(ti.beta) : "inf")
      << ", verification (" << source << ") " << (rep.passed() ? "passed" : "FAILED") << "\n";
  return rep.passed() ? kOk : kInfeasible;
}

Tracking tracking(const ClosedLoopTrace& trace, const Vector& u_s, const Vector& y_s, double rel) {
  Tracking out;
  for (const auto& s : trace.steps) {
    if (s.status != SolveStatus::optimal) return Tracking{};
    const double dev = std::max(((s.u - u_s).array().abs() / u_s.array().abs()).maxCoeff(),
                                ((s.y - y_s).array().abs() / y_s.array().abs()).maxCoeff());
    out.final_offset = dev;
    if (!(dev <= rel)) {
      out.settled_at.reset();
    } else if (!out.settled_at) {
      out.settled_at = s.t;
    }
  }
  if (trace.outcome == Outcome::diverged) out.settled_at.reset();
  return out;
}

int cmd_run(const RunArgs& args, std::ostream& log) { return execute_run(args, log).code; }

RunOutput execute_run(const RunArgs& args, std::ostream& log) {
  RunOutput result;
  const IoTrajectory traj = io::read_trajectory_csv(args.data);
  const Index m = traj.inputs(), p = traj.outputs();
  MpcConfig cfg;
  cfg.horizon = args.horizon;
  cfg.lambda_alpha = args.lambda_alpha;
  cfg.mode = args.mode;
  if (args.cert) {
    const io::Certificate cert = io::certificate_from_json(io::read_json(*args.cert));
    if (cert.u_s.size() != m || cert.y_s.size() != p) {
      throw CommandError(kUsage, "run", "certificate does not match the data dimensions");
    }
    cfg.window = cert.window;
    cfg.q = cert.q;
    cfg.r = cert.r;
    cfg.u_s = cert.u_s;
    cfg.y_s = cert.y_s;
    cfg.u_box = cert.u_box;
    cfg.y_box = cert.y_box;
    cfg.terminal_p = cert.ingredients.p;
    cfg.beta = cert.ingredients.beta;
  } else {
    if (args.mode != TerminalMode::none) {
      throw CommandError(kUsage, "run", "--cert is required unless --terminal-mode none");
    }
    io::Problem pr;
    if (args.problem) {
      pr = load_problem(args.problem, m, p);
    } else if (args.plant == "four-tank-style") {
      pr = builtin_problem(args.plant);
    } else {
      throw CommandError(kUsage, "run", "--box is required without a certificate");
    }
    cfg.window = args.window;
    cfg.q = scaled_identity(p, args.q_scale);
    cfg.r = scaled_identity(m, args.r_scale);
    cfg.u_s = pr.u_s;
    cfg.y_s = pr.y_s;
    cfg.u_box = pr.u_box;
    cfg.y_box = pr.y_box;
  }
  if (args.problem && args.cert) {
    const io::Problem pr = load_problem(args.problem, m, p);
    cfg.u_s = pr.u_s;
    cfg.y_s = pr.y_s;
    cfg.u_box = pr.u_box;
    cfg.y_box = pr.y_box;
  }

  const LtiSystem plant = resolve_plant(args.plant, args.seed);
  if (plant.inputs() != m || plant.outputs() != p) {
    throw CommandError(kUsage, "run", "plant does not match the data dimensions");
  }
  const Vector x0 = args.x0 ? *args.x0 : Vector::Zero(plant.states());
  if (x0.size() != plant.states()) throw CommandError(kUsage, "run", "--x0 has wrong dimension");
  const DataBank bank = build_data_bank(traj, cfg.horizon, cfg.window, static_cast<int>(plant.states()));
  if (bank.warning) log << "run: warning: " << bank.warning->message << "\n";

  ClosedLoopOptions opt;
  opt.steps = args.steps;
  const auto solver = default_solver();
  opt.solver = solver.get();
  result.trace = run_closed_loop(plant, x0, bank, cfg, opt);
  result.diagnostics = diagnostics(result.trace, cfg);
  result.config = cfg;
  const ClosedLoopTrace& trace = result.trace;
  const DiagnosticsReport& diag = result.diagnostics;

  std::ostringstream csv;
  io::write_trace_csv(csv, trace, args.timing);
  const fs::path trace_path = args.out / "trace.csv";
  const fs::path summary_path = args.out / "summary.json";
  io::write_file(trace_path, csv.str());
  io::write_json(summary_path, io::trace_summary(trace, diag, cfg));

  // Plots of inputs and outputs against the setpoint.
  std::vector<double> t;
  std::vector<std::vector<double>> us(m), ys(p);
  for (Index k = 0; k < trace.warmup_u.cols(); ++k) {
    t.push_back(static_cast<double>(k));
    for (Index i = 0; i < m; ++i) us[i].push_back(trace.warmup_u(i, k));
    for (Index i = 0; i < p; ++i) ys[i].push_back(trace.warmup_y(i, k));
  }
  for (const auto& s : trace.steps) {
    if (s.status != SolveStatus::optimal) break;
    t.push_back(s.t);
    for (Index i = 0; i < m; ++i) us[i].push_back(s.u(i));
    for (Index i = 0; i < p; ++i) ys[i].push_back(s.y(i));
  }
  auto plot = [&](const std::string& name, const std::vector<std::vector<double>>& vals,
                  const Vector& ref) {
    std::vector<io::PlotSeries> series;
    for (std::size_t i = 0; i < vals.size(); ++i)
      series.push_back({name + "_" + std::to_string(i + 1), t, vals[i], false});
    for (Index i = 0; i < ref.size(); ++i)
      series.push_back({name + "_" + std::to_string(i + 1) + " setpoint", t,
                        std::vector<double>(t.size(), ref(i)), true});
    return io::svg_line_plot("closed loop: " + name + " (" + std::string(to_string(cfg.mode)) +
                                 ", L = " + std::to_string(cfg.horizon) + ")",
                             "t", series);
  };
  const fs::path u_svg = args.out / "inputs.svg", y_svg = args.out / "outputs.svg";
  io::write_file(u_svg, plot("u", us, cfg.u_s));
  io::write_file(y_svg, plot("y", ys, cfg.y_s));

  json config{{"horizon", cfg.horizon}, {"window", cfg.window}, {"steps", args.steps},
              {"lambda_alpha", cfg.lambda_alpha},
              {"terminal_mode", std::string(to_string(cfg.mode))}, {"plant", args.plant},
              {"x0", io::vector_to_json(x0)}};
  std::vector<std::pair<std::string, fs::path>> inputs{{"data", args.data}};
  if (args.cert) inputs.emplace_back("certificate", *args.cert);
  if (args.problem) inputs.emplace_back("problem", *args.problem);
  write_manifest(args.out, "run", args.seed, config, inputs,
                 {{"trace", trace_path}, {"summary", summary_path}, {"inputs_plot", u_svg},
                  {"outputs_plot", y_svg}});

  log << "run: " << to_string(trace.outcome);
  if (trace.converged_at) log << " at t = " << *trace.converged_at;
  log << " after " << trace.steps.size() << " steps (" << trace_path.string() << ")\n";
  if (trace.failed_at) {
    if (*trace.failed_at == cfg.window) {
      log << "run: " << to_string(trace.failure_status) << " at t = " << *trace.failed_at
          << "; history u = " << format_vector(Eigen::Map<const Vector>(trace.warmup_u.data(), trace.warmup_u.size()))
          << ", y = " << format_vector(Eigen::Map<const Vector>(trace.warmup_y.data(), trace.warmup_y.size()))
          << "\n";
    }
    result.code = trace.failure_status == SolveStatus::infeasible ? kInfeasible : kSolverFailure;
  }
  return result;
}

namespace {

void stage(const std::string& name, int code) {
  if (code != kOk) throw CommandError(code, name, "stage " + name + " failed");
}

std::string format_offset(const Tracking& tr) {
  std::ostringstream os;
  os << std::setprecision(3) << 100.0 * tr.final_offset << "%";
  return os.str();
}

}  // namespace

int cmd_reproduce(const ReproduceArgs& args, std::ostream& log) {
  const std::string plant = "four-tank-style";
  const int horizon = 15, window = 2;
  const double band = 0.005;
  const fs::path root = args.out;
  fs::create_directories(root);
  const fs::path problem_path = root / "problem.json";
  const io::Problem problem = builtin_problem(plant);
  io::write_json(problem_path, io::problem_to_json(problem));

  GenDataArgs gen;
  gen.plant = plant;
  gen.data.length = 100;
  gen.data.seed = args.seed;
  gen.out = root / "data";
  fs::create_directories(gen.out);
  stage("gen-data", cmd_gen_data(gen, log));
  const fs::path data = gen.out / "data.csv";

  CheckArgs check;
  check.data = data;
  check.window = window;
  check.horizon = horizon;
  check.order = 4;
  check.problem = problem_path;
  check.out = root / "check";
  fs::create_directories(check.out);
  stage("check", cmd_check(check, log));

  DesignArgs design;
  design.data = data;
  design.window = window;
  design.problem = problem_path;
  design.plant = plant;
  design.zero_gain = true;
  design.seed = args.seed;
  design.out = root / "design";
  fs::create_directories(design.out);
  stage("design", cmd_design(design, log));
  const fs::path cert_path = design.out / "certificate.json";

  RunArgs run;
  run.data = data;
  run.cert = cert_path;
  run.plant = plant;
  run.x0 = Vector(4);
  *run.x0 << 0.1, 0.1, 0.2, 0.2;
  run.steps = args.steps;
  run.horizon = horizon;
  run.lambda_alpha = 1e-4;
  run.mode = TerminalMode::cost_only;
  run.timing = false;
  run.seed = args.seed;
  run.out = root / "run";
  fs::create_directories(run.out);
  const RunOutput main = execute_run(run, log);
  stage("run", main.code);
  const Tracking main_tracking = tracking(main.trace, problem.u_s, problem.y_s, band);

  // Ablation: same loop without terminal ingredients. The recorded horizon is
  // the longest one in the sweep at which tracking fails.
  RunArgs ablation = run;
  ablation.cert.reset();
  ablation.problem = problem_path;
  ablation.mode = TerminalMode::none;
  json sweep = json::array();
  std::optional<int> ablation_horizon;
  for (int h : {horizon, 10, 5, 3, 2, 1}) {
    ablation.horizon = h;
    ablation.out = root / "ablation" / ("L" + std::to_string(h));
    fs::create_directories(ablation.out);
    const RunOutput out = execute_run(ablation, log);
    if (out.code == kSolverFailure) stage("ablation", out.code);
    const Tracking tr = tracking(out.trace, problem.u_s, problem.y_s, band);
    sweep.push_back(json{{"horizon", h},
                         {"outcome", std::string(to_string(out.trace.outcome))},
                         {"tracked", tr.tracked()},
                         {"final_offset", tr.final_offset}});
    if (!tr.tracked() && !ablation_horizon) ablation_horizon = h;
  }

  // Manifest chain: every consumer saw the bytes its producer wrote.
  auto manifest_hash = [](const fs::path& dir, const std::string& cmd, const std::string& side,
                          const std::string& key) {
    return io::read_json(dir / (cmd + ".manifest.json")).at(side).at(key).at("hash");
  };
  const json data_hash = manifest_hash(gen.out, "gen-data", "outputs", "data");
  const json cert_hash = manifest_hash(design.out, "design", "outputs", "certificate");
  bool chain_ok = manifest_hash(check.out, "check", "inputs", "data") == data_hash &&
                  manifest_hash(design.out, "design", "inputs", "data") == data_hash &&
                  manifest_hash(run.out, "run", "inputs", "data") == data_hash &&
                  manifest_hash(run.out, "run", "inputs", "certificate") == cert_hash;
  for (const auto& s : sweep) {
    const fs::path dir = root / "ablation" / ("L" + std::to_string(s.at("horizon").get<int>()));
    chain_ok = chain_ok && manifest_hash(dir, "run", "inputs", "data") == data_hash;
  }
  if (!chain_ok) throw CommandError(kInfeasible, "manifest", "manifest chain is broken");

  const io::Certificate cert = io::certificate_from_json(io::read_json(cert_path));
  const auto& diag = main.diagnostics;
  std::ostringstream md;
  md << std::setprecision(6);
  md << "# Reproduction report\n\n";
  md << "Plant: builtin `" << plant << "`; data seed " << args.seed << "; N = 100, L = " << horizon
     << ", l = " << window << ", Q = I, R = 5e-3 I, U = [-2, 2]^2, Y unbounded, "
     << "lambda_alpha = 1e-4, K = 0, terminal mode cost-only, x0 = (0.1, 0.1, 0.2, 0.2).\n\n";
  md << "| stage | result |\n|---|---|\n";
  md << "| gen-data | 100 samples |\n";
  md << "| check | passed |\n";
  md << "| design | gamma = " << cert.ingredients.gamma << ", verification "
     << (cert.ingredients.report && cert.ingredients.report->passed() ? "passed" : "failed")
     << " |\n";
  md << "| run | " << (main_tracking.tracked() ? "tracks" : "does not track")
     << " the setpoint within 0.5%"
     << (main_tracking.settled_at ? " from t = " + std::to_string(*main_tracking.settled_at) : "")
     << "; final offset " << format_offset(main_tracking) << " |\n";
  md << "| ablation | "
     << (ablation_horizon ? "fails to track at L = " + std::to_string(*ablation_horizon)
                          : std::string("tracks at every horizon in the sweep"))
     << " |\n";
  md << "| manifest chain | ok |\n\n";
  md << "The performance level gamma is specific to this plant and solver; no reference value "
        "is asserted. The final offset is the largest relative deviation of u and y from the "
        "setpoint at the last step; it is caused by the alpha penalty and depends on the data.\n\n";
  md << "## Cost decrease\n\n";
  md << "Margin J(t+1) - J(t) + |u_t - u_s|_R^2 + |y_t - y_s|_Q^2 per step. With lambda_alpha > 0 "
        "the margin is reported but not checked.\n\n";
  md << "| t | J(t) | margin |\n|---|---|---|\n";
  for (std::size_t i = 0; i < main.trace.steps.size() && i < 20; ++i) {
    md << "| " << main.trace.steps[i].t << " | " << main.trace.steps[i].cost << " | ";
    if (i < diag.margins.size()) md << diag.margins[i];
    md << " |\n";
  }
  md << "\nLargest margin over the run: " << diag.max_margin << ".\n\n";
  md << "## Ablation without terminal ingredients\n\n| L | outcome | tracks within 0.5% | final offset |\n|---|---|---|---|\n";
  for (const auto& s : sweep) {
    std::ostringstream off;
    off << std::setprecision(3) << 100.0 * s.at("final_offset").get<double>() << "%";
    md << "| " << s.at("horizon").get<int>() << " | " << s.at("outcome").get<std::string>()
       << " | " << (s.at("tracked").get<bool>() ? "yes" : "no") << " | " << off.str() << " |\n";
  }
  io::write_file(root / "report.md", md.str());
  io::write_json(root / "manifest.json",
                 json{{"command", "reproduce"},
                      {"version", kVersion},
                      {"seed", args.seed},
                      {"chain_ok", chain_ok},
                      {"data", data_hash},
                      {"certificate", cert_hash},
                      {"gamma", cert.ingredients.gamma},
                      {"tracked", main_tracking.tracked()},
                      {"settled_at", main_tracking.settled_at ? json(*main_tracking.settled_at)
                                                              : json(nullptr)},
                      {"final_offset", main_tracking.final_offset},
                      {"ablation_horizon", ablation_horizon ? json(*ablation_horizon)
                                                            : json(nullptr)},
                      {"ablation", sweep}});
  log << "reproduce: report written to " << (root / "report.md").string() << "\n";
  return kOk;
}

}  // namespace hmpc::app
