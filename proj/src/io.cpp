#include "hankel_mpc/io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace hmpc::io {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, sep)) out.push_back(cell);
  if (!line.empty() && line.back() == sep) out.emplace_back();
  return out;
}

std::string trim(std::string s) {
  const auto not_space = [](unsigned char c) { return !std::isspace(c); };
  s.erase(s.begin(), std::find_if(s.begin(), s.end(), not_space));
  s.erase(std::find_if(s.rbegin(), s.rend(), not_space).base(), s.end());
  return s;
}

double parse_cell(const std::string& cell, std::size_t row) {
  const std::string t = trim(cell);
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(t, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (t.empty() || used != t.size()) {
    throw ParseError("row " + std::to_string(row) + ": cannot parse number '" + t + "'");
  }
  return v;
}

json bound_to_json(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

Vector bounds_from_json(const json& j, Index dim, double missing, const char* what) {
  if (j.is_null()) return Vector::Constant(dim, missing);
  if (!j.is_array() || static_cast<Index>(j.size()) != dim) {
    throw ParseError(std::string(what) + " must be an array of length " + std::to_string(dim));
  }
  Vector v(dim);
  for (Index i = 0; i < dim; ++i) v(i) = j[i].is_null() ? missing : j[i].get<double>();
  return v;
}

std::string escape_xml(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      default: out += c;
    }
  }
  return out;
}

}  // namespace

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void write_trajectory_csv(std::ostream& os, const IoTrajectory& traj) {
  os << "k";
  for (Index i = 0; i < traj.inputs(); ++i) os << ",u_" << i + 1;
  for (Index i = 0; i < traj.outputs(); ++i) os << ",y_" << i + 1;
  os << '\n';
  for (Index k = 0; k < traj.length(); ++k) {
    os << k;
    for (Index i = 0; i < traj.inputs(); ++i) os << ',' << format_double(traj.u()(i, k));
    for (Index i = 0; i < traj.outputs(); ++i) os << ',' << format_double(traj.y()(i, k));
    os << '\n';
  }
}

IoTrajectory read_trajectory_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) throw ParseError("empty CSV");
  const auto header = split(trim(line), ',');
  Index m = 0, p = 0;
  if (header.empty() || trim(header[0]) != "k") throw ParseError("row 0: header must start with 'k'");
  for (std::size_t i = 1; i < header.size(); ++i) {
    const std::string h = trim(header[i]);
    if (h == "u_" + std::to_string(m + 1) && p == 0) {
      ++m;
    } else if (h == "y_" + std::to_string(p + 1)) {
      ++p;
    } else {
      throw ParseError("row 0: unexpected column '" + h + "'");
    }
  }
  if (m == 0 || p == 0) throw ParseError("row 0: need at least one input and one output column");

  std::vector<std::vector<double>> rows;
  std::size_t row = 0;
  while (std::getline(is, line)) {
    ++row;
    if (trim(line).empty()) continue;
    const auto cells = split(trim(line), ',');
    if (static_cast<Index>(cells.size()) != 1 + m + p) {
      throw ParseError("row " + std::to_string(row) + ": expected " + std::to_string(1 + m + p) +
                       " columns, found " + std::to_string(cells.size()));
    }
    std::vector<double> vals;
    for (const auto& c : cells) vals.push_back(parse_cell(c, row));
    if (vals[0] != static_cast<double>(rows.size())) {
      throw ParseError("row " + std::to_string(row) + ": sample index out of sequence");
    }
    rows.push_back(std::move(vals));
  }
  if (rows.empty()) throw ParseError("CSV has no samples");
  const Index n = static_cast<Index>(rows.size());
  Matrix u(m, n), y(p, n);
  for (Index k = 0; k < n; ++k) {
    for (Index i = 0; i < m; ++i) u(i, k) = rows[k][1 + i];
    for (Index i = 0; i < p; ++i) y(i, k) = rows[k][1 + m + i];
  }
  return IoTrajectory(std::move(u), std::move(y));
}

IoTrajectory read_trajectory_csv(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open " + path.string());
  return read_trajectory_csv(is);
}

json matrix_to_json(const Matrix& m) {
  json data = json::array();
  for (Index i = 0; i < m.rows(); ++i)
    for (Index j = 0; j < m.cols(); ++j) data.push_back(m(i, j));
  return json{{"rows", m.rows()}, {"cols", m.cols()}, {"data", std::move(data)}};
}

Matrix matrix_from_json(const json& j) {
  if (!j.is_object() || !j.contains("rows") || !j.contains("cols") || !j.contains("data")) {
    throw ParseError("matrix must be an object with rows, cols and data");
  }
  const Index r = j.at("rows").get<Index>(), c = j.at("cols").get<Index>();
  const json& data = j.at("data");
  if (r < 0 || c < 0 || !data.is_array() || static_cast<Index>(data.size()) != r * c) {
    throw ParseError("matrix data length does not match rows * cols");
  }
  Matrix m(r, c);
  for (Index i = 0; i < r; ++i)
    for (Index k = 0; k < c; ++k) m(i, k) = data[i * c + k].get<double>();
  return m;
}

json vector_to_json(const Vector& v) {
  json out = json::array();
  for (Index i = 0; i < v.size(); ++i) out.push_back(v(i));
  return out;
}

Vector vector_from_json(const json& j) {
  if (!j.is_array()) throw ParseError("vector must be an array");
  Vector v(static_cast<Index>(j.size()));
  for (Index i = 0; i < v.size(); ++i) v(i) = j[i].get<double>();
  return v;
}

json box_to_json(const Box& box) {
  json lo = json::array(), hi = json::array();
  for (Index i = 0; i < box.dim(); ++i) {
    lo.push_back(bound_to_json(box.lower(i)));
    hi.push_back(bound_to_json(box.upper(i)));
  }
  return json{{"lower", std::move(lo)}, {"upper", std::move(hi)}};
}

Box box_from_json(const json& lower, const json& upper) {
  if (!lower.is_array() || !upper.is_array() || lower.size() != upper.size()) {
    throw ParseError("box bounds must be arrays of equal length");
  }
  const Index n = static_cast<Index>(lower.size());
  Box b{bounds_from_json(lower, n, -kInf, "lower"), bounds_from_json(upper, n, kInf, "upper")};
  for (Index i = 0; i < n; ++i) {
    if (!(b.lower(i) < b.upper(i))) throw ParseError("box lower bound must be below upper bound");
  }
  return b;
}

json plant_to_json(const LtiSystem& sys) {
  return json{{"A", matrix_to_json(sys.a())},
              {"B", matrix_to_json(sys.b())},
              {"C", matrix_to_json(sys.c())},
              {"D", matrix_to_json(sys.d())}};
}

LtiSystem plant_from_json(const json& j) {
  for (const char* key : {"A", "B", "C", "D"}) {
    if (!j.contains(key)) throw ParseError(std::string("plant is missing matrix ") + key);
  }
  return LtiSystem(matrix_from_json(j.at("A")), matrix_from_json(j.at("B")),
                   matrix_from_json(j.at("C")), matrix_from_json(j.at("D")));
}

json report_to_json(const VerificationReport& rep) {
  return json{{"realization", rep.realization_source},
              {"decrease_max_eig", rep.decrease_max_eig},
              {"invariance_max_ratio", rep.invariance_max_ratio},
              {"admissibility_violation", rep.admissibility_violation},
              {"samples", rep.samples},
              {"decrease_ok", rep.decrease_ok},
              {"invariance_ok", rep.invariance_ok},
              {"admissible_ok", rep.admissible_ok},
              {"passed", rep.passed()}};
}

json certificate_to_json(const Certificate& cert) {
  const auto& ti = cert.ingredients;
  json probes = json::array();
  for (const auto& pr : cert.probes) {
    probes.push_back(json{{"gamma", pr.gamma},
                          {"margin", std::isfinite(pr.margin) ? json(pr.margin) : json(nullptr)},
                          {"status", std::string(to_string(pr.status))}});
  }
  json j{{"format", "hankel-mpc-certificate/1"},
         {"window", cert.window},
         {"gamma", ti.gamma},
         {"beta", bound_to_json(ti.beta)},
         {"d_bar", ti.d_bar},
         {"tau", ti.tau},
         {"margin", ti.margin},
         {"x_condition", ti.x_condition},
         {"zero_gain", cert.zero_gain},
         {"P", matrix_to_json(ti.p)},
         {"K", matrix_to_json(ti.k)},
         {"X", matrix_to_json(ti.x)},
         {"M", matrix_to_json(ti.m)},
         {"Q", matrix_to_json(cert.q)},
         {"R", matrix_to_json(cert.r)},
         {"u_s", vector_to_json(cert.u_s)},
         {"y_s", vector_to_json(cert.y_s)},
         {"u_box", box_to_json(cert.u_box)},
         {"y_box", box_to_json(cert.y_box)},
         {"bisection", std::move(probes)}};
  if (ti.report) j["verification"] = report_to_json(*ti.report);
  return j;
}

Certificate certificate_from_json(const json& j) {
  if (!j.is_object() || j.value("format", "") != "hankel-mpc-certificate/1") {
    throw ParseError("not a hankel-mpc certificate");
  }
  Certificate c;
  auto& ti = c.ingredients;
  c.window = j.at("window").get<int>();
  ti.gamma = j.at("gamma").get<double>();
  ti.beta = j.at("beta").is_null() ? kInf : j.at("beta").get<double>();
  ti.d_bar = j.at("d_bar").get<double>();
  ti.tau = j.value("tau", 0.0);
  ti.margin = j.value("margin", 0.0);
  ti.x_condition = j.value("x_condition", 0.0);
  c.zero_gain = j.value("zero_gain", false);
  ti.p = matrix_from_json(j.at("P"));
  ti.k = matrix_from_json(j.at("K"));
  ti.x = matrix_from_json(j.at("X"));
  ti.m = matrix_from_json(j.at("M"));
  c.q = matrix_from_json(j.at("Q"));
  c.r = matrix_from_json(j.at("R"));
  c.u_s = vector_from_json(j.at("u_s"));
  c.y_s = vector_from_json(j.at("y_s"));
  c.u_box = box_from_json(j.at("u_box").at("lower"), j.at("u_box").at("upper"));
  c.y_box = box_from_json(j.at("y_box").at("lower"), j.at("y_box").at("upper"));
  const Index m = c.u_s.size(), p = c.y_s.size(), nxi = (m + p) * c.window;
  if (ti.p.rows() != nxi || ti.p.cols() != nxi || ti.k.rows() != m || ti.k.cols() != nxi ||
      c.q.rows() != p || c.r.rows() != m || c.u_box.dim() != m || c.y_box.dim() != p) {
    throw ParseError("certificate dimensions are inconsistent");
  }
  if (j.contains("verification")) {
    const json& v = j.at("verification");
    VerificationReport rep;
    rep.realization_source = v.at("realization").get<std::string>();
    rep.decrease_max_eig = v.at("decrease_max_eig").get<double>();
    rep.invariance_max_ratio = v.at("invariance_max_ratio").get<double>();
    rep.admissibility_violation = v.at("admissibility_violation").get<double>();
    rep.samples = v.at("samples").get<Index>();
    rep.decrease_ok = v.at("decrease_ok").get<bool>();
    rep.invariance_ok = v.at("invariance_ok").get<bool>();
    rep.admissible_ok = v.at("admissible_ok").get<bool>();
    ti.report = rep;
  }
  return c;
}

Problem problem_from_json(const json& j, Index m, Index p) {
  if (!j.is_object()) throw ParseError("problem file must be a JSON object");
  Problem pr;
  pr.u_s = j.contains("u_s") ? vector_from_json(j.at("u_s")) : Vector::Zero(m);
  pr.y_s = j.contains("y_s") ? vector_from_json(j.at("y_s")) : Vector::Zero(p);
  if (pr.u_s.size() != m || pr.y_s.size() != p) throw ParseError("setpoint has wrong size");
  const json null_m = json::array(), null_p = json::array();
  auto get = [&](const char* key, Index dim) {
    if (j.contains(key)) return j.at(key);
    json a = json::array();
    for (Index i = 0; i < dim; ++i) a.push_back(nullptr);
    return a;
  };
  pr.u_box = box_from_json(get("u_min", m), get("u_max", m));
  pr.y_box = box_from_json(get("y_min", p), get("y_max", p));
  if (pr.u_box.dim() != m || pr.y_box.dim() != p) throw ParseError("box has wrong size");
  return pr;
}

json problem_to_json(const Problem& pr) {
  const json u = box_to_json(pr.u_box), y = box_to_json(pr.y_box);
  return json{{"u_s", vector_to_json(pr.u_s)},
              {"y_s", vector_to_json(pr.y_s)},
              {"u_min", u.at("lower")},
              {"u_max", u.at("upper")},
              {"y_min", y.at("lower")},
              {"y_max", y.at("upper")}};
}

void write_trace_csv(std::ostream& os, const ClosedLoopTrace& trace, bool timing) {
  const Index m = trace.warmup_u.rows(), p = trace.warmup_y.rows();
  os << "t";
  for (Index i = 0; i < m; ++i) os << ",u_" << i + 1;
  for (Index i = 0; i < p; ++i) os << ",y_" << i + 1;
  os << ",cost,solver_ms,status\n";
  for (Index k = 0; k < trace.warmup_u.cols(); ++k) {
    os << k;
    for (Index i = 0; i < m; ++i) os << ',' << format_double(trace.warmup_u(i, k));
    for (Index i = 0; i < p; ++i) os << ',' << format_double(trace.warmup_y(i, k));
    os << ",,0,warmup\n";
  }
  for (const auto& s : trace.steps) {
    os << s.t;
    if (s.status == SolveStatus::optimal) {
      for (Index i = 0; i < m; ++i) os << ',' << format_double(s.u(i));
      for (Index i = 0; i < p; ++i) os << ',' << format_double(s.y(i));
      os << ',' << format_double(s.cost);
    } else {
      for (Index i = 0; i < m + p; ++i) os << ',';
      os << ',';
    }
    os << ',' << (timing ? format_double(s.solver_ms) : "0") << ',' << to_string(s.status) << '\n';
  }
}

json trace_summary(const ClosedLoopTrace& trace, const DiagnosticsReport& diag,
                   const MpcConfig& cfg) {
  json margins = json::array();
  for (double v : diag.margins) margins.push_back(v);
  json j{{"outcome", std::string(to_string(trace.outcome))},
         {"steps", trace.steps.size()},
         {"converged_at", trace.converged_at ? json(*trace.converged_at) : json(nullptr)},
         {"failed_at", trace.failed_at ? json(*trace.failed_at) : json(nullptr)},
         {"horizon", cfg.horizon},
         {"window", cfg.window},
         {"terminal_mode", std::string(to_string(cfg.mode))},
         {"lambda_alpha", cfg.lambda_alpha},
         {"final_xi", vector_to_json(trace.final_xi)},
         {"diagnostics",
          {{"recursively_feasible", diag.recursively_feasible},
           {"decrease_checked", diag.decrease_checked},
           {"decrease_ok", diag.decrease_ok},
           {"max_margin", diag.max_margin},
           {"margin_tol", diag.margin_tol},
           {"u_violation", diag.u_violation},
           {"y_violation", diag.y_violation},
           {"prediction_error", diag.prediction_error},
           {"decay_rate", diag.decay_rate ? json(*diag.decay_rate) : json(nullptr)},
           {"decay_r2", diag.decay_r2},
           {"decay_points", diag.decay_points},
           {"margins", std::move(margins)}}}};
  if (trace.failed_at) j["failure_status"] = std::string(to_string(trace.failure_status));
  return j;
}

std::uint64_t fnv1a(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hash_hex(std::uint64_t h) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string file_hash(const std::filesystem::path& path) { return hash_hex(fnv1a(read_file(path))); }

std::string read_file(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open " + path.string());
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

void write_file(const std::filesystem::path& path, std::string_view contents) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  os << contents;
  if (!os) throw std::runtime_error("failed writing " + path.string());
}

json read_json(const std::filesystem::path& path) {
  try {
    return json::parse(read_file(path));
  } catch (const json::parse_error& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

void write_json(const std::filesystem::path& path, const json& j) {
  write_file(path, j.dump(2) + "\n");
}

std::string svg_line_plot(const std::string& title, const std::string& x_label,
                          const std::vector<PlotSeries>& series) {
  constexpr double width = 720, height = 360, left = 60, right = 150, top = 36, bottom = 44;
  static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"};
  double x0 = kInf, x1 = -kInf, y0 = kInf, y1 = -kInf;
  for (const auto& s : series) {
    for (std::size_t i = 0; i < s.t.size() && i < s.values.size(); ++i) {
      if (!std::isfinite(s.values[i])) continue;
      x0 = std::min(x0, s.t[i]);
      x1 = std::max(x1, s.t[i]);
      y0 = std::min(y0, s.values[i]);
      y1 = std::max(y1, s.values[i]);
    }
  }
  if (!std::isfinite(x0)) x0 = 0, x1 = 1, y0 = 0, y1 = 1;
  if (x1 <= x0) x1 = x0 + 1;
  if (y1 - y0 < 1e-12) y0 -= 0.5, y1 += 0.5;
  const double pad = 0.05 * (y1 - y0);
  y0 -= pad;
  y1 += pad;
  const double pw = width - left - right, ph = height - top - bottom;
  auto sx = [&](double x) { return left + (x - x0) / (x1 - x0) * pw; };
  auto sy = [&](double y) { return top + (y1 - y) / (y1 - y0) * ph; };

  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
     << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  os << "<text x=\"" << left << "\" y=\"20\" font-size=\"14\">" << escape_xml(title) << "</text>\n";
  os << "<rect x=\"" << left << "\" y=\"" << top << "\" width=\"" << pw << "\" height=\"" << ph
     << "\" fill=\"none\" stroke=\"#444\"/>\n";
  char buf[64];
  for (int i = 0; i <= 4; ++i) {
    const double yv = y0 + (y1 - y0) * i / 4.0, xv = x0 + (x1 - x0) * i / 4.0;
    std::snprintf(buf, sizeof buf, "%.3g", yv);
    os << "<text x=\"" << left - 6 << "\" y=\"" << sy(yv) + 4 << "\" text-anchor=\"end\">" << buf
       << "</text>\n";
    os << "<line x1=\"" << left << "\" x2=\"" << left + pw << "\" y1=\"" << sy(yv) << "\" y2=\""
       << sy(yv) << "\" stroke=\"#ddd\"/>\n";
    std::snprintf(buf, sizeof buf, "%.3g", xv);
    os << "<text x=\"" << sx(xv) << "\" y=\"" << top + ph + 16 << "\" text-anchor=\"middle\">"
       << buf << "</text>\n";
  }
  os << "<text x=\"" << left + pw / 2 << "\" y=\"" << height - 8 << "\" text-anchor=\"middle\">"
     << escape_xml(x_label) << "</text>\n";
  for (std::size_t k = 0; k < series.size(); ++k) {
    const auto& s = series[k];
    const char* color = colors[k % 6];
    os << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\"";
    if (s.dashed) os << " stroke-dasharray=\"6 4\"";
    os << " points=\"";
    for (std::size_t i = 0; i < s.t.size() && i < s.values.size(); ++i) {
      if (!std::isfinite(s.values[i])) continue;
      std::snprintf(buf, sizeof buf, "%.2f,%.2f ", sx(s.t[i]), sy(s.values[i]));
      os << buf;
    }
    os << "\"/>\n";
    const double ly = top + 14 + 18.0 * static_cast<double>(k);
    os << "<line x1=\"" << left + pw + 12 << "\" x2=\"" << left + pw + 36 << "\" y1=\"" << ly - 4
       << "\" y2=\"" << ly - 4 << "\" stroke=\"" << color << "\" stroke-width=\"1.5\""
       << (s.dashed ? " stroke-dasharray=\"6 4\"" : "") << "/>\n";
    os << "<text x=\"" << left + pw + 42 << "\" y=\"" << ly << "\">" << escape_xml(s.label)
       << "</text>\n";
  }
  os << "</svg>\n";
  return os.str();
}

}  // namespace hmpc::io
