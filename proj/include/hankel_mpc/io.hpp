#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "hankel_mpc/mpc.hpp"
#include "hankel_mpc/synthesis.hpp"

namespace hmpc::io {

using json = nlohmann::ordered_json;

class ParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Shortest decimal with 17 significant digits ("%.17g").
std::string format_double(double v);

/// Header `k,u_1..u_m,y_1..y_p`, one row per sample.
void write_trajectory_csv(std::ostream& os, const IoTrajectory& traj);
IoTrajectory read_trajectory_csv(std::istream& is);
IoTrajectory read_trajectory_csv(const std::filesystem::path& path);

/// {"rows": r, "cols": c, "data": [row-major]}
json matrix_to_json(const Matrix& m);
Matrix matrix_from_json(const json& j);
json vector_to_json(const Vector& v);
Vector vector_from_json(const json& j);
/// Infinite bounds are written as null.
json box_to_json(const Box& box);
Box box_from_json(const json& lower, const json& upper);

json plant_to_json(const LtiSystem& sys);
LtiSystem plant_from_json(const json& j);

/// Everything the controller needs from the design step.
struct Certificate {
  TerminalIngredients ingredients;
  Matrix q;
  Matrix r;
  int window = 0;
  Vector u_s;
  Vector y_s;
  Box u_box;
  Box y_box;
  bool zero_gain = false;
  std::vector<GammaProbe> probes;
};

json report_to_json(const VerificationReport& rep);
json certificate_to_json(const Certificate& cert);
Certificate certificate_from_json(const json& j);

/// Setpoint and constraint description read by design/run/check:
/// {"u_s": [...], "y_s": [...], "u_min": [...|null], "u_max": ..., "y_min": ..., "y_max": ...}
struct Problem {
  Vector u_s;
  Vector y_s;
  Box u_box;
  Box y_box;
};

Problem problem_from_json(const json& j, Index m, Index p);
json problem_to_json(const Problem& pr);

/// Columns t, u_1..u_m, y_1..y_p, cost, solver_ms, status. Warm-up samples are
/// written with empty cost and status "warmup".
void write_trace_csv(std::ostream& os, const ClosedLoopTrace& trace, bool timing);
json trace_summary(const ClosedLoopTrace& trace, const DiagnosticsReport& diag,
                   const MpcConfig& cfg);

std::uint64_t fnv1a(std::string_view bytes);
std::string hash_hex(std::uint64_t h);
std::string file_hash(const std::filesystem::path& path);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view contents);
json read_json(const std::filesystem::path& path);
void write_json(const std::filesystem::path& path, const json& j);

struct PlotSeries {
  std::string label;
  std::vector<double> t;
  std::vector<double> values;
  bool dashed = false;
};

/// Line chart as a standalone SVG document.
std::string svg_line_plot(const std::string& title, const std::string& x_label,
                          const std::vector<PlotSeries>& series);

}  // namespace hmpc::io
