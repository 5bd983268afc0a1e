#pragma once

#include <filesystem>
#include <limits>
#include <iosfwd>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>

#include "hankel_mpc/io.hpp"

namespace hmpc::app {

namespace fs = std::filesystem;

inline constexpr const char* kVersion = "0.1.0";

enum ExitCode : int { kOk = 0, kUsage = 1, kInfeasible = 2, kSolverFailure = 3 };

/// Raised by commands; carries the exit code and the stage that failed.
class CommandError : public std::runtime_error {
 public:
  CommandError(int code, std::string stage, const std::string& what)
      : std::runtime_error(what), code_(code), stage_(std::move(stage)) {}
  int code() const { return code_; }
  const std::string& stage() const { return stage_; }

 private:
  int code_;
  std::string stage_;
};

/// Uniform double in [lo, hi) from the top 53 bits of one draw; identical on
/// every standard library.
double uniform(std::mt19937_64& rng, double lo, double hi);

/// "four-tank-style": four states, two inputs, two outputs, lag 2, with
/// (u, y) = ((1, 1), (0.65, 0.77)) an exact equilibrium.
LtiSystem builtin_plant(std::string_view name);
io::Problem builtin_problem(std::string_view name);

/// Builtin name, a JSON file with A, B, C, D, or "random:n,m,p" (seeded).
LtiSystem resolve_plant(const std::string& spec, std::uint64_t seed);

struct DataOptions {
  Index length = 100;
  double input_bound = 1.0;
  std::uint64_t seed = 0;
  /// Total energy sum_k ||d_k||^2 of the equation-error noise added to the
  /// output recursion; 0 for noise-free data.
  double noise_energy = 0.0;
};

IoTrajectory generate_data(const LtiSystem& plant, const DataOptions& options);

struct GenDataArgs {
  std::string plant = "four-tank-style";
  DataOptions data;
  fs::path out = "out";
};

struct CheckArgs {
  fs::path data;
  int window = 2;
  int horizon = 15;
  std::optional<int> order;
  std::optional<fs::path> problem;
  fs::path out = "out";
};

struct DesignArgs {
  fs::path data;
  int window = 2;
  std::optional<fs::path> problem;
  std::optional<std::string> plant;  // oracle for verification; data recovery otherwise
  double q_scale = 1.0;
  double r_scale = 5e-3;
  double dbar = 0.0;
  std::optional<double> gamma;
  double gamma_max = 1e6;
  bool zero_gain = false;
  std::uint64_t seed = 0;
  fs::path out = "out";
};

struct RunArgs {
  fs::path data;
  std::optional<fs::path> cert;
  std::optional<fs::path> problem;
  std::string plant = "four-tank-style";
  std::optional<Vector> x0;
  int steps = 200;
  int horizon = 15;
  int window = 2;
  double lambda_alpha = 0.0;
  TerminalMode mode = TerminalMode::full;
  double q_scale = 1.0;
  double r_scale = 5e-3;
  bool timing = true;
  std::uint64_t seed = 0;
  fs::path out = "out";
};

struct ReproduceArgs {
  std::uint64_t seed = 1;
  int steps = 200;
  fs::path out = "reproduce";
};

/// Setpoint tracking within a relative band, coordinate-wise on u and y.
struct Tracking {
  std::optional<int> settled_at;  // first t after which every sample stays in the band
  double final_offset = std::numeric_limits<double>::infinity();  // max relative deviation at the last step
  bool tracked() const { return settled_at.has_value(); }
};

Tracking tracking(const ClosedLoopTrace& trace, const Vector& u_s, const Vector& y_s, double rel);

struct RunOutput {
  int code = kOk;
  MpcConfig config;
  ClosedLoopTrace trace;
  DiagnosticsReport diagnostics;
};

/// cmd_run without discarding the trace.
RunOutput execute_run(const RunArgs& args, std::ostream& log);

int cmd_gen_data(const GenDataArgs& args, std::ostream& log);
int cmd_check(const CheckArgs& args, std::ostream& log);
int cmd_design(const DesignArgs& args, std::ostream& log);
int cmd_run(const RunArgs& args, std::ostream& log);
int cmd_reproduce(const ReproduceArgs& args, std::ostream& log);

}  // namespace hmpc::app
