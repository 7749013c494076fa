#ifndef EMX_EXPERIMENT_HPP
#define EMX_EXPERIMENT_HPP

#include "emx/decay_bench.hpp"
#include "emx/lyapunov.hpp"
#include "emx/nonlinear_sim.hpp"
#include "emx/types.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace emx
{

// Bad config text or values; the message carries the line and key.
class ConfigError : public std::runtime_error
{
public:
  explicit ConfigError(const std::string &what) : std::runtime_error(what) {}
};

enum class Subcommand
{
  roots,
  propagate,
  verify_linear,
  lyapunov,
  decay_fit,
  simulate
};

const char *subcommand_name(Subcommand s);
Subcommand parse_subcommand(const std::string &name);  // throws ConfigError

struct RootsParams
{
  double k_min = 1e-3;
  double k_max = 1e3;
  int count = 1000;
};

struct PropagateParams
{
  Vec3 k = Vec3(0.6, -0.3, 0.2);
  double t_end = 10;
  int n_times = 101;
  double oracle_tol = 1e-10;  // oracle comparison column; 0 disables it
};

struct VerifyLinearParams
{
  int samples = 100;
  double k_min = 1e-3;
  double k_max = 1e2;
  double t_max = 10;
  std::vector<double> gammas = {1.4, 5.0 / 3.0, 2.0};
  double oracle_tol = 1e-10;
  double tolerance = 1e-8;
  double identity_tolerance = 1e-10;
};

struct LyapunovParams
{
  KappaWeights kappa;
  int equivalence_samples = 10000;
  int dissipation_modes = 200;
  double k_min = 1e-3;  // equivalence and dissipation sampling
  double k_max = 1e3;
  int bound_train = 200;
  int bound_validate = 200;
  double bound_k_min = 0.1;
  double bound_k_max = 10;
  double bound_horizon = 10;  // t_end = horizon / w(|k|)
  int bound_samples = 200;
};

struct DecayFitParams
{
  MagneticProfile magnetic = MagneticProfile::projected;
  double width = 3;
  double amp_E = 1, amp_u = 1, amp_B = 1;
  double t_min = 10;
  double t_max = 500;
  int n_times = 30;
  QuadratureOptions quadrature;
};

struct SimulateParams
{
  int n_grid = 32;
  double box_len = kDefaultBoxLen;
  double amplitude = 1e-2;
  double envelope_len = 3;
  int steps = 1000;
  double cfl_factor = 0.5;
  int N = 2;
  KappaWeights kappa;
  int output_every = 1;
  int snapshot_every = 0;  // 0: no snapshots
  // Extra runs made in check mode.
  double linear_amplitude = 1e-8;
  int linear_steps = 1000;
  int halving_steps = 8;  // coarsest run; then 2x and 4x
};

struct ExperimentConfig
{
  Subcommand subcommand = Subcommand::roots;
  std::uint64_t seed = 1;
  double gamma = kDefaultGamma;
  std::filesystem::path output_dir = "out";
  bool check = false;
  RootsParams roots;
  PropagateParams propagate;
  VerifyLinearParams verify_linear;
  LyapunovParams lyapunov;
  DecayFitParams decay_fit;
  SimulateParams simulate;
};

// YAML text; unknown keys, wrong types and out-of-range values are errors.
ExperimentConfig parse_config(const std::string &text, const std::string &source = "<config>");
ExperimentConfig load_config(const std::filesystem::path &path);
void validate(const ExperimentConfig &cfg);

// Every resolved key except output_dir, numbers at 17 significant digits.
std::string canonical_config(const ExperimentConfig &cfg);
std::string sha256_hex(const std::string &data);

struct CheckLine
{
  int criterion = 0;
  std::string name;
  bool passed = false;
  std::string detail;  // deterministic values only
  double seconds = 0;  // wall time, kept out of the checks file
};

struct RunResult
{
  int exit_status = 0;  // 0 ok, 1 check failure
  std::vector<std::filesystem::path> artifacts;
  std::vector<CheckLine> checks;
  double wall_seconds = 0;
};

// Runs the subcommand and writes its artifacts atomically into output_dir:
// nothing is written unless the whole run succeeds.
RunResult run(const ExperimentConfig &cfg);

// Entry point shared by the CLI: parses argv, runs, returns the exit code.
int cli_main(int argc, char **argv);

}  // namespace emx

#endif  // EMX_EXPERIMENT_HPP
