#include "emx/experiment.hpp"

#include "emx/linear_oracle.hpp"
#include "emx/propagator.hpp"
#include "emx/roots.hpp"
#include "emx/sampling.hpp"
#include "emx/summation.hpp"

#include <CLI11.hpp>
#include <Eigen/Core>
#include <boost/version.hpp>
#include <fftw3.h>
#include <fmt/format.h>
#include <openssl/evp.h>
#include <yaml-cpp/yaml.h>

#include <chrono>
#include <cmath>
#include <fstream>
#include <functional>
#include <limits>
#include <iostream>
#include <set>
#include <sstream>

namespace emx
{

namespace fs = std::filesystem;

namespace
{

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0)
{
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string num(double x)
{
  return fmt::format("{:.17g}", x);
}

constexpr std::array<std::pair<Subcommand, const char *>, 6> kSubcommands = {{
    {Subcommand::roots, "roots"},
    {Subcommand::propagate, "propagate"},
    {Subcommand::verify_linear, "verify-linear"},
    {Subcommand::lyapunov, "lyapunov"},
    {Subcommand::decay_fit, "decay-fit"},
    {Subcommand::simulate, "simulate"},
}};

// ---------------------------------------------------------------- config

class Section
{
public:
  Section(YAML::Node node, std::string path, const std::string &source)
      : node_(std::move(node)), path_(std::move(path)), source_(source)
  {
    if (node_ && !node_.IsNull() && !node_.IsMap())
      fail(node_, "expected a mapping");
  }

  template <typename T>
  void get(const char *key, T &out)
  {
    seen_.insert(key);
    if (!node_ || node_.IsNull())
      return;
    const YAML::Node v = node_[key];
    if (!v)
      return;
    read(v, key, out);
  }

  Section sub(const char *key)
  {
    seen_.insert(key);
    YAML::Node v = (node_ && node_.IsMap()) ? node_[key] : YAML::Node();
    return Section(v, qualified(key), source_);
  }

  void finish() const
  {
    if (!node_ || !node_.IsMap())
      return;
    for (const auto &kv : node_) {
      const std::string k = kv.first.as<std::string>();
      if (!seen_.count(k))
        fail(kv.first, "unknown key '" + qualified(k.c_str()) + "'");
    }
  }

private:
  std::string qualified(const char *key) const { return path_.empty() ? key : path_ + "." + key; }

  [[noreturn]] void fail(const YAML::Node &at, const std::string &msg) const
  {
    throw ConfigError(fmt::format("{}:{}: {}", source_, at.Mark().line + 1, msg));
  }

  template <typename T>
  T scalar(const YAML::Node &v, const char *key, const char *what) const
  {
    if (!v.IsScalar())
      fail(v, fmt::format("key '{}': expected {}", qualified(key), what));
    try {
      return v.as<T>();
    } catch (const YAML::Exception &) {
      fail(v, fmt::format("key '{}': expected {}, got '{}'", qualified(key), what, v.Scalar()));
    }
  }

  void read(const YAML::Node &v, const char *key, double &out) const { out = scalar<double>(v, key, "a number"); }
  void read(const YAML::Node &v, const char *key, int &out) const { out = scalar<int>(v, key, "an integer"); }
  void read(const YAML::Node &v, const char *key, bool &out) const { out = scalar<bool>(v, key, "true or false"); }
  void read(const YAML::Node &v, const char *key, std::uint64_t &out) const
  {
    out = scalar<std::uint64_t>(v, key, "a non-negative integer");
  }
  void read(const YAML::Node &v, const char *key, std::string &out) const { out = scalar<std::string>(v, key, "a string"); }
  void read(const YAML::Node &v, const char *key, fs::path &out) const
  {
    out = scalar<std::string>(v, key, "a path");
  }

  void read(const YAML::Node &v, const char *key, std::vector<double> &out) const
  {
    if (!v.IsSequence())
      fail(v, fmt::format("key '{}': expected a list of numbers", qualified(key)));
    out.clear();
    for (const auto &x : v)
      out.push_back(scalar<double>(x, key, "a number"));
  }

  void read(const YAML::Node &v, const char *key, Vec3 &out) const
  {
    std::vector<double> x;
    read(v, key, x);
    if (x.size() != 3)
      fail(v, fmt::format("key '{}': expected 3 numbers", qualified(key)));
    out = Vec3(x[0], x[1], x[2]);
  }

  void read(const YAML::Node &v, const char *key, KappaWeights &out) const
  {
    std::vector<double> x;
    read(v, key, x);
    if (x.size() != 3)
      fail(v, fmt::format("key '{}': expected [kappa1, kappa2, kappa3]", qualified(key)));
    out = KappaWeights{x[0], x[1], x[2]};
  }

  void read(const YAML::Node &v, const char *key, MagneticProfile &out) const
  {
    const std::string s = scalar<std::string>(v, key, "a string");
    if (s == "projected")
      out = MagneticProfile::projected;
    else if (s == "curl_potential")
      out = MagneticProfile::curl_potential;
    else
      fail(v, fmt::format("key '{}': expected 'projected' or 'curl_potential', got '{}'", qualified(key), s));
  }

  YAML::Node node_;
  std::string path_;
  const std::string &source_;
  std::set<std::string> seen_;
};

void require(bool ok, const std::string &key, const std::string &rule)
{
  if (!ok)
    throw ConfigError(fmt::format("key '{}': {}", key, rule));
}

const char *profile_name(MagneticProfile p)
{
  return p == MagneticProfile::projected ? "projected" : "curl_potential";
}

// ---------------------------------------------------------------- artifacts

std::string csv_field(const std::string &s)
{
  if (s.find_first_of(",\"\r\n") == std::string::npos)
    return s;
  std::string q = "\"";
  for (char c : s)
    q += c == '"' ? std::string("\"\"") : std::string(1, c);
  return q + "\"";
}

class Csv
{
public:
  explicit Csv(std::vector<std::string> header) : width_(header.size())
  {
    row_strings(header);
  }

  // Values as already-formatted cells.
  void row_strings(const std::vector<std::string> &cells)
  {
    if (cells.size() != width_)
      throw std::logic_error("Csv: row width mismatch");
    for (std::size_t i = 0; i < cells.size(); ++i)
      text_ += (i ? "," : "") + csv_field(cells[i]);
    text_ += "\r\n";
  }

  void row(const std::vector<double> &values)
  {
    std::vector<std::string> cells;
    for (double v : values)
      cells.push_back(num(v));
    row_strings(cells);
  }

  const std::string &str() const { return text_; }

private:
  std::size_t width_;
  std::string text_;
};

struct Artifacts
{
  std::vector<std::pair<std::string, std::string>> files;
  void add(std::string name, std::string body) { files.emplace_back(std::move(name), std::move(body)); }
};

// Stage every file next to its target, then rename; on failure remove the stage.
std::vector<fs::path> commit(const fs::path &dir, const Artifacts &a)
{
  fs::create_directories(dir);
  std::vector<fs::path> staged, targets;
  try {
    for (const auto &[name, body] : a.files) {
      const fs::path tmp = dir / ("." + name + ".partial");
      std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
      staged.push_back(tmp);
      out.write(body.data(), std::streamsize(body.size()));
      out.close();
      if (!out)
        throw std::runtime_error("cannot write " + tmp.string());
      targets.push_back(dir / name);
    }
  } catch (...) {
    for (const auto &p : staged)
      fs::remove(p);
    throw;
  }
  for (std::size_t i = 0; i < staged.size(); ++i)
    fs::rename(staged[i], targets[i]);
  return targets;
}

CheckLine make_check(int criterion, std::string name, bool passed, std::string detail, double seconds)
{
  return CheckLine{criterion, std::move(name), passed, std::move(detail), seconds};
}

// ---------------------------------------------------------------- suites

struct SuiteOutput
{
  Artifacts files;
  std::vector<CheckLine> checks;
};

SuiteOutput run_roots(const ExperimentConfig &cfg)
{
  const auto t0 = Clock::now();
  const RootsParams &p = cfg.roots;
  Csv csv({"kmag", "sigma", "beta", "omega", "residual", "reconstruction_error"});
  bool ranges = true, monotone = true;
  double worst_res = 0, worst_rec = 0, prev_sigma = 1;
  const double omega_min = std::sqrt(6.0) / 3;
  for (int i = 0; i < p.count; ++i) {
    const double k = p.count == 1 ? p.k_min : p.k_min * std::pow(p.k_max / p.k_min, double(i) / (p.count - 1));
    const CharTriple<double> r = solve_characteristic(k);
    const double k2 = k * k;
    const double residual = std::abs(eval_cubic(r.sigma, k)) / (1 + k2);
    // (x - sigma)((x - beta)^2 + omega^2) against x^3 + x^2 + (1 + k^2) x + k^2.
    const double m2 = r.beta * r.beta + r.omega * r.omega;
    const double rec = std::max({std::abs(-(r.sigma + 2 * r.beta) - 1), std::abs(m2 + 2 * r.sigma * r.beta - (1 + k2)) / (1 + k2),
                                 std::abs(-r.sigma * m2 - k2) / k2});
    ranges = ranges && r.sigma > -1 && r.sigma < 0 && r.beta > -0.5 && r.beta < 0 && r.omega > omega_min;
    monotone = monotone && (i == 0 || r.sigma < prev_sigma);
    prev_sigma = r.sigma;
    worst_res = std::max(worst_res, residual);
    worst_rec = std::max(worst_rec, rec);
    csv.row({k, r.sigma, r.beta, r.omega, residual, rec});
  }
  SuiteOutput out;
  out.files.add("roots.csv", csv.str());
  if (cfg.check) {
    const bool ok = ranges && monotone && worst_res < 1e-12 && worst_rec < 1e-10;
    out.checks.push_back(make_check(1, "root property suite", ok,
                                    fmt::format("n={} ranges={} decreasing={} max_residual={:.3e} max_reconstruction={:.3e}",
                                                p.count, ranges, monotone, worst_res, worst_rec),
                                    seconds_since(t0)));
  }
  return out;
}

std::vector<std::string> state_header()
{
  static const char *names[10] = {"rho", "u_x", "u_y", "u_z", "E_x", "E_y", "E_z", "B_x", "B_y", "B_z"};
  std::vector<std::string> h;
  for (const char *n : names) {
    h.push_back(std::string("re_") + n);
    h.push_back(std::string("im_") + n);
  }
  return h;
}

SuiteOutput run_propagate(const ExperimentConfig &cfg)
{
  const auto t0 = Clock::now();
  const PropagateParams &p = cfg.propagate;
  Rng rng(cfg.seed);
  const SpectralState s0 = random_compatible_state(rng, p.k);

  std::vector<double> times;
  for (int i = 0; i < p.n_times; ++i)
    times.push_back(p.n_times == 1 ? 0.0 : p.t_end * i / (p.n_times - 1));
  std::vector<SpectralState> oracle;
  if (p.oracle_tol > 0)
    oracle = integrate_linear(p.k, s0, times, p.oracle_tol, cfg.gamma).states;

  std::vector<std::string> header = {"t"};
  for (const auto &h : state_header())
    header.push_back(h);
  header.insert(header.end(), {"norm2", "lyapunov", "oracle_rel_error"});
  Csv csv(header);
  double worst = 0;
  for (std::size_t i = 0; i < times.size(); ++i) {
    const SpectralState s = propagate(times[i], s0, cfg.gamma);
    std::vector<double> row = {times[i]};
    const auto packed = s.pack();
    for (int c = 0; c < 10; ++c) {
      row.push_back(packed(c).real());
      row.push_back(packed(c).imag());
    }
    const double err = oracle.empty() ? std::nan("") : (s.pack() - oracle[i].pack()).norm() / oracle[i].pack().norm();
    if (!oracle.empty())
      worst = std::max(worst, err);
    row.insert(row.end(), {packed.squaredNorm(), lyapunov_value(s, KappaWeights{}, cfg.gamma), err});
    csv.row(row);
  }
  SuiteOutput out;
  out.files.add("propagate.csv", csv.str());
  if (cfg.check && !oracle.empty())
    out.checks.push_back(make_check(0, "propagate matches oracle", worst <= 1e-8,
                                    fmt::format("max_rel_error={:.3e}", worst), seconds_since(t0)));
  return out;
}

SuiteOutput run_verify_linear(const ExperimentConfig &cfg)
{
  const auto t0 = Clock::now();
  const VerifyLinearParams &p = cfg.verify_linear;
  Rng rng(cfg.seed);
  Csv csv({"sample", "kmag", "t", "gamma", "rel_error", "identity_error"});
  double worst = 0, worst_id = 0;
  for (int i = 0; i < p.samples; ++i) {
    const double kmag = log_uniform(rng, p.k_min, p.k_max);
    const Vec3 k = kmag * random_direction(rng);
    const SpectralState s = random_compatible_state(rng, k);
    const double t = std::uniform_real_distribution<double>(0.0, p.t_max)(rng);
    const double g = p.gammas[std::size_t(i) % p.gammas.size()];
    const SpectralState exact = propagate(t, s, g);
    const SpectralState ref = integrate_linear(k, s, std::vector<double>{0.0, t}, p.oracle_tol, g).states.back();
    const double err = (exact.pack() - ref.pack()).norm() / ref.pack().norm();
    const double id = (propagate(0.0, s, g).pack() - s.pack()).norm() / s.pack().norm();
    worst = std::max(worst, err);
    worst_id = std::max(worst_id, id);
    csv.row({double(i), kmag, t, g, err, id});
  }
  SuiteOutput out;
  out.files.add("verify_linear.csv", csv.str());
  if (cfg.check)
    out.checks.push_back(make_check(2, "propagator-oracle equivalence", worst <= p.tolerance && worst_id <= p.identity_tolerance,
                                    fmt::format("n={} max_rel_error={:.3e} max_identity_error={:.3e}", p.samples,
                                                worst, worst_id),
                                    seconds_since(t0)));
  return out;
}

SuiteOutput run_lyapunov(const ExperimentConfig &cfg)
{
  const LyapunovParams &p = cfg.lyapunov;
  Rng rng(cfg.seed);
  SuiteOutput out;
  Csv summary({"quantity", "value"});

  auto t0 = Clock::now();
  std::vector<SpectralState> states;
  for (int i = 0; i < p.equivalence_samples; ++i)
    states.push_back(random_unit_mode(rng, p.k_min, p.k_max));
  const EquivalenceBounds eq = equivalence_bounds(states, p.kappa, cfg.gamma);
  std::vector<SpectralState> modes;
  for (int i = 0; i < p.dissipation_modes; ++i)
    modes.push_back(random_unit_mode(rng, p.k_min, p.k_max));
  const DissipationReport dis = verify_dissipation(p.kappa, modes, cfg.gamma);
  const double t_suite3 = seconds_since(t0);
  summary.row_strings({"c_low", num(eq.c_low)});
  summary.row_strings({"c_high", num(eq.c_high)});
  summary.row_strings({"k_at_c_low", num(eq.k_low)});
  summary.row_strings({"k_at_c_high", num(eq.k_high)});
  summary.row_strings({"lambda_fitted", num(dis.lambda_fitted)});
  summary.row_strings({"worst_kmag", num(dis.worst_kmag)});
  summary.row_strings({"worst_time", num(dis.worst_time)});
  summary.row_strings({"dissipation_violations", std::to_string(dis.violations)});
  summary.row_strings({"dissipation_samples", std::to_string(dis.samples)});

  t0 = Clock::now();
  auto trajectories = [&](int n) {
    std::vector<Trajectory> v;
    for (int i = 0; i < n; ++i) {
      const SpectralState s = random_unit_mode(rng, p.bound_k_min, p.bound_k_max);
      const double w = dissipation_weight(s.k.norm());
      v.push_back(integrate_linear(s.k, s, p.bound_horizon / w, 1e-10, cfg.gamma, p.bound_samples));
    }
    return v;
  };
  const std::vector<Trajectory> train = trajectories(p.bound_train), held_out = trajectories(p.bound_validate);
  const BoundFit fit = fit_pointwise_bound(train);
  Csv bound({"set", "index", "kmag", "violation"});
  int violations = 0;
  double worst = -1;
  for (std::size_t i = 0; i < held_out.size(); ++i) {
    const double v = bound_violation(fit, {held_out[i]});
    violations += v > 0;
    worst = std::max(worst, v);
    bound.row_strings({"validation", std::to_string(i), num(held_out[i].k.norm()), num(v)});
  }
  const double t_suite4 = seconds_since(t0);
  summary.row_strings({"bound_C", num(fit.C)});
  summary.row_strings({"bound_lambda", num(fit.lambda)});
  summary.row_strings({"bound_validation_violations", std::to_string(violations)});

  out.files.add("lyapunov_summary.csv", summary.str());
  out.files.add("lyapunov_bound.csv", bound.str());
  if (cfg.check) {
    out.checks.push_back(make_check(3, "lyapunov equivalence and dissipation", eq.c_low > 0 && dis.lambda_fitted > 0,
                                    fmt::format("samples={} c_low={:.4f} c_high={:.4f} modes={} lambda_fitted={:.4e}",
                                                eq.samples, eq.c_low, eq.c_high, dis.modes, dis.lambda_fitted),
                                    t_suite3));
    out.checks.push_back(make_check(4, "pointwise bound on held-out set", violations == 0 && fit.lambda > 0,
                                    fmt::format("C={:.4f} lambda={:.4f} held_out={} violations={} worst={:.3e}", fit.C,
                                                fit.lambda, held_out.size(), violations, worst),
                                    t_suite4));
  }
  return out;
}

struct DecayIndexCase
{
  double ell, r, q;
  int expected;
};

constexpr double kInf = std::numeric_limits<double>::infinity();

// Reference table: both branches (q = 2 and q > 2) and the [.]_+ clamp.
constexpr DecayIndexCase kDecayIndexCases[] = {
    {2, 2, 2, 2},    {0, 1, 2, 2},   {1, 1, kInf, 5},   {0, 2, 2, 0},  {0.5, 2, 2, 1},
    {1, 2, kInf, 3}, {0, 2, kInf, 2}, {0, 1, kInf, 4},  {2, 1, 2, 4},  {3, 2, 2, 3},
    {1.5, 2, 2, 2},  {0, 1.5, 2, 1}, {1, 1.5, kInf, 4}, {0, 2, 4, 1},  {0, 1, 4, 3},
    {2, 2, 4, 3},    {0.25, 1, 2, 2}, {2, 1.2, 3, 4},   {5, 2, 2, 5},  {0, 2, 3, 1},
};

struct DecayTarget
{
  const char *norm;
  Component component;
  double slope, tol;
};

SuiteOutput run_decay_fit(const ExperimentConfig &cfg)
{
  const DecayFitParams &p = cfg.decay_fit;
  SuiteOutput out;
  auto t0 = Clock::now();

  GaussianDataParams gp;
  gp.amp_E = p.amp_E;
  gp.amp_u = p.amp_u;
  gp.amp_B = p.amp_B;
  gp.width_E = gp.width_u = gp.width_B = p.width;
  gp.magnetic = p.magnetic;
  const std::vector<double> times = log_times(p.t_min, p.t_max, p.n_times);
  const std::array<double, 2> window{p.t_min, p.t_max};

  // Second branch: divergence-free E0, hence rho0 = 0; it carries the u target.
  std::map<std::string, DecayRun> runs;
  for (bool transverse : {false, true}) {
    gp.transverse_E = transverse;
    runs[transverse ? "rho0_zero" : "rho0_nonzero"] =
        run_decay(make_gaussian_data(gp, cfg.seed), times, window, cfg.gamma, p.quadrature);
  }

  std::vector<std::string> header = {"branch", "t"};
  for (Component c : kAllComponents)
    header.push_back(std::string("l2_") + component_name(c));
  for (Component c : kAllComponents)
    header.push_back(std::string("linf_") + component_name(c));
  Csv norms(header);
  Csv fits({"branch", "norm", "component", "exponent", "r2", "r2_exponential", "classification"});
  bool converged = true;
  for (const auto &[branch, run] : runs) {
    converged = converged && run.converged;
    for (std::size_t i = 0; i < run.times.size(); ++i) {
      std::vector<std::string> row = {branch, num(run.times[i])};
      for (Component c : kAllComponents)
        row.push_back(run.l2.count(c) ? num(run.l2.at(c)[i]) : "");
      for (Component c : kAllComponents)
        row.push_back(run.linf.count(c) ? num(run.linf.at(c)[i]) : "");
      norms.row_strings(row);
    }
    for (const auto &[label, m] : {std::pair{"l2", &run.l2_fit}, std::pair{"linf", &run.linf_fit}})
      for (const auto &[c, f] : *m)
        fits.row_strings({branch, label, component_name(c), num(f.exponent), num(f.r2), num(f.r2_exponential),
                          f.classification == DecayClass::algebraic ? "algebraic" : "super_polynomial"});
  }
  const double t_suite5 = seconds_since(t0);
  out.files.add("decay_norms.csv", norms.str());
  out.files.add("decay_fit.csv", fits.str());

  t0 = Clock::now();
  Csv idx({"ell", "r", "q", "expected", "computed"});
  int mismatches = 0;
  for (const auto &c : kDecayIndexCases) {
    const int got = decay_index(c.ell, c.r, c.q);
    mismatches += got != c.expected;
    idx.row_strings({num(c.ell), num(c.r), std::isinf(c.q) ? "inf" : num(c.q), std::to_string(c.expected),
                     std::to_string(got)});
  }
  const double t_suite6 = seconds_since(t0);
  out.files.add("decay_index.csv", idx.str());

  if (cfg.check) {
    const DecayRun &main = runs.at("rho0_nonzero"), &zero = runs.at("rho0_zero");
    const DecayTarget targets[] = {
        {"l2", Component::B, -0.75, 0.10},   {"l2", Component::E, -1.25, 0.10},
        {"l2", Component::u, -1.25, 0.10},   {"linf", Component::B, -1.50, 0.15},
        {"linf", Component::E, -2.00, 0.15},
    };
    bool ok = converged;
    std::string detail = fmt::format("converged={}", converged);
    for (const auto &t : targets) {
      const DecayRun &r = t.component == Component::u ? zero : main;
      const auto &m = std::string(t.norm) == "l2" ? r.l2_fit : r.linf_fit;
      const double s = m.count(t.component) ? m.at(t.component).exponent : std::nan("");
      ok = ok && std::abs(s - t.slope) <= t.tol;
      detail += fmt::format(" {}_{}={:.3f}", t.norm, component_name(t.component), s);
    }
    const bool rho_super = main.l2_fit.count(Component::rho) &&
                           main.l2_fit.at(Component::rho).classification == DecayClass::super_polynomial;
    ok = ok && rho_super;
    detail += fmt::format(" rho={}", rho_super ? "super_polynomial" : "algebraic");
    out.checks.push_back(make_check(5, "linear decay rates", ok, detail, t_suite5));
    out.checks.push_back(make_check(6, "decay index table", mismatches == 0,
                                    fmt::format("cases={} mismatches={}", std::size(kDecayIndexCases), mismatches),
                                    t_suite6));
  }
  return out;
}

double lattice_l2(const std::vector<double> &f, double dx)
{
  std::vector<double> sq(f.size());
  for (std::size_t i = 0; i < f.size(); ++i)
    sq[i] = f[i] * f[i];
  return std::sqrt(dx * dx * dx * pairwise_sum(sq));
}

SuiteOutput run_simulate(const ExperimentConfig &cfg)
{
  const SimulateParams &p = cfg.simulate;
  SuiteOutput out;
  auto t0 = Clock::now();

  InitialDataParams ip;
  ip.n_grid = p.n_grid;
  ip.box_len = p.box_len;
  ip.gamma = cfg.gamma;
  ip.amplitude = p.amplitude;
  ip.envelope_len = p.envelope_len;
  ip.seed = cfg.seed;
  const GridField f0 = make_initial_field(ip);
  const double dt = p.cfl_factor * cfl_limit(p.n_grid, p.box_len, cfg.gamma);

  static const char *names[10] = {"rho", "u_x", "u_y", "u_z", "E_x", "E_y", "E_z", "B_x", "B_y", "B_z"};
  std::vector<std::string> header = {"step", "t", "E_N", "D_N", "E_N_h", "D_N_h", "gauss_residual", "divb_residual"};
  for (const char *n : names)
    header.push_back(std::string("l2_") + n);
  Csv csv(header);

  Simulation sim(f0, dt);
  const ConstraintResidual c0 = constraint_residual(f0);
  double e0 = 0, e_prev = 0, worst_increase = -std::numeric_limits<double>::infinity();
  double growth = 0, dissipated = 0, lambda_fit = std::numeric_limits<double>::infinity();
  double d_prev = 0;
  for (int n = 0; n <= p.steps; ++n) {
    if (n > 0)
      sim.step();
    const GridField f = sim.field();
    const EnergyReport r = energy_functionals(transform_to_symmetric(f), p.N, p.kappa);
    const ConstraintResidual c = constraint_residual(f);
    if (n == 0) {
      e0 = r.full_energy;
    } else {
      worst_increase = std::max(worst_increase, (r.full_energy - e_prev) / e0);
      dissipated += 0.5 * (d_prev + r.dissipation) * dt;
      if (dissipated > 0)
        lambda_fit = std::min(lambda_fit, (e0 - r.full_energy) / dissipated);
    }
    e_prev = r.full_energy;
    d_prev = r.dissipation;
    growth = std::max({growth, c.gauss - c0.gauss, c.div_b - c0.div_b});
    if (n % p.output_every == 0 || n == p.steps) {
      std::vector<double> row = {double(n), f.time, r.full_energy, r.dissipation, r.high_order_energy,
                                 r.high_order_dissipation, c.gauss, c.div_b};
      for (int k = 0; k < 10; ++k)
        row.push_back(lattice_l2(f.component(k), f.dx()));
      csv.row(row);
    }
    if (p.snapshot_every > 0 && n % p.snapshot_every == 0) {
      std::ostringstream snap;
      write_snapshot(snap, f);
      out.files.add(fmt::format("snapshot_{:06d}.bin", n), snap.str());
    }
  }
  const double formulation = formulation_residual(sim.field());
  const double t_main = seconds_since(t0);
  out.files.add("simulate.csv", csv.str());

  Csv summary({"quantity", "value"});
  summary.row_strings({"dt", num(dt)});
  summary.row_strings({"E_N_initial", num(e0)});
  summary.row_strings({"E_N_final", num(e_prev)});
  summary.row_strings({"worst_relative_increase", num(worst_increase)});
  summary.row_strings({"constraint_growth", num(growth)});
  summary.row_strings({"lambda_fit", num(lambda_fit)});
  summary.row_strings({"formulation_residual", num(formulation)});

  if (cfg.check) {
    t0 = Clock::now();
    // Linear regime: tiny data against the exact per-mode propagator.
    ip.amplitude = p.linear_amplitude;
    const GridField g0 = make_initial_field(ip);
    Simulation lin(g0, dt);
    Csv lcsv({"step", "t", "rel_deviation"});
    double worst_dev = 0, final_dev = 0;
    const int every = std::max(1, p.linear_steps / 10);
    for (int n = 1; n <= p.linear_steps; ++n) {
      lin.step();
      if (n % every == 0 || n == 1 || n == p.linear_steps) {
        const double d = relative_difference(lin.field(), propagate_field(g0, n * dt));
        worst_dev = std::max(worst_dev, d);
        final_dev = d;
        lcsv.row({double(n), n * dt, d});
      }
    }
    out.files.add("simulate_linear.csv", lcsv.str());

    // Self-convergence under dt -> dt/2 -> dt/4 on the amplitude-p.amplitude data.
    std::array<GridField, 3> ends = {f0, f0, f0};
    for (int level = 0; level < 3; ++level) {
      Simulation s(f0, dt / (1 << level));
      s.advance(p.halving_steps << level);
      ends[level] = s.field();
    }
    const double e1 = relative_difference(ends[0], ends[1]), e2 = relative_difference(ends[1], ends[2]);
    const double order = std::log2(e1 / e2);
    const double t_aux = seconds_since(t0);
    summary.row_strings({"linear_final_deviation", num(final_dev)});
    summary.row_strings({"linear_max_deviation", num(worst_dev)});
    summary.row_strings({"halving_order", num(order)});

    const bool ok = growth <= 1e-8 && worst_increase <= 1e-10 && final_dev <= 1e-10 && order >= 2;
    out.checks.push_back(make_check(
        7, "nonlinear run", ok,
        fmt::format("steps={} constraint_growth={:.3e} worst_EN_increase={:.3e} linear_deviation={:.3e} "
                    "(max_along_run={:.3e}) halving_order={:.3f}",
                    p.steps, growth, worst_increase, final_dev, worst_dev, order),
        t_main + t_aux));
    out.checks.push_back(make_check(0, "formulation equivalence", formulation <= 1e-6,
                                    fmt::format("residual={:.3e}", formulation), 0));
    out.checks.push_back(make_check(0, "discrete energy inequality", lambda_fit > 0,
                                    fmt::format("lambda_fit={:.4e}", lambda_fit), 0));
  }
  out.files.add("simulate_summary.csv", summary.str());
  return out;
}

// ---------------------------------------------------------------- plots

std::string plot_script(Subcommand s)
{
  std::string body;
  switch (s) {
  case Subcommand::roots:
    body = R"py(d = pd.read_csv(here / "roots.csv")
fig, ax = plt.subplots(1, 2, figsize=(10, 4))
ax[0].semilogx(d.kmag, d.sigma, label="sigma")
ax[0].semilogx(d.kmag, d.beta, label="beta")
ax[0].legend()
ax[1].loglog(d.kmag, d.omega)
ax[1].set_ylabel("omega")
for a in ax:
    a.set_xlabel("|k|")
)py";
    break;
  case Subcommand::propagate:
    body = R"py(d = pd.read_csv(here / "propagate.csv")
fig, ax = plt.subplots()
ax.semilogy(d.t, d.norm2, label="|U|^2")
ax.semilogy(d.t, d.lyapunov, label="Lyapunov value")
ax.set_xlabel("t")
ax.legend()
)py";
    break;
  case Subcommand::verify_linear:
    body = R"py(d = pd.read_csv(here / "verify_linear.csv")
fig, ax = plt.subplots()
ax.loglog(d.kmag, d.rel_error.clip(lower=1e-17), ".")
ax.set_xlabel("|k|")
ax.set_ylabel("relative error vs oracle")
)py";
    break;
  case Subcommand::lyapunov:
    body = R"py(d = pd.read_csv(here / "lyapunov_bound.csv")
fig, ax = plt.subplots()
ax.semilogx(d.kmag, d.violation, ".")
ax.axhline(0, color="k")
ax.set_xlabel("|k|")
ax.set_ylabel("bound violation (<= 0 holds)")
)py";
    break;
  case Subcommand::decay_fit:
    body = R"py(d = pd.read_csv(here / "decay_norms.csv")
fig, ax = plt.subplots(1, 2, figsize=(10, 4))
for branch, g in d.groupby("branch"):
    for c in ["rho", "u", "E", "B"]:
        ax[0].loglog(1 + g.t, g["l2_" + c], label=f"{branch} {c}")
        if g["linf_" + c].notna().all():
            ax[1].loglog(1 + g.t, g["linf_" + c], label=f"{branch} {c}")
ax[0].set_title("L2")
ax[1].set_title("Linf bound")
for a in ax:
    a.set_xlabel("1 + t")
    a.legend(fontsize=6)
)py";
    break;
  case Subcommand::simulate:
    body = R"py(d = pd.read_csv(here / "simulate.csv")
fig, ax = plt.subplots(1, 2, figsize=(10, 4))
ax[0].semilogy(d.t, d.E_N, label="E_N")
ax[0].semilogy(d.t, d.D_N, label="D_N")
ax[0].semilogy(d.t, d.E_N_h, label="E_N^h")
ax[0].legend()
ax[1].semilogy(d.t, d.gauss_residual.clip(lower=1e-300), label="div E + rho")
ax[1].semilogy(d.t, d.divb_residual.clip(lower=1e-300), label="div B")
ax[1].legend()
for a in ax:
    a.set_xlabel("t")
)py";
    break;
  }
  return fmt::format(R"py(#!/usr/bin/env python3
# Generated by emx {0}; renders {0}.png next to this script.
import pathlib
import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt
import pandas as pd

here = pathlib.Path(__file__).resolve().parent
{1}fig.tight_layout()
fig.savefig(here / "{0}.png", dpi=150)
)py",
                     subcommand_name(s), body);
}

std::string manifest(const ExperimentConfig &cfg, const std::string &canonical, const Artifacts &files,
                     const std::vector<CheckLine> &checks, double wall)
{
  std::string m;
  m += fmt::format("subcommand: {}\n", subcommand_name(cfg.subcommand));
  m += fmt::format("seed: {}\n", cfg.seed);
  m += fmt::format("config_sha256: {}\n", sha256_hex(canonical));
  m += fmt::format("wall_seconds: {:.3f}\n", wall);
  m += "versions:\n";
  m += fmt::format("  emx: \"{}\"\n", EMX_VERSION);
  m += fmt::format("  eigen: \"{}.{}.{}\"\n", EIGEN_WORLD_VERSION, EIGEN_MAJOR_VERSION, EIGEN_MINOR_VERSION);
  m += fmt::format("  boost: \"{}\"\n", BOOST_LIB_VERSION);
  m += fmt::format("  fftw: \"{}\"\n", fftw_version);
  m += fmt::format("  compiler: \"{}\"\n", __VERSION__);
  m += "artifacts:\n";
  for (const auto &[name, body] : files.files)
    m += fmt::format("  - {{name: \"{}\", sha256: {}}}\n", name, sha256_hex(body));
  if (!checks.empty()) {
    m += "checks:\n";
    for (const auto &c : checks)
      m += fmt::format("  - {{criterion: {}, name: \"{}\", passed: {}, seconds: {:.3f}}}\n", c.criterion, c.name,
                       c.passed, c.seconds);
  }
  m += "config: |\n";
  std::istringstream in(canonical);
  for (std::string line; std::getline(in, line);)
    m += "  " + line + "\n";
  return m;
}

}  // namespace

const char *subcommand_name(Subcommand s)
{
  for (const auto &[v, n] : kSubcommands)
    if (v == s)
      return n;
  return "?";
}

Subcommand parse_subcommand(const std::string &name)
{
  for (const auto &[v, n] : kSubcommands)
    if (name == n)
      return v;
  throw ConfigError("unknown subcommand '" + name + "'");
}

ExperimentConfig parse_config(const std::string &text, const std::string &source)
{
  YAML::Node root;
  try {
    root = YAML::Load(text);
  } catch (const YAML::ParserException &e) {
    throw ConfigError(fmt::format("{}:{}: {}", source, e.mark.line + 1, e.msg));
  }
  ExperimentConfig cfg;
  Section top(root, "", source);
  std::string sub;
  top.get("subcommand", sub);
  if (!sub.empty()) {
    try {
      cfg.subcommand = parse_subcommand(sub);
    } catch (const ConfigError &e) {
      throw ConfigError(fmt::format("{}:{}: {}", source, root["subcommand"].Mark().line + 1, e.what()));
    }
  }
  top.get("seed", cfg.seed);
  top.get("gamma", cfg.gamma);
  top.get("output_dir", cfg.output_dir);
  top.get("check", cfg.check);

  {
    Section s = top.sub("roots");
    s.get("k_min", cfg.roots.k_min);
    s.get("k_max", cfg.roots.k_max);
    s.get("count", cfg.roots.count);
    s.finish();
  }
  {
    Section s = top.sub("propagate");
    s.get("k", cfg.propagate.k);
    s.get("t_end", cfg.propagate.t_end);
    s.get("n_times", cfg.propagate.n_times);
    s.get("oracle_tol", cfg.propagate.oracle_tol);
    s.finish();
  }
  {
    VerifyLinearParams &v = cfg.verify_linear;
    Section s = top.sub("verify_linear");
    s.get("samples", v.samples);
    s.get("k_min", v.k_min);
    s.get("k_max", v.k_max);
    s.get("t_max", v.t_max);
    s.get("gammas", v.gammas);
    s.get("oracle_tol", v.oracle_tol);
    s.get("tolerance", v.tolerance);
    s.get("identity_tolerance", v.identity_tolerance);
    s.finish();
  }
  {
    LyapunovParams &l = cfg.lyapunov;
    Section s = top.sub("lyapunov");
    s.get("kappa", l.kappa);
    s.get("equivalence_samples", l.equivalence_samples);
    s.get("dissipation_modes", l.dissipation_modes);
    s.get("k_min", l.k_min);
    s.get("k_max", l.k_max);
    s.get("bound_train", l.bound_train);
    s.get("bound_validate", l.bound_validate);
    s.get("bound_k_min", l.bound_k_min);
    s.get("bound_k_max", l.bound_k_max);
    s.get("bound_horizon", l.bound_horizon);
    s.get("bound_samples", l.bound_samples);
    s.finish();
  }
  {
    DecayFitParams &d = cfg.decay_fit;
    Section s = top.sub("decay_fit");
    s.get("magnetic", d.magnetic);
    s.get("width", d.width);
    s.get("amp_E", d.amp_E);
    s.get("amp_u", d.amp_u);
    s.get("amp_B", d.amp_B);
    s.get("t_min", d.t_min);
    s.get("t_max", d.t_max);
    s.get("n_times", d.n_times);
    s.get("radial_intervals", d.quadrature.radial_intervals);
    s.get("k_min", d.quadrature.k_min);
    s.get("k_max", d.quadrature.k_max);
    s.get("convergence_tol", d.quadrature.convergence_tol);
    s.finish();
  }
  {
    SimulateParams &m = cfg.simulate;
    Section s = top.sub("simulate");
    s.get("n_grid", m.n_grid);
    s.get("box_len", m.box_len);
    s.get("amplitude", m.amplitude);
    s.get("envelope_len", m.envelope_len);
    s.get("steps", m.steps);
    s.get("cfl_factor", m.cfl_factor);
    s.get("N", m.N);
    s.get("kappa", m.kappa);
    s.get("output_every", m.output_every);
    s.get("snapshot_every", m.snapshot_every);
    s.get("linear_amplitude", m.linear_amplitude);
    s.get("linear_steps", m.linear_steps);
    s.get("halving_steps", m.halving_steps);
    s.finish();
  }
  top.finish();
  validate(cfg);
  return cfg;
}

ExperimentConfig load_config(const fs::path &path)
{
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw ConfigError("cannot open config file '" + path.string() + "'");
  std::ostringstream text;
  text << in.rdbuf();
  return parse_config(text.str(), path.string());
}

void validate(const ExperimentConfig &c)
{
  require(c.gamma > 1 && std::isfinite(c.gamma), "gamma", "must be finite and > 1");
  require(!c.output_dir.empty(), "output_dir", "must not be empty");

  const RootsParams &r = c.roots;
  require(r.k_min > 0, "roots.k_min", "must be > 0");
  require(r.k_max >= r.k_min, "roots.k_max", "must be >= roots.k_min");
  require(r.count >= 1 && r.count <= 10000000, "roots.count", "must be in [1, 1e7]");

  const PropagateParams &p = c.propagate;
  require(p.k.allFinite(), "propagate.k", "must be finite");
  require(p.t_end >= 0, "propagate.t_end", "must be >= 0");
  require(p.n_times >= 1, "propagate.n_times", "must be >= 1");
  require(p.oracle_tol == 0 || (p.oracle_tol >= kOracleMinTol && p.oracle_tol <= kOracleMaxTol), "propagate.oracle_tol",
          "must be 0 or in [1e-13, 1e-6]");

  const VerifyLinearParams &v = c.verify_linear;
  require(v.samples >= 1, "verify_linear.samples", "must be >= 1");
  require(v.k_min > 0 && v.k_max >= v.k_min, "verify_linear.k_min", "need 0 < k_min <= k_max");
  require(v.t_max >= 0, "verify_linear.t_max", "must be >= 0");
  require(!v.gammas.empty(), "verify_linear.gammas", "must not be empty");
  for (double g : v.gammas)
    require(g > 1, "verify_linear.gammas", "entries must be > 1");
  require(v.oracle_tol >= kOracleMinTol && v.oracle_tol <= kOracleMaxTol, "verify_linear.oracle_tol",
          "must be in [1e-13, 1e-6]");

  const LyapunovParams &l = c.lyapunov;
  require(l.equivalence_samples >= 1, "lyapunov.equivalence_samples", "must be >= 1");
  require(l.dissipation_modes >= 1, "lyapunov.dissipation_modes", "must be >= 1");
  require(l.k_min > 0 && l.k_max >= l.k_min, "lyapunov.k_min", "need 0 < k_min <= k_max");
  require(l.bound_train >= 1 && l.bound_validate >= 1, "lyapunov.bound_train", "train and validate sets must be non-empty");
  require(l.bound_k_min > 0 && l.bound_k_max >= l.bound_k_min, "lyapunov.bound_k_min", "need 0 < bound_k_min <= bound_k_max");
  require(l.bound_horizon > 0, "lyapunov.bound_horizon", "must be > 0");
  require(l.bound_samples >= 2, "lyapunov.bound_samples", "must be >= 2");
  require(l.kappa.kappa1 >= 0 && l.kappa.kappa2 >= 0 && l.kappa.kappa3 >= 0, "lyapunov.kappa", "entries must be >= 0");

  const DecayFitParams &d = c.decay_fit;
  require(d.width > 0, "decay_fit.width", "must be > 0");
  require(d.t_min >= 0 && d.t_max > d.t_min, "decay_fit.t_min", "need 0 <= t_min < t_max");
  require(d.n_times >= 3, "decay_fit.n_times", "must be >= 3");
  require(d.quadrature.radial_intervals >= 2, "decay_fit.radial_intervals", "must be >= 2");
  require(d.quadrature.k_min > 0 && d.quadrature.k_max > d.quadrature.k_min, "decay_fit.k_min",
          "need 0 < k_min < k_max");
  require(d.quadrature.convergence_tol > 0, "decay_fit.convergence_tol", "must be > 0");

  const SimulateParams &s = c.simulate;
  require(s.n_grid >= 4 && s.n_grid % 2 == 0, "simulate.n_grid", "must be even and >= 4");
  require(s.box_len > 0, "simulate.box_len", "must be > 0");
  require(s.amplitude > 0, "simulate.amplitude", "must be > 0");
  require(s.envelope_len > 0, "simulate.envelope_len", "must be > 0");
  require(s.steps >= 0, "simulate.steps", "must be >= 0");
  require(s.cfl_factor > 0 && s.cfl_factor <= 1, "simulate.cfl_factor", "must be in (0, 1]");
  require(s.N >= 1, "simulate.N", "must be >= 1");
  require(s.output_every >= 1, "simulate.output_every", "must be >= 1");
  require(s.snapshot_every >= 0, "simulate.snapshot_every", "must be >= 0");
  require(s.linear_amplitude > 0, "simulate.linear_amplitude", "must be > 0");
  require(s.linear_steps >= 1, "simulate.linear_steps", "must be >= 1");
  require(s.halving_steps >= 1, "simulate.halving_steps", "must be >= 1");
}

std::string canonical_config(const ExperimentConfig &c)
{
  auto vec = [](const auto &v) {
    std::string s = "[";
    for (std::size_t i = 0; i < std::size_t(v.size()); ++i)
      s += (i ? ", " : "") + num(v[i]);
    return s + "]";
  };
  auto kappa = [&](const KappaWeights &k) { return vec(std::vector<double>{k.kappa1, k.kappa2, k.kappa3}); };
  std::string o;
  // output_dir is left out: where results land does not change them.
  o += fmt::format("subcommand: {}\nseed: {}\ngamma: {}\ncheck: {}\n", subcommand_name(c.subcommand), c.seed,
                   num(c.gamma), c.check);
  o += fmt::format("roots:\n  k_min: {}\n  k_max: {}\n  count: {}\n", num(c.roots.k_min), num(c.roots.k_max), c.roots.count);
  const auto &p = c.propagate;
  o += fmt::format("propagate:\n  k: {}\n  t_end: {}\n  n_times: {}\n  oracle_tol: {}\n",
                   vec(std::vector<double>{p.k(0), p.k(1), p.k(2)}), num(p.t_end), p.n_times, num(p.oracle_tol));
  const auto &v = c.verify_linear;
  o += fmt::format("verify_linear:\n  samples: {}\n  k_min: {}\n  k_max: {}\n  t_max: {}\n  gammas: {}\n  oracle_tol: {}\n"
                   "  tolerance: {}\n  identity_tolerance: {}\n",
                   v.samples, num(v.k_min), num(v.k_max), num(v.t_max), vec(v.gammas), num(v.oracle_tol),
                   num(v.tolerance), num(v.identity_tolerance));
  const auto &l = c.lyapunov;
  o += fmt::format("lyapunov:\n  kappa: {}\n  equivalence_samples: {}\n  dissipation_modes: {}\n  k_min: {}\n  k_max: {}\n"
                   "  bound_train: {}\n  bound_validate: {}\n  bound_k_min: {}\n  bound_k_max: {}\n"
                   "  bound_horizon: {}\n  bound_samples: {}\n",
                   kappa(l.kappa), l.equivalence_samples, l.dissipation_modes, num(l.k_min), num(l.k_max),
                   l.bound_train, l.bound_validate, num(l.bound_k_min), num(l.bound_k_max), num(l.bound_horizon),
                   l.bound_samples);
  const auto &d = c.decay_fit;
  o += fmt::format("decay_fit:\n  magnetic: {}\n  width: {}\n  amp_E: {}\n  amp_u: {}\n  amp_B: {}\n  t_min: {}\n"
                   "  t_max: {}\n  n_times: {}\n  radial_intervals: {}\n  k_min: {}\n  k_max: {}\n"
                   "  convergence_tol: {}\n",
                   profile_name(d.magnetic), num(d.width), num(d.amp_E), num(d.amp_u), num(d.amp_B), num(d.t_min),
                   num(d.t_max), d.n_times, d.quadrature.radial_intervals, num(d.quadrature.k_min),
                   num(d.quadrature.k_max), num(d.quadrature.convergence_tol));
  const auto &s = c.simulate;
  o += fmt::format("simulate:\n  n_grid: {}\n  box_len: {}\n  amplitude: {}\n  envelope_len: {}\n  steps: {}\n"
                   "  cfl_factor: {}\n  N: {}\n  kappa: {}\n  output_every: {}\n  snapshot_every: {}\n"
                   "  linear_amplitude: {}\n  linear_steps: {}\n  halving_steps: {}\n",
                   s.n_grid, num(s.box_len), num(s.amplitude), num(s.envelope_len), s.steps, num(s.cfl_factor), s.N,
                   kappa(s.kappa), s.output_every, s.snapshot_every, num(s.linear_amplitude), s.linear_steps,
                   s.halving_steps);
  return o;
}

std::string sha256_hex(const std::string &data)
{
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (!EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr))
    throw std::runtime_error("sha256 failed");
  std::string hex;
  for (unsigned int i = 0; i < len; ++i)
    hex += fmt::format("{:02x}", digest[i]);
  return hex;
}

RunResult run(const ExperimentConfig &cfg)
{
  validate(cfg);
  const auto t0 = Clock::now();
  static const std::map<Subcommand, std::function<SuiteOutput(const ExperimentConfig &)>> suites = {
      {Subcommand::roots, run_roots},           {Subcommand::propagate, run_propagate},
      {Subcommand::verify_linear, run_verify_linear}, {Subcommand::lyapunov, run_lyapunov},
      {Subcommand::decay_fit, run_decay_fit},   {Subcommand::simulate, run_simulate},
  };
  SuiteOutput out = suites.at(cfg.subcommand)(cfg);

  RunResult result;
  result.checks = out.checks;
  if (cfg.check) {
    Csv checks({"criterion", "name", "passed", "detail"});
    for (const auto &c : out.checks) {
      checks.row_strings({std::to_string(c.criterion), c.name, c.passed ? "true" : "false", c.detail});
      if (!c.passed)
        result.exit_status = 1;
    }
    out.files.add("checks.csv", checks.str());
  }
  out.files.add(fmt::format("plot_{}.py", subcommand_name(cfg.subcommand)), plot_script(cfg.subcommand));
  result.wall_seconds = seconds_since(t0);
  const std::string canonical = canonical_config(cfg);
  out.files.add("config.resolved.yaml", canonical);
  out.files.add("manifest.yaml", manifest(cfg, canonical, out.files, out.checks, result.wall_seconds));
  result.artifacts = commit(cfg.output_dir, out.files);
  return result;
}

int cli_main(int argc, char **argv)
{
  CLI::App app{"Frequency-space laboratory for the relaxed compressible Euler-Maxwell system"};
  app.require_subcommand(1);
  std::string config_path, out_dir;
  std::uint64_t seed = 0;
  bool check = false;
  for (const auto &[value, name] : kSubcommands) {
    CLI::App *sub = app.add_subcommand(name, fmt::format("run the {} experiment", name));
    sub->add_option("--config", config_path, "YAML config file")->check(CLI::ExistingFile);
    sub->add_option("--seed", seed, "random seed (overrides the config)");
    sub->add_flag("--check", check, "assert the acceptance properties; exit 1 on failure");
    sub->add_option("--out", out_dir, "output directory (overrides the config)");
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError &e) {
    return app.exit(e) == 0 ? 0 : 2;
  }
  const std::string name = app.get_subcommands().front()->get_name();
  const CLI::App *sub = app.get_subcommands().front();

  try {
    const Subcommand which = parse_subcommand(name);
    ExperimentConfig cfg;
    if (!config_path.empty()) {
      std::ifstream in(config_path, std::ios::binary);
      std::ostringstream text;
      text << in.rdbuf();
      cfg = parse_config(text.str(), config_path);
      if (!YAML::Load(text.str())["subcommand"].IsDefined())
        cfg.subcommand = which;
      else if (cfg.subcommand != which)
        throw ConfigError(fmt::format("{}: config is for '{}' but '{}' was requested", config_path,
                                      subcommand_name(cfg.subcommand), name));
    }
    cfg.subcommand = which;
    if (sub->count("--seed"))
      cfg.seed = seed;
    if (sub->count("--out"))
      cfg.output_dir = out_dir;
    cfg.check = cfg.check || check;
    validate(cfg);

    const RunResult r = run(cfg);
    for (const auto &c : r.checks)
      std::cout << fmt::format("[{}] {}{}: {}\n", c.passed ? "PASS" : "FAIL",
                               c.criterion > 0 ? fmt::format("criterion {} ", c.criterion) : std::string(), c.name,
                               c.detail);
    std::cout << fmt::format("wrote {} files to {} in {:.2f} s\n", r.artifacts.size(), cfg.output_dir.string(),
                             r.wall_seconds);
    return r.exit_status;
  } catch (const ConfigError &e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception &e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
}

}  // namespace emx
