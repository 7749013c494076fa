// Runs every check suite twice and prints one line per acceptance criterion.
#include "emx/experiment.hpp"

#include <CLI11.hpp>
#include <fmt/format.h>

#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <unistd.h>

namespace fs = std::filesystem;
using namespace emx;

namespace
{

struct Criterion
{
  std::string name;
  double limit_seconds;
};

const std::map<int, Criterion> kCriteria = {
    {1, {"root property suite", 1}},
    {2, {"propagator-oracle equivalence", 10}},
    {3, {"lyapunov equivalence and dissipation", 30}},
    {4, {"pointwise bound", 30}},
    {5, {"linear decay rates", 300}},
    {6, {"decay index table", 1}},
    {7, {"nonlinear run", 120}},
};

std::string slurp(const fs::path &p)
{
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

// Files that differ between two output directories; the manifest holds wall times.
std::vector<std::string> differing_files(const fs::path &a, const fs::path &b)
{
  std::vector<std::string> diff;
  for (const auto &e : fs::directory_iterator(a)) {
    const std::string name = e.path().filename().string();
    if (name == "manifest.yaml")
      continue;
    if (!fs::exists(b / name) || slurp(e.path()) != slurp(b / name))
      diff.push_back(name);
  }
  for (const auto &e : fs::directory_iterator(b))
    if (!fs::exists(a / e.path().filename()))
      diff.push_back(e.path().filename().string());
  return diff;
}

}  // namespace

int main(int argc, char **argv)
{
  CLI::App app{"Acceptance run: every check suite, twice"};
  std::string work;
  std::uint64_t seed = 1;
  bool keep = false;
  app.add_option("--work", work, "scratch directory (default: a fresh temp directory)");
  app.add_option("--seed", seed, "seed for every suite");
  app.add_flag("--keep", keep, "keep the scratch directory");
  CLI11_PARSE(app, argc, argv);

  const fs::path root =
      work.empty() ? fs::temp_directory_path() / fmt::format("emx-acceptance-{}", ::getpid()) : fs::path(work);
  fs::remove_all(root);

  const Subcommand suites[] = {Subcommand::roots, Subcommand::verify_linear, Subcommand::lyapunov,
                               Subcommand::decay_fit, Subcommand::simulate};
  std::map<int, std::vector<CheckLine>> by_criterion;
  std::vector<std::string> determinism_failures;
  for (Subcommand s : suites) {
    for (int pass = 0; pass < 2; ++pass) {
      ExperimentConfig cfg;
      cfg.subcommand = s;
      cfg.seed = seed;
      cfg.check = true;
      cfg.output_dir = root / fmt::format("run{}", pass + 1) / subcommand_name(s);
      std::cerr << fmt::format("running {} (pass {})\n", subcommand_name(s), pass + 1);
      const RunResult r = run(cfg);
      if (pass == 0)
        for (const auto &c : r.checks)
          if (c.criterion > 0)
            by_criterion[c.criterion].push_back(c);
    }
    for (const auto &f : differing_files(root / "run1" / subcommand_name(s), root / "run2" / subcommand_name(s)))
      determinism_failures.push_back(fmt::format("{}/{}", subcommand_name(s), f));
  }

  bool all = true;
  for (const auto &[id, crit] : kCriteria) {
    const auto it = by_criterion.find(id);
    bool ok = it != by_criterion.end();
    double seconds = 0;
    std::string detail = ok ? "" : "no result";
    if (ok)
      for (const auto &c : it->second) {
        ok = ok && c.passed;
        seconds += c.seconds;
        detail += (detail.empty() ? "" : "; ") + c.detail;
      }
    const bool fast = seconds <= crit.limit_seconds;
    ok = ok && fast;
    all = all && ok;
    std::cout << fmt::format("[{}] criterion {}: {}: {} (runtime {:.2f} s, limit {} s)\n", ok ? "PASS" : "FAIL", id,
                             crit.name, detail, seconds, crit.limit_seconds);
  }
  const bool same = determinism_failures.empty();
  all = all && same;
  std::string det = same ? "all artifacts except manifests byte-identical across reruns" : "differs:";
  for (const auto &f : determinism_failures)
    det += " " + f;
  std::cout << fmt::format("[{}] criterion 8: determinism: {}\n", same ? "PASS" : "FAIL", det);

  if (!keep && work.empty())
    fs::remove_all(root);
  return all ? 0 : 1;
}
