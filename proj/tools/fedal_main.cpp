#include <filesystem>
#include <iostream>

#include <CLI11.hpp>

#include "fedal/experiment.hpp"
#include "fedal/io.hpp"
#include "fedal/kkt_audit.hpp"

namespace {

using namespace fedal;

int run_command(const std::string& config_path, const std::optional<int>& trials,
                const std::optional<std::uint64_t>& seed, const std::optional<std::string>& out_dir,
                const std::optional<std::string>& solver) {
  ExperimentConfig cfg = load_config(config_path);
  if (trials) cfg.trials = *trials;
  if (seed) cfg.seed = *seed;
  if (out_dir) cfg.out_dir = *out_dir;
  if (solver) cfg.solver = parse_solver(*solver);
  const std::string base = std::filesystem::path(config_path).parent_path().string();
  const ExperimentOutcome outcome = run_experiment(cfg, std::cout, base);
  for (const auto& row : outcome.rows) {
    if (!row.ok || !row.audit_pass)
      std::cerr << "trial " << row.trial << " (" << row.solver << "): " << row.status << '\n';
  }
  return outcome.exit_code();
}

int audit_command(const std::string& problem_path, const std::string& solution_path, double eps1, double eps2) {
  const auto ext = std::filesystem::path(problem_path).extension();
  std::optional<ProblemSpec> spec;
  if (ext == ".json") {
    spec.emplace(lcqp_problem(read_lcqp(problem_path)));
  } else {
    const auto base = std::filesystem::path(problem_path).parent_path().string();
    spec.emplace(build_problem(load_config(problem_path), base).spec);
  }
  const SolutionFile sol = read_solution(solution_path);
  require_dimension(sol.w.size(), spec->dimension(), "solution w");
  if (sol.mu.blocks.size() != spec->num_blocks())
    throw DimensionError("solution has " + std::to_string(sol.mu.blocks.size()) + " multiplier blocks, expected " +
                         std::to_string(spec->num_blocks()));
  const AuditReport r = assert_output_contract(*spec, sol.w, sol.mu, eps1, eps2);
  std::cout << "stationarity " << r.residuals.stationarity << " (limit " << eps1 << ")\n"
            << "feasibility " << r.residuals.feasibility << " (limit " << eps2 << ")\n"
            << (r.pass ? "PASS" : "FAIL") << '\n';
  return r.pass ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Federated proximal augmented Lagrangian experiments"};
  app.require_subcommand(1);

  std::string config_path;
  std::optional<int> trials;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out_dir, solver;
  auto* run = app.add_subcommand("run", "Run an experiment config and audit every output");
  run->add_option("config", config_path, "Experiment config (INI)")->required()->check(CLI::ExistingFile);
  run->add_option("--trials", trials, "Override [trials] count")->check(CLI::PositiveNumber);
  run->add_option("--seed", seed, "Override [trials] seed");
  run->add_option("--out-dir", out_dir, "Override [trials] out_dir");
  run->add_option("--solver", solver, "fed, central (non-federated baseline) or both")
      ->check(CLI::IsMember({"fed", "central", "both"}));

  Index d = 0, m = 0;
  std::size_t n = 0;
  std::uint64_t gen_seed = 0;
  std::string gen_out;
  auto* gen = app.add_subcommand("gen-lcqp", "Write a random LCQP instance as JSON");
  gen->add_option("d", d, "Dimension")->required()->check(CLI::PositiveNumber);
  gen->add_option("n", n, "Clients")->required()->check(CLI::PositiveNumber);
  gen->add_option("m", m, "Constraints per block")->required()->check(CLI::PositiveNumber);
  gen->add_option("seed", gen_seed, "Seed")->required();
  gen->add_option("out", gen_out, "Output JSON path")->required();

  std::string problem_path, solution_path;
  double eps1 = 1e-3, eps2 = 1e-3;
  auto* audit = app.add_subcommand("audit", "Check a (w, mu) pair against the optimality conditions");
  audit->add_option("problem", problem_path, "LCQP instance (.json) or experiment config")
      ->required()
      ->check(CLI::ExistingFile);
  audit->add_option("solution", solution_path, "Solution JSON")->required()->check(CLI::ExistingFile);
  audit->add_option("--eps1", eps1, "Stationarity tolerance");
  audit->add_option("--eps2", eps2, "Feasibility tolerance");

  CLI11_PARSE(app, argc, argv);
  try {
    if (*run) return run_command(config_path, trials, seed, out_dir, solver);
    if (*gen) {
      write_lcqp(gen_out, generate_lcqp(d, n, m, gen_seed));
      return 0;
    }
    if (*audit) return audit_command(problem_path, solution_path, eps1, eps2);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
