#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "fedal/centralized.hpp"
#include "fedal/problem_library.hpp"
#include "fedal/proxal_outer.hpp"

namespace fedal {

enum class ProblemFamily { NeymanPearson, Fairness, Lcqp };
enum class SolverChoice { Federated, Centralized, Both };

std::string to_string(ProblemFamily f);
std::string to_string(SolverChoice s);
ProblemFamily parse_family(const std::string& s);
SolverChoice parse_solver(const std::string& s);

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// One experiment, as read from an INI document with sections
/// [problem], [outer], [inner] and [trials].
struct ExperimentConfig {
  // [problem]
  ProblemFamily family = ProblemFamily::Lcqp;
  std::string dataset;         // np, fairness (training split)
  std::string server_dataset;  // fairness: held by the server
  std::string label_column = "label";
  std::string group_column = "group";
  std::size_t clients = 1;
  double threshold = 0.2;
  std::uint64_t partition_seed = 0;
  Index dimension = 100;           // lcqp
  Index constraints_per_block = 1;  // lcqp
  std::uint64_t instance_seed = 0;  // lcqp
  std::string instance;            // lcqp: JSON file instead of generating

  // [outer]
  double eps1 = 1e-3;
  double eps2 = 1e-3;
  double beta = 300.0;
  double s_bar = 1e-3;
  int max_outer_iterations = 5000;

  // [inner]
  double q = 0.5;
  RhoRule rho_rule{RhoRule::Kind::Constant, 0.01};
  int max_inner_iterations = 10000;
  double min_subproblem_tolerance = 1e-12;
  /// When > 0, every ADMM subproblem is solved to this tolerance instead of q^t.
  double exact_tolerance = 0.0;
  bool parallel_clients = false;

  // [trials]
  int trials = 10;
  std::uint64_t seed = 0;
  SolverChoice solver = SolverChoice::Both;
  std::string out_dir = "results";

  bool operator==(const ExperimentConfig&) const = default;

  /// Config for the solver (w0 and mu0 left unset).
  OuterConfig outer_config() const;
};

/// Throws ConfigError on unknown sections/keys or malformed values. Paths are
/// kept verbatim.
ExperimentConfig parse_config(std::istream& in);
ExperimentConfig load_config(const std::string& path);
std::string serialize_config(const ExperimentConfig& cfg);

/// Builds the problem the config describes. Relative data paths are resolved
/// against `base_dir` (the config file's directory for the CLI).
struct ExperimentProblem {
  ProblemSpec spec;
  std::optional<LcqpInstance> lcqp;
  std::string feasibility_label;  // column caption for the experiment's metric
};
ExperimentProblem build_problem(const ExperimentConfig& cfg, const std::string& base_dir = "");

/// w0 for trial t: normalized Gaussian drawn with seed base + t.
Vec trial_start(Index d, std::uint64_t base_seed, int trial);

struct TrialRow {
  int trial = 0;
  std::string solver;  // "fed" or "central"
  bool ok = false;
  std::string status;
  double objective = 0.0;
  double mean_feasibility = 0.0;
  double max_feasibility = 0.0;  // max over all blocks, server included
  double global_feasibility = 0.0;
  std::optional<double> relative_difference;  // |obj_fed - obj_cen| / max(1, |obj_cen|)
  std::optional<double> oracle_distance;      // lcqp: ||w - w*||_inf
  int outer_iterations = 0;
  long inner_iterations = 0;
  std::size_t rounds = 0;
  std::size_t scalars = 0;
  std::size_t bytes = 0;
  double stationarity = kInf;
  double feasibility = kInf;
  bool audit_pass = false;
  bool heuristic_regime = false;
};

struct ExperimentOutcome {
  std::vector<TrialRow> rows;
  bool all_passed = false;
  int exit_code() const { return all_passed ? 0 : 1; }
};

/// Runs every trial, writes results.csv, summary.txt, per-trial traces and
/// solutions into cfg.out_dir, and prints the summary table to `report`.
ExperimentOutcome run_experiment(const ExperimentConfig& cfg, std::ostream& report, const std::string& base_dir = "");

/// CSV with one row per trace record: k, objective, one column per block
/// metric (block 0 first), mean/max client feasibility, global feasibility,
/// step and multiplier residuals, cumulative inner iterations and rounds.
void emit_trace(const std::vector<TraceRecord>& trace, std::ostream& out);
void emit_trace(const std::vector<TraceRecord>& trace, const std::string& path);

}  // namespace fedal
