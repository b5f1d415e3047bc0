#include "fedal/experiment.hpp"

#include <algorithm>
#include <array>
#include <functional>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <set>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "fedal/io.hpp"
#include "fedal/kkt_audit.hpp"

namespace fedal {
namespace {

namespace fs = std::filesystem;
namespace pt = boost::property_tree;

std::string format_double(double v) {
  std::array<char, 32> buf{};
  const auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return std::string(buf.data(), ptr);
}

std::string format_fixed(double v, int precision = 6) {
  std::ostringstream os;
  os << std::setprecision(precision) << v;
  return os.str();
}

template <typename T>
T parse_number(const std::string& section, const std::string& key, const std::string& text) {
  T v{};
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || ptr != text.data() + text.size()) {
    throw ConfigError("[" + section + "] " + key + ": cannot parse '" + text + "'");
  }
  return v;
}

bool parse_bool(const std::string& section, const std::string& key, const std::string& text) {
  if (text == "true" || text == "1") return true;
  if (text == "false" || text == "0") return false;
  throw ConfigError("[" + section + "] " + key + ": expected true or false, got '" + text + "'");
}

std::string rho_kind_name(RhoRule::Kind k) { return k == RhoRule::Kind::Constant ? "constant" : "per_sample"; }

RhoRule::Kind parse_rho_kind(const std::string& s) {
  if (s == "constant") return RhoRule::Kind::Constant;
  if (s == "per_sample") return RhoRule::Kind::PerSample;
  throw ConfigError("[inner] rho_rule: expected constant or per_sample, got '" + s + "'");
}

/// Binds every config key to a field of ExperimentConfig, for both directions.
struct KeyBinding {
  std::string section;
  std::string key;
  std::function<void(ExperimentConfig&, const std::string&)> read;
  std::function<std::string(const ExperimentConfig&)> write;
};

template <typename T>
KeyBinding number_key(const std::string& section, const std::string& key, T ExperimentConfig::*field) {
  return {section, key,
          [=](ExperimentConfig& c, const std::string& v) { c.*field = parse_number<T>(section, key, v); },
          [=](const ExperimentConfig& c) {
            if constexpr (std::is_floating_point_v<T>) return format_double(c.*field);
            else return std::to_string(c.*field);
          }};
}

KeyBinding string_key(const std::string& section, const std::string& key, std::string ExperimentConfig::*field) {
  return {section, key, [=](ExperimentConfig& c, const std::string& v) { c.*field = v; },
          [=](const ExperimentConfig& c) { return c.*field; }};
}

const std::vector<KeyBinding>& bindings() {
  static const std::vector<KeyBinding> table = {
      {"problem", "family", [](ExperimentConfig& c, const std::string& v) { c.family = parse_family(v); },
       [](const ExperimentConfig& c) { return to_string(c.family); }},
      string_key("problem", "dataset", &ExperimentConfig::dataset),
      string_key("problem", "server_dataset", &ExperimentConfig::server_dataset),
      string_key("problem", "label_column", &ExperimentConfig::label_column),
      string_key("problem", "group_column", &ExperimentConfig::group_column),
      number_key("problem", "clients", &ExperimentConfig::clients),
      number_key("problem", "threshold", &ExperimentConfig::threshold),
      number_key("problem", "partition_seed", &ExperimentConfig::partition_seed),
      number_key("problem", "dimension", &ExperimentConfig::dimension),
      number_key("problem", "constraints_per_block", &ExperimentConfig::constraints_per_block),
      number_key("problem", "instance_seed", &ExperimentConfig::instance_seed),
      string_key("problem", "instance", &ExperimentConfig::instance),
      number_key("outer", "eps1", &ExperimentConfig::eps1),
      number_key("outer", "eps2", &ExperimentConfig::eps2),
      number_key("outer", "beta", &ExperimentConfig::beta),
      number_key("outer", "s_bar", &ExperimentConfig::s_bar),
      number_key("outer", "max_iterations", &ExperimentConfig::max_outer_iterations),
      number_key("inner", "q", &ExperimentConfig::q),
      {"inner", "rho_rule", [](ExperimentConfig& c, const std::string& v) { c.rho_rule.kind = parse_rho_kind(v); },
       [](const ExperimentConfig& c) { return rho_kind_name(c.rho_rule.kind); }},
      {"inner", "rho",
       [](ExperimentConfig& c, const std::string& v) { c.rho_rule.value = parse_number<double>("inner", "rho", v); },
       [](const ExperimentConfig& c) { return format_double(c.rho_rule.value); }},
      number_key("inner", "max_iterations", &ExperimentConfig::max_inner_iterations),
      number_key("inner", "min_subproblem_tolerance", &ExperimentConfig::min_subproblem_tolerance),
      number_key("inner", "exact_tolerance", &ExperimentConfig::exact_tolerance),
      {"inner", "parallel_clients",
       [](ExperimentConfig& c, const std::string& v) { c.parallel_clients = parse_bool("inner", "parallel_clients", v); },
       [](const ExperimentConfig& c) { return std::string(c.parallel_clients ? "true" : "false"); }},
      number_key("trials", "count", &ExperimentConfig::trials),
      number_key("trials", "seed", &ExperimentConfig::seed),
      {"trials", "solver", [](ExperimentConfig& c, const std::string& v) { c.solver = parse_solver(v); },
       [](const ExperimentConfig& c) { return to_string(c.solver); }},
      string_key("trials", "out_dir", &ExperimentConfig::out_dir),
  };
  return table;
}

std::string resolve(const std::string& path, const std::string& base_dir) {
  if (path.empty() || base_dir.empty() || fs::path(path).is_absolute()) return path;
  return (fs::path(base_dir) / path).string();
}

double mean(const std::vector<double>& v) {
  if (v.empty()) return 0.0;
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

/// Sample standard deviation (0 for fewer than two values).
double stddev(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  const double m = mean(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return std::sqrt(s / static_cast<double>(v.size() - 1));
}

void fill_metrics(TrialRow& row, const ProblemSpec& p, const TraceRecord& last) {
  row.objective = last.objective;
  row.global_feasibility = last.global_feasibility;
  std::vector<double> metrics;
  for (std::size_t i = 0; i < p.num_blocks(); ++i)
    if (p.block(i).size() > 0) metrics.push_back(last.block_metrics.at(i));
  row.mean_feasibility = mean(metrics);
  row.max_feasibility = metrics.empty() ? 0.0 : *std::max_element(metrics.begin(), metrics.end());
}

void fill_comm(TrialRow& row, const OuterResult& r) {
  row.outer_iterations = r.outer_iterations;
  row.inner_iterations = r.total_inner_iterations;
  row.rounds = r.ledger.rounds().size();
  row.scalars = r.ledger.total_scalars();
  row.bytes = r.ledger.total_bytes();
  row.heuristic_regime = r.heuristic_regime;
}

const char* kResultsHeader =
    "trial,solver,status,objective,mean_feasibility,max_feasibility,global_feasibility,relative_difference,"
    "oracle_distance,outer_iterations,inner_iterations,rounds,scalars,bytes,audit_stationarity,audit_feasibility,"
    "audit_pass,heuristic_regime";

std::string optional_cell(const std::optional<double>& v) { return v ? format_double(*v) : std::string(); }

std::string csv_escape(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) out += c == '"' ? std::string("\"\"") : std::string(1, c);
  return out + "\"";
}

void write_row(std::ostream& out, const TrialRow& r) {
  out << r.trial << ',' << r.solver << ',' << csv_escape(r.status) << ',' << format_double(r.objective) << ','
      << format_double(r.mean_feasibility) << ',' << format_double(r.max_feasibility) << ','
      << format_double(r.global_feasibility) << ',' << optional_cell(r.relative_difference) << ','
      << optional_cell(r.oracle_distance) << ',' << r.outer_iterations << ',' << r.inner_iterations << ','
      << r.rounds << ',' << r.scalars << ',' << r.bytes << ',' << format_double(r.stationarity) << ','
      << format_double(r.feasibility) << ',' << (r.audit_pass ? 1 : 0) << ',' << (r.heuristic_regime ? 1 : 0)
      << '\n';
}

struct SummaryColumn {
  std::string name;
  std::function<std::optional<double>(const TrialRow&)> get;
};

void write_summary(std::ostream& out, const ExperimentConfig& cfg, const ExperimentProblem& prob,
                   const std::vector<TrialRow>& rows) {
  out << "family: " << to_string(cfg.family) << ", clients: " << prob.spec.num_clients()
      << ", dimension: " << prob.spec.dimension() << ", trials: " << cfg.trials << '\n';
  out << "feasibility: " << prob.feasibility_label << '\n';
  out << "relative difference: |obj_fed - obj_cen| / max(1, |obj_cen|)\n";
  out << "audit: stationarity <= " << format_fixed(cfg.eps1) << " + 1e-9, feasibility <= " << format_fixed(cfg.eps2)
      << " + 1e-9\n";
  if (!prob.spec.convex()) out << "regime: heuristic (nonconvex constraints)\n";
  out << "central: centralized baseline reading all client data directly (not federated)\n\n";

  const std::vector<SummaryColumn> columns = {
      {"objective", [](const TrialRow& r) { return std::optional<double>(r.objective); }},
      {"mean_feas", [](const TrialRow& r) { return std::optional<double>(r.mean_feasibility); }},
      {"max_feas", [](const TrialRow& r) { return std::optional<double>(r.max_feasibility); }},
      {"rel_diff", [](const TrialRow& r) { return r.relative_difference; }},
      {"oracle_dist", [](const TrialRow& r) { return r.oracle_distance; }},
      {"outer", [](const TrialRow& r) { return std::optional<double>(r.outer_iterations); }},
      {"inner", [](const TrialRow& r) { return std::optional<double>(static_cast<double>(r.inner_iterations)); }},
      {"rounds", [](const TrialRow& r) { return std::optional<double>(static_cast<double>(r.rounds)); }},
      {"audit_stat", [](const TrialRow& r) { return std::optional<double>(r.stationarity); }},
      {"audit_feas", [](const TrialRow& r) { return std::optional<double>(r.feasibility); }},
  };

  out << std::left << std::setw(9) << "solver" << std::setw(7) << "passed";
  for (const auto& c : columns) out << std::setw(24) << c.name;
  out << '\n';
  for (const std::string solver : {"fed", "central"}) {
    std::size_t total = 0, passed = 0;
    std::vector<std::vector<double>> values(columns.size());
    for (const auto& r : rows) {
      if (r.solver != solver) continue;
      ++total;
      if (r.ok && r.audit_pass) ++passed;
      if (!r.ok) continue;
      for (std::size_t c = 0; c < columns.size(); ++c)
        if (const auto v = columns[c].get(r)) values[c].push_back(*v);
    }
    if (total == 0) continue;
    out << std::setw(9) << solver << std::setw(7) << (std::to_string(passed) + "/" + std::to_string(total));
    for (const auto& v : values) {
      out << std::setw(24)
          << (v.empty() ? std::string("-") : format_fixed(mean(v)) + " (" + format_fixed(stddev(v), 3) + ")");
    }
    out << '\n';
  }
  out << "\nentries are mean (standard deviation) over successful trials\n";
}

}  // namespace

std::string to_string(ProblemFamily f) {
  switch (f) {
    case ProblemFamily::NeymanPearson: return "np";
    case ProblemFamily::Fairness: return "fairness";
    case ProblemFamily::Lcqp: return "lcqp";
  }
  return "?";
}

std::string to_string(SolverChoice s) {
  switch (s) {
    case SolverChoice::Federated: return "fed";
    case SolverChoice::Centralized: return "central";
    case SolverChoice::Both: return "both";
  }
  return "?";
}

ProblemFamily parse_family(const std::string& s) {
  if (s == "np") return ProblemFamily::NeymanPearson;
  if (s == "fairness") return ProblemFamily::Fairness;
  if (s == "lcqp") return ProblemFamily::Lcqp;
  throw ConfigError("unknown problem family '" + s + "' (expected np, fairness or lcqp)");
}

SolverChoice parse_solver(const std::string& s) {
  if (s == "fed") return SolverChoice::Federated;
  if (s == "central") return SolverChoice::Centralized;
  if (s == "both") return SolverChoice::Both;
  throw ConfigError("unknown solver '" + s + "' (expected fed, central or both)");
}

OuterConfig ExperimentConfig::outer_config() const {
  OuterConfig c;
  c.eps1 = eps1;
  c.eps2 = eps2;
  c.beta = beta;
  c.s_bar = s_bar;
  c.max_outer_iterations = max_outer_iterations;
  c.rho_rule = rho_rule;
  c.inner.q = q;
  c.inner.max_iterations = max_inner_iterations;
  c.inner.min_subproblem_tolerance = min_subproblem_tolerance;
  if (exact_tolerance > 0.0) c.inner.forced_subproblem_tolerance = exact_tolerance;
  c.inner.parallel_clients = parallel_clients;
  return c;
}

ExperimentConfig parse_config(std::istream& in) {
  pt::ptree tree;
  try {
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError(std::string("malformed config: ") + e.what());
  }
  std::map<std::pair<std::string, std::string>, const KeyBinding*> index;
  for (const auto& b : bindings()) index[{b.section, b.key}] = &b;

  ExperimentConfig cfg;
  std::set<std::string> sections;
  for (const auto& [section, body] : tree) {
    if (!body.data().empty()) throw ConfigError("key '" + section + "' appears outside any section");
    if (section != "problem" && section != "outer" && section != "inner" && section != "trials")
      throw ConfigError("unknown section [" + section + "]");
    sections.insert(section);
    for (const auto& [key, value] : body) {
      const auto it = index.find({section, key});
      if (it == index.end()) throw ConfigError("unknown key '" + key + "' in [" + section + "]");
      it->second->read(cfg, value.data());
    }
  }
  if (!sections.count("problem")) throw ConfigError("config lacks a [problem] section");
  if (!tree.get_child("problem").count("family")) throw ConfigError("[problem] family is required");
  return cfg;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config '" + path + "'");
  return parse_config(in);
}

std::string serialize_config(const ExperimentConfig& cfg) {
  std::ostringstream out;
  std::string section;
  for (const auto& b : bindings()) {
    if (b.section != section) {
      if (!section.empty()) out << '\n';
      section = b.section;
      out << '[' << section << "]\n";
    }
    out << b.key << " = " << b.write(cfg) << '\n';
  }
  return out.str();
}

ExperimentProblem build_problem(const ExperimentConfig& cfg, const std::string& base_dir) {
  switch (cfg.family) {
    case ProblemFamily::NeymanPearson: {
      const auto ds = read_labeled_csv(resolve(cfg.dataset, base_dir), cfg.label_column);
      return {build_np_problem(partition_stratified(ds, cfg.clients, cfg.partition_seed), cfg.threshold),
              std::nullopt, "loss for class 1 (<= " + format_fixed(cfg.threshold) + ")"};
    }
    case ProblemFamily::Fairness: {
      const auto train = read_labeled_csv(resolve(cfg.dataset, base_dir), cfg.label_column, cfg.group_column);
      const auto test = read_labeled_csv(resolve(cfg.server_dataset, base_dir), cfg.label_column, cfg.group_column);
      return {build_fairness_problem(partition_stratified(train, cfg.clients, cfg.partition_seed), test,
                                     cfg.threshold),
              std::nullopt, "loss disparity (<= " + format_fixed(cfg.threshold) + "), clients and server"};
    }
    case ProblemFamily::Lcqp: {
      LcqpInstance inst = cfg.instance.empty()
                              ? generate_lcqp(cfg.dimension, cfg.clients, cfg.constraints_per_block, cfg.instance_seed)
                              : read_lcqp(resolve(cfg.instance, base_dir));
      ProblemSpec spec = lcqp_problem(inst);
      return {std::move(spec), std::move(inst), "feasibility violation (max |C_i w + d_i|)"};
    }
  }
  throw ConfigError("unknown problem family");
}

Vec trial_start(Index d, std::uint64_t base_seed, int trial) {
  std::mt19937_64 rng(base_seed + static_cast<std::uint64_t>(trial));
  return sample_unit_sphere(d, rng);
}

void emit_trace(const std::vector<TraceRecord>& trace, std::ostream& out) {
  const std::size_t blocks = trace.empty() ? 0 : trace.front().block_metrics.size();
  out << "k,objective";
  for (std::size_t i = 0; i < blocks; ++i) out << ",block" << i;
  out << ",mean_client_feasibility,max_client_feasibility,global_feasibility,step_inf,max_multiplier_delta,"
         "subproblem_tolerance,inner_iterations,cumulative_inner_iterations,cumulative_rounds,cumulative_scalars\n";
  for (const auto& r : trace) {
    out << r.k << ',' << format_double(r.objective);
    for (double m : r.block_metrics) out << ',' << format_double(m);
    out << ',' << format_double(r.mean_client_feasibility) << ',' << format_double(r.max_client_feasibility) << ','
        << format_double(r.global_feasibility) << ',' << format_double(r.step_inf) << ','
        << format_double(r.max_multiplier_delta) << ',' << format_double(r.subproblem_tolerance) << ','
        << r.inner_iterations << ',' << r.cumulative_inner_iterations << ',' << r.cumulative_rounds << ','
        << r.cumulative_scalars << '\n';
  }
}

void emit_trace(const std::vector<TraceRecord>& trace, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write trace '" + path + "'");
  emit_trace(trace, out);
}

ExperimentOutcome run_experiment(const ExperimentConfig& cfg, std::ostream& report, const std::string& base_dir) {
  if (cfg.trials < 1) throw ConfigError("[trials] count must be >= 1");
  const ExperimentProblem prob = build_problem(cfg, base_dir);
  const ProblemSpec& p = prob.spec;
  const fs::path out_dir = cfg.out_dir;
  fs::create_directories(out_dir);

  std::optional<LcqpSolution> oracle;
  if (prob.lcqp) oracle = lcqp_oracle(*prob.lcqp);

  std::vector<std::string> solvers;
  if (cfg.solver != SolverChoice::Centralized) solvers.push_back("fed");
  if (cfg.solver != SolverChoice::Federated) solvers.push_back("central");

  ExperimentOutcome outcome;
  outcome.all_passed = true;
  std::ofstream results(out_dir / "results.csv");
  if (!results) throw std::runtime_error("cannot write results in '" + out_dir.string() + "'");
  results << "# relative_difference = |obj_fed - obj_cen| / max(1, |obj_cen|)\n" << kResultsHeader << '\n';

  for (int t = 0; t < cfg.trials; ++t) {
    OuterConfig ocfg = cfg.outer_config();
    ocfg.w0 = trial_start(p.dimension(), cfg.seed, t);
    std::vector<TrialRow> trial_rows;
    for (const auto& solver : solvers) {
      TrialRow row;
      row.trial = t;
      row.solver = solver;
      const std::string stem = solver + "_trial" + std::to_string(t);
      auto record = [&](const OuterResult& r) {
        fill_comm(row, r);
        if (!r.trace.empty()) fill_metrics(row, p, r.trace.back());
        emit_trace(r.trace, (out_dir / ("trace_" + stem + ".csv")).string());
        write_solution((out_dir / ("solution_" + stem + ".json")).string(), r.w, r.mu);
        if (oracle) row.oracle_distance = inf_norm(r.w - oracle->w);
      };
      try {
        const OuterResult r = solver == "fed" ? run_outer(p, ocfg) : run_centralized(p, ocfg);
        record(r);
        const AuditReport audit = assert_output_contract(p, r.w, r.mu, cfg.eps1, cfg.eps2);
        row.ok = true;
        row.audit_pass = audit.pass;
        row.stationarity = audit.residuals.stationarity;
        row.feasibility = audit.residuals.feasibility;
        row.status = audit.pass ? "ok" : "audit failed";
      } catch (const OuterSolveError& e) {
        record(e.partial());
        row.stationarity = e.audit_stationarity();
        row.feasibility = e.audit_feasibility();
        row.status = e.what();
      } catch (const std::exception& e) {
        row.status = e.what();
      }
      if (!row.ok || !row.audit_pass) outcome.all_passed = false;
      trial_rows.push_back(row);
    }
    if (trial_rows.size() == 2 && trial_rows[0].ok && trial_rows[1].ok) {
      const double cen = trial_rows[1].objective;
      trial_rows[0].relative_difference = std::abs(trial_rows[0].objective - cen) / std::max(1.0, std::abs(cen));
    }
    for (const auto& row : trial_rows) {
      write_row(results, row);
      outcome.rows.push_back(row);
    }
  }

  std::ostringstream summary;
  write_summary(summary, cfg, prob, outcome.rows);
  std::ofstream(out_dir / "summary.txt") << summary.str();
  report << summary.str();
  return outcome;
}

}  // namespace fedal
