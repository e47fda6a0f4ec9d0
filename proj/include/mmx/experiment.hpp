#pragma once

#include <atomic>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include "json.hpp"

#include "mmx/core.hpp"
#include "mmx/manifold.hpp"
#include "mmx/penalty.hpp"
#include "mmx/problem.hpp"
#include "mmx/solver.hpp"
#include "mmx/trace_io.hpp"

namespace mmx {

namespace fs = std::filesystem;

enum class SolverMethod { Smgda, Mgda, Rgda };

inline const char* to_string(SolverMethod m) {
  switch (m) {
    case SolverMethod::Smgda: return "smgda";
    case SolverMethod::Mgda: return "mgda";
    case SolverMethod::Rgda: return "rgda";
  }
  return "?";
}

/// One solver variant of an experiment. Parameters left at NaN are filled in
/// from the instance's constants when the run is materialized.
struct SolverSpec {
  std::string name;
  SolverMethod method = SolverMethod::Smgda;
  std::string params = "practical";  // practical | pl-theory | concave-theory
  double rho = std::nan("");
  double C = std::nan("");
  double p = std::nan("");
  double beta = std::nan("");
  double tau1 = std::nan("");
  double tau2 = std::nan("");
  double alpha = std::nan("");
  double b = std::nan("");
  double tikhonov_eps = 0.0;
  int warm_dual_iters = 0;
  long max_iters = -1;  // -1: inherit the experiment budget
  double tol = std::nan("");
};

struct ProblemSpec {
  enum class Kind { Ncmc, Ncsc, FromFile } kind = Kind::Ncsc;
  Index m = 50, n = 50;
  double L_target = 5.0;
  double mu_y = 1.0;
  std::string path;  // FromFile
};

struct ExperimentSpec {
  ProblemSpec problem;
  std::vector<SolverSpec> solvers;
  int repetitions = 1;
  std::uint64_t base_seed = 0;
  long max_iters = 20000;
  long record_every = 100;
  double tol = 0.0;
  int jobs = 1;
  std::string output_dir = "results";
};

inline void validate(const ExperimentSpec& spec) {
  require(spec.repetitions >= 1, "ExperimentSpec: repetitions must be >= 1");
  require(spec.max_iters >= 0, "ExperimentSpec: negative iteration budget");
  require(spec.record_every >= 1, "ExperimentSpec: record_every must be >= 1");
  require(spec.jobs >= 1, "ExperimentSpec: jobs must be >= 1");
  require(!spec.solvers.empty(), "ExperimentSpec: no solvers listed");
  std::set<std::string> names;
  for (const auto& s : spec.solvers) {
    require(!s.name.empty(), "ExperimentSpec: solver without a name");
    if (!names.insert(s.name).second)
      throw std::invalid_argument("ExperimentSpec: duplicate solver name " + s.name);
  }
  if (spec.problem.kind == ProblemSpec::Kind::FromFile)
    require(!spec.problem.path.empty(), "ExperimentSpec: instance path missing");
}

inline SolverMethod method_from_string(const std::string& s) {
  if (s == "smgda" || s == "sm-mgda") return SolverMethod::Smgda;
  if (s == "mgda") return SolverMethod::Mgda;
  if (s == "rgda") return SolverMethod::Rgda;
  throw std::invalid_argument("unknown solver method: " + s);
}

inline ExperimentSpec experiment_from_json(const json& j) {
  ExperimentSpec spec;
  const json& pj = j.at("problem");
  std::string type = pj.at("type").get<std::string>();
  if (type == "ncmc") {
    spec.problem.kind = ProblemSpec::Kind::Ncmc;
    spec.problem.mu_y = 0.0;
  } else if (type == "ncsc") {
    spec.problem.kind = ProblemSpec::Kind::Ncsc;
    spec.problem.mu_y = pj.value("mu_y", 1.0);
    require(spec.problem.mu_y > 0, "ncsc problem needs mu_y > 0");
  } else if (type == "file") {
    spec.problem.kind = ProblemSpec::Kind::FromFile;
    spec.problem.path = pj.at("path").get<std::string>();
  } else {
    throw std::invalid_argument("unknown problem type: " + type);
  }
  if (type != "file") {
    spec.problem.m = pj.value("m", 50);
    spec.problem.n = pj.value("n", 50);
    spec.problem.L_target = pj.value("L", 5.0);
  }
  for (const json& sj : j.at("solvers")) {
    SolverSpec s;
    s.name = sj.at("name").get<std::string>();
    s.method = method_from_string(sj.value("method", "smgda"));
    s.params = sj.value("params", "practical");
    s.rho = sj.value("rho", std::nan(""));
    s.C = sj.value("C", std::nan(""));
    s.p = sj.value("p", std::nan(""));
    s.beta = sj.value("beta", std::nan(""));
    s.tau1 = sj.value("tau1", std::nan(""));
    s.tau2 = sj.value("tau2", std::nan(""));
    s.alpha = sj.value("alpha", std::nan(""));
    s.b = sj.value("b", std::nan(""));
    s.tikhonov_eps = sj.value("tikhonov_eps", 0.0);
    s.warm_dual_iters = sj.value("warm_dual_iters", 0);
    s.max_iters = sj.value("max_iters", -1L);
    s.tol = sj.value("tol", std::nan(""));
    spec.solvers.push_back(std::move(s));
  }
  spec.repetitions = j.value("repetitions", 1);
  spec.base_seed = j.value("seed", 0ULL);
  spec.max_iters = j.value("max_iters", 20000L);
  spec.record_every = j.value("record_every", 100L);
  spec.tol = j.value("tol", 0.0);
  spec.jobs = j.value("jobs", 1);
  spec.output_dir = j.value("out", "results");
  validate(spec);
  return spec;
}

inline ExperimentSpec load_experiment(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("load_experiment: cannot open " + path);
  json j;
  in >> j;
  return experiment_from_json(j);
}

/// Per-repetition instance seed; documented so individual runs can be
/// reproduced in isolation.
inline std::uint64_t repetition_seed(std::uint64_t base, int rep) {
  return base + static_cast<std::uint64_t>(rep);
}

/// Seed of the shared initial point x0 for one repetition.
inline std::uint64_t init_seed(std::uint64_t base, int rep) {
  return splitmix64(repetition_seed(base, rep));
}

inline SolverConfig materialize_config(const SolverSpec& s, const QuadraticInstance& inst,
                                       const MinimaxProblem& problem,
                                       const ExperimentSpec& spec) {
  double L = practical_constant(inst);
  SolverConfig cfg;
  if (s.params == "practical") {
    cfg = practical_config(L, problem.mu);
  } else if (s.params == "pl-theory") {
    require(problem.mu > 0, "pl-theory parameters need mu > 0");
    cfg = pl_theory_config(L, problem.mu, problem.h.weak_convexity());
  } else if (s.params == "concave-theory") {
    cfg = concave_theory_config(L, problem.lipschitz.yy);
  } else {
    throw std::invalid_argument("unknown parameter mode: " + s.params);
  }
  if (s.method == SolverMethod::Mgda) {
    cfg.p = 0.0;
    cfg.beta = 0.0;
  }
  auto maybe = [](double& dst, double v) {
    if (!std::isnan(v)) dst = v;
  };
  maybe(cfg.rho, s.rho);
  maybe(cfg.C, s.C);
  maybe(cfg.p, s.p);
  maybe(cfg.beta, s.beta);
  maybe(cfg.tau1, s.tau1);
  maybe(cfg.tau2, s.tau2);
  maybe(cfg.alpha, s.alpha);
  maybe(cfg.concave_b, s.b);
  cfg.T = s.max_iters >= 0 ? s.max_iters : spec.max_iters;
  cfg.tol = std::isnan(s.tol) ? spec.tol : s.tol;
  cfg.warm_dual_iters = s.warm_dual_iters;
  if (s.tikhonov_eps > 0)
    cfg = tikhonov_config(cfg, s.tikhonov_eps, problem.h.domain_diameter());
  return cfg;
}

struct RunRecord {
  std::string solver;
  int repetition = 0;
  std::uint64_t seed = 0;
  RunStats stats;
  std::vector<TraceRow> trace;
  std::string trace_path;
};

struct ExperimentResult {
  std::vector<RunRecord> runs;  // ordered by (solver index, repetition)
  std::vector<QuadraticInstance> instances;
  std::string summary_path;
};

inline RunRecord execute_single_run(const SolverSpec& sspec, const QuadraticInstance& inst,
                                    const ExperimentSpec& spec, int rep) {
  MinimaxProblem problem = make_problem(inst);
  ManifoldKit kit = ManifoldKit::stiefel(inst.m, 1);
  auto rng = make_rng(init_seed(spec.base_seed, rep));
  Matrix x0 = kit.random_point(rng);
  Vector y0 = problem.h.domain_center();

  RunRecord rec;
  rec.solver = sspec.name;
  rec.repetition = rep;
  rec.seed = repetition_seed(spec.base_seed, rep);

  if (sspec.method == SolverMethod::Rgda) {
    double L = practical_constant(inst);
    double tau1 = 1.0 / (16.0 * (inst.mu_y + 1.0) * (inst.mu_y + 1.0) * L);
    double tau2 = 1.0 / L;
    long T = sspec.max_iters >= 0 ? sspec.max_iters : spec.max_iters;
    RunResult r = run_rgda(problem, kit, tau1, tau2, x0, y0, T, spec.record_every);
    rec.stats = r.stats;
    rec.trace = std::move(r.trace);
    return rec;
  }

  SolverConfig cfg = materialize_config(sspec, inst, problem, spec);
  PenalizedProblem pp(problem, kit, cfg.rho, cfg.C);
  RunResult r = run(pp, cfg, x0, y0, spec.record_every);
  rec.stats = r.stats;
  rec.trace = std::move(r.trace);
  return rec;
}

inline std::string trace_file_name(const std::string& solver, int rep) {
  return solver + "_rep" + std::to_string(rep) + ".csv";
}

/// Runs every (solver, repetition) pair, up to `jobs` concurrently. Each run
/// owns its state and RNG; traces land in out/traces and the aggregate in
/// out/summary.json. Results are identical to a sequential execution.
inline ExperimentResult run_experiment(const ExperimentSpec& spec) {
  validate(spec);
  ExperimentResult result;
  fs::create_directories(spec.output_dir);
  fs::create_directories(fs::path(spec.output_dir) / "traces");

  for (int rep = 0; rep < spec.repetitions; ++rep) {
    QuadraticInstance inst;
    if (spec.problem.kind == ProblemSpec::Kind::FromFile) {
      inst = load_instance(spec.problem.path);
    } else {
      inst = generate_quadratic(spec.problem.m, spec.problem.n, spec.problem.L_target,
                                spec.problem.kind == ProblemSpec::Kind::Ncmc
                                    ? 0.0
                                    : spec.problem.mu_y,
                                repetition_seed(spec.base_seed, rep));
    }
    save_instance(inst, (fs::path(spec.output_dir) /
                         ("instance_rep" + std::to_string(rep) + ".json"))
                            .string());
    result.instances.push_back(std::move(inst));
  }

  struct Task {
    std::size_t solver_idx;
    int rep;
  };
  std::vector<Task> tasks;
  for (std::size_t si = 0; si < spec.solvers.size(); ++si)
    for (int rep = 0; rep < spec.repetitions; ++rep) tasks.push_back({si, rep});

  std::vector<RunRecord> records(tasks.size());
  std::atomic<std::size_t> next{0};
  std::atomic<bool> failed{false};
  std::string error_message;
  std::mutex error_mutex;

  auto worker = [&]() {
    for (;;) {
      std::size_t i = next.fetch_add(1);
      if (i >= tasks.size() || failed.load()) break;
      const Task& task = tasks[i];
      try {
        records[i] = execute_single_run(spec.solvers[task.solver_idx],
                                        result.instances[task.rep], spec, task.rep);
      } catch (const std::exception& e) {
        std::lock_guard<std::mutex> lock(error_mutex);
        failed.store(true);
        if (error_message.empty()) error_message = e.what();
      }
    }
  };

  int nthreads = std::min<int>(spec.jobs, static_cast<int>(tasks.size()));
  if (nthreads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int i = 0; i < nthreads; ++i) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  if (failed.load()) throw std::runtime_error("run_experiment: " + error_message);

  // Deterministic write-out, keyed by (solver, repetition).
  json summary;
  summary["config"]["seed"] = spec.base_seed;
  summary["config"]["repetitions"] = spec.repetitions;
  summary["config"]["max_iters"] = spec.max_iters;
  summary["config"]["record_every"] = spec.record_every;
  for (std::size_t si = 0; si < spec.solvers.size(); ++si) {
    const auto& sname = spec.solvers[si].name;
    std::vector<std::vector<TraceRow>> traces;
    json runs_json = json::array();
    for (int rep = 0; rep < spec.repetitions; ++rep) {
      RunRecord& rec = records[si * spec.repetitions + rep];
      fs::path tpath = fs::path(spec.output_dir) / "traces" / trace_file_name(sname, rep);
      write_trace_csv(tpath.string(), rec.trace);
      rec.trace_path = tpath.string();
      json meta;
      meta["seed"] = rec.seed;
      meta["iters_run"] = rec.stats.iters_run;
      meta["ball_active_count"] = rec.stats.ball_active_count;
      meta["kappa_bar"] = rec.stats.kappa_bar;
      meta["l_used"] = rec.stats.l_used;
      meta["final_rel_grad"] = rec.stats.final_rel_grad;
      meta["status"] = rec.stats.status == RunStatus::Completed      ? "completed"
                       : rec.stats.status == RunStatus::EarlyStopped ? "early-stopped"
                                                                     : "non-finite";
      runs_json.push_back(meta);
      traces.push_back(rec.trace);
      result.runs.push_back(std::move(rec));
    }
    summary["solvers"][sname]["runs"] = runs_json;
    summary["solvers"][sname]["aggregate"] = summary_to_json(summarize_traces(traces));
  }
  fs::path spath = fs::path(spec.output_dir) / "summary.json";
  {
    std::ofstream out(spath.string());
    if (!out) throw std::runtime_error("run_experiment: cannot write summary");
    out << summary.dump(2) << "\n";
  }
  result.summary_path = spath.string();
  return result;
}

/// Comparison table across summary files: one line per (summary, solver)
/// with the final recorded mean of each headline metric.
inline std::string report_summaries(const std::vector<std::string>& summary_paths) {
  std::ostringstream os;
  os << "summary,solver,final_t,c_norm,rel_grad,primal_gap,dual_residual\n";
  for (const auto& path : summary_paths) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("report: cannot open " + path);
    json j;
    in >> j;
    for (auto it = j.at("solvers").begin(); it != j.at("solvers").end(); ++it) {
      const json& agg = it.value().at("aggregate");
      const auto& ts = agg.at("t");
      if (ts.empty()) continue;
      std::size_t last = ts.size() - 1;
      auto mean_of = [&](const char* name) {
        return agg.at("metrics").at(name).at("mean").at(last).get<double>();
      };
      os << csv_quote(path) << ',' << csv_quote(it.key()) << ',' << ts.at(last) << ','
         << format_double(mean_of("c_norm")) << ',' << format_double(mean_of("rel_grad"))
         << ',' << format_double(mean_of("primal_gap")) << ','
         << format_double(mean_of("dual_residual")) << "\n";
    }
  }
  return os.str();
}

}  // namespace mmx
