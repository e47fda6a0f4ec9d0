#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "mmx/mmx.hpp"

namespace {

int cmd_generate(mmx::Index m, mmx::Index n, double L, double mu_y, std::uint64_t seed,
                 const std::string& out_dir) {
  mmx::QuadraticInstance inst = mmx::generate_quadratic(m, n, L, mu_y, seed);
  std::filesystem::create_directories(out_dir);
  std::string name = "instance-m" + std::to_string(m) + "-n" + std::to_string(n) + "-L" +
                     mmx::format_double(L) + "-mu" + mmx::format_double(mu_y) + "-seed" +
                     std::to_string(seed) + ".json";
  std::string path = (std::filesystem::path(out_dir) / name).string();
  mmx::save_instance(inst, path);
  std::cout << path << "\n";
  return 0;
}

int cmd_run(const std::string& config_path, const std::string& out_override,
            int jobs_override, long record_override, double tol_override,
            std::int64_t seed_override) {
  mmx::ExperimentSpec spec = mmx::load_experiment(config_path);
  if (!out_override.empty()) spec.output_dir = out_override;
  if (jobs_override > 0) spec.jobs = jobs_override;
  if (record_override > 0) spec.record_every = record_override;
  if (tol_override >= 0) spec.tol = tol_override;
  if (seed_override >= 0) spec.base_seed = static_cast<std::uint64_t>(seed_override);
  mmx::validate(spec);
  mmx::ExperimentResult result = mmx::run_experiment(spec);
  for (const auto& rec : result.runs) {
    std::cout << rec.solver << " rep " << rec.repetition << " seed " << rec.seed << ": ";
    switch (rec.stats.status) {
      case mmx::RunStatus::Completed:
        std::cout << "completed " << rec.stats.iters_run << " iters";
        break;
      case mmx::RunStatus::EarlyStopped:
        std::cout << "reached tolerance after " << rec.stats.iters_run << " iters";
        break;
      case mmx::RunStatus::NonFinite:
        std::cout << "non-finite iterate at t=" << rec.stats.nonfinite_t
                  << " (trace flushed)";
        break;
    }
    std::cout << ", rel_grad " << mmx::format_double(rec.stats.final_rel_grad) << "\n";
  }
  std::cout << "summary: " << result.summary_path << "\n";
  for (const auto& rec : result.runs)
    if (rec.stats.status == mmx::RunStatus::NonFinite) return 2;
  return 0;
}

int cmd_check(std::uint64_t seed) {
  auto results = mmx::run_self_checks(seed);
  int failed = 0;
  for (const auto& r : results) {
    std::cout << (r.passed ? "[PASS] " : "[FAIL] ") << r.name;
    if (!r.passed && !r.detail.empty()) std::cout << " :: " << r.detail;
    std::cout << "\n";
    failed += r.passed ? 0 : 1;
  }
  std::cout << (results.size() - failed) << " / " << results.size() << " checks passed\n";
  return failed == 0 ? 0 : 1;
}

int cmd_report(std::vector<std::string> paths, const std::string& out_file) {
  for (auto& p : paths) {
    if (std::filesystem::is_directory(p)) p = (std::filesystem::path(p) / "summary.json").string();
  }
  std::string table = mmx::report_summaries(paths);
  std::cout << table;
  if (!out_file.empty()) {
    std::ofstream out(out_file, std::ios::binary);
    if (!out) {
      std::cerr << "cannot write " << out_file << "\n";
      return 1;
    }
    out << table;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"minimax optimization over matrix manifolds via exact penalty"};
  app.require_subcommand(1);

  auto* gen = app.add_subcommand("generate", "write a quadratic benchmark instance as JSON");
  mmx::Index gen_m = 50, gen_n = 50;
  double gen_L = 5.0, gen_mu = 0.0;
  std::uint64_t gen_seed = 0;
  std::string gen_out = ".";
  gen->add_option("--m", gen_m, "primal dimension");
  gen->add_option("--n", gen_n, "dual dimension");
  gen->add_option("--L", gen_L, "target spectral norm of Q");
  gen->add_option("--mu-y", gen_mu, "dual strong concavity (0: ball-constrained dual)");
  gen->add_option("--seed", gen_seed, "instance seed");
  gen->add_option("--out", gen_out, "output directory");

  auto* runc = app.add_subcommand("run", "execute an experiment configuration");
  std::string run_config, run_out;
  int run_jobs = 0;
  long run_record = 0;
  double run_tol = -1;
  std::int64_t run_seed = -1;
  runc->add_option("--config", run_config, "experiment JSON file")->required();
  runc->add_option("--out", run_out, "output directory (overrides the config)");
  runc->add_option("--jobs", run_jobs, "max concurrent runs");
  runc->add_option("--record-every", run_record, "recording stride");
  runc->add_option("--tol", run_tol, "early-stop residual tolerance");
  runc->add_option("--seed", run_seed, "base seed (overrides the config)");

  auto* chk = app.add_subcommand("check", "run the built-in invariant and oracle battery");
  std::uint64_t chk_seed = 12345;
  chk->add_option("--seed", chk_seed, "seed for the randomized checks");

  auto* rep = app.add_subcommand("report", "aggregate summaries into a comparison table");
  std::vector<std::string> rep_paths;
  std::string rep_out;
  rep->add_option("paths", rep_paths, "summary.json files or experiment directories")
      ->required();
  rep->add_option("--out", rep_out, "also write the table to this CSV file");

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen->parsed()) return cmd_generate(gen_m, gen_n, gen_L, gen_mu, gen_seed, gen_out);
    if (runc->parsed())
      return cmd_run(run_config, run_out, run_jobs, run_record, run_tol, run_seed);
    if (chk->parsed()) return cmd_check(chk_seed);
    if (rep->parsed()) return cmd_report(rep_paths, rep_out);
  } catch (const std::invalid_argument& e) {
    std::cerr << "configuration error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
