#include "twbreather/cli.hpp"

#include <cstdlib>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"

#include "twbreather/config.hpp"
#include "twbreather/ensemble.hpp"
#include "twbreather/errors.hpp"
#include "twbreather/oracle.hpp"
#include "twbreather/series_io.hpp"

#ifndef TWB_VERSION
#define TWB_VERSION "unknown"
#endif

namespace twb {

namespace {

struct CommonOptions {
  std::string config_path;
  std::vector<std::string> overrides;
  std::string output_dir;
  std::uint64_t seed = 0;
  bool seed_given = false;
  int workers = 0;
  bool deterministic = false;
  bool quiet = false;
};

void add_common(CLI::App* cmd, CommonOptions& o) {
  cmd->add_option("--config", o.config_path, "key = value run configuration file");
  cmd->add_option("--set", o.overrides, "override a config key, e.g. --set n_traj=2000")->type_name("KEY=VALUE");
  cmd->add_option("--output-dir", o.output_dir, "directory for CSV outputs and manifest");
  cmd->add_option_function<std::uint64_t>(
         "--seed", [&o](const std::uint64_t& s) { o.seed = s, o.seed_given = true; }, "master seed")
      ->type_name("UINT");
  cmd->add_option("--workers", o.workers, "worker threads (default: TWB_WORKERS or all cores)");
  cmd->add_flag("--deterministic", o.deterministic, "fixed-order reduction (byte-identical outputs)");
  cmd->add_flag("-q,--quiet", o.quiet, "suppress progress output");
}

RunConfig resolve(const CommonOptions& o) {
  std::vector<std::string> overrides = o.overrides;
  if (!o.output_dir.empty()) overrides.push_back("output_dir=" + o.output_dir);
  if (o.seed_given) overrides.push_back("master_seed=" + std::to_string(o.seed));
  if (o.deterministic) overrides.push_back("deterministic_reduction=true");
  RunConfig cfg = o.config_path.empty() ? default_config(overrides) : load_config(o.config_path, overrides);
  int workers = o.workers;
  if (workers == 0) {
    if (const char* env = std::getenv("TWB_WORKERS")) workers = std::atoi(env);
  }
  if (workers < 0) throw ConfigError("--workers must be non-negative");
  cfg.plan.workers = workers;
  return cfg;
}

nlohmann::ordered_json manifest(const std::string& command, const RunConfig& cfg, const ObservableSeries& s) {
  nlohmann::ordered_json j;
  j["format"] = "twbreather-manifest";
  j["version"] = 1;
  j["code_version"] = TWB_VERSION;
  j["command"] = command;
  j["config"] = config_to_json(cfg);
  j["dt"] = cfg.plan.stepper.dt;
  j["grid"] = {{"M", cfg.plan.M},
               {"L", cfg.plan.L},
               {"dz", cfg.plan.L / static_cast<double>(cfg.plan.M)},
               {"mode", to_string(cfg.plan.grid_mode)}};
  j["workers"] = cfg.plan.workers;
  j["trajectories"] = {{"requested", s.requested}, {"completed", s.completed}, {"aborted", s.aborted}};
  j["abort_reasons"] = s.abort_reasons;
  j["ordering"] = s.ordering == Ordering::symmetric ? "symmetric-to-normal" : "classical";
  j["mu_correction"] = "full";
  j["com_variance"] = s.ordering == Ordering::symmetric ? "ordering-corrected first moment" : "classical";
  j["wall_seconds"] = s.wall_seconds;
  return j;
}

int do_run(const std::string& command, const CommonOptions& o, std::ostream& out, std::ostream& err) {
  RunConfig cfg = resolve(o);
  if (!o.quiet) cfg.plan.progress = &err;
  const ObservableSeries s = command == "meanfield" ? run_meanfield(cfg.plan) : run_ensemble(cfg.plan);
  const auto files = write_series(s, cfg.output_dir, cfg.outputs);
  const std::filesystem::path man = std::filesystem::path(cfg.output_dir) / "manifest.json";
  write_text_file(man, manifest(command, cfg, s).dump(2) + "\n");
  out << command << ": " << s.completed << " trajectories (" << s.aborted << " aborted) in " << s.wall_seconds
      << " s\n";
  for (const auto& f : files) out << "  wrote " << f.string() << '\n';
  out << "  wrote " << man.string() << '\n';
  return kExitOk;
}

int do_converge(const CommonOptions& o, int pairs, std::ostream& out) {
  RunConfig cfg = resolve(o);
  const ConvergenceReport r = convergence_check(cfg.plan, pairs);
  nlohmann::ordered_json j;
  j["dts"] = r.dts;
  j["discrepancies"] = r.discrepancies;
  j["fitted_order"] = r.fitted_order;
  j["tolerance"] = r.tolerance;
  j["passed"] = r.passed;
  out.precision(6);
  out << "step-doubling convergence on n(0,t), " << pairs << " paired trajectories\n";
  for (std::size_t i = 0; i < r.discrepancies.size(); ++i) {
    out << "  dt=" << r.dts[i] << " vs dt/2: max relative discrepancy " << r.discrepancies[i] << '\n';
  }
  out << "  fitted order " << r.fitted_order << "\n  " << (r.passed ? "PASS" : "FAIL") << " (tolerance "
      << r.tolerance << ")\n";
  std::filesystem::create_directories(cfg.output_dir);
  write_text_file(std::filesystem::path(cfg.output_dir) / "convergence.json", j.dump(2) + "\n");
  return r.passed ? kExitOk : kExitCheckFailed;
}

std::string schema_text() {
  std::ostringstream s;
  s << "config keys:";
  for (auto k : known_keys()) s << ' ' << k;
  s << "\noutputs:";
  for (Output o : {Output::density_map, Output::center_density, Output::mu, Output::eigenvalues,
                   Output::invariants, Output::com, Output::g1_matrix}) {
    s << ' ' << output_name(o);
  }
  s << '\n';
  return s.str();
}

int exit_code_for(ErrorCategory c) {
  switch (c) {
    case ErrorCategory::config:
    case ErrorCategory::usage: return kExitUsage;
    case ErrorCategory::io: return kExitIo;
    default: return kExitRuntime;
  }
}

}  // namespace

int cli_main(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Truncated-Wigner simulation of attractive 1D Bose gas breathers", "twb"};
  app.require_subcommand(1);
  app.set_version_flag("--version", TWB_VERSION);

  CommonOptions run_opts, mf_opts, conv_opts;
  int pairs = 8;
  double alpha2 = 2, dz = 1;
  auto* run = app.add_subcommand("run", "run a truncated-Wigner ensemble");
  add_common(run, run_opts);
  auto* mf = app.add_subcommand("meanfield", "run the noise-free mean-field companion");
  add_common(mf, mf_opts);
  auto* conv = app.add_subcommand("converge", "step-doubling convergence report");
  add_common(conv, conv_opts);
  conv->add_option("--pairs", pairs, "paired trajectories per step size")->check(CLI::PositiveNumber);
  auto* oracle = app.add_subcommand("oracle", "single-mode ordering-correction self-test");
  oracle->add_option("--alpha2", alpha2, "coherent-state occupation |alpha|^2");
  oracle->add_option("--dz", dz, "lattice spacing")->check(CLI::PositiveNumber);

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  if (!reversed.empty()) reversed.pop_back();
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help() << schema_text();
    return kExitOk;
  } catch (const CLI::CallForVersion&) {
    out << TWB_VERSION << '\n';
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "twb: error[usage]: " << e.what() << '\n' << app.help() << schema_text();
    return kExitUsage;
  }

  try {
    if (*run) return do_run("run", run_opts, out, err);
    if (*mf) return do_run("meanfield", mf_opts, out, err);
    if (*conv) return do_converge(conv_opts, pairs, out);
    if (*oracle) {
      const SingleModeOracle r = run_single_mode_oracle(alpha2, dz);
      print_oracle(out, r);
      return r.passed ? kExitOk : kExitCheckFailed;
    }
  } catch (const Error& e) {
    err << "twb: error[" << to_string(e.category()) << "]: " << e.what() << '\n';
    if (e.category() == ErrorCategory::config) err << schema_text();
    return exit_code_for(e.category());
  } catch (const std::filesystem::filesystem_error& e) {
    err << "twb: error[io]: " << e.what() << '\n';
    return kExitIo;
  } catch (const std::exception& e) {
    err << "twb: error[internal]: " << e.what() << '\n';
    return kExitRuntime;
  }
  return kExitUsage;
}

int cli_main(int argc, char** argv) {
  std::vector<std::string> args(argv, argv + argc);
  return cli_main(args, std::cout, std::cerr);
}

}  // namespace twb
