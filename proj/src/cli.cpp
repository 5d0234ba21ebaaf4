#include "semiiv/cli.hpp"

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <memory>
#include <numeric>
#include <sstream>

#include <CLI11.hpp>

#include "semiiv/dataset.hpp"
#include "semiiv/error.hpp"
#include "semiiv/report.hpp"
#include "semiiv/rng.hpp"
#include "semiiv/simgen.hpp"

namespace semiiv::cli {

namespace {

constexpr const char* kBicNote =
    "# absolute BIC values are implementation-dependent (smoother internals); signs and decision rates are the "
    "reproduction target";

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream file(path, std::ios::binary);
  if (!file) throw InputError("cannot open '" + path + "' for writing");
  file << content;
  file.flush();
  if (!file) throw InputError("write to '" + path + "' failed");
}

std::optional<BootstrapOptions> bootstrap_options(const RunConfig& cfg) {
  if (cfg.bootstrap_replicates == 0) return std::nullopt;
  BootstrapOptions opts;
  opts.replicates = cfg.bootstrap_replicates;
  opts.seed = cfg.bootstrap_seed;
  return opts;
}

// Writes the report in the requested format; when it goes to a file, a text
// summary is also printed.
template <typename Report>
void emit(const RunConfig& cfg, const Report& report, std::ostream& out) {
  const auto json = to_json(report, cfg.test);
  std::string body;
  switch (cfg.format) {
    case OutputFormat::Json: body = dump_report(json); break;
    case OutputFormat::Text: body = render_text(report); break;
    case OutputFormat::Csv: body = render_csv(json); break;
  }
  if (cfg.output.empty() || cfg.output == "-") {
    out << body;
  } else {
    write_text_file(cfg.output, body);
    out << render_text(report);
  }
}

template <typename Fn>
int guarded(std::ostream& err, Fn&& fn) {
  try {
    return fn();
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitError;
  }
}

Dataset load(const RunConfig& cfg) {
  if (cfg.input.empty()) throw InputError("no input file given");
  return read_csv_file(cfg.input);
}

std::string bic_cell(const ModelScore& s) { return s.exact() ? "exact" : format_double(*s.bic); }

double mean(const std::vector<double>& v) {
  return v.empty() ? 0.0 : std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double median(std::vector<double> v) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const std::size_t m = v.size() / 2;
  return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

struct Table1Run {
  ModelScore backfit_additive;
  ConvergenceRecord backfit_convergence;
  ModelScore direct_additive;
  ModelScore surface;
  bool direct_accept = false;
  std::string error;
};

struct Table2Run {
  std::optional<double> statistic;
  bool accepted = false;
  bool weak = false;
  std::string error;
};

// Runs jobs in parallel, each writing only its own slot.
template <typename Job>
void parallel_jobs(std::size_t count, Job&& job) {
#pragma omp parallel for schedule(dynamic, 1)
  for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(count); ++i) job(static_cast<std::size_t>(i));
}

void reproduce_table1(const ReproduceConfig& cfg, std::ostream& summary_out, std::ostream& runs_out) {
  const std::size_t reps = cfg.table1_replications;
  const std::size_t cells = cfg.table1_sizes.size() * 2;
  std::vector<Table1Run> runs(cells * reps);
  parallel_jobs(runs.size(), [&](std::size_t job) {
    const std::size_t cell = job / reps, rep = job % reps;
    const std::size_t n = cfg.table1_sizes[cell / 2];
    const double c = (cell % 2 == 0) ? 0.0 : 1.0;
    // Both models share the seed, hence Z, e_x, X and e_y.
    const auto seed = derive_seed(cfg.seed, 1000 + n, rep);
    auto& run = runs[job];
    try {
      const auto sample = gen_single_instrument(c, n, seed);
      const auto z = sample.observed.column("Z");
      const auto x = sample.observed.column("X");
      const auto y = sample.observed.column("Y");
      const auto cf = control_function_residual(z, x, cfg.test.smoother);
      TestConfig backfit = cfg.test;
      backfit.additive.engine = AdditiveEngine::Backfitting;
      TestConfig direct = cfg.test;
      direct.additive.engine = AdditiveEngine::DirectLeastSquares;
      const auto a = additivity_test(z, x, y, cf, backfit);
      const auto d = additivity_test(z, x, y, cf, direct);
      run.backfit_additive = a.additive;
      run.backfit_convergence = a.convergence;
      run.direct_additive = d.additive;
      run.surface = a.surface;
      run.direct_accept = d.accepted;
    } catch (const std::exception& e) {
      run.error = e.what();
    }
  });

  runs_out << kBicNote << '\n'
           << "n,model,replicate,seed,gam_bic_backfit,backfit_converged,backfit_iterations,gam_bic_direct_ls,loess_bic,"
              "error\n";
  summary_out << kBicNote << '\n'
              << "n,model,replications,mean_gam_bic_backfit,mean_gam_bic_direct_ls,mean_loess_bic,"
                 "backfit_worse_rate,backfit_nonconverged,direct_ls_accept_rate,errors\n";
  for (std::size_t cell = 0; cell < cells; ++cell) {
    const std::size_t n = cfg.table1_sizes[cell / 2];
    const int model = static_cast<int>(cell % 2) + 1;
    std::vector<double> gam_b, gam_d, loess;
    std::size_t worse = 0, nonconv = 0, accept = 0, errors = 0;
    for (std::size_t rep = 0; rep < reps; ++rep) {
      const auto& r = runs[cell * reps + rep];
      runs_out << n << ',' << model << ',' << rep << ',' << derive_seed(cfg.seed, 1000 + n, rep) << ',';
      if (!r.error.empty()) {
        ++errors;
        runs_out << ",,,,," << std::quoted(r.error) << '\n';
        continue;
      }
      runs_out << bic_cell(r.backfit_additive) << ',' << (r.backfit_convergence.converged ? 1 : 0) << ','
               << r.backfit_convergence.iterations << ',' << bic_cell(r.direct_additive) << ','
               << bic_cell(r.surface) << ",\n";
      if (r.backfit_additive.bic) gam_b.push_back(*r.backfit_additive.bic);
      if (r.direct_additive.bic) gam_d.push_back(*r.direct_additive.bic);
      if (r.surface.bic) loess.push_back(*r.surface.bic);
      if (better_score(r.surface, r.backfit_additive)) ++worse;
      if (!r.backfit_convergence.converged) ++nonconv;
      if (r.direct_accept) ++accept;
    }
    const double ok = static_cast<double>(reps - errors);
    summary_out << n << ',' << model << ',' << reps << ',' << format_double(mean(gam_b)) << ','
                << format_double(mean(gam_d)) << ',' << format_double(mean(loess)) << ','
                << format_double(ok > 0 ? worse / ok : 0.0) << ',' << nonconv << ','
                << format_double(ok > 0 ? accept / ok : 0.0) << ',' << errors << '\n';
  }
}

void reproduce_table2(const ReproduceConfig& cfg, std::ostream& summary_out, std::ostream& runs_out) {
  const std::size_t reps = cfg.table2_replications;
  const std::size_t nc = cfg.table2_c.size();
  const std::size_t cells = cfg.table2_sizes.size() * nc;
  std::vector<Table2Run> runs(cells * reps);
  parallel_jobs(runs.size(), [&](std::size_t job) {
    const std::size_t cell = job / reps, rep = job % reps;
    const std::size_t n = cfg.table2_sizes[cell / nc];
    const double c = cfg.table2_c[cell % nc];
    const auto seed = derive_seed(cfg.seed, 2000 + n, rep);
    auto& run = runs[job];
    try {
      const auto sample = gen_double_instrument(c, n, seed);
      const auto& d = sample.observed;
      const auto r = linear_double_instrument_test(d.column("Z1"), d.column("Z2"), d.column("X"), d.column("Y"),
                                                   cfg.test);
      run.statistic = r.statistic;
      run.accepted = r.accepted;
      run.weak = r.weak_evidence;
    } catch (const std::exception& e) {
      run.error = e.what();
    }
  });

  runs_out << kBicNote << '\n' << "n,c,replicate,seed,bic_a_minus_bic_l,decision,weak_evidence,error\n";
  summary_out << kBicNote << '\n'
              << "n,c,replications,mean_bic_a_minus_bic_l,median_bic_a_minus_bic_l,accept_rate,reject_rate,"
                 "weak_evidence,errors\n";
  for (std::size_t cell = 0; cell < cells; ++cell) {
    const std::size_t n = cfg.table2_sizes[cell / nc];
    const double c = cfg.table2_c[cell % nc];
    std::vector<double> stats;
    std::size_t accept = 0, weak = 0, errors = 0;
    for (std::size_t rep = 0; rep < reps; ++rep) {
      const auto& r = runs[cell * reps + rep];
      runs_out << n << ',' << format_double(c) << ',' << rep << ',' << derive_seed(cfg.seed, 2000 + n, rep) << ',';
      if (!r.error.empty()) {
        ++errors;
        runs_out << ",,," << std::quoted(r.error) << '\n';
        continue;
      }
      runs_out << (r.statistic ? format_double(*r.statistic) : std::string("exact")) << ','
               << (r.accepted ? "accept" : "reject") << ',' << (r.weak ? 1 : 0) << ",\n";
      if (r.statistic) stats.push_back(*r.statistic);
      if (r.accepted) ++accept;
      if (r.weak) ++weak;
    }
    const double ok = static_cast<double>(reps - errors);
    summary_out << n << ',' << format_double(c) << ',' << reps << ',' << format_double(mean(stats)) << ','
                << format_double(median(stats)) << ',' << format_double(ok > 0 ? accept / ok : 0.0) << ','
                << format_double(ok > 0 ? (ok - accept) / ok : 0.0) << ',' << weak << ',' << errors << '\n';
  }
}

// String-valued option targets, converted after parsing so that bad values
// surface as input errors (exit 2) with the library's own messages.
struct TestOptionText {
  std::string kernel = "tricube";
  std::string engine = "direct-ls";
  std::string combine = "joint";
  std::string format = "json";
};

void add_test_options(CLI::App* cmd, RunConfig& cfg, TestOptionText& text) {
  cmd->add_option("-i,--input", cfg.input, "input CSV file")->required();
  cmd->add_option("--treatment", cfg.treatment, "treatment column")->capture_default_str();
  cmd->add_option("--outcome", cfg.outcome, "outcome column")->capture_default_str();
  cmd->add_option("--degree", cfg.test.smoother.degree, "local polynomial degree (0-2)")->capture_default_str();
  cmd->add_option("--span", cfg.test.smoother.span, "neighbourhood fraction in (0, 1]")->capture_default_str();
  cmd->add_option("--kernel", text.kernel, "tricube | uniform")->capture_default_str();
  cmd->add_option("--engine", text.engine, "additive engine: direct-ls | backfit")->capture_default_str();
  cmd->add_option("--basis-size", cfg.test.additive.basis_size, "B-spline functions per predictor (direct-ls)")
      ->capture_default_str();
  cmd->add_option("--tol", cfg.test.additive.backfit.tol, "backfitting tolerance")->capture_default_str();
  cmd->add_option("--max-iter", cfg.test.additive.backfit.max_iter, "backfitting sweep limit")->capture_default_str();
  cmd->add_option("--bootstrap", cfg.bootstrap_replicates, "measurability bootstrap replicates (0 = off, else >= 100)")
      ->capture_default_str();
  cmd->add_option("--bootstrap-seed", cfg.bootstrap_seed, "bootstrap seed")->capture_default_str();
  cmd->add_option("--alpha", cfg.test.alpha, "bootstrap level")->capture_default_str();
  cmd->add_option("-o,--output", cfg.output, "report file (default: stdout)");
  cmd->add_option("--format", text.format, "json | text | csv")->capture_default_str();
}

void apply_text(RunConfig& cfg, const TestOptionText& text) {
  cfg.test.smoother.kernel = parse_kernel(text.kernel);
  cfg.test.additive.engine = parse_engine(text.engine);
  cfg.test.additive.backfit.smoother = cfg.test.smoother;
  cfg.test.combine = parse_combine_mode(text.combine);
  if (text.format == "json") {
    cfg.format = OutputFormat::Json;
  } else if (text.format == "text") {
    cfg.format = OutputFormat::Text;
  } else if (text.format == "csv") {
    cfg.format = OutputFormat::Csv;
  } else {
    throw InputError("unknown format '" + text.format + "' (expected json, text or csv)");
  }
  if (!(cfg.test.alpha > 0.0 && cfg.test.alpha < 1.0)) throw InputError("alpha must lie in (0, 1)");
  if (cfg.test.additive.basis_size < 3) throw InputError("basis size must be at least 3");
  if (!(cfg.test.additive.backfit.tol > 0.0)) throw InputError("tol must be positive");
  if (cfg.test.additive.backfit.max_iter < 1) throw InputError("max-iter must be at least 1");
}

}  // namespace

int cmd_test_semi(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const auto data = load(cfg);
    StructuralRoles roles{cfg.instruments, cfg.treatment, cfg.outcome};
    const auto report = semi_instrument_test(data, roles, cfg.test, bootstrap_options(cfg));
    emit(cfg, report, out);
    return report.accepted ? kExitAccept : kExitReject;
  });
}

int cmd_test_double(const RunConfig& cfg, DoubleVariant variant, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const auto data = load(cfg);
    StructuralRoles roles{cfg.instruments, cfg.treatment, cfg.outcome};
    if (variant == DoubleVariant::Linear) {
      const auto report = linear_double_instrument_test(data, roles, cfg.test);
      emit(cfg, report, out);
      return report.accepted ? kExitAccept : kExitReject;
    }
    const auto report = double_instrument_test(data, roles, cfg.test, bootstrap_options(cfg));
    emit(cfg, report, out);
    return report.semi.accepted ? kExitAccept : kExitReject;
  });
}

int cmd_simulate(const SimulateConfig& cfg, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    GeneratedSample sample;
    if (cfg.model == "single") {
      sample = gen_single_instrument(cfg.c, cfg.n, cfg.seed);
    } else if (cfg.model == "double") {
      sample = gen_double_instrument(cfg.c, cfg.n, cfg.seed);
    } else {
      throw InputError("unknown model '" + cfg.model + "' (expected single or double)");
    }
    const Dataset data = cfg.with_truth ? sample.with_truth() : sample.observed;
    if (cfg.output.empty() || cfg.output == "-") {
      write_csv(out, data);
    } else {
      write_csv_file(cfg.output, data);
    }
    return 0;
  });
}

int cmd_reproduce_tables(const ReproduceConfig& cfg, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    if (cfg.output_dir.empty()) throw InputError("no output directory given");
    if (cfg.table1_replications == 0 && cfg.table2_replications == 0) throw InputError("nothing to reproduce");
    std::error_code ec;
    std::filesystem::create_directories(cfg.output_dir, ec);
    if (ec) throw InputError("cannot create '" + cfg.output_dir + "': " + ec.message());
    const std::filesystem::path dir(cfg.output_dir);

    if (cfg.table1_replications > 0 && !cfg.table1_sizes.empty()) {
      std::ostringstream summary, runs;
      reproduce_table1(cfg, summary, runs);
      write_text_file((dir / "table1.csv").string(), summary.str());
      write_text_file((dir / "table1_runs.csv").string(), runs.str());
      out << "table 1 (additive vs surface BIC, single-instrument models):\n" << summary.str() << '\n';
    }
    if (cfg.table2_replications > 0 && !cfg.table2_sizes.empty()) {
      std::ostringstream summary, runs;
      reproduce_table2(cfg, summary, runs);
      write_text_file((dir / "table2.csv").string(), summary.str());
      write_text_file((dir / "table2_runs.csv").string(), runs.str());
      out << "table 2 (BIC_a - BIC_l, linear double-instrument test):\n" << summary.str();
    }
    return 0;
  });
}

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Instrument admissibility tests for additive structural models"};
  app.require_subcommand(1);
  const char* env_config = std::getenv(kConfigEnv);
  app.set_config("--config", env_config ? env_config : "",
                 std::string("TOML/INI file with option defaults (default: $") + kConfigEnv + ")");

  RunConfig semi_cfg;
  semi_cfg.instruments = {"Z"};
  TestOptionText semi_text;
  std::string semi_instrument = "Z";
  auto* semi = app.add_subcommand("test-semi", "semi-instrument test of one candidate instrument");
  add_test_options(semi, semi_cfg, semi_text);
  semi->add_option("--instrument", semi_instrument, "candidate instrument column")->capture_default_str();

  RunConfig double_cfg;
  double_cfg.instruments = {"Z1", "Z2"};
  TestOptionText double_text;
  std::string variant = "linear";
  auto* dbl = app.add_subcommand("test-double", "double-instrument test of two candidate instruments");
  add_test_options(dbl, double_cfg, double_text);
  dbl->add_option("--instruments", double_cfg.instruments, "the two instrument columns")
      ->expected(2)
      ->delimiter(',')
      ->capture_default_str();
  dbl->add_option("--variant", variant, "linear | general")->capture_default_str();
  dbl->add_option("--combine", double_text.combine, "joint | marginal estimate of f1, f2")->capture_default_str();

  SimulateConfig sim_cfg;
  auto* sim = app.add_subcommand("simulate", "generate a dataset from a simulation model");
  sim->add_option("--model", sim_cfg.model, "single | double")->capture_default_str();
  sim->add_option("-c,--c", sim_cfg.c, "strength of the direct instrument effect on Y")->capture_default_str();
  sim->add_option("-n,--n", sim_cfg.n, "sample size")->required();
  sim->add_option("--seed", sim_cfg.seed, "random seed")->required();
  sim->add_option("-o,--output", sim_cfg.output, "output CSV (default: stdout)");
  sim->add_flag("--with-truth", sim_cfg.with_truth, "include latent T, eps_x, eps_y columns");

  ReproduceConfig rep_cfg;
  TestOptionText rep_text;
  auto* rep = app.add_subcommand("reproduce-tables", "rerun both simulation experiments and emit CSV tables");
  rep->add_option("--seed", rep_cfg.seed, "base seed")->required();
  rep->add_option("-o,--output-dir", rep_cfg.output_dir, "directory for the tables")->required();
  rep->add_option("--table1-replications", rep_cfg.table1_replications, "seeds per table-1 cell")
      ->capture_default_str();
  rep->add_option("--table2-replications", rep_cfg.table2_replications, "seeds per table-2 cell")
      ->capture_default_str();
  rep->add_option("--table1-sizes", rep_cfg.table1_sizes, "table-1 sample sizes")->delimiter(',')->capture_default_str();
  rep->add_option("--table2-sizes", rep_cfg.table2_sizes, "table-2 sample sizes")->delimiter(',')->capture_default_str();
  rep->add_option("--span", rep_cfg.test.smoother.span, "smoother span")->capture_default_str();
  rep->add_option("--degree", rep_cfg.test.smoother.degree, "smoother degree")->capture_default_str();
  rep->add_option("--basis-size", rep_cfg.test.additive.basis_size, "direct-ls basis size")->capture_default_str();
  rep->add_option("--max-iter", rep_cfg.test.additive.backfit.max_iter, "backfitting sweep limit")
      ->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : kExitError;
  }

  if (semi->parsed()) {
    semi_cfg.instruments = {semi_instrument};
    try {
      apply_text(semi_cfg, semi_text);
    } catch (const std::exception& e) {
      err << "error: " << e.what() << '\n';
      return kExitError;
    }
    return cmd_test_semi(semi_cfg, out, err);
  }
  if (dbl->parsed()) {
    try {
      apply_text(double_cfg, double_text);
      if (variant != "linear" && variant != "general") {
        throw InputError("unknown variant '" + variant + "' (expected linear or general)");
      }
    } catch (const std::exception& e) {
      err << "error: " << e.what() << '\n';
      return kExitError;
    }
    return cmd_test_double(double_cfg, variant == "linear" ? DoubleVariant::Linear : DoubleVariant::General, out, err);
  }
  if (sim->parsed()) return cmd_simulate(sim_cfg, out, err);
  rep_cfg.test.additive.backfit.smoother = rep_cfg.test.smoother;
  return cmd_reproduce_tables(rep_cfg, out, err);
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  std::vector<const char*> argv;
  argv.reserve(args.size() + 1);
  argv.push_back("semiiv");
  for (const auto& a : args) argv.push_back(a.c_str());
  return run(static_cast<int>(argv.size()), argv.data(), out, err);
}

}  // namespace semiiv::cli
