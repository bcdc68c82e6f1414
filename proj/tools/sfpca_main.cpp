#include <charconv>
#include <cstdint>
#include <iomanip>
#include <iostream>
#include <random>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "sfpca/dataset.hpp"
#include "sfpca/errors.hpp"
#include "sfpca/fit_pipeline.hpp"
#include "sfpca/io.hpp"
#include "sfpca/sampler.hpp"
#include "sfpca/simulate.hpp"

namespace {

using namespace sfpca;

struct Options {
  std::string data;
  std::string out = "sfpca_out";
  std::string fit_dir;
  std::string truth_path;
  std::string format = "csv";
  std::string pcs = "2";
  std::string knots = "1";
  int chains = 4;
  int warmup = 1000;
  int iters = 1000;
  int replicates = 100;
  int reps = 20;
  std::uint64_t seed = 0;
  bool with_noise = false;
  std::vector<std::string> subjects;
};

struct Range {
  int lo = 0, hi = 0;
};

int strict_int(const std::string& text, const char* what) {
  int v = 0;
  const auto res = std::from_chars(text.data(), text.data() + text.size(), v);
  if (res.ec != std::errc() || res.ptr != text.data() + text.size())
    throw ConfigError(std::string(what) + ": '" + text + "' is not an integer");
  return v;
}

Range parse_range(const std::string& text, const char* what) {
  const auto pos = text.find(':');
  if (pos == std::string::npos) {
    const int v = strict_int(text, what);
    return {v, v};
  }
  return {strict_int(text.substr(0, pos), what), strict_int(text.substr(pos + 1), what)};
}

std::uint64_t resolve_seed(const CLI::App* cmd, std::uint64_t given) {
  if (cmd->count("--seed") > 0) {
    std::cout << "seed: " << given << "\n";
    return given;
  }
  std::random_device rd;
  const std::uint64_t s = (static_cast<std::uint64_t>(rd()) << 32) | rd();
  std::cout << "seed: " << s << " (generated)\n";
  return s;
}

SamplerConfig sampler_config(const Options& o) {
  SamplerConfig config;
  config.chains = o.chains;
  config.warmup = o.warmup;
  config.iters = o.iters;
  return config;
}

ArtifactOptions artifact_options(const Options& o) {
  ArtifactOptions art;
  art.replicates = o.replicates;
  art.with_noise = o.with_noise;
  art.svg = o.format == "svg";
  return art;
}

void add_sampler_flags(CLI::App* cmd, Options& o) {
  cmd->add_option("--chains", o.chains, "MCMC chains")->capture_default_str();
  cmd->add_option("--warmup", o.warmup, "Warmup iterations per chain")->capture_default_str();
  cmd->add_option("--iters", o.iters, "Retained iterations per chain")->capture_default_str();
  cmd->add_option("--seed", o.seed, "RNG seed; generated and printed when absent");
}

void print_fit_summary(const FitResult& fit) {
  std::cout << "model " << fit.loo.label << ": q=" << fit.model.q()
            << ", subjects=" << fit.model.n_subjects()
            << ", observations=" << fit.model.n_total() << "\n";
  std::cout << std::fixed << std::setprecision(2) << "elppd " << fit.loo.elppd << " (se "
            << fit.loo.se << "), khat>0.7 for " << fit.loo.n_bad << " of "
            << fit.loo.khat.size() << " subjects\n";
  std::cout << std::setprecision(4);
  if (fit.convergence.rhat_available)
    std::cout << "max R-hat " << fit.convergence.max_rhat;
  else
    std::cout << "R-hat unavailable (needs >= 2 chains of >= 50 draws)";
  std::cout << ", min bulk ESS " << std::setprecision(0) << fit.convergence.min_ess
            << ", divergences " << fit.draws.total_divergences() << "\n";
  std::cout.unsetf(std::ios::fixed);
  std::cout << std::setprecision(6);
  if (!fit.convergence.flagged.empty()) {
    std::cout << "warning: R-hat > 1.01 for " << fit.convergence.flagged.size()
              << " parameter(s), e.g. " << fit.convergence.flagged.front() << "\n";
  }
  if (fit.draws.divergence_warning)
    std::cout << "warning: more than 10% of retained draws diverged\n";
}

int run_fit(const Options& o, const CLI::App* cmd) {
  const Range pr = parse_range(o.pcs, "--pcs");
  const Range kr = parse_range(o.knots, "--knots");
  if (pr.lo != pr.hi || kr.lo != kr.hi)
    throw ConfigError("fit takes single --pcs/--knots values; use select for ranges");

  SamplerConfig config = sampler_config(o);
  config.seed = resolve_seed(cmd, o.seed);

  const PreparedData prepared = prepare(load_csv(o.data));
  const FitResult fit = fit_model(prepared, pr.lo, kr.lo, config, o.data);

  ArtifactOptions art = artifact_options(o);
  art.trajectory_subjects = o.subjects;
  write_fit_artifacts(fit, o.out, art);

  print_fit_summary(fit);
  std::cout << "wrote " << o.out << "/fit.json\n";
  return fit.exit_status();
}

std::string csv_safe(std::string text) {
  for (char& c : text)
    if (c == ',' || c == '\n') c = ';';
  return text;
}

int run_select(const Options& o, const CLI::App* cmd) {
  const Range pr = parse_range(o.pcs, "--pcs");
  const Range kr = parse_range(o.knots, "--knots");

  SamplerConfig config = sampler_config(o);
  config.seed = resolve_seed(cmd, o.seed);

  const PreparedData prepared = prepare(load_csv(o.data));
  const SelectionResult sel =
      select_models(prepared, pr.lo, pr.hi, kr.lo, kr.hi, config, o.data);

  ensure_directory(o.out);
  const ArtifactOptions art = artifact_options(o);
  for (const CellResult& cell : sel.cells) {
    if (!cell.fit) continue;
    write_fit_artifacts(*cell.fit,
                        o.out + "/pcs" + std::to_string(cell.pcs) + "_knots" +
                            std::to_string(cell.knots),
                        art);
  }

  // One row per grid cell; ranked cells carry the comparison columns.
  std::vector<std::string> rank_of(sel.cells.size()), delta_of(sel.cells.size()),
      se_of(sel.cells.size()), tied_of(sel.cells.size());
  for (std::size_t r = 0; r < sel.table.rows.size(); ++r) {
    const int ci = sel.table_to_cell[r];
    rank_of[ci] = std::to_string(r + 1);
    delta_of[ci] = format_double(sel.table.rows[r].delta);
    se_of[ci] = format_double(sel.table.rows[r].se_delta);
    tied_of[ci] = sel.table.rows[r].tied ? "1" : "0";
  }
  std::string csv = "pcs,knots,status,rank,elppd,delta,se_delta,tied,n_bad,recommended,error\n";
  for (std::size_t ci = 0; ci < sel.cells.size(); ++ci) {
    const CellResult& cell = sel.cells[ci];
    const bool recommended =
        cell.ok && cell.pcs == sel.recommended_pcs && cell.knots == sel.recommended_knots;
    csv += csv_line({std::to_string(cell.pcs), std::to_string(cell.knots),
                     cell.ok ? "ok" : "failed", rank_of[ci],
                     cell.fit ? format_double(cell.fit->loo.elppd) : "", delta_of[ci],
                     se_of[ci], tied_of[ci],
                     cell.fit ? std::to_string(cell.fit->loo.n_bad) : "",
                     recommended ? "1" : "0", csv_safe(cell.error)});
    csv += '\n';
  }
  atomic_write(o.out + "/selection.csv", csv);

  std::cout << " pcs  knots      elppd      delta   se(delta)  n_bad  note\n";
  std::cout << std::fixed << std::setprecision(2);
  for (std::size_t r = 0; r < sel.table.rows.size(); ++r) {
    const ModelComparison& row = sel.table.rows[r];
    const CellResult& cell = sel.cells[sel.table_to_cell[r]];
    std::cout << std::setw(4) << cell.pcs << std::setw(7) << cell.knots << std::setw(11)
              << row.elppd << std::setw(11) << row.delta << std::setw(12) << row.se_delta
              << std::setw(7) << cell.fit->loo.n_bad << "  "
              << (r == 0 ? "best" : (row.tied ? "tied" : "")) << "\n";
  }
  std::cout.unsetf(std::ios::fixed);
  for (const CellResult& cell : sel.cells)
    if (!cell.ok)
      std::cout << "failed: pcs=" << cell.pcs << ", knots=" << cell.knots << " ("
                << cell.error << ")\n";
  std::cout << "recommended: pcs=" << sel.recommended_pcs
            << ", knots=" << sel.recommended_knots << "\n";
  std::cout << "wrote " << o.out << "/selection.csv\n";

  for (const CellResult& cell : sel.cells)
    if (cell.ok && cell.pcs == sel.recommended_pcs && cell.knots == sel.recommended_knots)
      return cell.fit->exit_status();
  return 0;
}

int run_diagnose(const Options& o) {
  const FitResult fit = load_fit(o.fit_dir);
  const std::string out = o.out.empty() ? o.fit_dir : o.out;
  write_diagnostics(fit, out, artifact_options(o));

  std::cout << "khat > 0.7 for " << fit.loo.n_bad << " of " << fit.loo.khat.size()
            << " subjects\n";
  for (int i : fit.loo.bad_units)
    std::cout << "flagged: " << fit.data.raw.subjects[i].id << " (khat "
              << std::setprecision(3) << fit.loo.khat(i) << ")\n";
  std::cout << "wrote " << out << "/khat.csv, " << out << "/ppc_density.csv\n";
  return fit.exit_status();
}

int run_predict(const Options& o) {
  const FitResult fit = load_fit(o.fit_dir);
  const std::string out = o.out.empty() ? o.fit_dir : o.out;
  const std::vector<std::string> subjects =
      o.subjects.empty() ? std::vector<std::string>{"all"} : o.subjects;
  write_trajectories(fit, out, subjects, artifact_options(o));
  const int written = subjects.front() == "all" ? fit.data.raw.n_subjects()
                                                : static_cast<int>(subjects.size());
  std::cout << "wrote " << written << " trajectory file(s) to " << out << "\n";
  return 0;
}

SimulationTruth load_truth(const Options& o) {
  if (o.truth_path.empty()) return default_truth();
  return truth_from_json_text(read_file(o.truth_path));
}

int run_simulate(const Options& o, const CLI::App* cmd) {
  SimulationTruth truth = load_truth(o);
  if (cmd->count("--seed") > 0) truth.seed = o.seed;

  const LongitudinalDataset data = generate(truth);
  ensure_directory(o.out);

  std::string csv = "subject_id,time,value\n";
  for (const SubjectRecord& s : data.subjects)
    for (int j = 0; j < s.n_obs(); ++j) {
      csv += csv_line({s.id, format_double(s.times(j)), format_double(s.values(j))});
      csv += '\n';
    }
  atomic_write(o.out + "/data.csv", csv);
  atomic_write(o.out + "/truth.json", truth_to_json_text(truth));

  const double realized =
      1.0 - static_cast<double>(data.n_total) / (static_cast<double>(truth.N) * truth.N_T);
  std::cout << "simulated " << data.n_subjects() << " subjects, " << data.n_total
            << " observations (" << std::setprecision(3) << 100.0 * realized
            << "% of candidate slots empty)\n";
  std::cout << "wrote " << o.out << "/data.csv, " << o.out << "/truth.json\n";
  return 0;
}

int run_run_grid(const Options& o, const CLI::App* cmd) {
  const SimulationTruth base = load_truth(o);

  std::vector<SimulationTruth> scenarios;
  std::vector<std::string> labels;
  for (const int n : {25, 50, 100}) {
    for (const double miss : {0.0, 0.8}) {
      SimulationTruth t = base;
      t.N = n;
      t.mu_T = std::max(1.0, (1.0 - miss) * t.N_T);
      t.validate();
      scenarios.push_back(std::move(t));
      labels.push_back("N=" + std::to_string(n) + ",miss=" +
                       std::to_string(static_cast<int>(100 * miss)) + "%");
    }
  }

  const std::uint64_t master = cmd->count("--seed") > 0 ? o.seed : base.seed;
  const GridResult grid = run_grid(scenarios, o.reps, sampler_config(o), master);

  ensure_directory(o.out);
  std::string csv =
      "scenario,rep,ok,error,mse_theta_mu,mse_theta,curve_mse_mean,curve_mse_fpc,"
      "band_coverage_mean,realized_missingness\n";
  for (const RepResult& row : grid.rows) {
    const RecoveryRecord& r = row.record;
    csv += csv_line({csv_safe(labels[row.scenario]), std::to_string(row.rep + 1),
                     row.ok ? "1" : "0", csv_safe(row.error),
                     row.ok ? format_double(r.mse_theta_mu) : "",
                     row.ok ? format_double(r.mse_theta) : "",
                     row.ok ? format_double(r.curve_mse_mean) : "",
                     row.ok ? format_double(r.curve_mse_fpc) : "",
                     row.ok ? format_double(r.band_coverage_mean) : "",
                     row.ok ? format_double(r.realized_missingness) : ""});
    csv += '\n';
  }
  atomic_write(o.out + "/sim_results.csv", csv);

  std::cout << "scenario            mse(mean)  mse(curves)  coverage\n";
  std::cout << std::fixed << std::setprecision(4);
  for (std::size_t si = 0; si < scenarios.size(); ++si) {
    const int s = static_cast<int>(si);
    std::cout << std::left << std::setw(20) << labels[si] << std::right;
    try {
      std::cout << std::setw(9) << grid.scenario_mean(s, &RecoveryRecord::curve_mse_mean)
                << std::setw(13) << grid.scenario_mean(s, &RecoveryRecord::curve_mse_fpc)
                << std::setw(10) << grid.scenario_mean(s, &RecoveryRecord::band_coverage_mean)
                << "\n";
    } catch (const ScoringError&) {
      std::cout << "  all replicates failed\n";
    }
  }
  std::cout.unsetf(std::ios::fixed);
  if (grid.failures > 0)
    std::cout << grid.failures << " of " << grid.rows.size() << " replicates failed\n";
  std::cout << "wrote " << o.out << "/sim_results.csv\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Sparse functional principal components for irregular longitudinal data"};
  app.require_subcommand(1);
  app.set_config("--config", "", "key=value config file; command-line flags take precedence");

  Options o;

  CLI::App* fit = app.add_subcommand("fit", "Fit one model and write its artifact directory");
  fit->add_option("--data", o.data, "Long-format CSV (subject_id,time,value)")->required();
  fit->add_option("--pcs", o.pcs, "Number of principal components")->capture_default_str();
  fit->add_option("--knots", o.knots, "Number of internal spline knots")->capture_default_str();
  add_sampler_flags(fit, o);
  fit->add_option("--out", o.out, "Output directory")->capture_default_str();
  fit->add_option("--replicates", o.replicates, "Posterior predictive replicates")
      ->capture_default_str();
  fit->add_option("--subject", o.subjects,
                  "Also write this subject's trajectory file (repeatable; 'all')");
  fit->add_flag("--with-noise", o.with_noise, "Trajectory bands include measurement noise");
  fit->add_option("--format", o.format, "Artifact format")
      ->check(CLI::IsMember({"csv", "svg"}))
      ->capture_default_str();

  CLI::App* select = app.add_subcommand(
      "select", "Fit a (pcs x knots) grid and recommend a model by predictive fit");
  select->add_option("--data", o.data, "Long-format CSV (subject_id,time,value)")->required();
  select->add_option("--pcs", o.pcs, "PC count or A:B range")->capture_default_str();
  select->add_option("--knots", o.knots, "Knot count or A:B range")->capture_default_str();
  add_sampler_flags(select, o);
  select->add_option("--out", o.out, "Output directory")->capture_default_str();
  select->add_option("--replicates", o.replicates, "Posterior predictive replicates per cell")
      ->capture_default_str();
  select->add_option("--format", o.format, "Artifact format")
      ->check(CLI::IsMember({"csv", "svg"}))
      ->capture_default_str();

  CLI::App* diagnose =
      app.add_subcommand("diagnose", "Importance-sampling and posterior predictive checks");
  diagnose->add_option("--fit", o.fit_dir, "Existing fit directory")->required();
  diagnose->add_option("--out", o.out, "Output directory (default: the fit directory)")
      ->default_val("");
  diagnose->add_option("--replicates", o.replicates, "Posterior predictive replicates")
      ->capture_default_str();
  diagnose->add_flag("--with-noise", o.with_noise,
                     "Flagged-subject bands include measurement noise");
  diagnose->add_option("--format", o.format, "Artifact format")
      ->check(CLI::IsMember({"csv", "svg"}))
      ->capture_default_str();

  CLI::App* predict =
      app.add_subcommand("predict", "Subject trajectory bands from an existing fit");
  predict->add_option("--fit", o.fit_dir, "Existing fit directory")->required();
  predict->add_option("--subject", o.subjects, "Subject id (repeatable; default all)");
  predict->add_flag("--with-noise", o.with_noise, "Bands include measurement noise");
  predict->add_option("--out", o.out, "Output directory (default: the fit directory)")
      ->default_val("");
  predict->add_option("--format", o.format, "Artifact format")
      ->check(CLI::IsMember({"csv", "svg"}))
      ->capture_default_str();

  CLI::App* simulate =
      app.add_subcommand("simulate", "Draw one synthetic dataset from a truth scenario");
  simulate->add_option("--truth", o.truth_path, "Truth JSON (default: built-in scenario)");
  simulate->add_option("--seed", o.seed, "Overrides the truth seed");
  simulate->add_option("--out", o.out, "Output directory")->capture_default_str();

  CLI::App* grid = app.add_subcommand(
      "run-grid", "Simulation study over N x missingness scenarios");
  grid->add_option("--truth", o.truth_path, "Base truth JSON (default: built-in scenario)");
  grid->add_option("--reps", o.reps, "Replicates per scenario")->capture_default_str();
  add_sampler_flags(grid, o);
  grid->add_option("--out", o.out, "Output directory")->capture_default_str();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*fit) return run_fit(o, fit);
    if (*select) return run_select(o, select);
    if (*diagnose) return run_diagnose(o);
    if (*predict) return run_predict(o);
    if (*simulate) return run_simulate(o, simulate);
    if (*grid) return run_run_grid(o, grid);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
