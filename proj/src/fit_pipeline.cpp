#include "sfpca/fit_pipeline.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "sfpca/errors.hpp"
#include "sfpca/io.hpp"
#include "sfpca/predict.hpp"
#include "sfpca/rng.hpp"
#include "sfpca/stats.hpp"
#include "sfpca/svg.hpp"

namespace sfpca {
namespace {

using nlohmann::ordered_json;

// Derivation streams for artifact-level randomness, kept clear of the
// sampler's chain streams and the exact-LOO refit streams.
constexpr std::uint64_t kPpcStream = 9100;
constexpr std::uint64_t kTrajectoryStream = 9200;

std::string join(const std::string& dir, const std::string& name) {
  if (dir.empty()) return name;
  if (dir.back() == '/') return dir + name;
  return dir + "/" + name;
}

std::string cell_label(int pcs, int knots) {
  return "pcs=" + std::to_string(pcs) + ",knots=" + std::to_string(knots);
}

void validate_cell(int pcs, int knots) {
  if (pcs < 1) throw ConfigError("pcs must be >= 1, got " + std::to_string(pcs));
  if (knots < 0) throw ConfigError("knots must be >= 0, got " + std::to_string(knots));
  const int q = knots + 4;
  if (pcs >= q)
    throw ConfigError("model requires pcs < knots + 4 (components must be fewer than basis "
                      "functions): " +
                      cell_label(pcs, knots) + " gives k=" + std::to_string(pcs) +
                      " >= q=" + std::to_string(q));
}

// Everything derived from (model, draws): diagnostics, rotation, pointwise
// log-likelihood, LOO and the posterior mean coefficients. Shared between a
// fresh fit and a reload from disk.
void finalize_fit(FitResult& fit) {
  fit.convergence = diagnose(fit.draws, fit.model.parameter_names());

  const int S = fit.draws.total_draws();
  const int N = fit.model.n_subjects();
  std::vector<Eigen::MatrixXd> Thetas(S), alphas(S);
  fit.loglik.resize(S, N);
  for (int s = 0; s < S; ++s) {
    const Eigen::VectorXd x = fit.draws.draws.row(s).transpose();
    const ParameterVector p = fit.model.unpack(x);
    Thetas[s] = p.Theta;
    alphas[s] = p.alpha;
    fit.loglik.row(s) = fit.model.pointwise_loglik(x).transpose();
  }
  fit.rotated = align_draws(Thetas, alphas);

  fit.loo = compute_loo(fit.loglik);
  fit.loo.label = cell_label(fit.pcs, fit.knots);
  fit.loo.n_pcs = fit.pcs;
  fit.loo.n_knots = fit.knots;

  fit.theta_mu_mean = fit.draws.draws.leftCols(fit.model.q()).colwise().mean().transpose();
}

FitResult fit_with_basis(const PreparedData& data, const OrthonormalBasis& basis, int pcs,
                         int knots, const SamplerConfig& config, const std::string& data_path) {
  FitResult fit{SfpcaModel(basis, data.model_data, pcs)};
  fit.pcs = pcs;
  fit.knots = knots;
  fit.data_path = data_path;
  fit.config = config;
  fit.data = data;
  fit.draws = nuts_sample(fit.model, config);
  finalize_fit(fit);
  return fit;
}

std::vector<double> to_std(const Eigen::VectorXd& v) {
  return std::vector<double>(v.data(), v.data() + v.size());
}

}  // namespace

PreparedData prepare(const LongitudinalDataset& raw) {
  PreparedData out;
  out.raw = raw;
  out.raw.validate();
  auto [standardized, st] = standardize(rescale_time(out.raw));
  out.model_data = std::move(standardized);
  out.standardization = st;
  return out;
}

FitResult fit_model(const PreparedData& data, int pcs, int knots, const SamplerConfig& config,
                    const std::string& data_path) {
  validate_cell(pcs, knots);
  config.validate();
  const OrthonormalBasis basis(place_knots(data.model_data.pooled_times(), knots));
  return fit_with_basis(data, basis, pcs, knots, config, data_path);
}

SelectionResult select_models(const PreparedData& data, int pcs_lo, int pcs_hi, int knots_lo,
                              int knots_hi, const SamplerConfig& config,
                              const std::string& data_path) {
  if (pcs_lo > pcs_hi || knots_lo > knots_hi)
    throw ConfigError("empty selection grid: pcs " + std::to_string(pcs_lo) + ":" +
                      std::to_string(pcs_hi) + ", knots " + std::to_string(knots_lo) + ":" +
                      std::to_string(knots_hi));
  for (int kn = knots_lo; kn <= knots_hi; ++kn)
    for (int p = pcs_lo; p <= pcs_hi; ++p) validate_cell(p, kn);
  config.validate();

  SelectionResult out;
  std::vector<LooReport> reports;
  std::vector<int> report_cell;
  for (int kn = knots_lo; kn <= knots_hi; ++kn) {
    const OrthonormalBasis basis(place_knots(data.model_data.pooled_times(), kn));
    for (int p = pcs_lo; p <= pcs_hi; ++p) {
      CellResult cell;
      cell.pcs = p;
      cell.knots = kn;
      SamplerConfig cell_config = config;
      cell_config.seed =
          derive_seed(config.seed, 1000 + 64 * static_cast<std::uint64_t>(p) + kn);
      try {
        FitResult fit = fit_with_basis(data, basis, p, kn, cell_config, data_path);
        cell.ok = !fit.draws.divergence_warning;
        if (!cell.ok) cell.error = "divergences exceeded 10% of retained draws";
        cell.fit = std::move(fit);
      } catch (const std::exception& e) {
        cell.error = e.what();
      }
      if (cell.ok) {
        reports.push_back(cell.fit->loo);
        report_cell.push_back(static_cast<int>(out.cells.size()));
      }
      out.cells.push_back(std::move(cell));
    }
  }
  if (reports.empty()) throw ComparisonError("every grid cell failed; nothing to compare");

  out.table = compare_models(reports);
  out.table_to_cell.reserve(out.table.rows.size());
  for (const ModelComparison& row : out.table.rows)
    out.table_to_cell.push_back(report_cell[row.index]);
  const LooReport& pick = reports[out.table.recommended_index];
  out.recommended_pcs = pick.n_pcs;
  out.recommended_knots = pick.n_knots;
  return out;
}

namespace {

ordered_json fit_json(const FitResult& fit) {
  ordered_json j;
  j["schema_version"] = 1;
  j["created_at"] = utc_timestamp();
  j["seed"] = fit.config.seed;

  ordered_json data;
  data["path"] = fit.data_path;
  data["n_subjects"] = fit.data.raw.n_subjects();
  data["n_total"] = fit.data.raw.n_total;
  data["time_range"] = {fit.data.raw.time_range.first, fit.data.raw.time_range.second};
  data["standardization"] = {{"mean", fit.data.standardization.mean},
                             {"sd", fit.data.standardization.sd}};
  j["data"] = std::move(data);

  ordered_json model;
  model["pcs"] = fit.pcs;
  model["knots"] = fit.knots;
  model["q"] = fit.model.q();
  model["internal_knots"] = fit.model.basis().internal_knots();
  j["model"] = std::move(model);

  ordered_json sampler;
  sampler["chains"] = fit.config.chains;
  sampler["warmup"] = fit.config.warmup;
  sampler["iters"] = fit.config.iters;
  sampler["target_accept"] = fit.config.target_accept;
  sampler["max_treedepth"] = fit.config.max_treedepth;
  sampler["divergences"] = fit.draws.total_divergences();
  sampler["divergence_warning"] = fit.draws.divergence_warning;
  ordered_json chains = ordered_json::array();
  for (const ChainStats& cs : fit.draws.chain_stats) {
    ordered_json c;
    c["step_size"] = cs.step_size;
    c["mean_accept"] = cs.mean_accept;
    c["divergences"] = cs.divergences;
    c["treedepth_hits"] = cs.treedepth_hits;
    chains.push_back(std::move(c));
  }
  sampler["chain_stats"] = std::move(chains);
  j["sampler"] = std::move(sampler);

  ordered_json conv;
  conv["rhat_available"] = fit.convergence.rhat_available;
  conv["max_rhat"] = fit.convergence.max_rhat;
  conv["min_ess"] = fit.convergence.min_ess;
  conv["flagged"] = fit.convergence.flagged;
  j["convergence"] = std::move(conv);

  ordered_json rot;
  rot["n_excluded"] = fit.rotated.n_excluded;
  rot["variance_explained"] = to_std(fit.rotated.mean_variance_explained);
  rot["eigenvalue_share"] = to_std(fit.rotated.mean_eigenvalue_share);
  j["rotation"] = std::move(rot);

  ordered_json loo;
  loo["elppd"] = fit.loo.elppd;
  loo["se"] = fit.loo.se;
  loo["S"] = fit.loo.S;
  loo["M"] = fit.loo.M;
  loo["n_bad"] = fit.loo.n_bad;
  loo["bad_units"] = fit.loo.bad_units;
  loo["khat"] = to_std(fit.loo.khat);
  loo["pointwise"] = to_std(fit.loo.pointwise);
  j["loo"] = std::move(loo);

  j["exit_status"] = fit.exit_status();
  return j;
}

void write_draws_csv(const FitResult& fit, const std::string& path) {
  std::vector<std::string> header = fit.model.parameter_names();
  header.push_back("lp__");
  const int S = fit.draws.total_draws();
  const int D = fit.model.dim();
  std::string out;
  out.reserve(static_cast<std::size_t>(S + 1) * (D + 1) * 12);
  out += csv_line(header);
  out += '\n';
  std::vector<std::string> fields(D + 1);
  for (int s = 0; s < S; ++s) {
    for (int d = 0; d < D; ++d) fields[d] = format_double(fit.draws.draws(s, d));
    fields[D] = format_double(fit.draws.lp(s));
    out += csv_line(fields);
    out += '\n';
  }
  atomic_write(path, out);
}

void write_convergence_csv(const FitResult& fit, const std::string& path) {
  std::string out = "parameter,rhat,ess_bulk,degenerate\n";
  for (const ParameterDiagnostic& p : fit.convergence.parameters) {
    out += csv_line({p.name, format_double(p.rhat), format_double(p.ess_bulk),
                     p.degenerate ? "1" : "0"});
    out += '\n';
  }
  atomic_write(path, out);
}

void write_khat_csv(const FitResult& fit, const std::string& path) {
  std::string out = "subject_id,khat\n";
  for (int i = 0; i < fit.data.raw.n_subjects(); ++i) {
    out += csv_line({fit.data.raw.subjects[i].id, format_double(fit.loo.khat(i))});
    out += '\n';
  }
  atomic_write(path, out);
}

void write_scores_csv(const FitResult& fit, const std::string& path) {
  const RotatedDraws& rot = fit.rotated;
  const int N = fit.model.n_subjects();
  const int k = fit.model.k();
  const int V = static_cast<int>(rot.draws.size());
  std::string out = "subject_id,component,score_mean,score_sd\n";
  std::vector<double> samples(V);
  for (int i = 0; i < N; ++i) {
    for (int j = 0; j < k; ++j) {
      for (int d = 0; d < V; ++d) samples[d] = rot.draws[d].alpha_star(i, j);
      const double sd = V > 1 ? stats::sample_sd(samples) : 0.0;
      out += csv_line({fit.data.raw.subjects[i].id, std::to_string(j + 1),
                       format_double(rot.mean_alpha_star(i, j)), format_double(sd)});
      out += '\n';
    }
  }
  atomic_write(path, out);
}

void write_mean_curve_csv(const CurveSet& curves, const std::string& path) {
  std::string out = "time,mean,lower,median,upper\n";
  for (int g = 0; g < curves.grid.size(); ++g) {
    out += csv_line({format_double(curves.time(g)), format_double(curves.mean_curve.mean(g)),
                     format_double(curves.mean_curve.lower(g)),
                     format_double(curves.mean_curve.median(g)),
                     format_double(curves.mean_curve.upper(g))});
    out += '\n';
  }
  atomic_write(path, out);
}

void write_pc_curves_csv(const CurveSet& curves, const std::string& path) {
  std::string out = "component,time,mean,lower,median,upper,overlay_plus,overlay_minus\n";
  for (std::size_t j = 0; j < curves.components.size(); ++j) {
    const CurveBand& band = curves.components[j];
    for (int g = 0; g < curves.grid.size(); ++g) {
      out += csv_line({std::to_string(j + 1), format_double(curves.time(g)),
                       format_double(band.mean(g)), format_double(band.lower(g)),
                       format_double(band.median(g)), format_double(band.upper(g)),
                       format_double(curves.overlay_plus[j](g)),
                       format_double(curves.overlay_minus[j](g))});
      out += '\n';
    }
  }
  atomic_write(path, out);
}

void write_ppc_csv(const PpcBundle& ppc, const std::string& path) {
  std::vector<std::string> header{"grid", "observed"};
  for (int r = 0; r < ppc.R; ++r) header.push_back("rep_" + std::to_string(r + 1));
  std::string out = csv_line(header);
  out += '\n';
  std::vector<std::string> fields(2 + ppc.R);
  for (int g = 0; g < ppc.grid.size(); ++g) {
    fields[0] = format_double(ppc.grid(g));
    fields[1] = format_double(ppc.observed(g));
    for (int r = 0; r < ppc.R; ++r) fields[2 + r] = format_double(ppc.replicates(r, g));
    out += csv_line(fields);
    out += '\n';
  }
  atomic_write(path, out);
}

std::string safe_token(const std::string& id) {
  std::string out = id;
  for (char& c : out)
    if (!std::isalnum(static_cast<unsigned char>(c)) && c != '-' && c != '_') c = '_';
  return out;
}

void write_trajectory_csv(const TrajectoryBand& traj, const std::string& path) {
  std::string out = "time,mean,lower,median,upper,obs_time,obs_value\n";
  const int G = static_cast<int>(traj.grid.size());
  const int n_obs = static_cast<int>(traj.obs_times.size());
  for (int g = 0; g < std::max(G, n_obs); ++g) {
    std::vector<std::string> fields(7);
    if (g < G) {
      fields[0] = format_double(traj.time(g));
      fields[1] = format_double(traj.band.mean(g));
      fields[2] = format_double(traj.band.lower(g));
      fields[3] = format_double(traj.band.median(g));
      fields[4] = format_double(traj.band.upper(g));
    }
    if (g < n_obs) {
      fields[5] = format_double(traj.obs_times(g));
      fields[6] = format_double(traj.obs_values(g));
    }
    out += csv_line(fields);
    out += '\n';
  }
  atomic_write(path, out);
}

void write_trajectory_svg(const TrajectoryBand& traj, const std::string& path) {
  PlotSpec spec;
  spec.title = "subject " + traj.subject_id;
  spec.x_label = "time";
  spec.y_label = "outcome";
  PlotSeries band;
  band.x = traj.time;
  band.y = traj.band.mean;
  band.band_low = traj.band.lower;
  band.band_high = traj.band.upper;
  spec.series.push_back(std::move(band));
  PlotSeries obs;
  obs.x = traj.obs_times;
  obs.y = traj.obs_values;
  obs.points = true;
  obs.color = "#333333";
  spec.series.push_back(std::move(obs));
  write_svg(path, spec);
}

void write_mean_curve_svg(const FitResult& fit, const CurveSet& curves, const std::string& path) {
  PlotSpec spec;
  spec.title = "population mean curve";
  spec.x_label = "time";
  spec.y_label = "outcome";
  PlotSeries band;
  band.x = curves.time;
  band.y = curves.mean_curve.mean;
  band.band_low = curves.mean_curve.lower;
  band.band_high = curves.mean_curve.upper;
  spec.series.push_back(std::move(band));
  PlotSeries obs;
  const std::vector<double> t = fit.data.raw.pooled_times();
  const std::vector<double> v = fit.data.raw.pooled_values();
  obs.x = Eigen::Map<const Eigen::VectorXd>(t.data(), t.size());
  obs.y = Eigen::Map<const Eigen::VectorXd>(v.data(), v.size());
  obs.points = true;
  obs.color = "#999999";
  spec.series.push_back(std::move(obs));
  write_svg(path, spec);
}

void write_pc_curves_svg(const CurveSet& curves, const std::string& path) {
  static const char* kPalette[] = {"#1f6fb4", "#d1495b", "#3a7d44", "#8e5aa3",
                                   "#c98a2b", "#46808c"};
  PlotSpec spec;
  spec.title = "principal component curves";
  spec.x_label = "time";
  spec.y_label = "component";
  spec.h_lines.push_back(0.0);
  for (std::size_t j = 0; j < curves.components.size(); ++j) {
    PlotSeries s;
    s.x = curves.time;
    s.y = curves.components[j].mean;
    s.color = kPalette[j % 6];
    spec.series.push_back(std::move(s));
  }
  write_svg(path, spec);
}

void write_ppc_svg(const PpcBundle& ppc, const std::string& path) {
  PlotSpec spec;
  spec.title = "posterior predictive outcome density";
  spec.x_label = "outcome (standardized)";
  spec.y_label = "density";
  const int shown = std::min(ppc.R, 60);
  for (int r = 0; r < shown; ++r) {
    PlotSeries s;
    s.x = ppc.grid;
    s.y = ppc.replicates.row(r).transpose();
    s.color = "#b8cfe0";
    s.width = 0.7;
    spec.series.push_back(std::move(s));
  }
  PlotSeries obs;
  obs.x = ppc.grid;
  obs.y = ppc.observed;
  obs.color = "#1a1a1a";
  obs.width = 2.0;
  spec.series.push_back(std::move(obs));
  write_svg(path, spec);
}

void write_khat_svg(const FitResult& fit, const std::string& path) {
  PlotSpec spec;
  spec.title = "importance-sampling tail shapes";
  spec.x_label = "subject index";
  spec.y_label = "khat";
  spec.h_lines.push_back(0.7);
  PlotSeries s;
  const int N = static_cast<int>(fit.loo.khat.size());
  s.x = Eigen::VectorXd::LinSpaced(N, 1.0, static_cast<double>(N));
  s.y = fit.loo.khat;
  s.points = true;
  spec.series.push_back(std::move(s));
  write_svg(path, spec);
}

void emit_trajectory(const FitResult& fit, int subject, const std::string& out_dir,
                     const ArtifactOptions& options) {
  const TrajectoryBand traj = subject_trajectory(
      fit.model, fit.draws, fit.data.model_data, fit.data.standardization, subject,
      options.grid_size, options.with_noise, derive_seed(fit.config.seed, kTrajectoryStream));
  const std::string stem = "subject_" + safe_token(traj.subject_id) + "_trajectory";
  write_trajectory_csv(traj, join(out_dir, stem + ".csv"));
  if (options.svg) write_trajectory_svg(traj, join(out_dir, stem + ".svg"));
}

}  // namespace

void write_fit_artifacts(const FitResult& fit, const std::string& out_dir,
                         const ArtifactOptions& options) {
  ensure_directory(out_dir);

  atomic_write(join(out_dir, "fit.json"), fit_json(fit).dump(2) + "\n");
  if (options.write_draws) write_draws_csv(fit, join(out_dir, "draws.csv"));
  write_convergence_csv(fit, join(out_dir, "convergence.csv"));
  write_khat_csv(fit, join(out_dir, "khat.csv"));
  write_scores_csv(fit, join(out_dir, "scores.csv"));

  const CurveSet curves = fitted_curves(fit.model, fit.draws, fit.rotated,
                                        fit.data.standardization, fit.data.model_data,
                                        options.grid_size);
  write_mean_curve_csv(curves, join(out_dir, "mean_curve.csv"));
  write_pc_curves_csv(curves, join(out_dir, "pc_curves.csv"));

  const PpcBundle ppc = replicate(fit.model, fit.draws, options.replicates,
                                  derive_seed(fit.config.seed, kPpcStream));
  write_ppc_csv(ppc, join(out_dir, "ppc_density.csv"));

  if (options.svg) {
    write_mean_curve_svg(fit, curves, join(out_dir, "mean_curve.svg"));
    write_pc_curves_svg(curves, join(out_dir, "pc_curves.svg"));
    write_ppc_svg(ppc, join(out_dir, "ppc_density.svg"));
    write_khat_svg(fit, join(out_dir, "khat.svg"));
  }

  write_trajectories(fit, out_dir, options.trajectory_subjects, options);
}

void write_trajectories(const FitResult& fit, const std::string& out_dir,
                        const std::vector<std::string>& subjects,
                        const ArtifactOptions& options) {
  ensure_directory(out_dir);
  for (const std::string& id : subjects) {
    if (id == "all") {
      for (int i = 0; i < fit.data.raw.n_subjects(); ++i) emit_trajectory(fit, i, out_dir, options);
      break;
    }
    emit_trajectory(fit, fit.data.raw.subject_index(id), out_dir, options);
  }
}

void write_diagnostics(const FitResult& fit, const std::string& out_dir,
                       const ArtifactOptions& options) {
  ensure_directory(out_dir);
  write_khat_csv(fit, join(out_dir, "khat.csv"));

  const PpcBundle ppc = replicate(fit.model, fit.draws, options.replicates,
                                  derive_seed(fit.config.seed, kPpcStream));
  write_ppc_csv(ppc, join(out_dir, "ppc_density.csv"));
  if (options.svg) {
    write_khat_svg(fit, join(out_dir, "khat.svg"));
    write_ppc_svg(ppc, join(out_dir, "ppc_density.svg"));
  }
  for (int i : fit.loo.bad_units) emit_trajectory(fit, i, out_dir, options);
}

FitResult load_fit(const std::string& dir) {
  const std::string fit_path = join(dir, "fit.json");
  ordered_json j;
  try {
    j = ordered_json::parse(read_file(fit_path));
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("cannot parse " + fit_path + ": " + e.what());
  }

  try {
    const std::string data_path = j.at("data").at("path").get<std::string>();
    PreparedData prepared = prepare(load_csv(data_path));

    const int pcs = j.at("model").at("pcs").get<int>();
    const int knots = j.at("model").at("knots").get<int>();
    const OrthonormalBasis basis(j.at("model").at("internal_knots").get<std::vector<double>>());

    SamplerConfig config;
    const auto& sampler = j.at("sampler");
    config.chains = sampler.at("chains").get<int>();
    config.warmup = sampler.at("warmup").get<int>();
    config.iters = sampler.at("iters").get<int>();
    config.target_accept = sampler.at("target_accept").get<double>();
    config.max_treedepth = sampler.at("max_treedepth").get<int>();
    config.seed = j.at("seed").get<std::uint64_t>();

    FitResult fit{SfpcaModel(basis, prepared.model_data, pcs)};
    fit.pcs = pcs;
    fit.knots = knots;
    fit.data_path = data_path;
    fit.config = config;
    fit.data = std::move(prepared);

    const std::string draws_text = read_file(join(dir, "draws.csv"));
    const int D = fit.model.dim();
    std::vector<double> flat;
    std::vector<double> lp;
    std::size_t pos = draws_text.find('\n');
    if (pos == std::string::npos) throw FormatError("draws.csv has no data rows");
    ++pos;  // skip the header
    while (pos < draws_text.size()) {
      std::size_t end = draws_text.find('\n', pos);
      if (end == std::string::npos) end = draws_text.size();
      if (end > pos) {
        int col = 0;
        std::size_t field_start = pos;
        for (std::size_t c = pos; c <= end; ++c) {
          if (c == end || draws_text[c] == ',') {
            double v = 0.0;
            const char* first = draws_text.data() + field_start;
            const char* last = draws_text.data() + c;
            const auto res = std::from_chars(first, last, v);
            if (res.ec != std::errc() || res.ptr != last)
              throw FormatError("draws.csv: cannot parse field '" +
                                std::string(first, last) + "'");
            if (col < D)
              flat.push_back(v);
            else
              lp.push_back(v);
            ++col;
            field_start = c + 1;
          }
        }
        if (col != D + 1)
          throw FormatError("draws.csv row has " + std::to_string(col) + " fields, expected " +
                            std::to_string(D + 1));
      }
      pos = end + 1;
    }
    const int S = static_cast<int>(lp.size());
    if (S == 0) throw FormatError("draws.csv has no data rows");
    if (S % config.chains != 0)
      throw FormatError("draws.csv rows (" + std::to_string(S) +
                        ") not divisible by chain count");

    fit.draws.chains = config.chains;
    fit.draws.iters = S / config.chains;
    fit.draws.draws =
        Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
            flat.data(), S, D);
    fit.draws.lp = Eigen::Map<Eigen::VectorXd>(lp.data(), S);
    fit.draws.divergence_warning = sampler.at("divergence_warning").get<bool>();
    for (const auto& c : sampler.at("chain_stats")) {
      ChainStats cs;
      cs.step_size = c.at("step_size").get<double>();
      cs.mean_accept = c.at("mean_accept").get<double>();
      cs.divergences = c.at("divergences").get<int>();
      cs.treedepth_hits = c.at("treedepth_hits").get<int>();
      fit.draws.chain_stats.push_back(std::move(cs));
    }

    finalize_fit(fit);
    return fit;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("malformed " + fit_path + ": " + e.what());
  }
}

}  // namespace sfpca
