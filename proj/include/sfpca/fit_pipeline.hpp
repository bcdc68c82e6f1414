#pragma once

#include <optional>
#include <string>
#include <vector>

#include "sfpca/dataset.hpp"
#include "sfpca/diagnostics.hpp"
#include "sfpca/model.hpp"
#include "sfpca/psis.hpp"
#include "sfpca/rotation.hpp"
#include "sfpca/sampler.hpp"
#include "sfpca/spline_basis.hpp"

namespace sfpca {

/// Raw data plus the standardized, time-rescaled copy the model consumes.
struct PreparedData {
  LongitudinalDataset raw;
  LongitudinalDataset model_data;
  Standardization standardization;
};

PreparedData prepare(const LongitudinalDataset& raw);

/// A complete single-model fit with everything downstream steps need.
struct FitResult {
  explicit FitResult(SfpcaModel m) : model(std::move(m)) {}

  int pcs = 0;
  int knots = 0;
  std::string data_path;
  SamplerConfig config;  // with the resolved seed
  PreparedData data;
  SfpcaModel model;  // owns the basis
  PosteriorDraws draws;
  ConvergenceReport convergence;
  RotatedDraws rotated;
  Eigen::MatrixXd loglik;  // S x N
  LooReport loo;
  Eigen::VectorXd theta_mu_mean;  // posterior mean, standardized scale

  /// 0 clean, 2 when any R-hat is flagged or divergences exceed 10%.
  int exit_status() const {
    return convergence.ok() ? 0 : 2;
  }
};

/**
 * Fits one (pcs, knots) cell: quantile knot placement on the pooled
 * rescaled times, orthonormal basis, posterior sampling, convergence
 * diagnostics, identifiability rotation and PSIS-LOO scoring. Throws
 * ConfigError before any compute when pcs >= knots + 4.
 */
FitResult fit_model(const PreparedData& data, int pcs, int knots, const SamplerConfig& config,
                    const std::string& data_path = "");

struct CellResult {
  int pcs = 0;
  int knots = 0;
  bool ok = false;
  std::string error;
  std::optional<FitResult> fit;
};

struct SelectionResult {
  std::vector<CellResult> cells;   // grid order: knots-major, pcs within
  ComparisonTable table;           // over the usable cells
  std::vector<int> table_to_cell;  // table row -> cells index
  int recommended_pcs = 0;
  int recommended_knots = 0;
};

/**
 * Fits every cell of [pcs_lo..pcs_hi] x [knots_lo..knots_hi] on one shared
 * standardization, reusing the basis across PC counts within a knot level,
 * then ranks models by elppd with the 1-SE tie rule and parsimony
 * preference. Cells that throw or exceed the divergence threshold are
 * marked failed and skipped in the ranking; per-cell seeds derive from
 * config.seed and the (pcs, knots) pair. Throws ConfigError when any cell
 * would have k >= q, before fitting anything.
 */
SelectionResult select_models(const PreparedData& data, int pcs_lo, int pcs_hi, int knots_lo,
                              int knots_hi, const SamplerConfig& config,
                              const std::string& data_path = "");

/// Options for artifact emission.
struct ArtifactOptions {
  int replicates = 100;
  bool with_noise = false;
  bool svg = false;
  int grid_size = 101;
  bool write_draws = true;
  std::vector<std::string> trajectory_subjects;  // ids; "all" covers everyone
};

/**
 * Writes the fit directory: fit.json, draws.csv, convergence.csv,
 * khat.csv, scores.csv, mean_curve.csv, pc_curves.csv, ppc_density.csv,
 * requested subject trajectory files, and SVG renderings when asked. All
 * writes are atomic. Rerunning the same fit reproduces every byte except
 * the created_at timestamp.
 */
void write_fit_artifacts(const FitResult& fit, const std::string& out_dir,
                         const ArtifactOptions& options);

/**
 * Writes trajectory-with-band files for the named subjects ("all" expands to
 * every subject). Throws LookupError for an unknown id.
 */
void write_trajectories(const FitResult& fit, const std::string& out_dir,
                        const std::vector<std::string>& subjects, const ArtifactOptions& options);

/**
 * Writes the diagnostic slice only: khat.csv, the posterior predictive
 * density table, and a trajectory-with-band file for every subject whose
 * tail shape exceeds 0.7. SVG renderings are added when options.svg is set.
 * Deterministic: running twice produces identical files.
 */
void write_diagnostics(const FitResult& fit, const std::string& out_dir,
                       const ArtifactOptions& options);

/**
 * Reconstructs a FitResult from a fit directory by re-reading the original
 * data file, rebuilding basis and model from the stored knots, and loading
 * the persisted draws; rotation, diagnostics and LOO are recomputed
 * deterministically. Throws FormatError naming whichever file is missing.
 */
FitResult load_fit(const std::string& dir);

}  // namespace sfpca
