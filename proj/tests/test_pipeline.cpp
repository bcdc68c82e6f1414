#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "sfpca/dataset.hpp"
#include "sfpca/errors.hpp"
#include "sfpca/fit_pipeline.hpp"
#include "sfpca/io.hpp"
#include "sfpca/stats.hpp"
#include "test_helpers.hpp"

using namespace sfpca;
using test_util::TempDir;

namespace {

SamplerConfig quick_config(std::uint64_t seed, int iters = 80) {
  SamplerConfig cfg;
  cfg.chains = 2;
  cfg.warmup = 150;
  cfg.iters = iters;
  cfg.seed = seed;
  return cfg;
}

ArtifactOptions quick_options() {
  ArtifactOptions opts;
  opts.replicates = 20;
  opts.grid_size = 41;
  opts.trajectory_subjects = {"s1"};
  return opts;
}

std::vector<std::string> lines_of(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) out.push_back(line);
  return out;
}

// The json blobs are allowed to differ in the created_at stamp, nothing else.
void check_equal_modulo_timestamp(const std::string& a, const std::string& b) {
  const auto la = lines_of(a);
  const auto lb = lines_of(b);
  REQUIRE(la.size() == lb.size());
  for (std::size_t i = 0; i < la.size(); ++i) {
    if (la[i] != lb[i]) {
      CHECK(la[i].find("created_at") != std::string::npos);
      CHECK(lb[i].find("created_at") != std::string::npos);
    }
  }
}

// One moderately sized fit shared by the artifact tests; sampling it once
// keeps the suite quick.
class SharedFit {
 public:
  SharedFit() : data_path_(dir_.file("data.csv")) {
    save_csv(test_util::toy_dataset(12, 6, 91), data_path_);
    fit_ = std::make_unique<FitResult>(
        fit_model(prepare(load_csv(data_path_)), 2, 1, quick_config(1234), data_path_));
  }
  const FitResult& fit() const { return *fit_; }

 private:
  TempDir dir_;
  std::string data_path_;
  std::unique_ptr<FitResult> fit_;
};

const SharedFit& shared() {
  static SharedFit instance;
  return instance;
}

}  // namespace

TEST_SUITE("pipeline") {

TEST_CASE("prepare standardizes outcomes and rescales time") {
  const LongitudinalDataset raw = make_dataset(
      {"a", "a", "a", "b", "b", "b"}, {2.0, 4.0, 6.0, 3.0, 8.0, 10.0},
      {1.0, 4.0, 2.0, 7.0, 3.0, 5.0});
  const PreparedData prep = prepare(raw);

  CHECK(prep.raw.n_total == 6);
  CHECK(prep.raw.time_range.first == 2.0);
  CHECK(prep.raw.time_range.second == 10.0);
  CHECK(prep.raw.subjects[0].values(1) == 4.0);

  CHECK(prep.model_data.time_rescaled);
  // time_range keeps the original units for back-transformation
  CHECK(prep.model_data.time_range.first == 2.0);
  CHECK(prep.model_data.time_range.second == 10.0);
  CHECK(prep.model_data.subjects[0].times(1) == doctest::Approx((4.0 - 2.0) / 8.0));
  const std::vector<double> pooled_t = prep.model_data.pooled_times();
  CHECK(*std::min_element(pooled_t.begin(), pooled_t.end()) == 0.0);
  CHECK(*std::max_element(pooled_t.begin(), pooled_t.end()) == 1.0);

  const std::vector<double> pooled = prep.model_data.pooled_values();
  CHECK(stats::mean(pooled) == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(stats::sample_sd(pooled) == doctest::Approx(1.0).epsilon(1e-12));

  CHECK(prep.standardization.applied);
  const std::vector<double> raw_pooled = raw.pooled_values();
  CHECK(prep.standardization.mean == doctest::Approx(stats::mean(raw_pooled)));
  CHECK(prep.standardization.sd == doctest::Approx(stats::sample_sd(raw_pooled)));
}

TEST_CASE("fit_model rejects impossible shapes before sampling") {
  const PreparedData prep = prepare(test_util::toy_dataset(4, 4, 2));
  const SamplerConfig cfg = quick_config(1);
  CHECK_THROWS_WITH_AS(fit_model(prep, 5, 1, cfg), doctest::Contains("pcs < knots + 4"),
                       ConfigError);
  CHECK_THROWS_AS(fit_model(prep, 0, 1, cfg), ConfigError);
  CHECK_THROWS_AS(fit_model(prep, 1, -1, cfg), ConfigError);

  SamplerConfig bad = cfg;
  bad.chains = 0;
  CHECK_THROWS_AS(fit_model(prep, 1, 0, bad), ConfigError);
}

TEST_CASE("a small fit carries consistent shapes through every stage") {
  const FitResult& fit = shared().fit();
  const int q = 5, k = 2, N = 12;
  const int dim = q + q * k + N * k + 1;
  const int S = 2 * 80;

  CHECK(fit.model.q() == q);
  CHECK(fit.model.k() == k);
  CHECK(fit.draws.total_draws() == S);
  CHECK(fit.draws.draws.rows() == S);
  CHECK(fit.draws.draws.cols() == dim);
  CHECK(fit.draws.lp.size() == S);
  CHECK(fit.draws.draws.allFinite());

  CHECK(fit.loglik.rows() == S);
  CHECK(fit.loglik.cols() == N);
  CHECK(fit.loglik.allFinite());

  CHECK(fit.loo.label == "pcs=2,knots=1");
  CHECK(fit.loo.n_pcs == 2);
  CHECK(fit.loo.n_knots == 1);
  CHECK(fit.loo.khat.size() == N);
  CHECK(fit.loo.pointwise.size() == N);
  CHECK(fit.loo.elppd == doctest::Approx(fit.loo.pointwise.sum()).epsilon(1e-12));

  CHECK(fit.theta_mu_mean.size() == q);
  const Eigen::VectorXd mean_direct = fit.draws.draws.leftCols(q).colwise().mean().transpose();
  CHECK((fit.theta_mu_mean - mean_direct).cwiseAbs().maxCoeff() < 1e-14);

  CHECK(static_cast<int>(fit.rotated.draws.size()) + fit.rotated.n_excluded == S);
  CHECK(fit.rotated.mean_variance_explained.size() == k);
  CHECK(static_cast<int>(fit.convergence.parameters.size()) == dim);

  const int status = fit.exit_status();
  CHECK((status == 0 || status == 2));
  CHECK((status == 0) == fit.convergence.ok());
}

TEST_CASE("artifact directories are reproducible byte for byte") {
  const FitResult& fit = shared().fit();
  const ArtifactOptions opts = quick_options();
  TempDir tmp;
  const std::string d1 = tmp.file("run1");
  const std::string d2 = tmp.file("run2");
  write_fit_artifacts(fit, d1, opts);
  write_fit_artifacts(fit, d2, opts);

  const std::vector<std::string> files = {
      "fit.json",       "draws.csv",     "convergence.csv", "khat.csv",
      "scores.csv",     "mean_curve.csv", "pc_curves.csv",  "ppc_density.csv",
      "subject_s1_trajectory.csv"};
  for (const std::string& f : files) {
    CAPTURE(f);
    REQUIRE(std::filesystem::exists(d1 + "/" + f));
    if (f == "fit.json") {
      check_equal_modulo_timestamp(read_file(d1 + "/" + f), read_file(d2 + "/" + f));
    } else {
      CHECK(read_file(d1 + "/" + f) == read_file(d2 + "/" + f));
    }
  }

  const auto draws_lines = lines_of(read_file(d1 + "/draws.csv"));
  CHECK(static_cast<int>(draws_lines.size()) == fit.draws.total_draws() + 1);
  CHECK(draws_lines[0].rfind("theta_mu.1,", 0) == 0);
  CHECK(draws_lines[0].find(",lp__") == draws_lines[0].size() - 5);

  CHECK(static_cast<int>(lines_of(read_file(d1 + "/mean_curve.csv")).size()) ==
        opts.grid_size + 1);
  CHECK(static_cast<int>(lines_of(read_file(d1 + "/pc_curves.csv")).size()) ==
        fit.model.k() * opts.grid_size + 1);
  CHECK(static_cast<int>(lines_of(read_file(d1 + "/scores.csv")).size()) ==
        fit.model.n_subjects() * fit.model.k() + 1);

  const auto ppc_header = lines_of(read_file(d1 + "/ppc_density.csv"))[0];
  CHECK(std::count(ppc_header.begin(), ppc_header.end(), ',') == 1 + opts.replicates);
}

TEST_CASE("a written fit reloads into the same posterior") {
  const FitResult& fit = shared().fit();
  const ArtifactOptions opts = quick_options();
  TempDir tmp;
  const std::string d1 = tmp.file("saved");
  write_fit_artifacts(fit, d1, opts);

  const FitResult loaded = load_fit(d1);
  CHECK(loaded.pcs == fit.pcs);
  CHECK(loaded.knots == fit.knots);
  CHECK(loaded.config.seed == fit.config.seed);
  CHECK(loaded.config.chains == fit.config.chains);
  REQUIRE(loaded.draws.draws.rows() == fit.draws.draws.rows());
  REQUIRE(loaded.draws.draws.cols() == fit.draws.draws.cols());
  CHECK(loaded.draws.draws == fit.draws.draws);
  CHECK(loaded.draws.lp == fit.draws.lp);
  CHECK(loaded.loo.elppd == fit.loo.elppd);
  CHECK(loaded.theta_mu_mean == fit.theta_mu_mean);

  const std::string d2 = tmp.file("rewritten");
  write_fit_artifacts(loaded, d2, opts);
  check_equal_modulo_timestamp(read_file(d1 + "/fit.json"), read_file(d2 + "/fit.json"));
  CHECK(read_file(d1 + "/draws.csv") == read_file(d2 + "/draws.csv"));
  CHECK(read_file(d1 + "/scores.csv") == read_file(d2 + "/scores.csv"));
  CHECK(read_file(d1 + "/ppc_density.csv") == read_file(d2 + "/ppc_density.csv"));

  CHECK_THROWS_WITH_AS(load_fit(tmp.file("nowhere")), doctest::Contains("fit.json"),
                       FormatError);

  const std::string d3 = tmp.file("broken");
  write_fit_artifacts(fit, d3, opts);
  std::filesystem::remove(d3 + "/draws.csv");
  CHECK_THROWS_WITH_AS(load_fit(d3), doctest::Contains("draws.csv"), FormatError);
}

TEST_CASE("the diagnostic slice writes khat and ppc tables") {
  const FitResult& fit = shared().fit();
  TempDir tmp;
  const std::string d = tmp.file("diag");
  write_diagnostics(fit, d, quick_options());
  CHECK(std::filesystem::exists(d + "/khat.csv"));
  CHECK(std::filesystem::exists(d + "/ppc_density.csv"));

  const auto khat_lines = lines_of(read_file(d + "/khat.csv"));
  CHECK(static_cast<int>(khat_lines.size()) == fit.model.n_subjects() + 1);
  CHECK(khat_lines[0] == "subject_id,khat");
}

TEST_CASE("trajectory writer covers named subjects and rejects unknown ids") {
  const FitResult& fit = shared().fit();
  ArtifactOptions opts = quick_options();
  opts.trajectory_subjects.clear();
  TempDir tmp;
  const std::string d = tmp.file("traj");
  write_trajectories(fit, d, {"s3"}, opts);
  CHECK(std::filesystem::exists(d + "/subject_s3_trajectory.csv"));
  const auto lines = lines_of(read_file(d + "/subject_s3_trajectory.csv"));
  CHECK(lines[0] == "time,mean,lower,median,upper,obs_time,obs_value");

  CHECK_THROWS_AS(write_trajectories(fit, d, {"nobody"}, opts), LookupError);

  const std::string all_dir = tmp.file("all");
  write_trajectories(fit, all_dir, {"all"}, opts);
  int count = 0;
  for ([[maybe_unused]] const auto& e : std::filesystem::directory_iterator(all_dir)) ++count;
  CHECK(count == fit.model.n_subjects());
}

TEST_CASE("model selection walks the grid deterministically") {
  const PreparedData prep = prepare(test_util::toy_dataset(8, 5, 17));
  const SamplerConfig cfg = quick_config(555, 50);

  const SelectionResult sel = select_models(prep, 1, 2, 0, 1, cfg);
  REQUIRE(sel.cells.size() == 4);
  CHECK(sel.cells[0].pcs == 1);
  CHECK(sel.cells[0].knots == 0);
  CHECK(sel.cells[1].pcs == 2);
  CHECK(sel.cells[1].knots == 0);
  CHECK(sel.cells[2].pcs == 1);
  CHECK(sel.cells[2].knots == 1);
  CHECK(sel.cells[3].pcs == 2);
  CHECK(sel.cells[3].knots == 1);

  int ok_count = 0;
  std::set<std::uint64_t> seeds;
  for (const CellResult& cell : sel.cells) {
    if (!cell.ok) continue;
    ++ok_count;
    REQUIRE(cell.fit.has_value());
    CHECK(cell.fit->pcs == cell.pcs);
    CHECK(cell.fit->knots == cell.knots);
    seeds.insert(cell.fit->config.seed);
    CHECK(cell.fit->config.seed != cfg.seed);
  }
  CHECK(ok_count == 4);
  CHECK(static_cast<int>(seeds.size()) == ok_count);

  REQUIRE(sel.table.rows.size() == static_cast<std::size_t>(ok_count));
  REQUIRE(sel.table_to_cell.size() == sel.table.rows.size());
  for (std::size_t r = 0; r < sel.table.rows.size(); ++r) {
    const CellResult& cell = sel.cells[sel.table_to_cell[r]];
    REQUIRE(cell.ok);
    CHECK(cell.fit->loo.elppd == sel.table.rows[r].elppd);
  }
  CHECK(sel.recommended_pcs >= 1);
  CHECK(sel.recommended_pcs <= 2);
  CHECK(sel.recommended_knots >= 0);
  CHECK(sel.recommended_knots <= 1);
  bool found = false;
  for (const CellResult& cell : sel.cells)
    if (cell.ok && cell.pcs == sel.recommended_pcs && cell.knots == sel.recommended_knots)
      found = true;
  CHECK(found);

  const SelectionResult again = select_models(prep, 1, 2, 0, 1, cfg);
  CHECK(again.recommended_pcs == sel.recommended_pcs);
  CHECK(again.recommended_knots == sel.recommended_knots);
  for (std::size_t i = 0; i < sel.cells.size(); ++i) {
    if (!sel.cells[i].ok) continue;
    CHECK(again.cells[i].ok);
    CHECK(again.cells[i].fit->loo.elppd == sel.cells[i].fit->loo.elppd);
  }
}

TEST_CASE("impossible grids are rejected before any sampling") {
  const PreparedData prep = prepare(test_util::toy_dataset(4, 4, 9));
  const SamplerConfig cfg = quick_config(3);
  CHECK_THROWS_AS(select_models(prep, 5, 5, 1, 1, cfg), ConfigError);
  CHECK_THROWS_AS(select_models(prep, 2, 1, 0, 0, cfg), ConfigError);
}

}  // TEST_SUITE
