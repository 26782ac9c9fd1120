#pragma once

#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "cflab/curricula.hpp"
#include "cflab/diagnostics.hpp"
#include "cflab/stats.hpp"
#include "cflab/training.hpp"

namespace cflab {

enum class ExperimentKind { exp1, exp2, exp3, exp4, sweep_lr, sweep_wd, sweep_gamma };

ExperimentKind parse_experiment_kind(const std::string& name);
std::string to_string(ExperimentKind kind);

struct ExperimentSpec {
  ExperimentKind which = ExperimentKind::exp3;
  TrainConfig train;
  int n_curricula = 30;
  double gamma = 0.25;
  double sigma2 = kDefaultSigma2;
  ContrastingConfig contrasting;  // exp1 task layout
  std::string mnist_dir;          // exp4

  std::vector<double> lr_grid{1e-6, 1e-5, 1e-4, 1e-3, 1e-2};
  std::vector<double> wd_grid{0.0, 1e-4, 1e-3, 1e-2, 1e-1, 1.0};
  std::vector<double> gamma_grid{0.05, 0.10, 0.15, 0.20, 0.25, 0.30, 0.35};

  int jobs = 0;  // 0: one worker per hardware thread
  bool save_snapshots = true;
  bool no_timestamp = false;
  bool resume = false;

  void validate() const;
};

/// Slim per-run result kept for aggregation; the heavyweight traces are
/// persisted, not retained.
struct RunSummary {
  int curriculum = 0;
  std::uint64_t seed = 0;
  std::vector<std::vector<double>> end_losses;  // [j][k] = L_k(theta_j)
  std::vector<FirstStepDiag> diags;             // norms only
  bool aborted = false;
  std::string abort_reason;
};

struct ExperimentResult {
  ExperimentKind kind = ExperimentKind::exp3;
  std::vector<Curriculum> curricula;
  std::vector<RunSummary> runs;  // sorted by (curriculum, seed)
  std::vector<CurriculumAggregate> report;
  CorrelationTable correlations;  // empty optionals when < 3 curricula
  int n_forgetting = 0;
  int aborted_runs = 0;
  std::optional<WelchResult> exp1_welch;  // final-task L1 comparison, exp1 only

  const RunSummary& run(int curriculum, std::uint64_t seed) const;
};

using ProgressFn = std::function<void(int done, int total)>;

/// The experiment's curricula (deterministic: construction seed =
/// curriculum index). exp4 requires a loaded store.
std::vector<Curriculum> build_curricula(const ExperimentSpec& spec, const MnistStore* store);

/// Trains curricula x seeds (in parallel), writes the artifact set into
/// out_dir (manifest.json, runs/, traces.csv, report.csv, correlations.json,
/// summary.json) and returns the aggregated result. Empty out_dir skips all
/// file output. With spec.resume, completed runs found in out_dir are reused;
/// without it, a non-empty out_dir is refused.
///
/// Must not be called for sweep kinds; iterate sweep cells instead.
ExperimentResult run_experiment(const ExperimentSpec& spec, const std::string& out_dir,
                                const ProgressFn& progress = {});

/// Grid for a sweep kind, and the spec of one cell (exp3 protocol with the
/// swept parameter overridden; exp4 is never swept).
std::vector<double> sweep_grid(const ExperimentSpec& spec);
ExperimentSpec sweep_cell_spec(const ExperimentSpec& spec, double value);
std::string sweep_cell_dir(ExperimentKind kind, double value);

/// Across-seed aggregation of run summaries into per-curriculum rows.
std::vector<CurriculumAggregate> aggregate_report(const std::vector<Curriculum>& curricula,
                                                  const std::vector<RunSummary>& runs,
                                                  double eps_cf);

/// Mean/SD over non-aborted runs of the headline end-of-task losses.
struct EndLossStats {
  double l1_t1_mean = 0.0, l1_t1_sd = 0.0;        // L1(theta_1)
  double l2_t2_mean = 0.0, l2_t2_sd = 0.0;        // L2(theta_2)
  double l1_final_mean = 0.0, l1_final_sd = 0.0;  // L1(theta_N)
  int n_runs = 0;
};
EndLossStats end_loss_stats(const ExperimentResult& res, std::optional<int> curriculum = {});

/// Rebuilds an ExperimentResult from a completed run directory
/// (manifest.json + runs/*/summary.json); aggregates are recomputed.
ExperimentResult load_experiment(const std::filesystem::path& dir);

}  // namespace cflab
