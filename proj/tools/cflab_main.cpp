// cflab: continual-learning forgetting experiments on two-layer ReLU nets.
//
// Subcommands:
//   run     train an experiment (exp1..exp4) or a hyperparameter sweep
//   plot    render SVG figures from a completed run directory
//   report  recompute and print the per-curriculum forgetting report
//
// Exit codes: 0 ok, 1 usage, 2 data/format, 3 numerical abort during training.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>

#include "cflab/experiments.hpp"
#include "cflab/io.hpp"
#include "cflab/plot.hpp"

namespace fs = std::filesystem;
using namespace cflab;

namespace {

struct RunArgs {
  std::string exp;  // required; validated in make_spec so config files can supply it
  int seeds = -1;                       // count; seeds are 0..n-1
  std::vector<std::uint64_t> seed_list; // explicit override
  std::string out;
  std::string mnist_dir;
  double lr = -1.0;
  double weight_decay = -1.0;
  double gamma = -1.0;
  double sigma2 = -1.0;
  int epochs = -1;
  int curricula = -1;
  int batch_size = -1;
  int n_train = -1;
  int n_val = -1;
  double eps_cf = -1.0;
  int trace_stride = -1;
  int jobs = 0;
  bool fast = false;
  bool resume = false;
  bool no_timestamp = false;
  bool no_snapshots = false;
  bool diag_full_set = false;
  bool quiet = false;
};

ExperimentSpec make_spec(const RunArgs& a) {
  if (a.exp.empty()) throw std::invalid_argument("--exp is required (flag or config file)");
  ExperimentSpec spec;
  spec.which = parse_experiment_kind(a.exp);

  // Kind-dependent defaults first, --fast preset second, explicit flags win.
  if (spec.which == ExperimentKind::exp4) spec.train.epochs_per_task = 5000;
  if (a.fast) {
    spec.train.seeds = {0, 1, 2};
    spec.n_curricula = 10;
    spec.train.epochs_per_task = 300;
  }
  if (a.seeds >= 0) {
    spec.train.seeds.clear();
    for (int s = 0; s < a.seeds; ++s) spec.train.seeds.push_back(static_cast<std::uint64_t>(s));
  }
  if (!a.seed_list.empty()) spec.train.seeds = a.seed_list;
  if (a.lr >= 0.0) spec.train.lr = a.lr;
  if (a.weight_decay >= 0.0) spec.train.weight_decay = a.weight_decay;
  if (a.gamma > 0.0) spec.gamma = a.gamma;
  if (a.sigma2 >= 0.0) spec.sigma2 = a.sigma2;
  if (a.epochs > 0) spec.train.epochs_per_task = a.epochs;
  if (a.curricula > 0) spec.n_curricula = a.curricula;
  if (a.batch_size > 0) spec.train.batch_size = a.batch_size;
  if (a.n_train > 0) spec.train.n_train = a.n_train;
  if (a.n_val > 0) spec.train.n_val = a.n_val;
  if (a.eps_cf >= 0.0) spec.train.eps_cf = a.eps_cf;
  if (a.trace_stride >= 0) spec.train.val_trace_stride = a.trace_stride;
  spec.mnist_dir = a.mnist_dir;
  spec.jobs = a.jobs;
  spec.resume = a.resume;
  spec.no_timestamp = a.no_timestamp;
  spec.save_snapshots = !a.no_snapshots;
  spec.train.diag_full_set = a.diag_full_set;
  spec.contrasting.sigma2 = spec.sigma2;
  return spec;
}

void print_result(const ExperimentResult& res) {
  std::printf("curricula: %zu, runs: %zu (aborted: %d)\n", res.curricula.size(), res.runs.size(),
              res.aborted_runs);
  if (res.report.size() >= 2)
    std::printf("forgetting curricula: %d/%zu (eps threshold applied to across-seed mean dL1)\n",
                res.n_forgetting, res.report.size());
  auto show = [](const char* name, const std::optional<CorrelationResult>& c) {
    if (c)
      std::printf("  %-22s r = %+.4f  (df = %g, p = %.3g)\n", name, c->r, c->df, c->p);
    else
      std::printf("  %-22s undefined\n", name);
  };
  if (res.report.size() >= 3) {
    std::printf("correlations over curricula:\n");
    show("dL1 vs |g_new|_inf", res.correlations.dl1_vs_gnew);
    show("dL1 vs |g_old|_inf", res.correlations.dl1_vs_gold);
    show("dL1 vs d_omega", res.correlations.dl1_vs_domega);
    show("dL1 vs d_theta", res.correlations.dl1_vs_dtheta);
  }
  if (res.exp1_welch)
    std::printf("final-task L1, semantic vs perceptual: Welch t = %.3f, df = %.2f, p = %.3g\n",
                res.exp1_welch->t, res.exp1_welch->df, res.exp1_welch->p);
  const auto stats = end_loss_stats(res);
  std::printf("L1(theta1) = %.4f +- %.4f   L1(theta_final) = %.4f +- %.4f\n", stats.l1_t1_mean,
              stats.l1_t1_sd, stats.l1_final_mean, stats.l1_final_sd);
}

int cmd_run(const RunArgs& args) {
  ExperimentSpec spec = make_spec(args);

  ProgressFn progress;
  if (!args.quiet) {
    progress = [](int done, int total) {
      if (done == total || done % 10 == 0)
        std::fprintf(stderr, "\r  %d/%d runs", done, total), std::fflush(stderr);
      if (done == total) std::fprintf(stderr, "\n");
    };
  }

  const bool is_sweep = spec.which == ExperimentKind::sweep_lr ||
                        spec.which == ExperimentKind::sweep_wd ||
                        spec.which == ExperimentKind::sweep_gamma;
  int aborted = 0;
  if (!is_sweep) {
    const auto res = run_experiment(spec, args.out, progress);
    print_result(res);
    aborted = res.aborted_runs;
  } else {
    fs::path root(args.out);
    std::ofstream summary;
    if (!args.out.empty()) {
      fs::create_directories(root / "cells");
      summary.open(root / "sweep_summary.csv");
      summary << "value,n_curricula,n_seeds,n_forgetting,L1_t1_mean,L1_t1_sd,L2_t2_mean,"
                 "r_dL1_gnew,p_dL1_gnew,aborted_runs\n";
    }
    for (double value : sweep_grid(spec)) {
      auto cell = sweep_cell_spec(spec, value);
      const std::string cell_out =
          args.out.empty() ? "" : (root / "cells" / sweep_cell_dir(spec.which, value)).string();
      std::printf("-- cell %s --\n", sweep_cell_dir(spec.which, value).c_str());
      const auto res = run_experiment(cell, cell_out, progress);
      print_result(res);
      aborted += res.aborted_runs;
      if (summary.is_open()) {
        const auto stats = end_loss_stats(res);
        const auto& c = res.correlations.dl1_vs_gnew;
        summary << format_double(value) << ',' << res.curricula.size() << ','
                << cell.train.seeds.size() << ',' << res.n_forgetting << ','
                << format_double(stats.l1_t1_mean) << ',' << format_double(stats.l1_t1_sd) << ','
                << format_double(stats.l2_t2_mean) << ','
                << format_double(c ? c->r : std::numeric_limits<double>::quiet_NaN()) << ','
                << format_double(c ? c->p : std::numeric_limits<double>::quiet_NaN()) << ','
                << res.aborted_runs << '\n';
      }
    }
  }
  if (aborted > 0) {
    std::fprintf(stderr, "warning: %d run(s) aborted on non-finite loss\n", aborted);
    return 3;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"continual-learning forgetting experiments on two-layer ReLU networks"};
  app.require_subcommand(1);
  app.set_config("--config", "",
                 "INI file mirroring the flags; subcommand options go under a [run] section");

  RunArgs run_args;
  auto* run = app.add_subcommand("run", "train an experiment or sweep and write its artifacts");
  run->add_option("--exp", run_args.exp,
                  "experiment: exp1|exp2|exp3|exp4|sweep-lr|sweep-wd|sweep-gamma (required)");
  run->add_option("--seeds", run_args.seeds, "number of seeds (0..n-1; default 10)");
  run->add_option("--seed-list", run_args.seed_list, "explicit seed values")->delimiter(',');
  run->add_option("--out", run_args.out, "output directory (omit for a dry run)");
  run->add_option("--mnist-dir", run_args.mnist_dir, "directory with the four MNIST IDX files");
  run->add_option("--lr", run_args.lr, "learning rate (default 0.001)");
  run->add_option("--weight-decay", run_args.weight_decay, "L2 coefficient (default 0)");
  run->add_option("--gamma", run_args.gamma, "inter-task distance (default 0.25)");
  run->add_option("--sigma2", run_args.sigma2, "category variance (default 0.0025)");
  run->add_option("--epochs", run_args.epochs, "epochs per task (default 1000; exp4 5000)");
  run->add_option("--curricula", run_args.curricula, "number of curricula (default 30)");
  run->add_option("--batch-size", run_args.batch_size, "SGD batch size (default 128)");
  run->add_option("--n-train", run_args.n_train, "grating training set size (default 1000)");
  run->add_option("--n-val", run_args.n_val, "grating validation set size (default 1000)");
  run->add_option("--eps", run_args.eps_cf, "forgetting threshold (default 0.2)");
  run->add_option("--trace-stride", run_args.trace_stride,
                  "record validation traces every k epochs; 0 = boundaries only (default 1)");
  run->add_option("--jobs", run_args.jobs, "parallel runs (default: hardware threads)");
  run->add_flag("--fast", run_args.fast, "smoke preset: 3 seeds, 10 curricula, 300 epochs");
  run->add_flag("--resume", run_args.resume, "reuse completed runs found in --out");
  run->add_flag("--no-timestamp", run_args.no_timestamp,
                "omit timestamps so reruns are byte-identical");
  run->add_flag("--no-snapshots", run_args.no_snapshots, "skip parameter snapshot files");
  run->add_flag("--diag-full-set", run_args.diag_full_set,
                "boundary diagnostic uses the whole training set instead of one batch");
  run->add_flag("--quiet", run_args.quiet, "suppress progress output");

  std::string plot_in, plot_out;
  bool plot_no_ts = false;
  auto* plot = app.add_subcommand("plot", "render SVG figures from a run directory");
  plot->add_option("--in", plot_in, "completed run directory")->required();
  plot->add_option("--out", plot_out, "figure directory (default <in>/plots)");
  plot->add_flag("--no-timestamp", plot_no_ts, "omit the generation-time comment");

  std::string report_in;
  auto* report = app.add_subcommand("report", "recompute report.csv/correlations.json and print");
  report->add_option("--in", report_in, "completed run directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 1;
  }

  try {
    if (run->parsed()) return cmd_run(run_args);
    if (plot->parsed()) {
      SvgOptions opts;
      opts.timestamp = !plot_no_ts;
      const fs::path in(plot_in);
      write_plots(in, plot_out.empty() ? in / "plots" : fs::path(plot_out), opts);
      return 0;
    }
    if (report->parsed()) {
      const fs::path in(report_in);
      const auto res = load_experiment(in);
      write_report_csv(in / "report.csv", res.report);
      if (res.report.size() >= 3)
        write_correlations_json(in / "correlations.json", res.correlations, res.report.size());
      std::printf("%-6s %-10s %-10s %-12s %-12s %-8s\n", "curr", "d_omega", "d_theta", "dL1_mean",
                  "gnew_inf", "forgot");
      for (const auto& r : res.report)
        std::printf("%-6d %-10.4f %-10.4f %-12.4f %-12.5f %-8s\n", r.index, r.d_omega, r.d_theta,
                    r.dl1_mean, r.gnew_mean, r.forgot ? "yes" : "no");
      print_result(res);
      return 0;
    }
  } catch (const CLI::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const CsvFormatError& e) {
    std::cerr << "format error: " << e.what() << "\n";
    return 2;
  } catch (const IdxFormatError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 2;
  } catch (const std::invalid_argument& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 1;
  } catch (const std::domain_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
