#include "cflab/experiments.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <limits>
#include <memory>
#include <mutex>
#include <stdexcept>
#include <thread>

#include <nlohmann/json.hpp>

#include "cflab/io.hpp"

extern "C" void openblas_set_num_threads(int num_threads);

namespace cflab {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// One BLAS thread per worker; parallelism happens across runs.
void pin_blas_threads() {
  static std::once_flag flag;
  std::call_once(flag, [] { openblas_set_num_threads(1); });
}

std::string iso_timestamp() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  char buf[32];
  std::tm tm_utc{};
  gmtime_r(&t, &tm_utc);
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm_utc);
  return buf;
}

json task_json(const TaskSpec& t) {
  if (const auto* g = std::get_if<GratingTask>(&t)) {
    return {{"type", "grating"},
            {"mu", {g->cat0.mean.omega, g->cat0.mean.theta}},
            {"upsilon", {g->cat1.mean.omega, g->cat1.mean.theta}},
            {"sigma2", g->cat0.sigma2}};
  }
  const auto& m = std::get<MnistTask>(t);
  return {{"type", "mnist"}, {"digit0", m.digit0}, {"digit1", m.digit1}};
}

json curriculum_json(const Curriculum& c) {
  json j = {{"experiment", c.id.experiment},
            {"index", c.id.index},
            {"construction_seed", c.construction_seed}};
  j["gamma"] = c.gamma ? json(*c.gamma) : json(nullptr);
  j["direction"] = c.direction ? json({c.direction->omega, c.direction->theta}) : json(nullptr);
  j["tasks"] = json::array();
  for (const auto& t : c.tasks) j["tasks"].push_back(task_json(t));
  return j;
}

json config_json(const ExperimentSpec& spec) {
  return {{"lr", spec.train.lr},
          {"weight_decay", spec.train.weight_decay},
          {"batch_size", spec.train.batch_size},
          {"epochs_per_task", spec.train.epochs_per_task},
          {"n_train", spec.train.n_train},
          {"n_val", spec.train.n_val},
          {"seeds", spec.train.seeds},
          {"eps_cf", spec.train.eps_cf},
          {"val_trace_stride", spec.train.val_trace_stride},
          {"init", spec.train.init == InitMode::fan_in ? "fan_in" : "literal_sqrt_d"},
          {"diag_full_set", spec.train.diag_full_set},
          {"n_curricula", spec.n_curricula},
          {"gamma", spec.gamma},
          {"sigma2", spec.sigma2}};
}

double mean_of(const std::vector<double>& v) {
  double m = 0.0;
  for (double x : v) m += x;
  return v.empty() ? 0.0 : m / static_cast<double>(v.size());
}

double sd_of(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  const double m = mean_of(v);
  double ss = 0.0;
  for (double x : v) ss += (x - m) * (x - m);
  return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

RunSummary summarize(const RunRecord& rec) {
  RunSummary s;
  s.curriculum = rec.id.index;
  s.seed = rec.seed;
  s.end_losses = rec.end_losses;
  s.diags.reserve(rec.diags.size());
  for (const auto& d : rec.diags) {
    FirstStepDiag slim;
    slim.gnew_inf = d.gnew_inf;
    slim.gnew_norm2 = d.gnew_norm2;
    slim.gold_inf = d.gold_inf;
    slim.fisher_diag_max = d.fisher_diag_max;
    s.diags.push_back(std::move(slim));
  }
  s.aborted = rec.aborted;
  s.abort_reason = rec.abort_reason;
  return s;
}

json run_summary_json(const RunSummary& s) {
  json diags = json::array();
  for (const auto& d : s.diags)
    diags.push_back({{"gnew_inf", d.gnew_inf},
                     {"gnew_norm2", d.gnew_norm2},
                     {"gold_inf", d.gold_inf},
                     {"fisher_diag_max", d.fisher_diag_max}});
  return {{"curriculum", s.curriculum}, {"seed", s.seed},
          {"complete", true},           {"aborted", s.aborted},
          {"abort_reason", s.abort_reason}, {"end_losses", s.end_losses},
          {"diags", diags}};
}

std::optional<RunSummary> load_run_summary(const fs::path& file) {
  std::ifstream in(file);
  if (!in) return std::nullopt;
  json j;
  try {
    in >> j;
    if (!j.value("complete", false)) return std::nullopt;
    RunSummary s;
    s.curriculum = j.at("curriculum").get<int>();
    s.seed = j.at("seed").get<std::uint64_t>();
    s.end_losses = j.at("end_losses").get<std::vector<std::vector<double>>>();
    for (const auto& d : j.at("diags")) {
      FirstStepDiag f;
      f.gnew_inf = d.at("gnew_inf").get<double>();
      f.gnew_norm2 = d.at("gnew_norm2").get<double>();
      f.gold_inf = d.at("gold_inf").get<double>();
      f.fisher_diag_max = d.at("fisher_diag_max").get<double>();
      s.diags.push_back(f);
    }
    s.aborted = j.at("aborted").get<bool>();
    s.abort_reason = j.value("abort_reason", "");
    return s;
  } catch (const json::exception&) {
    return std::nullopt;  // partial or stale file: retrain
  }
}

}  // namespace

ExperimentKind parse_experiment_kind(const std::string& name) {
  if (name == "exp1") return ExperimentKind::exp1;
  if (name == "exp2") return ExperimentKind::exp2;
  if (name == "exp3") return ExperimentKind::exp3;
  if (name == "exp4") return ExperimentKind::exp4;
  if (name == "sweep-lr") return ExperimentKind::sweep_lr;
  if (name == "sweep-wd") return ExperimentKind::sweep_wd;
  if (name == "sweep-gamma") return ExperimentKind::sweep_gamma;
  throw std::invalid_argument("unknown experiment '" + name + "'");
}

std::string to_string(ExperimentKind kind) {
  switch (kind) {
    case ExperimentKind::exp1: return "exp1";
    case ExperimentKind::exp2: return "exp2";
    case ExperimentKind::exp3: return "exp3";
    case ExperimentKind::exp4: return "exp4";
    case ExperimentKind::sweep_lr: return "sweep-lr";
    case ExperimentKind::sweep_wd: return "sweep-wd";
    case ExperimentKind::sweep_gamma: return "sweep-gamma";
  }
  throw std::logic_error("unreachable");
}

void ExperimentSpec::validate() const {
  train.validate();
  if (n_curricula < 1) throw std::invalid_argument("spec: need at least one curriculum");
  if (gamma <= 0.0) throw std::invalid_argument("spec: gamma must be > 0");
  if (sigma2 < 0.0) throw std::invalid_argument("spec: sigma2 must be >= 0");
  if (which == ExperimentKind::exp1) contrasting.validate();
  if (which == ExperimentKind::exp4 && mnist_dir.empty())
    throw std::invalid_argument("spec: exp4 requires an MNIST directory");
}

const RunSummary& ExperimentResult::run(int curriculum, std::uint64_t seed) const {
  for (const auto& r : runs)
    if (r.curriculum == curriculum && r.seed == seed) return r;
  throw std::out_of_range("no such run");
}

std::vector<Curriculum> build_curricula(const ExperimentSpec& spec, const MnistStore* store) {
  std::vector<Curriculum> out;
  const auto tag = to_string(spec.which);
  switch (spec.which) {
    case ExperimentKind::exp1: {
      ContrastingConfig cfg = spec.contrasting;
      cfg.sigma2 = spec.sigma2;
      auto [semantic, perceptual] = build_contrasting_curricula(cfg);
      out = {std::move(semantic), std::move(perceptual)};
      break;
    }
    case ExperimentKind::exp2:
    case ExperimentKind::exp3:
    case ExperimentKind::sweep_lr:
    case ExperimentKind::sweep_wd:
    case ExperimentKind::sweep_gamma: {
      std::optional<GratingTask> fixed_first;
      for (int i = 0; i < spec.n_curricula; ++i) {
        Rng rng(static_cast<std::uint64_t>(i),
                make_stream(i, 0, StreamPurpose::curriculum_build));
        auto c = build_random_curriculum(i, spec.gamma, fixed_first, rng, spec.sigma2);
        c.id.experiment = tag;
        if (spec.which == ExperimentKind::exp2 && i == 0)
          fixed_first = grating_task(c, 0);  // later curricula share task 1
        out.push_back(std::move(c));
      }
      break;
    }
    case ExperimentKind::exp4: {
      if (store == nullptr) throw std::invalid_argument("exp4 curricula need an MNIST store");
      for (int i = 0; i < spec.n_curricula; ++i) {
        Rng rng(static_cast<std::uint64_t>(i),
                make_stream(i, 0, StreamPurpose::curriculum_build));
        out.push_back(build_mnist_curriculum(*store, i, rng));
      }
      break;
    }
  }
  return out;
}

std::vector<double> sweep_grid(const ExperimentSpec& spec) {
  switch (spec.which) {
    case ExperimentKind::sweep_lr: return spec.lr_grid;
    case ExperimentKind::sweep_wd: return spec.wd_grid;
    case ExperimentKind::sweep_gamma: return spec.gamma_grid;
    default: throw std::invalid_argument("not a sweep experiment");
  }
}

ExperimentSpec sweep_cell_spec(const ExperimentSpec& spec, double value) {
  ExperimentSpec cell = spec;
  switch (spec.which) {
    case ExperimentKind::sweep_lr: cell.train.lr = value; break;
    case ExperimentKind::sweep_wd: cell.train.weight_decay = value; break;
    case ExperimentKind::sweep_gamma: cell.gamma = value; break;
    default: throw std::invalid_argument("not a sweep experiment");
  }
  cell.which = ExperimentKind::exp3;  // every cell runs the exp3 protocol
  return cell;
}

std::string sweep_cell_dir(ExperimentKind kind, double value) {
  const char* prefix = kind == ExperimentKind::sweep_lr   ? "lr"
                       : kind == ExperimentKind::sweep_wd ? "wd"
                                                          : "gamma";
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%s_%g", prefix, value);
  return buf;
}

std::vector<CurriculumAggregate> aggregate_report(const std::vector<Curriculum>& curricula,
                                                  const std::vector<RunSummary>& runs,
                                                  double eps_cf) {
  const double nan = std::numeric_limits<double>::quiet_NaN();
  std::vector<CurriculumAggregate> report;
  report.reserve(curricula.size());
  for (const auto& c : curricula) {
    CurriculumAggregate a;
    a.index = c.id.index;
    a.d_omega = nan;
    a.d_theta = nan;
    if (c.tasks.size() == 2 && std::holds_alternative<GratingTask>(c.tasks[0])) {
      const auto [dom, dth] = semantic_and_perceptual_distance(c);
      a.d_omega = dom;
      a.d_theta = dth;
    }
    std::vector<double> gnew, gold;
    for (const auto& r : runs) {
      if (r.curriculum != c.id.index || r.aborted) continue;
      if (r.end_losses.size() < 2 || r.diags.empty()) continue;
      a.dl1_per_seed.push_back(r.end_losses[1][0] - r.end_losses[0][0]);
      gnew.push_back(r.diags[0].gnew_inf);
      gold.push_back(r.diags[0].gold_inf);
    }
    a.dl1_mean = a.dl1_per_seed.empty() ? nan : mean_of(a.dl1_per_seed);
    a.dl1_sd = sd_of(a.dl1_per_seed);
    a.gnew_mean = gnew.empty() ? nan : mean_of(gnew);
    a.gold_mean = gold.empty() ? nan : mean_of(gold);
    a.forgot = std::isfinite(a.dl1_mean) && a.dl1_mean > eps_cf;
    report.push_back(std::move(a));
  }
  return report;
}

namespace {

void write_manifest(const fs::path& dir, const ExperimentSpec& spec,
                    const std::vector<Curriculum>& curricula) {
  json j = {{"schema", "cflab-run-v1"}, {"experiment", to_string(spec.which)},
            {"config", config_json(spec)}};
  if (!spec.no_timestamp) j["created"] = iso_timestamp();
  j["curricula"] = json::array();
  for (const auto& c : curricula) j["curricula"].push_back(curriculum_json(c));
  std::ofstream out(dir / "manifest.json");
  if (!out) throw std::runtime_error("cannot open " + (dir / "manifest.json").string());
  out << j.dump(2) << '\n';
}

void write_experiment_summary(const fs::path& dir, const ExperimentResult& res,
                              const ExperimentSpec& spec) {
  json per_curriculum = json::array();
  for (const auto& a : res.report) {
    per_curriculum.push_back({{"index", a.index},
                              {"dL1_mean", a.dl1_mean},
                              {"dL1_sd", a.dl1_sd},
                              {"forgot", a.forgot}});
  }
  json j = {{"experiment", to_string(res.kind)},
            {"n_curricula", res.curricula.size()},
            {"seeds", spec.train.seeds},
            {"n_forgetting", res.n_forgetting},
            {"aborted_runs", res.aborted_runs},
            {"curricula", per_curriculum}};
  if (res.exp1_welch) {
    j["welch_L1_final"] = {
        {"t", res.exp1_welch->t}, {"df", res.exp1_welch->df}, {"p", res.exp1_welch->p}};
  }
  std::ofstream out(dir / "summary.json");
  if (!out) throw std::runtime_error("cannot open " + (dir / "summary.json").string());
  out << j.dump(2) << '\n';
}

}  // namespace

ExperimentResult run_experiment(const ExperimentSpec& spec, const std::string& out_dir,
                                const ProgressFn& progress) {
  spec.validate();
  if (spec.which == ExperimentKind::sweep_lr || spec.which == ExperimentKind::sweep_wd ||
      spec.which == ExperimentKind::sweep_gamma)
    throw std::invalid_argument("run_experiment: sweep kinds run per cell");
  pin_blas_threads();

  std::unique_ptr<MnistStore> store;
  if (spec.which == ExperimentKind::exp4) {
    store = std::make_unique<MnistStore>(MnistStore::load(spec.mnist_dir));
  }

  ExperimentResult res;
  res.kind = spec.which;
  res.curricula = build_curricula(spec, store.get());

  const bool sink = !out_dir.empty();
  fs::path dir(out_dir);
  if (sink) {
    if (fs::exists(dir) && !fs::is_empty(dir) && !spec.resume)
      throw std::invalid_argument("output directory " + dir.string() +
                                  " is not empty (pass --resume to continue)");
    fs::create_directories(dir / "runs");
    write_manifest(dir, spec, res.curricula);
  }

  struct Job {
    const Curriculum* curriculum;
    std::uint64_t seed;
  };
  std::vector<Job> jobs;
  for (const auto& c : res.curricula)
    for (auto seed : spec.train.seeds) jobs.push_back({&c, seed});

  res.runs.resize(jobs.size());
  std::vector<char> reused(jobs.size(), 0);

  if (spec.resume && sink) {
    for (std::size_t i = 0; i < jobs.size(); ++i) {
      const auto rd = dir / "runs" / run_dir_name(jobs[i].curriculum->id.index, jobs[i].seed);
      if (auto s = load_run_summary(rd / "summary.json")) {
        res.runs[i] = std::move(*s);
        reused[i] = 1;
      }
    }
  }

  std::atomic<std::size_t> next{0};
  std::atomic<int> done{0};
  std::mutex mu;
  std::exception_ptr first_error;

  auto worker = [&] {
    while (true) {
      const std::size_t i = next.fetch_add(1);
      if (i >= jobs.size()) break;
      {
        std::lock_guard lk(mu);
        if (first_error) break;
      }
      try {
        if (!reused[i]) {
          RunRecord rec = train_curriculum(*jobs[i].curriculum, spec.train, jobs[i].seed,
                                           store.get());
          if (sink) {
            const auto rd = dir / "runs" / run_dir_name(rec.id.index, rec.seed);
            fs::create_directories(rd);
            if (spec.train.val_trace_stride > 0) write_trace_csv(rd / "trace.csv", rec);
            if (spec.save_snapshots) {
              fs::create_directories(rd / "snapshots");
              for (std::size_t t = 0; t < rec.snapshots.size(); ++t)
                write_snapshot(rd / "snapshots" / ("task" + std::to_string(t + 1)),
                               rec.snapshots[t], rec.id, rec.seed, static_cast<int>(t));
            }
            std::ofstream out(rd / "summary.json");
            out << run_summary_json(summarize(rec)).dump(2) << '\n';
            if (!out) throw std::runtime_error("cannot write run summary in " + rd.string());
          }
          res.runs[i] = summarize(rec);
        }
        const int d = done.fetch_add(1) + 1;
        if (progress) {
          std::lock_guard lk(mu);
          progress(d, static_cast<int>(jobs.size()));
        }
      } catch (...) {
        std::lock_guard lk(mu);
        if (!first_error) first_error = std::current_exception();
        break;
      }
    }
  };

  int n_workers = spec.jobs > 0 ? spec.jobs : static_cast<int>(std::thread::hardware_concurrency());
  if (n_workers < 1) n_workers = 1;
  n_workers = std::min<int>(n_workers, static_cast<int>(jobs.size()));
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(n_workers));
  for (int w = 0; w < n_workers; ++w) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  if (first_error) std::rethrow_exception(first_error);

  // Jobs were enqueued in (curriculum, seed) order, so res.runs is sorted.
  for (const auto& r : res.runs)
    if (r.aborted) ++res.aborted_runs;

  res.report = aggregate_report(res.curricula, res.runs, spec.train.eps_cf);
  for (const auto& a : res.report)
    if (a.forgot) ++res.n_forgetting;
  if (res.report.size() >= 3) res.correlations = correlate_forgetting(res.report);

  if (spec.which == ExperimentKind::exp1 && res.curricula.size() == 2) {
    std::vector<double> semantic_final, perceptual_final;
    for (const auto& r : res.runs) {
      if (r.aborted || r.end_losses.empty()) continue;
      const double l1_final = r.end_losses.back()[0];
      (r.curriculum == 0 ? semantic_final : perceptual_final).push_back(l1_final);
    }
    if (semantic_final.size() >= 2 && perceptual_final.size() >= 2)
      res.exp1_welch = welch_t(semantic_final, perceptual_final);
  }

  if (sink) {
    if (spec.train.val_trace_stride > 0) {
      std::ofstream traces(dir / "traces.csv");
      if (!traces) throw std::runtime_error("cannot open " + (dir / "traces.csv").string());
      const int n_tasks = static_cast<int>(res.curricula.front().tasks.size());
      std::string header = "curriculum_id,seed,epoch,task_active";
      for (int k = 1; k <= n_tasks; ++k) header += ",loss_val_task" + std::to_string(k);
      header += ",grad_norm2";
      for (int k = 1; k <= n_tasks; ++k) header += ",align_task" + std::to_string(k);
      traces << header << '\n';
      for (const auto& job : jobs) {
        const auto rd = dir / "runs" / run_dir_name(job.curriculum->id.index, job.seed);
        if (fs::exists(rd / "trace.csv")) append_csv_body(traces, rd / "trace.csv");
      }
    }
    write_report_csv(dir / "report.csv", res.report);
    if (res.report.size() >= 3)
      write_correlations_json(dir / "correlations.json", res.correlations, res.report.size());
    write_experiment_summary(dir, res, spec);
  }
  return res;
}

EndLossStats end_loss_stats(const ExperimentResult& res, std::optional<int> curriculum) {
  std::vector<double> l1_t1, l2_t2, l1_final;
  for (const auto& r : res.runs) {
    if (r.aborted || r.end_losses.empty()) continue;
    if (curriculum && r.curriculum != *curriculum) continue;
    l1_t1.push_back(r.end_losses[0][0]);
    if (r.end_losses.size() >= 2) l2_t2.push_back(r.end_losses[1][1]);
    l1_final.push_back(r.end_losses.back()[0]);
  }
  EndLossStats s;
  s.n_runs = static_cast<int>(l1_t1.size());
  s.l1_t1_mean = mean_of(l1_t1);
  s.l1_t1_sd = sd_of(l1_t1);
  s.l2_t2_mean = mean_of(l2_t2);
  s.l2_t2_sd = sd_of(l2_t2);
  s.l1_final_mean = mean_of(l1_final);
  s.l1_final_sd = sd_of(l1_final);
  return s;
}

namespace {

TaskSpec task_from_json(const json& j) {
  if (j.at("type") == "grating") {
    GratingTask g;
    g.cat0.mean = {j.at("mu")[0].get<double>(), j.at("mu")[1].get<double>()};
    g.cat1.mean = {j.at("upsilon")[0].get<double>(), j.at("upsilon")[1].get<double>()};
    g.cat0.sigma2 = g.cat1.sigma2 = j.at("sigma2").get<double>();
    return g;
  }
  return MnistTask{j.at("digit0").get<int>(), j.at("digit1").get<int>()};
}

}  // namespace

ExperimentResult load_experiment(const std::filesystem::path& dir) {
  std::ifstream in(dir / "manifest.json");
  if (!in) throw std::runtime_error("cannot open " + (dir / "manifest.json").string());
  json j;
  in >> j;

  ExperimentResult res;
  res.kind = parse_experiment_kind(j.at("experiment").get<std::string>());
  const double eps_cf = j.at("config").at("eps_cf").get<double>();
  for (const auto& cj : j.at("curricula")) {
    Curriculum c;
    c.id = {cj.at("experiment").get<std::string>(), cj.at("index").get<int>()};
    c.construction_seed = cj.at("construction_seed").get<std::uint64_t>();
    if (!cj.at("gamma").is_null()) c.gamma = cj.at("gamma").get<double>();
    if (!cj.at("direction").is_null())
      c.direction = Vec2{cj.at("direction")[0].get<double>(), cj.at("direction")[1].get<double>()};
    for (const auto& tj : cj.at("tasks")) c.tasks.push_back(task_from_json(tj));
    res.curricula.push_back(std::move(c));
  }

  const auto runs_dir = dir / "runs";
  if (!fs::exists(runs_dir)) throw std::runtime_error("missing runs/ under " + dir.string());
  std::vector<fs::path> run_dirs;
  for (const auto& e : fs::directory_iterator(runs_dir))
    if (e.is_directory()) run_dirs.push_back(e.path());
  std::sort(run_dirs.begin(), run_dirs.end());
  for (const auto& rd : run_dirs) {
    if (auto s = load_run_summary(rd / "summary.json")) {
      if (s->aborted) ++res.aborted_runs;
      res.runs.push_back(std::move(*s));
    }
  }
  if (res.runs.empty()) throw std::runtime_error("no completed runs under " + runs_dir.string());

  res.report = aggregate_report(res.curricula, res.runs, eps_cf);
  for (const auto& a : res.report)
    if (a.forgot) ++res.n_forgetting;
  if (res.report.size() >= 3) res.correlations = correlate_forgetting(res.report);
  if (res.kind == ExperimentKind::exp1 && res.curricula.size() == 2) {
    std::vector<double> semantic_final, perceptual_final;
    for (const auto& r : res.runs) {
      if (r.aborted || r.end_losses.empty()) continue;
      (r.curriculum == 0 ? semantic_final : perceptual_final).push_back(r.end_losses.back()[0]);
    }
    if (semantic_final.size() >= 2 && perceptual_final.size() >= 2)
      res.exp1_welch = welch_t(semantic_final, perceptual_final);
  }
  return res;
}

}  // namespace cflab
