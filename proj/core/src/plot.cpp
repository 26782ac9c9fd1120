#include "cflab/plot.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <ctime>
#include <fstream>
#include <limits>
#include <map>
#include <numeric>
#include <sstream>

namespace cflab {

namespace fs = std::filesystem;

namespace {

constexpr double kWidth = 640;
constexpr double kPanelHeight = 300;
constexpr double kMarginL = 70, kMarginR = 20, kMarginT = 40, kMarginB = 50;

const char* kSeriesColors[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728"};

std::string now_comment() {
  const auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  char buf[32];
  std::tm tm_utc{};
  gmtime_r(&t, &tm_utc);
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm_utc);
  return std::string("<!-- generated: ") + buf + " -->\n";
}

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(6);
  os << v;
  return os.str();
}

struct Range {
  double lo = 0.0, hi = 1.0;

  void expand(double v) {
    if (!std::isfinite(v)) return;
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  static Range of(const std::vector<double>& vs) {
    Range r{std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity()};
    for (double v : vs) r.expand(v);
    if (!std::isfinite(r.lo)) return {0.0, 1.0};
    if (r.lo == r.hi) {  // flat series: open a window around it
      r.lo -= 0.5;
      r.hi += 0.5;
    }
    return r;
  }
};

std::vector<double> nice_ticks(const Range& r, int target = 5) {
  const double span = r.hi - r.lo;
  double step = std::pow(10.0, std::floor(std::log10(span / target)));
  for (double m : {1.0, 2.0, 5.0, 10.0}) {
    if (span / (step * m) <= target) {
      step *= m;
      break;
    }
  }
  std::vector<double> ticks;
  for (double v = std::ceil(r.lo / step) * step; v <= r.hi + 1e-9 * span; v += step)
    ticks.push_back(v);
  return ticks;
}

// One panel with linear axes; emits tick marks labelled with class xtick/ytick
// so figures stay machine-checkable.
class Panel {
 public:
  Panel(std::ostringstream& os, double y_top, Range xr, Range yr, std::string x_label,
        std::string y_label, std::string title)
      : os_(os), top_(y_top), xr_(xr), yr_(yr) {
    os_ << "<g>\n";
    os_ << "<text x=\"" << kWidth / 2 << "\" y=\"" << top_ + 18
        << "\" text-anchor=\"middle\" font-size=\"14\" class=\"title\">" << title << "</text>\n";
    // frame
    os_ << "<rect x=\"" << kMarginL << "\" y=\"" << top_ + kMarginT << "\" width=\""
        << kWidth - kMarginL - kMarginR << "\" height=\"" << kPanelHeight - kMarginT - kMarginB
        << "\" fill=\"none\" stroke=\"#444\"/>\n";
    for (double t : nice_ticks(xr_)) {
      const double px = x(t);
      os_ << "<line x1=\"" << px << "\" y1=\"" << bottom() << "\" x2=\"" << px << "\" y2=\""
          << bottom() + 4 << "\" stroke=\"#444\"/>\n";
      os_ << "<text x=\"" << px << "\" y=\"" << bottom() + 18
          << "\" text-anchor=\"middle\" font-size=\"10\" class=\"xtick\">" << fmt(t)
          << "</text>\n";
    }
    for (double t : nice_ticks(yr_)) {
      const double py = y(t);
      os_ << "<line x1=\"" << kMarginL - 4 << "\" y1=\"" << py << "\" x2=\"" << kMarginL
          << "\" y2=\"" << py << "\" stroke=\"#444\"/>\n";
      os_ << "<text x=\"" << kMarginL - 8 << "\" y=\"" << py + 3
          << "\" text-anchor=\"end\" font-size=\"10\" class=\"ytick\">" << fmt(t) << "</text>\n";
    }
    os_ << "<text x=\"" << kWidth / 2 << "\" y=\"" << top_ + kPanelHeight - 12
        << "\" text-anchor=\"middle\" font-size=\"12\">" << x_label << "</text>\n";
    os_ << "<text x=\"16\" y=\"" << top_ + kPanelHeight / 2
        << "\" text-anchor=\"middle\" font-size=\"12\" transform=\"rotate(-90 16 "
        << top_ + kPanelHeight / 2 << ")\">" << y_label << "</text>\n";
  }
  ~Panel() { os_ << "</g>\n"; }

  double x(double v) const {
    return kMarginL + (v - xr_.lo) / (xr_.hi - xr_.lo) * (kWidth - kMarginL - kMarginR);
  }
  double y(double v) const {
    return top_ + kMarginT +
           (yr_.hi - v) / (yr_.hi - yr_.lo) * (kPanelHeight - kMarginT - kMarginB);
  }
  double bottom() const { return top_ + kPanelHeight - kMarginB; }
  double top_frame() const { return top_ + kMarginT; }

  void polyline(const std::vector<std::pair<double, double>>& pts, const char* color) {
    os_ << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.2\" points=\"";
    for (const auto& [px, py] : pts)
      if (std::isfinite(py)) os_ << x(px) << ',' << y(py) << ' ';
    os_ << "\"/>\n";
  }
  void circle(double vx, double vy, const char* color) {
    os_ << "<circle cx=\"" << x(vx) << "\" cy=\"" << y(vy)
        << "\" r=\"3\" fill=\"" << color << "\" class=\"point\"/>\n";
  }
  void vline(double vx, const char* color, bool dashed) {
    os_ << "<line x1=\"" << x(vx) << "\" y1=\"" << top_frame() << "\" x2=\"" << x(vx)
        << "\" y2=\"" << bottom() << "\" stroke=\"" << color << "\""
        << (dashed ? " stroke-dasharray=\"4 3\"" : "") << "/>\n";
  }
  void segment(double x1, double y1, double x2, double y2, const char* color) {
    os_ << "<line x1=\"" << x(x1) << "\" y1=\"" << y(y1) << "\" x2=\"" << x(x2) << "\" y2=\""
        << y(y2) << "\" stroke=\"" << color << "\" stroke-width=\"1.5\"/>\n";
  }
  void raw(const std::string& s) { os_ << s; }
  std::ostringstream& os() { return os_; }

 private:
  std::ostringstream& os_;
  double top_;
  Range xr_, yr_;
};

std::string svg_open(double height, const SvgOptions& opts) {
  std::string s = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + fmt(kWidth) +
                  "\" height=\"" + fmt(height) + "\" font-family=\"sans-serif\">\n";
  if (opts.timestamp) s += now_comment();
  return s;
}

}  // namespace

std::string svg_scatter(const std::vector<std::pair<double, double>>& points,
                        const std::vector<double>& y_err, const std::string& x_label,
                        const std::string& y_label, const std::string& title,
                        const SvgOptions& opts) {
  if (points.empty()) throw std::invalid_argument("svg_scatter: no points to plot");
  if (!y_err.empty() && y_err.size() != points.size())
    throw std::invalid_argument("svg_scatter: error bar count mismatch");

  std::vector<double> xs, ys;
  for (const auto& [px, py] : points) {
    xs.push_back(px);
    ys.push_back(py);
  }
  Range xr = Range::of(xs);
  Range yr = Range::of(ys);
  for (std::size_t i = 0; i < y_err.size(); ++i) {
    yr.expand(ys[i] + y_err[i]);
    yr.expand(ys[i] - y_err[i]);
  }

  std::ostringstream os;
  os << svg_open(kPanelHeight, opts);
  {
    Panel p(os, 0, xr, yr, x_label, y_label, title);
    for (std::size_t i = 0; i < points.size(); ++i) {
      if (!y_err.empty())
        p.segment(xs[i], ys[i] - y_err[i], xs[i], ys[i] + y_err[i], "#bbbbbb");
      p.circle(xs[i], ys[i], kSeriesColors[0]);
    }
    // Least-squares line needs at least two distinct x values.
    const double mx = std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
    double sxx = 0.0, sxy = 0.0, my = 0.0;
    for (double v : ys) my += v;
    my /= static_cast<double>(ys.size());
    for (std::size_t i = 0; i < xs.size(); ++i) {
      sxx += (xs[i] - mx) * (xs[i] - mx);
      sxy += (xs[i] - mx) * (ys[i] - my);
    }
    if (points.size() >= 2 && sxx > 0.0) {
      const double slope = sxy / sxx;
      const double icept = my - slope * mx;
      p.segment(xr.lo, icept + slope * xr.lo, xr.hi, icept + slope * xr.hi, kSeriesColors[1]);
    }
  }
  os << "</svg>\n";
  return os.str();
}

std::string svg_bars(const std::vector<double>& values, const std::vector<double>& errors,
                     const std::vector<std::string>& labels, const std::string& y_label,
                     const std::string& title, const SvgOptions& opts) {
  if (values.empty()) throw std::invalid_argument("svg_bars: no values to plot");
  if (!errors.empty() && errors.size() != values.size())
    throw std::invalid_argument("svg_bars: error bar count mismatch");

  Range yr{0.0, 0.0};
  for (std::size_t i = 0; i < values.size(); ++i) {
    yr.expand(values[i] + (errors.empty() ? 0.0 : errors[i]));
    yr.expand(values[i] - (errors.empty() ? 0.0 : errors[i]));
  }
  if (yr.lo == yr.hi) yr.hi = yr.lo + 1.0;
  Range xr{-0.75, static_cast<double>(values.size()) - 0.25};

  std::ostringstream os;
  os << svg_open(kPanelHeight, opts);
  {
    Panel p(os, 0, xr, yr, "", y_label, title);
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double cx = static_cast<double>(i);
      const double x0 = p.x(cx - 0.35), x1 = p.x(cx + 0.35);
      const double ybase = p.y(std::max(0.0, yr.lo));
      const double ytop = p.y(values[i]);
      p.os() << "<rect x=\"" << std::min(x0, x1) << "\" y=\"" << std::min(ybase, ytop)
             << "\" width=\"" << std::fabs(x1 - x0) << "\" height=\"" << std::fabs(ybase - ytop)
             << "\" fill=\"" << kSeriesColors[0] << "\" class=\"bar\"/>\n";
      if (!errors.empty())
        p.segment(cx, values[i] - errors[i], cx, values[i] + errors[i], "#333333");
      if (i < labels.size() && (values.size() <= 12 || i % 5 == 0))
        p.os() << "<text x=\"" << p.x(cx) << "\" y=\"" << p.bottom() + 18
               << "\" text-anchor=\"middle\" font-size=\"9\">" << labels[i] << "</text>\n";
    }
  }
  os << "</svg>\n";
  return os.str();
}

std::string svg_traces(const TraceTable& table, int curriculum, const SvgOptions& opts) {
  // Mean across seeds per epoch.
  std::map<int, std::pair<std::vector<double>, int>> acc;  // epoch -> (sums, count)
  const int nt = table.n_tasks;
  std::map<int, int> task_of_epoch;
  for (const auto& row : table.rows) {
    if (row.curriculum != curriculum) continue;
    auto& [sums, count] = acc[row.epoch];
    if (sums.empty()) sums.assign(static_cast<std::size_t>(2 * nt + 1), 0.0);
    for (int k = 0; k < nt; ++k) sums[static_cast<std::size_t>(k)] += row.val_losses[static_cast<std::size_t>(k)];
    sums[static_cast<std::size_t>(nt)] += row.grad_norm2;
    for (int k = 0; k < nt; ++k) {
      const double a = row.align[static_cast<std::size_t>(k)];
      sums[static_cast<std::size_t>(nt + 1 + k)] += a;  // NaN propagates, drawn as a gap
    }
    ++count;
    task_of_epoch[row.epoch] = row.task_active;
  }
  if (acc.empty())
    throw std::invalid_argument("svg_traces: no rows for curriculum " +
                                std::to_string(curriculum));

  std::vector<double> epochs;
  std::vector<std::vector<double>> val(static_cast<std::size_t>(nt)), align(static_cast<std::size_t>(nt));
  std::vector<double> grad;
  for (const auto& [epoch, entry] : acc) {
    const auto& [sums, count] = entry;
    epochs.push_back(epoch);
    for (int k = 0; k < nt; ++k) val[static_cast<std::size_t>(k)].push_back(sums[static_cast<std::size_t>(k)] / count);
    grad.push_back(sums[static_cast<std::size_t>(nt)] / count);
    for (int k = 0; k < nt; ++k)
      align[static_cast<std::size_t>(k)].push_back(sums[static_cast<std::size_t>(nt + 1 + k)] / count);
  }

  // Task boundaries: first epoch of each task after the first.
  std::vector<double> boundaries;
  int prev_task = task_of_epoch.begin()->second;
  for (const auto& [epoch, task] : task_of_epoch) {
    if (task != prev_task) boundaries.push_back(epoch);
    prev_task = task;
  }

  const Range xr = Range::of(epochs);
  auto flat = [](const std::vector<std::vector<double>>& series) {
    std::vector<double> all;
    for (const auto& s : series)
      for (double v : s)
        if (std::isfinite(v)) all.push_back(v);
    return all;
  };

  std::ostringstream os;
  os << svg_open(3 * kPanelHeight, opts);
  auto draw_series = [&](Panel& p, const std::vector<std::vector<double>>& series) {
    for (std::size_t k = 0; k < series.size(); ++k) {
      std::vector<std::pair<double, double>> pts;
      for (std::size_t i = 0; i < epochs.size(); ++i) pts.emplace_back(epochs[i], series[k][i]);
      p.polyline(pts, kSeriesColors[k % 4]);
    }
    for (double b : boundaries) p.vline(b, "#999999", true);
  };
  {
    Panel p(os, 0, xr, Range::of(flat(val)), "epoch", "validation loss",
            "curriculum " + std::to_string(curriculum) + ": per-task validation loss");
    draw_series(p, val);
  }
  {
    Panel p(os, kPanelHeight, xr, Range::of(flat(align)), "epoch", "theta_j . theta(t)",
            "parameter alignment with task snapshots");
    draw_series(p, align);
  }
  {
    Panel p(os, 2 * kPanelHeight, xr, Range::of(grad), "epoch", "|grad|_2",
            "training-loss gradient 2-norm (epoch mean)");
    draw_series(p, {grad});
  }
  os << "</svg>\n";
  return os.str();
}

void write_plots(const fs::path& run_dir, const fs::path& out_dir, const SvgOptions& opts) {
  const auto report_path = run_dir / "report.csv";
  if (!fs::exists(report_path))
    throw CsvFormatError("missing report file " + report_path.string());
  const auto report = read_report_csv(report_path);
  if (report.empty())
    throw std::invalid_argument("nothing to plot: " + report_path.string() + " has no rows");

  fs::create_directories(out_dir);
  auto save = [&](const std::string& name, const std::string& svg) {
    std::ofstream out(out_dir / name);
    if (!out) throw std::runtime_error("cannot open " + (out_dir / name).string());
    out << svg;
  };

  std::vector<double> dl1, dl1_sd;
  std::vector<std::string> labels;
  for (const auto& r : report) {
    dl1.push_back(r.dl1_mean);
    dl1_sd.push_back(r.dl1_sd);
    labels.push_back(std::to_string(r.index));
  }
  save("dl1_bars.svg",
       svg_bars(dl1, dl1_sd, labels, "dL1 = L1(theta2) - L1(theta1)",
                "change in first-task loss per curriculum", opts));

  auto scatter_of = [&](auto get_x, const std::string& xlabel, const std::string& fname) {
    std::vector<std::pair<double, double>> pts;
    std::vector<double> err;
    for (const auto& r : report) {
      const double x = get_x(r);
      if (!std::isfinite(x)) return;  // undefined dimension (e.g. MNIST distances)
      pts.emplace_back(x, r.dl1_mean);
      err.push_back(r.dl1_sd);
    }
    save(fname, svg_scatter(pts, err, xlabel, "dL1", "forgetting vs " + xlabel, opts));
  };
  scatter_of([](const CurriculumAggregate& r) { return r.gnew_mean; },
             "max-norm of first new-task gradient", "scatter_gnew.svg");
  scatter_of([](const CurriculumAggregate& r) { return r.d_omega; }, "d_omega",
             "scatter_domega.svg");
  scatter_of([](const CurriculumAggregate& r) { return r.d_theta; }, "d_theta",
             "scatter_dtheta.svg");

  const auto traces_path = run_dir / "traces.csv";
  if (fs::exists(traces_path)) {
    const auto table = read_traces_csv(traces_path);
    std::vector<int> curricula;
    for (const auto& row : table.rows)
      if (curricula.empty() || curricula.back() != row.curriculum)
        curricula.push_back(row.curriculum);
    std::sort(curricula.begin(), curricula.end());
    curricula.erase(std::unique(curricula.begin(), curricula.end()), curricula.end());
    for (int c : curricula)
      save("traces_c" + std::to_string(c) + ".svg", svg_traces(table, c, opts));
  }
}

}  // namespace cflab
