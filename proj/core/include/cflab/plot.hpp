#pragma once

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "cflab/io.hpp"

namespace cflab {

struct SvgOptions {
  bool timestamp = true;  // embeds a generation-time comment
};

/// Scatter with a least-squares line when there are >= 2 points with
/// non-constant x; optional symmetric vertical error bars. Throws
/// std::invalid_argument on an empty point set.
std::string svg_scatter(const std::vector<std::pair<double, double>>& points,
                        const std::vector<double>& y_err, const std::string& x_label,
                        const std::string& y_label, const std::string& title,
                        const SvgOptions& opts);

/// Bar chart with symmetric error whiskers (one bar per value).
std::string svg_bars(const std::vector<double>& values, const std::vector<double>& errors,
                     const std::vector<std::string>& labels, const std::string& y_label,
                     const std::string& title, const SvgOptions& opts);

/// Three stacked panels for one curriculum, averaged across seeds:
/// per-task validation loss, parameter alignment, gradient 2-norm.
std::string svg_traces(const TraceTable& table, int curriculum, const SvgOptions& opts);

/// Emits the standard figure set for a completed run directory:
/// dl1_bars.svg, scatter_gnew.svg, scatter_domega.svg / scatter_dtheta.svg
/// (when the distances are defined), and traces_c<k>.svg per curriculum
/// present in traces.csv.
void write_plots(const std::filesystem::path& run_dir, const std::filesystem::path& out_dir,
                 const SvgOptions& opts);

}  // namespace cflab
