#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "cflab/curricula.hpp"
#include "cflab/diagnostics.hpp"
#include "cflab/training.hpp"

namespace cflab {

/// Malformed or incomplete artifact files; the message names the file.
struct CsvFormatError : std::runtime_error {
  explicit CsvFormatError(const std::string& what) : std::runtime_error(what) {}
};

/// %.17g formatting: round-trip exact and byte-stable across reruns.
std::string format_double(double v);

/// Per-run trace rows with the canonical column set
/// curriculum_id,seed,epoch,task_active,loss_val_task1..N,grad_norm2,align_task1..N.
void write_trace_csv(const std::filesystem::path& path, const RunRecord& rec);

/// Appends the data rows of `src` (skipping its header) to `out`.
void append_csv_body(std::ofstream& out, const std::filesystem::path& src);

struct TraceRow {
  int curriculum = 0;
  std::uint64_t seed = 0;
  int epoch = 0;
  int task_active = 0;  // 1-based as stored
  std::vector<double> val_losses;
  double grad_norm2 = 0.0;
  std::vector<double> align;
};

struct TraceTable {
  int n_tasks = 0;
  std::vector<TraceRow> rows;
};

TraceTable read_traces_csv(const std::filesystem::path& path);

void write_report_csv(const std::filesystem::path& path,
                      const std::vector<CurriculumAggregate>& report);
std::vector<CurriculumAggregate> read_report_csv(const std::filesystem::path& path);

void write_correlations_json(const std::filesystem::path& path, const CorrelationTable& table,
                             std::size_t n_curricula);

/// Snapshot: raw little-endian float64 of the flattened parameters plus a
/// JSON sidecar holding shapes, layout, running stats and provenance.
void write_snapshot(const std::filesystem::path& stem, const NetSnapshot& snap,
                    const CurriculumId& id, std::uint64_t seed, int task_index);
NetSnapshot read_snapshot(const std::filesystem::path& stem);

/// runs/c012_s03 style run directory name.
std::string run_dir_name(int curriculum, std::uint64_t seed);

}  // namespace cflab
