#include "cflab/io.hpp"

#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

namespace cflab {

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

namespace {

std::string trace_header(int n_tasks) {
  std::string h = "curriculum_id,seed,epoch,task_active";
  for (int k = 1; k <= n_tasks; ++k) h += ",loss_val_task" + std::to_string(k);
  h += ",grad_norm2";
  for (int k = 1; k <= n_tasks; ++k) h += ",align_task" + std::to_string(k);
  return h;
}

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::size_t pos = 0;
  while (true) {
    const auto next = line.find(sep, pos);
    out.push_back(line.substr(pos, next == std::string::npos ? next : next - pos));
    if (next == std::string::npos) break;
    pos = next + 1;
  }
  return out;
}

double parse_double(const std::string& s, const std::filesystem::path& file) {
  try {
    return std::stod(s);
  } catch (const std::exception&) {
    throw CsvFormatError("bad numeric field '" + s + "' in " + file.string());
  }
}

}  // namespace

void write_trace_csv(const std::filesystem::path& path, const RunRecord& rec) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path.string());
  out << trace_header(rec.n_tasks) << '\n';
  const auto n = rec.n_records();
  const auto nt = static_cast<std::size_t>(rec.n_tasks);
  for (std::size_t r = 0; r < n; ++r) {
    out << rec.id.index << ',' << rec.seed << ',' << rec.rec_epoch[r] << ','
        << rec.rec_task[r] + 1;
    for (std::size_t k = 0; k < nt; ++k) out << ',' << format_double(rec.rec_val[r * nt + k]);
    out << ',' << format_double(rec.rec_grad_norm[r]);
    for (std::size_t k = 0; k < nt; ++k) out << ',' << format_double(rec.rec_align[r * nt + k]);
    out << '\n';
  }
  if (!out) throw std::runtime_error("short write to " + path.string());
}

void append_csv_body(std::ofstream& out, const std::filesystem::path& src) {
  std::ifstream in(src);
  if (!in) throw std::runtime_error("cannot open " + src.string());
  std::string line;
  if (!std::getline(in, line)) return;  // empty file: nothing to append
  while (std::getline(in, line)) out << line << '\n';
}

TraceTable read_traces_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw CsvFormatError("cannot open " + path.string());
  std::string header;
  if (!std::getline(in, header)) throw CsvFormatError("empty trace file " + path.string());
  const auto cols = split(header, ',');

  int n_tasks = 0;
  for (const auto& c : cols)
    if (c.rfind("loss_val_task", 0) == 0) ++n_tasks;
  if (n_tasks == 0 || cols.size() != 5 + 2 * static_cast<std::size_t>(n_tasks))
    throw CsvFormatError("unexpected columns in " + path.string() + " (header: " + header + ")");
  if (trace_header(n_tasks) != header)
    throw CsvFormatError("unexpected column names in " + path.string());

  TraceTable t;
  t.n_tasks = n_tasks;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto f = split(line, ',');
    if (f.size() != cols.size())
      throw CsvFormatError("row width mismatch in " + path.string());
    TraceRow row;
    row.curriculum = static_cast<int>(parse_double(f[0], path));
    row.seed = static_cast<std::uint64_t>(parse_double(f[1], path));
    row.epoch = static_cast<int>(parse_double(f[2], path));
    row.task_active = static_cast<int>(parse_double(f[3], path));
    for (int k = 0; k < n_tasks; ++k)
      row.val_losses.push_back(parse_double(f[4 + static_cast<std::size_t>(k)], path));
    row.grad_norm2 = parse_double(f[4 + static_cast<std::size_t>(n_tasks)], path);
    for (int k = 0; k < n_tasks; ++k)
      row.align.push_back(parse_double(f[5 + static_cast<std::size_t>(n_tasks + k)], path));
    t.rows.push_back(std::move(row));
  }
  return t;
}

void write_report_csv(const std::filesystem::path& path,
                      const std::vector<CurriculumAggregate>& report) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path.string());
  out << "curriculum_id,d_omega,d_theta,dL1_mean,dL1_sd,gnew_maxnorm_mean,gold_maxnorm_mean,"
         "forgot\n";
  for (const auto& r : report) {
    out << r.index << ',' << format_double(r.d_omega) << ',' << format_double(r.d_theta) << ','
        << format_double(r.dl1_mean) << ',' << format_double(r.dl1_sd) << ','
        << format_double(r.gnew_mean) << ',' << format_double(r.gold_mean) << ','
        << (r.forgot ? 1 : 0) << '\n';
  }
  if (!out) throw std::runtime_error("short write to " + path.string());
}

std::vector<CurriculumAggregate> read_report_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw CsvFormatError("cannot open " + path.string());
  std::string header;
  if (!std::getline(in, header)) throw CsvFormatError("empty report file " + path.string());
  if (header !=
      "curriculum_id,d_omega,d_theta,dL1_mean,dL1_sd,gnew_maxnorm_mean,gold_maxnorm_mean,forgot")
    throw CsvFormatError("unexpected columns in " + path.string());
  std::vector<CurriculumAggregate> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto f = split(line, ',');
    if (f.size() != 8) throw CsvFormatError("row width mismatch in " + path.string());
    CurriculumAggregate a;
    a.index = static_cast<int>(parse_double(f[0], path));
    a.d_omega = parse_double(f[1], path);
    a.d_theta = parse_double(f[2], path);
    a.dl1_mean = parse_double(f[3], path);
    a.dl1_sd = parse_double(f[4], path);
    a.gnew_mean = parse_double(f[5], path);
    a.gold_mean = parse_double(f[6], path);
    a.forgot = parse_double(f[7], path) != 0.0;
    out.push_back(std::move(a));
  }
  return out;
}

namespace {

nlohmann::json correlation_json(const std::optional<CorrelationResult>& c) {
  if (!c) return nullptr;
  return {{"r", c->r}, {"df", c->df}, {"p", c->p}};
}

}  // namespace

void write_correlations_json(const std::filesystem::path& path, const CorrelationTable& table,
                             std::size_t n_curricula) {
  nlohmann::json j = {
      {"n_curricula", n_curricula},
      {"dL1_vs_gnew_maxnorm", correlation_json(table.dl1_vs_gnew)},
      {"dL1_vs_gold_maxnorm", correlation_json(table.dl1_vs_gold)},
      {"dL1_vs_domega", correlation_json(table.dl1_vs_domega)},
      {"dL1_vs_dtheta", correlation_json(table.dl1_vs_dtheta)},
  };
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path.string());
  out << j.dump(2) << '\n';
}

void write_snapshot(const std::filesystem::path& stem, const NetSnapshot& snap,
                    const CurriculumId& id, std::uint64_t seed, int task_index) {
  {
    std::ofstream bin(stem.string() + ".f64", std::ios::binary);
    if (!bin) throw std::runtime_error("cannot open " + stem.string() + ".f64");
    bin.write(reinterpret_cast<const char*>(snap.theta.data()),
              static_cast<std::streamsize>(snap.theta.size() * sizeof(double)));
    if (!bin) throw std::runtime_error("short write to " + stem.string() + ".f64");
  }
  nlohmann::json j = {
      {"schema", "cflab-snapshot-v1"},
      {"dtype", "float64-le"},
      {"layout", "w1 row-major | b1 | w2 | b2"},
      {"shapes", {{"w1", {kInputDim, kHiddenDim}}, {"b1", {kHiddenDim}}, {"w2", {kHiddenDim, 1}}, {"b2", {1}}}},
      {"bn_mean", snap.bn_mean},
      {"bn_var", snap.bn_var},
      {"experiment", id.experiment},
      {"curriculum", id.index},
      {"seed", seed},
      {"task", task_index + 1},
  };
  std::ofstream meta(stem.string() + ".json");
  if (!meta) throw std::runtime_error("cannot open " + stem.string() + ".json");
  meta << j.dump(2) << '\n';
}

NetSnapshot read_snapshot(const std::filesystem::path& stem) {
  std::ifstream meta(stem.string() + ".json");
  if (!meta) throw std::runtime_error("cannot open " + stem.string() + ".json");
  nlohmann::json j;
  meta >> j;
  NetSnapshot s;
  s.bn_mean = j.at("bn_mean").get<std::vector<double>>();
  s.bn_var = j.at("bn_var").get<std::vector<double>>();
  std::ifstream bin(stem.string() + ".f64", std::ios::binary);
  if (!bin) throw std::runtime_error("cannot open " + stem.string() + ".f64");
  s.theta.resize(kParamCount);
  bin.read(reinterpret_cast<char*>(s.theta.data()),
           static_cast<std::streamsize>(s.theta.size() * sizeof(double)));
  if (bin.gcount() != static_cast<std::streamsize>(s.theta.size() * sizeof(double)))
    throw std::runtime_error("truncated snapshot " + stem.string() + ".f64");
  return s;
}

std::string run_dir_name(int curriculum, std::uint64_t seed) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "c%03d_s%02" PRIu64, curriculum, seed);
  return buf;
}

}  // namespace cflab
