#include "fedq/report.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>

#include "fedq/errors.hpp"

namespace fedq {

namespace fs = std::filesystem;

double percentile(std::vector<double> values, double q) {
  if (values.empty()) throw std::invalid_argument("percentile of empty set");
  if (!(q > 0.0 && q <= 1.0)) throw std::invalid_argument("percentile q out of range");
  std::sort(values.begin(), values.end());
  const auto n = static_cast<double>(values.size());
  auto rank = static_cast<std::size_t>(std::ceil(q * n - 1e-12));
  rank = std::clamp<std::size_t>(rank, 1, values.size());
  return values[rank - 1];
}

const RoundRecord* record_at(std::span<const RoundRecord> records,
                             double episodes_per_agent) {
  auto it = std::upper_bound(
      records.begin(), records.end(), episodes_per_agent,
      [](double e, const RoundRecord& r) { return e < r.episodes_per_agent; });
  if (it == records.begin()) return nullptr;
  return &*(it - 1);
}

namespace {

void check_grid(std::span<const RunResult> runs) {
  if (runs.empty()) throw ConfigError("no runs to report");
  const auto& first = runs.front().summary;
  for (const auto& r : runs) {
    if (r.summary.agents != first.agents || r.summary.dims != first.dims ||
        r.summary.algorithm != first.algorithm) {
      throw ConfigError("runs in one report group disagree on algorithm, M or dims");
    }
    if (r.records.empty()) throw ConfigError("run without records");
  }
}

template <typename Value>
std::vector<PlotRow> curve(std::span<const RunResult> runs, std::size_t points,
                           double x_scale, Value value) {
  check_grid(runs);
  if (points == 0) throw ConfigError("grid needs at least one point");
  double horizon_end = runs.front().records.back().episodes_per_agent;
  for (const auto& r : runs) {
    horizon_end = std::min(horizon_end, r.records.back().episodes_per_agent);
  }
  std::vector<PlotRow> rows;
  for (std::size_t i = 1; i <= points; ++i) {
    const double mark = horizon_end * static_cast<double>(i) / static_cast<double>(points);
    std::vector<double> ys;
    for (const auto& r : runs) {
      const RoundRecord* rec = record_at(r.records, mark);
      if (!rec) break;
      ys.push_back(value(r, *rec));
    }
    if (ys.size() != runs.size()) continue;
    rows.push_back({mark * x_scale, percentile(ys, 0.5), percentile(ys, 0.1),
                    percentile(ys, 0.9)});
  }
  return rows;
}

std::string format_rows(const char* x_name, const std::vector<PlotRow>& rows) {
  std::string s = std::string(x_name) + ",median,p10,p90\n";
  char buf[64];
  for (const auto& r : rows) {
    for (double v : {r.x, r.median, r.p10, r.p90}) {
      auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
      s.append(buf, ptr);
      s += ',';
    }
    s.back() = '\n';
  }
  return s;
}

}  // namespace

std::vector<PlotRow> regret_curve(std::span<const RunResult> runs,
                                  std::size_t points) {
  const double M = runs.empty() ? 1.0 : static_cast<double>(runs.front().summary.agents);
  return curve(runs, points, M, [](const RunResult& run, const RoundRecord& rec) {
    const double mt = static_cast<double>(run.summary.agents) *
                      static_cast<double>(run.summary.dims.horizon) *
                      rec.episodes_per_agent;
    return rec.cumulative_regret / std::sqrt(mt);
  });
}

std::vector<PlotRow> rounds_curve(std::span<const RunResult> runs,
                                  std::size_t points) {
  return curve(runs, points, 1.0, [](const RunResult&, const RoundRecord& rec) {
    return static_cast<double>(rec.round);
  });
}

RunResult load_run(const std::string& dir) {
  RunResult run;
  {
    std::ifstream in(fs::path(dir) / "summary.json");
    if (!in) throw ConfigError("missing summary.json in " + dir);
    nlohmann::json j;
    try {
      in >> j;
    } catch (const nlohmann::json::parse_error& e) {
      throw ConfigError("cannot parse summary in " + dir + ": " + e.what());
    }
    run.summary = RunSummary::from_json(j);
  }
  std::ifstream in(fs::path(dir) / "metrics.csv");
  if (!in) throw ConfigError("missing metrics.csv in " + dir);
  std::string line;
  std::getline(in, line);
  if (line != kMetricsHeader) throw ConfigError("unexpected metrics header in " + dir);
  while (std::getline(in, line)) {
    if (!line.empty()) run.records.push_back(parse_record(line));
  }
  return run;
}

std::vector<std::string> emit_plot_data(const std::string& runs_dir,
                                        const std::string& out_dir,
                                        std::size_t points) {
  if (!fs::is_directory(runs_dir)) throw ConfigError("no such run directory " + runs_dir);
  std::vector<fs::path> dirs;
  for (const auto& entry : fs::recursive_directory_iterator(runs_dir)) {
    if (entry.is_regular_file() && entry.path().filename() == "summary.json") {
      dirs.push_back(entry.path().parent_path());
    }
  }
  std::sort(dirs.begin(), dirs.end());
  std::map<std::string, std::vector<RunResult>> groups;
  for (const auto& d : dirs) {
    RunResult r = load_run(d.string());
    groups[r.summary.algorithm].push_back(std::move(r));
  }
  if (groups.empty()) throw ConfigError("no runs found below " + runs_dir);

  fs::create_directories(out_dir);
  std::vector<std::string> written;
  auto write = [&](const std::string& name, const std::string& body) {
    const auto path = (fs::path(out_dir) / name).string();
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ConfigError("cannot write " + path);
    out << body;
    written.push_back(path);
  };
  for (const auto& [algorithm, runs] : groups) {
    write(algorithm + "_regret.csv", format_rows("MT_over_H", regret_curve(runs, points)));
    if (is_federated(parse_algorithm(algorithm))) {
      write(algorithm + "_rounds.csv", format_rows("T_over_H", rounds_curve(runs, points)));
    }
  }
  return written;
}

}  // namespace fedq
