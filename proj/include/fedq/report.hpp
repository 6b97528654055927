#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "fedq/experiment.hpp"

namespace fedq {

// Nearest-rank percentile: the ceil(q n)-th smallest value (q in (0, 1]).
double percentile(std::vector<double> values, double q);
inline double median(std::vector<double> values) {
  return percentile(std::move(values), 0.5);
}

struct PlotRow {
  double x = 0.0;
  double median = 0.0;
  double p10 = 0.0;
  double p90 = 0.0;
};

// Last record at or before a cumulative-episodes-per-agent mark, or nullptr.
const RoundRecord* record_at(std::span<const RoundRecord> records,
                             double episodes_per_agent);

// Regret(T)/sqrt(M T) against M T / H, stepwise on a grid of `points`
// evenly spaced total-episode marks up to the shortest run.
std::vector<PlotRow> regret_curve(std::span<const RunResult> runs,
                                  std::size_t points);

// Completed rounds against T / H on the same kind of grid.
std::vector<PlotRow> rounds_curve(std::span<const RunResult> runs,
                                  std::size_t points);

// Reads every seed_* run below runs_dir, groups them by algorithm and writes
// <out_dir>/<algorithm>_regret.csv (and _rounds.csv for federated runs).
// Returns the files written.
std::vector<std::string> emit_plot_data(const std::string& runs_dir,
                                        const std::string& out_dir,
                                        std::size_t points = 200);

RunResult load_run(const std::string& dir);

}  // namespace fedq
