#pragma once

#include "cli/config.hpp"

namespace ionbell::cli {

// Each command writes its files into cfg.out_dir (created if missing).

/// timeseries.csv + summary.json
void cmd_steady(const RunConfig& cfg);
/// trajectory.csv + events.csv; with ensemble_size >= 2 also ensemble.csv,
/// ensemble_events.csv and summary.json
void cmd_trajectory(const RunConfig& cfg);
/// conditional.csv + summary.json, and table1.csv unless table1=false
void cmd_conditional(const RunConfig& cfg);
/// sweep.csv, and fit.json when fit=true
void cmd_sweep(const RunConfig& cfg);
/// compare.csv + summary.json
void cmd_compare_models(const RunConfig& cfg);

/// Full command-line entry point. Returns the process exit code:
/// 0 ok, 1 other failure, 2 configuration error, 3 numerical abort.
int run(int argc, char** argv);

}  // namespace ionbell::cli
