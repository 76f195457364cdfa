// Experiment orchestration: each task reads the validated config, runs, and
// writes report.json plus CSV series into the output directory.
#pragma once

#include "ipde/config.hpp"
#include "ipde/report.hpp"
#include "ipde/solver.hpp"

namespace ipde {

struct TaskResult {
    int exit_code = 0;  // 0 pass, 2 verification failure (report written), 1 error
    json report;
};

/// Dispatch on cfg.task. Exceptions escape to the caller (exit 1 at the CLI).
TaskResult run_task(const ExperimentConfig& cfg, const std::string& out_dir, int threads,
                    std::uint64_t seed);

/// HJBI problem assembled from the [problem] / [pair a b] sections.
HJBIProblem problem_from_config(const ExperimentConfig& cfg);

/// Barrier-built Perron sandwich: upper = A psi_g + B inside (g outside),
/// lower = -(A psi_g + B') inside; both verified discrete super/subsolutions by
/// the global-barrier inequality.
std::pair<GridFunction, GridFunction> perron_barrier_pair(const DiscreteOperator& op,
                                                          const HJBIProblem& prob,
                                                          double f_sup, double g_sup);

}  // namespace ipde
