#pragma once

#include <filesystem>
#include <vector>

#include "fedthe/harness/config.hpp"
#include "fedthe/harness/metrics.hpp"

namespace fedthe::harness {

/// Per seed: generate data, partition, train once, then evaluate every
/// requested method on every client's requested streams. Writes metrics.txt,
/// etrace.csv, per-seed checkpoints, and a timings sidecar under out_dir.
/// The metrics and e-trace files are byte-identical across reruns.
std::vector<MetricsRecord> run_grid(const ExperimentConfig& config,
                                    const std::filesystem::path& out_dir);

}  // namespace fedthe::harness
