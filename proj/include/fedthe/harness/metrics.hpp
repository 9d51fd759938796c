#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "fedthe/data/dataset.hpp"
#include "fedthe/tta/predict.hpp"

namespace fedthe::harness {

/// One (method, client, stream, seed) evaluation outcome; the unit of all
/// reports. Accuracy is exactly correct / n_samples.
struct MetricsRecord {
  std::string method;
  std::string ablation;  // compact flag summary, e.g. "loss:slw,hist:1,bw:0,bs:0"
  int client = -1;
  data::StreamKind stream = data::StreamKind::Id;
  std::uint64_t seed = 0;
  std::int64_t correct = 0;
  std::int64_t n_samples = 0;
  double accuracy = 0.0;
  /// Measured, non-deterministic; kept out of the metrics file so reruns are
  /// byte-identical (written to the timings sidecar instead).
  double wall_time_sec = 0.0;
};

std::string ablation_tag(const tta::AdaptConfig& adapt, bool balanced_softmax);

/// One record per line, fixed field order, independently parseable.
std::string format_metrics_line(const MetricsRecord& record);
MetricsRecord parse_metrics_line(const std::string& line);

void append_metrics(const std::filesystem::path& path,
                    const std::vector<MetricsRecord>& records);
std::vector<MetricsRecord> read_metrics(const std::filesystem::path& path);

void write_etrace_header(std::ostream& out);
void write_etrace_rows(std::ostream& out, const std::vector<tta::ETraceRow>& rows);

struct ETraceEntry {
  int client = -1;
  data::StreamKind stream = data::StreamKind::Id;
  int sample_index = 0;
  double one_minus_e = 0.0;
  bool correct = false;
};

std::vector<ETraceEntry> read_etrace(const std::filesystem::path& path);

}  // namespace fedthe::harness
