#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "fedthe/harness/metrics.hpp"

namespace fedthe::harness {

struct ReportCell {
  double mean = 0.0;
  double std_over_seeds = 0.0;  // population std
  bool present = false;
};

/// Rows are methods, columns are stream kinds plus an Average column.
/// Per-cell accuracy is client-averaged per seed first, then aggregated over
/// seeds. The Average column holds the mean of the per-stream means; its two
/// spreads (over streams and over seeds) are both emitted, labeled.
struct ReportTable {
  std::vector<std::string> methods;
  std::vector<data::StreamKind> streams;
  std::vector<std::vector<ReportCell>> cells;  // [method][stream]
  std::vector<double> average;                 // mean over stream means
  std::vector<double> average_std_over_streams;
  std::vector<double> average_std_over_seeds;
};

ReportTable report(const std::vector<MetricsRecord>& records);

std::string format_report_text(const ReportTable& table);
std::string format_report_csv(const ReportTable& table);

struct HistogramTable {
  int bins = 20;
  std::vector<data::StreamKind> streams;
  /// Probability densities over [0, 1]; each row integrates to 1.
  std::vector<std::vector<double>> density;  // [stream][bin]
  std::vector<std::int64_t> counts;          // samples per stream
};

/// Normalized histogram of 1 - e per stream kind from an e-trace file.
HistogramTable export_e_histogram(const std::vector<ETraceEntry>& entries, int bins);

std::string format_histogram_text(const HistogramTable& table);
std::string format_histogram_csv(const HistogramTable& table);

}  // namespace fedthe::harness
