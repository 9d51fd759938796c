#include "fedthe/harness/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>

namespace fedthe::harness {

namespace {

double mean_of(const std::vector<double>& v) {
  double acc = 0.0;
  for (double x : v) {
    acc += x;
  }
  return v.empty() ? 0.0 : acc / static_cast<double>(v.size());
}

double population_std(const std::vector<double>& v) {
  if (v.size() < 2) {
    return 0.0;
  }
  const double mu = mean_of(v);
  double acc = 0.0;
  for (double x : v) {
    acc += (x - mu) * (x - mu);
  }
  return std::sqrt(acc / static_cast<double>(v.size()));
}

std::string cell_text(double mean, double std) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.2f +- %.2f", 100.0 * mean, 100.0 * std);
  return buf;
}

}  // namespace

ReportTable report(const std::vector<MetricsRecord>& records) {
  if (records.empty()) {
    throw std::runtime_error("report: no metrics records");
  }
  ReportTable table;
  for (const MetricsRecord& r : records) {
    if (std::find(table.methods.begin(), table.methods.end(), r.method) ==
        table.methods.end()) {
      table.methods.push_back(r.method);
    }
    if (std::find(table.streams.begin(), table.streams.end(), r.stream) ==
        table.streams.end()) {
      table.streams.push_back(r.stream);
    }
  }

  // (method, stream, seed) -> client accuracies
  std::map<std::tuple<std::string, data::StreamKind, std::uint64_t>,
           std::vector<double>>
      by_cell_seed;
  for (const MetricsRecord& r : records) {
    by_cell_seed[{r.method, r.stream, r.seed}].push_back(r.accuracy);
  }

  std::set<std::uint64_t> seed_set;
  for (const MetricsRecord& r : records) {
    seed_set.insert(r.seed);
  }

  table.cells.assign(table.methods.size(),
                     std::vector<ReportCell>(table.streams.size()));
  table.average.assign(table.methods.size(), 0.0);
  table.average_std_over_streams.assign(table.methods.size(), 0.0);
  table.average_std_over_seeds.assign(table.methods.size(), 0.0);

  for (std::size_t mi = 0; mi < table.methods.size(); ++mi) {
    std::vector<double> stream_means;
    // Per-seed averages across streams, for the seed-spread of the Average.
    std::map<std::uint64_t, std::vector<double>> per_seed_stream_means;
    for (std::size_t si = 0; si < table.streams.size(); ++si) {
      std::vector<double> per_seed;
      for (std::uint64_t seed : seed_set) {
        auto it = by_cell_seed.find({table.methods[mi], table.streams[si], seed});
        if (it != by_cell_seed.end()) {
          const double client_avg = mean_of(it->second);
          per_seed.push_back(client_avg);
          per_seed_stream_means[seed].push_back(client_avg);
        }
      }
      if (!per_seed.empty()) {
        ReportCell& cell = table.cells[mi][si];
        cell.present = true;
        cell.mean = mean_of(per_seed);
        cell.std_over_seeds = population_std(per_seed);
        stream_means.push_back(cell.mean);
      }
    }
    table.average[mi] = mean_of(stream_means);
    table.average_std_over_streams[mi] = population_std(stream_means);
    std::vector<double> seed_avgs;
    for (const auto& [seed, means] : per_seed_stream_means) {
      seed_avgs.push_back(mean_of(means));
    }
    table.average_std_over_seeds[mi] = population_std(seed_avgs);
  }
  return table;
}

std::string format_report_text(const ReportTable& table) {
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> header = {"method"};
  for (data::StreamKind s : table.streams) {
    header.push_back(data::to_string(s));
  }
  header.push_back("average(+-streams)");
  header.push_back("average(+-seeds)");
  rows.push_back(header);

  for (std::size_t mi = 0; mi < table.methods.size(); ++mi) {
    std::vector<std::string> row = {table.methods[mi]};
    for (std::size_t si = 0; si < table.streams.size(); ++si) {
      const ReportCell& cell = table.cells[mi][si];
      row.push_back(cell.present ? cell_text(cell.mean, cell.std_over_seeds) : "-");
    }
    row.push_back(cell_text(table.average[mi], table.average_std_over_streams[mi]));
    row.push_back(cell_text(table.average[mi], table.average_std_over_seeds[mi]));
    rows.push_back(row);
  }

  std::vector<std::size_t> widths(rows[0].size(), 0);
  for (const auto& row : rows) {
    for (std::size_t c = 0; c < row.size(); ++c) {
      widths[c] = std::max(widths[c], row[c].size());
    }
  }
  std::ostringstream out;
  for (const auto& row : rows) {
    for (std::size_t c = 0; c < row.size(); ++c) {
      out << row[c];
      if (c + 1 < row.size()) {
        out << std::string(widths[c] - row[c].size() + 2, ' ');
      }
    }
    out << "\n";
  }
  return out.str();
}

std::string format_report_csv(const ReportTable& table) {
  std::ostringstream out;
  out << "method";
  for (data::StreamKind s : table.streams) {
    out << "," << data::to_string(s) << "_mean," << data::to_string(s) << "_std";
  }
  out << ",average,average_std_streams,average_std_seeds\n";
  char buf[96];
  for (std::size_t mi = 0; mi < table.methods.size(); ++mi) {
    out << table.methods[mi];
    for (std::size_t si = 0; si < table.streams.size(); ++si) {
      const ReportCell& cell = table.cells[mi][si];
      std::snprintf(buf, sizeof(buf), ",%.17g,%.17g", cell.mean, cell.std_over_seeds);
      out << buf;
    }
    std::snprintf(buf, sizeof(buf), ",%.17g,%.17g,%.17g\n", table.average[mi],
                  table.average_std_over_streams[mi], table.average_std_over_seeds[mi]);
    out << buf;
  }
  return out.str();
}

HistogramTable export_e_histogram(const std::vector<ETraceEntry>& entries, int bins) {
  if (entries.empty()) {
    throw std::runtime_error("export_e_histogram: empty e-trace");
  }
  if (bins < 1) {
    throw std::invalid_argument("export_e_histogram: bins must be >= 1");
  }
  HistogramTable table;
  table.bins = bins;
  std::map<data::StreamKind, std::vector<std::int64_t>> raw;
  for (const ETraceEntry& e : entries) {
    if (std::find(table.streams.begin(), table.streams.end(), e.stream) ==
        table.streams.end()) {
      table.streams.push_back(e.stream);
      raw[e.stream].assign(bins, 0);
    }
    int bin = static_cast<int>(e.one_minus_e * bins);
    bin = std::clamp(bin, 0, bins - 1);
    raw[e.stream][bin] += 1;
  }
  const double width = 1.0 / static_cast<double>(bins);
  for (data::StreamKind kind : table.streams) {
    const auto& counts = raw[kind];
    std::int64_t total = 0;
    for (std::int64_t c : counts) {
      total += c;
    }
    std::vector<double> density(bins, 0.0);
    for (int b = 0; b < bins; ++b) {
      density[b] = static_cast<double>(counts[b]) /
                   (static_cast<double>(total) * width);
    }
    table.density.push_back(std::move(density));
    table.counts.push_back(total);
  }
  return table;
}

std::string format_histogram_text(const HistogramTable& table) {
  std::ostringstream out;
  const double width = 1.0 / static_cast<double>(table.bins);
  out << "density of (1 - e) per stream, " << table.bins << " bins over [0, 1]\n";
  for (std::size_t si = 0; si < table.streams.size(); ++si) {
    out << data::to_string(table.streams[si]) << " (n=" << table.counts[si] << "):";
    char buf[32];
    for (int b = 0; b < table.bins; ++b) {
      std::snprintf(buf, sizeof(buf), " %.3f", table.density[si][b] * width);
      out << buf;
    }
    out << "\n";
  }
  return out.str();
}

std::string format_histogram_csv(const HistogramTable& table) {
  std::ostringstream out;
  out << "stream,bin_low,bin_high,density\n";
  const double width = 1.0 / static_cast<double>(table.bins);
  char buf[96];
  for (std::size_t si = 0; si < table.streams.size(); ++si) {
    for (int b = 0; b < table.bins; ++b) {
      std::snprintf(buf, sizeof(buf), "%s,%.17g,%.17g,%.17g\n",
                    data::to_string(table.streams[si]).c_str(), b * width,
                    (b + 1) * width, table.density[si][b]);
      out << buf;
    }
  }
  return out.str();
}

}  // namespace fedthe::harness
