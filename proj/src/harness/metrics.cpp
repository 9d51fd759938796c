#include "fedthe/harness/metrics.hpp"

#include <cinttypes>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace fedthe::harness {

std::string ablation_tag(const tta::AdaptConfig& adapt, bool balanced_softmax) {
  std::string tag = "loss:" + tta::to_string(adapt.loss_mode);
  tag += ",hist:" + std::string(adapt.use_history ? "1" : "0");
  tag += ",bw:" + std::string(adapt.batch_wise ? "1" : "0");
  tag += ",bs:" + std::string(balanced_softmax ? "1" : "0");
  return tag;
}

std::string format_metrics_line(const MetricsRecord& r) {
  char buf[256];
  std::snprintf(buf, sizeof(buf),
                "method=%s ablation=%s client=%d stream=%s seed=%" PRIu64
                " correct=%" PRId64 " n=%" PRId64 " accuracy=%.17g",
                r.method.c_str(), r.ablation.c_str(), r.client,
                data::to_string(r.stream).c_str(), r.seed, r.correct, r.n_samples,
                r.accuracy);
  return buf;
}

namespace {

std::string field(const std::string& token, const std::string& key, int line_no) {
  const std::string prefix = key + "=";
  if (token.rfind(prefix, 0) != 0) {
    throw std::runtime_error("metrics line " + std::to_string(line_no) +
                             ": expected field '" + key + "', got '" + token + "'");
  }
  return token.substr(prefix.size());
}

}  // namespace

MetricsRecord parse_metrics_line(const std::string& line) {
  std::istringstream ss(line);
  std::string tok;
  MetricsRecord r;
  ss >> tok;
  r.method = field(tok, "method", 0);
  ss >> tok;
  r.ablation = field(tok, "ablation", 0);
  ss >> tok;
  r.client = std::stoi(field(tok, "client", 0));
  ss >> tok;
  r.stream = data::stream_kind_from_string(field(tok, "stream", 0));
  ss >> tok;
  r.seed = std::stoull(field(tok, "seed", 0));
  ss >> tok;
  r.correct = std::stoll(field(tok, "correct", 0));
  ss >> tok;
  r.n_samples = std::stoll(field(tok, "n", 0));
  ss >> tok;
  r.accuracy = std::stod(field(tok, "accuracy", 0));
  if (!ss.eof() && ss.fail()) {
    throw std::runtime_error("metrics: malformed line: " + line);
  }
  return r;
}

void append_metrics(const std::filesystem::path& path,
                    const std::vector<MetricsRecord>& records) {
  std::ofstream out(path, std::ios::app);
  if (!out) {
    throw std::runtime_error("append_metrics: cannot open " + path.string());
  }
  for (const MetricsRecord& r : records) {
    out << format_metrics_line(r) << "\n";
  }
}

std::vector<MetricsRecord> read_metrics(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw std::runtime_error("read_metrics: cannot open " + path.string());
  }
  std::vector<MetricsRecord> records;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty()) {
      records.push_back(parse_metrics_line(line));
    }
  }
  return records;
}

void write_etrace_header(std::ostream& out) {
  out << "client,stream,sample_index,one_minus_e,correct\n";
}

void write_etrace_rows(std::ostream& out, const std::vector<tta::ETraceRow>& rows) {
  char buf[128];
  for (const tta::ETraceRow& row : rows) {
    std::snprintf(buf, sizeof(buf), "%d,%s,%d,%.17g,%d\n", row.client,
                  data::to_string(row.stream).c_str(), row.sample_index,
                  row.one_minus_e, row.correct ? 1 : 0);
    out << buf;
  }
}

std::vector<ETraceEntry> read_etrace(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw std::runtime_error("read_etrace: cannot open " + path.string());
  }
  std::vector<ETraceEntry> entries;
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (line.empty()) {
      continue;
    }
    if (first) {
      first = false;
      if (line.rfind("client,", 0) == 0) {
        continue;  // header
      }
    }
    std::stringstream ss(line);
    std::string cell;
    ETraceEntry e;
    std::getline(ss, cell, ',');
    e.client = std::stoi(cell);
    std::getline(ss, cell, ',');
    e.stream = data::stream_kind_from_string(cell);
    std::getline(ss, cell, ',');
    e.sample_index = std::stoi(cell);
    std::getline(ss, cell, ',');
    e.one_minus_e = std::stod(cell);
    std::getline(ss, cell, ',');
    e.correct = cell == "1";
    entries.push_back(e);
  }
  return entries;
}

}  // namespace fedthe::harness
