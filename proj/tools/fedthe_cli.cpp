// Command-line surface: run experiment grids, summarize metrics, export
// ensemble-weight histograms, and run the invariant selftest.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "fedthe/harness/config.hpp"
#include "fedthe/harness/grid.hpp"
#include "fedthe/harness/metrics.hpp"
#include "fedthe/harness/report.hpp"
#include "fedthe/harness/selftest.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitRuntime = 1;
constexpr int kExitValidation = 2;

int cmd_run(const std::string& config_path, std::optional<std::uint64_t> seed_override,
            std::optional<std::string> out_override) {
  fedthe::harness::ExperimentConfig config =
      fedthe::harness::load_config(config_path);
  if (seed_override) {
    config.seeds = {*seed_override};
  }
  if (out_override) {
    config.out_dir = *out_override;
  }
  config.validate();
  const auto records = fedthe::harness::run_grid(config, config.out_dir);
  std::cout << "wrote " << records.size() << " metrics records to "
            << (std::filesystem::path(config.out_dir) / "metrics.txt").string() << "\n";
  const fedthe::harness::ReportTable table = fedthe::harness::report(records);
  std::cout << fedthe::harness::format_report_text(table);
  return kExitOk;
}

int cmd_report(const std::string& metrics_path, std::optional<std::string> out_csv) {
  const auto records = fedthe::harness::read_metrics(metrics_path);
  const fedthe::harness::ReportTable table = fedthe::harness::report(records);
  std::cout << fedthe::harness::format_report_text(table);
  if (out_csv) {
    std::ofstream out(*out_csv);
    if (!out) {
      throw std::runtime_error("cannot write " + *out_csv);
    }
    out << fedthe::harness::format_report_csv(table);
  }
  return kExitOk;
}

int cmd_ehist(const std::string& trace_path, int bins,
              std::optional<std::string> out_csv) {
  const auto entries = fedthe::harness::read_etrace(trace_path);
  const fedthe::harness::HistogramTable table =
      fedthe::harness::export_e_histogram(entries, bins);
  std::cout << fedthe::harness::format_histogram_text(table);
  if (out_csv) {
    std::ofstream out(*out_csv);
    if (!out) {
      throw std::runtime_error("cannot write " + *out_csv);
    }
    out << fedthe::harness::format_histogram_csv(table);
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"two-head federated training with test-time head ensembling"};
  app.require_subcommand(1);
  app.fallthrough();  // global flags may follow the subcommand

  std::optional<std::uint64_t> seed_override;
  std::optional<std::string> out_override;
  app.add_option("--seed-override", seed_override,
                 "replace the configured seed list with a single seed");
  app.add_option("--out", out_override, "override the configured output directory");

  std::string config_path;
  CLI::App* run = app.add_subcommand("run", "run an experiment grid from a config file");
  run->add_option("config", config_path, "experiment config file")->required();

  std::string metrics_path;
  std::optional<std::string> report_csv;
  CLI::App* report = app.add_subcommand("report", "summarize a metrics file");
  report->add_option("metrics", metrics_path, "metrics file")->required();
  report->add_option("--csv", report_csv, "also write the table as CSV");

  std::string trace_path;
  int bins = 20;
  std::optional<std::string> ehist_csv;
  CLI::App* ehist =
      app.add_subcommand("ehist", "histogram of 1-e from an e-trace file");
  ehist->add_option("trace", trace_path, "e-trace CSV file")->required();
  ehist->add_option("--bins", bins, "number of bins")->check(CLI::PositiveNumber);
  ehist->add_option("--csv", ehist_csv, "also write the histogram as CSV");

  CLI::App* selftest = app.add_subcommand("selftest", "run the invariant suite");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitValidation;
  }

  try {
    if (run->parsed()) {
      return cmd_run(config_path, seed_override, out_override);
    }
    if (report->parsed()) {
      return cmd_report(metrics_path, report_csv);
    }
    if (ehist->parsed()) {
      return cmd_ehist(trace_path, bins, ehist_csv);
    }
    if (selftest->parsed()) {
      return fedthe::harness::selftest(std::cout) ? kExitOk : kExitRuntime;
    }
  } catch (const fedthe::harness::ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitValidation;
}
