#pragma once

#include <filesystem>
#include <vector>

#include "fedthe/data/streams.hpp"

namespace fedthe::data {

/// Writes the benchmark as one text matrix per (client, split/stream) plus a
/// manifest.json describing shapes, seeds, and the generator. The manifest is
/// the substitution point for externally produced feature datasets.
void export_bench(const std::filesystem::path& dir,
                  const std::vector<ClientBench>& benches,
                  const GeneratorSpec& spec);

struct ImportedBench {
  std::vector<ClientBench> benches;
  GeneratorSpec spec;
};

ImportedBench import_bench(const std::filesystem::path& dir);

}  // namespace fedthe::data
