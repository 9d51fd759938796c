#include "fedthe/data/bench_io.hpp"

#include <cinttypes>
#include <cstdio>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

namespace fedthe::data {

namespace {

constexpr int kFormatVersion = 1;

// %.17g round-trips IEEE754 doubles exactly.
void write_set(const std::filesystem::path& path, const LabeledSet& set) {
  std::FILE* f = std::fopen(path.c_str(), "w");
  if (!f) {
    throw std::runtime_error("export_bench: cannot open " + path.string());
  }
  for (std::size_t i = 0; i < set.size(); ++i) {
    const Provenance& prov = set.provenance[i];
    std::fprintf(f, "%d %d %d %d", set.labels[i], prov.source_client,
                 static_cast<int>(prov.origin), prov.corruption);
    for (double v : set.input(i)) {
      std::fprintf(f, " %.17g", v);
    }
    std::fprintf(f, "\n");
  }
  std::fclose(f);
}

LabeledSet read_set(const std::filesystem::path& path, std::size_t n, std::size_t dim,
                    int num_classes) {
  std::ifstream in(path);
  if (!in) {
    throw std::runtime_error("import_bench: cannot open " + path.string());
  }
  LabeledSet set;
  set.num_classes = num_classes;
  set.reserve(n, dim);
  set.inputs.cols = dim;
  Vector x(dim);
  for (std::size_t i = 0; i < n; ++i) {
    int label = 0;
    int origin = 0;
    Provenance prov;
    if (!(in >> label >> prov.source_client >> origin >> prov.corruption)) {
      throw std::runtime_error("import_bench: truncated matrix in " + path.string());
    }
    prov.origin = static_cast<StreamKind>(origin);
    for (double& v : x) {
      if (!(in >> v)) {
        throw std::runtime_error("import_bench: truncated row in " + path.string());
      }
    }
    set.append(x, label, prov);
  }
  return set;
}

nlohmann::json vector_list_to_json(const std::vector<Vector>& vs) {
  nlohmann::json arr = nlohmann::json::array();
  for (const Vector& v : vs) {
    arr.push_back(v);
  }
  return arr;
}

std::vector<Vector> vector_list_from_json(const nlohmann::json& arr) {
  std::vector<Vector> out;
  for (const auto& v : arr) {
    out.push_back(v.get<Vector>());
  }
  return out;
}

}  // namespace

void export_bench(const std::filesystem::path& dir,
                  const std::vector<ClientBench>& benches,
                  const GeneratorSpec& spec) {
  std::filesystem::create_directories(dir);
  nlohmann::json manifest;
  manifest["format_version"] = kFormatVersion;
  manifest["generator"] = {
      {"num_classes", spec.num_classes},
      {"input_dim", spec.input_dim},
      {"within_class_std", spec.within_class_std},
      {"seed", spec.seed},
      {"class_means", vector_list_to_json(spec.class_means)},
      {"natural_shift_delta", vector_list_to_json(spec.natural_shift_delta)},
  };
  nlohmann::json clients = nlohmann::json::array();
  for (const ClientBench& bench : benches) {
    nlohmann::json entry;
    entry["client_id"] = bench.client_id;
    auto describe = [&](const std::string& name, const LabeledSet& set) {
      const std::string file =
          "client" + std::to_string(bench.client_id) + "_" + name + ".txt";
      write_set(dir / file, set);
      entry["sets"][name] = {{"file", file}, {"rows", set.size()}, {"dim", set.dim()}};
    };
    describe("train", bench.train);
    describe("val", bench.val);
    for (const auto& [kind, set] : bench.test_streams) {
      describe(to_string(kind), set);
    }
    clients.push_back(entry);
  }
  manifest["clients"] = clients;
  std::ofstream out(dir / "manifest.json");
  if (!out) {
    throw std::runtime_error("export_bench: cannot write manifest");
  }
  out << manifest.dump(2) << "\n";
}

ImportedBench import_bench(const std::filesystem::path& dir) {
  std::ifstream in(dir / "manifest.json");
  if (!in) {
    throw std::runtime_error("import_bench: missing manifest.json in " + dir.string());
  }
  nlohmann::json manifest;
  in >> manifest;
  if (manifest.at("format_version").get<int>() != kFormatVersion) {
    throw std::runtime_error("import_bench: unsupported format version");
  }

  ImportedBench result;
  const auto& gen = manifest.at("generator");
  result.spec.num_classes = gen.at("num_classes").get<int>();
  result.spec.input_dim = gen.at("input_dim").get<int>();
  result.spec.within_class_std = gen.at("within_class_std").get<double>();
  result.spec.seed = gen.at("seed").get<std::uint64_t>();
  result.spec.class_means = vector_list_from_json(gen.at("class_means"));
  result.spec.natural_shift_delta = vector_list_from_json(gen.at("natural_shift_delta"));
  result.spec.validate();

  for (const auto& entry : manifest.at("clients")) {
    ClientBench bench;
    bench.client_id = entry.at("client_id").get<int>();
    for (const auto& [name, desc] : entry.at("sets").items()) {
      LabeledSet set = read_set(dir / desc.at("file").get<std::string>(),
                                desc.at("rows").get<std::size_t>(),
                                desc.at("dim").get<std::size_t>(),
                                result.spec.num_classes);
      if (name == "train") {
        bench.train = std::move(set);
      } else if (name == "val") {
        bench.val = std::move(set);
      } else {
        bench.test_streams[stream_kind_from_string(name)] = std::move(set);
      }
    }
    result.benches.push_back(std::move(bench));
  }
  return result;
}

}  // namespace fedthe::data
