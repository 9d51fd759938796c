#include "fedthe/fl/checkpoint.hpp"

#include <fstream>
#include <stdexcept>

#include <json.hpp>

namespace fedthe::fl {

namespace {

constexpr int kCheckpointVersion = 1;

struct Blob {
  std::vector<double> values;

  std::size_t put(const Vector& v) {
    const std::size_t offset = values.size();
    values.insert(values.end(), v.begin(), v.end());
    return offset;
  }
  std::size_t put(const nn::Matrix& m) {
    const std::size_t offset = values.size();
    values.insert(values.end(), m.data.begin(), m.data.end());
    return offset;
  }
};

nlohmann::json describe_layer(Blob& blob, const nn::DenseLayer& layer) {
  nlohmann::json j;
  j["rows"] = layer.weights.rows;
  j["cols"] = layer.weights.cols;
  j["weights_offset"] = blob.put(layer.weights);
  j["bias_offset"] = blob.put(layer.bias);
  return j;
}

nn::DenseLayer read_layer(const std::vector<double>& blob, const nlohmann::json& j) {
  nn::DenseLayer layer;
  const auto rows = j.at("rows").get<std::size_t>();
  const auto cols = j.at("cols").get<std::size_t>();
  const auto w_off = j.at("weights_offset").get<std::size_t>();
  const auto b_off = j.at("bias_offset").get<std::size_t>();
  if (w_off + rows * cols > blob.size() || b_off + rows > blob.size()) {
    throw std::runtime_error("checkpoint: blob too small for declared shapes");
  }
  layer.weights = nn::Matrix(rows, cols);
  std::copy(blob.begin() + w_off, blob.begin() + w_off + rows * cols,
            layer.weights.data.begin());
  layer.bias.assign(blob.begin() + b_off, blob.begin() + b_off + rows);
  return layer;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& dir, const ServerState& server,
                     const std::vector<ClientState>& clients) {
  std::filesystem::create_directories(dir);
  Blob blob;
  nlohmann::json manifest;
  manifest["version"] = kCheckpointVersion;
  manifest["round"] = server.round;

  nlohmann::json extractor = nlohmann::json::array();
  for (const nn::DenseLayer& layer : server.extractor.layers) {
    extractor.push_back(describe_layer(blob, layer));
  }
  manifest["extractor"] = extractor;
  manifest["global_head"] = describe_layer(blob, server.global_head.fc);
  if (server.global_descriptor) {
    manifest["global_descriptor"] = {
        {"offset", blob.put(*server.global_descriptor)},
        {"size", server.global_descriptor->size()},
    };
  }

  nlohmann::json client_list = nlohmann::json::array();
  for (const ClientState& client : clients) {
    nlohmann::json entry;
    entry["client_id"] = client.client_id;
    entry["personal_head"] = describe_layer(blob, client.personal_head.fc);
    if (client.local_descriptor) {
      entry["local_descriptor"] = {
          {"offset", blob.put(*client.local_descriptor)},
          {"size", client.local_descriptor->size()},
      };
    }
    client_list.push_back(entry);
  }
  manifest["clients"] = client_list;

  std::ofstream bin(dir / "params.bin", std::ios::binary);
  if (!bin) {
    throw std::runtime_error("save_checkpoint: cannot write params.bin");
  }
  bin.write(reinterpret_cast<const char*>(blob.values.data()),
            static_cast<std::streamsize>(blob.values.size() * sizeof(double)));
  std::ofstream out(dir / "manifest.json");
  if (!out) {
    throw std::runtime_error("save_checkpoint: cannot write manifest.json");
  }
  out << manifest.dump(2) << "\n";
}

Checkpoint load_checkpoint(const std::filesystem::path& dir) {
  std::ifstream in(dir / "manifest.json");
  if (!in) {
    throw std::runtime_error("load_checkpoint: missing manifest.json");
  }
  nlohmann::json manifest;
  in >> manifest;
  if (manifest.at("version").get<int>() != kCheckpointVersion) {
    throw std::runtime_error("load_checkpoint: unsupported version");
  }

  std::ifstream bin(dir / "params.bin", std::ios::binary);
  if (!bin) {
    throw std::runtime_error("load_checkpoint: missing params.bin");
  }
  bin.seekg(0, std::ios::end);
  const std::streamsize bytes = bin.tellg();
  bin.seekg(0, std::ios::beg);
  std::vector<double> blob(static_cast<std::size_t>(bytes) / sizeof(double));
  bin.read(reinterpret_cast<char*>(blob.data()), bytes);

  auto read_vector = [&](const nlohmann::json& j) {
    const auto offset = j.at("offset").get<std::size_t>();
    const auto size = j.at("size").get<std::size_t>();
    if (offset + size > blob.size()) {
      throw std::runtime_error("checkpoint: descriptor outside blob");
    }
    return Vector(blob.begin() + offset, blob.begin() + offset + size);
  };

  Checkpoint ckpt;
  ckpt.server.round = manifest.at("round").get<int>();
  for (const auto& j : manifest.at("extractor")) {
    ckpt.server.extractor.layers.push_back(read_layer(blob, j));
  }
  ckpt.server.global_head.fc = read_layer(blob, manifest.at("global_head"));
  if (manifest.contains("global_descriptor")) {
    ckpt.server.global_descriptor = read_vector(manifest.at("global_descriptor"));
  }
  for (const auto& entry : manifest.at("clients")) {
    ClientState client;
    client.client_id = entry.at("client_id").get<int>();
    client.personal_head.fc = read_layer(blob, entry.at("personal_head"));
    if (entry.contains("local_descriptor")) {
      client.local_descriptor = read_vector(entry.at("local_descriptor"));
    }
    ckpt.clients.push_back(std::move(client));
  }
  return ckpt;
}

}  // namespace fedthe::fl
