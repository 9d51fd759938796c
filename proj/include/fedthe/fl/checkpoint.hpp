#pragma once

#include <filesystem>

#include "fedthe/fl/runtime.hpp"

namespace fedthe::fl {

/// Serializes server and client states as a manifest plus one flat binary
/// array file of raw doubles. Reload reproduces evaluation bitwise.
void save_checkpoint(const std::filesystem::path& dir, const ServerState& server,
                     const std::vector<ClientState>& clients);

struct Checkpoint {
  ServerState server;
  std::vector<ClientState> clients;
};

Checkpoint load_checkpoint(const std::filesystem::path& dir);

}  // namespace fedthe::fl
