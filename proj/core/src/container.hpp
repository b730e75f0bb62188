#pragma once

// Magic + u32 LE header length + JSON header + raw payload. Shared by cube
// files and checkpoints.

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"

namespace hyperking::detail {

struct Container {
  nlohmann::json header;
  std::vector<unsigned char> payload;
};

enum class ContainerFault { Io, BadMagic, TruncatedHeader, BadHeader };

struct ContainerError {
  ContainerFault fault;
  std::string message;
};

void write_container(const std::filesystem::path& path, const char (&magic)[5], const nlohmann::json& header,
                     const std::vector<unsigned char>& payload);

/// Throws ContainerError.
Container read_container(const std::filesystem::path& path, const char (&magic)[5]);

void append_f32(std::vector<unsigned char>& out, double value);
float load_f32(const unsigned char* bytes);

}  // namespace hyperking::detail
