#include "container.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

namespace hyperking::detail {

void append_f32(std::vector<unsigned char>& out, double value) {
  const auto bits = std::bit_cast<std::uint32_t>(static_cast<float>(value));
  for (int k = 0; k < 4; ++k) out.push_back(static_cast<unsigned char>((bits >> (8 * k)) & 0xFFU));
}

float load_f32(const unsigned char* bytes) {
  std::uint32_t bits = 0;
  for (int k = 0; k < 4; ++k) bits |= static_cast<std::uint32_t>(bytes[k]) << (8 * k);
  return std::bit_cast<float>(bits);
}

void write_container(const std::filesystem::path& path, const char (&magic)[5], const nlohmann::json& header,
                     const std::vector<unsigned char>& payload) {
  const std::string text = header.dump();
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ContainerError{ContainerFault::Io, "cannot open " + path.string() + " for writing"};
  out.write(magic, 4);
  const auto n = static_cast<std::uint32_t>(text.size());
  unsigned char len[4];
  for (int k = 0; k < 4; ++k) len[k] = static_cast<unsigned char>((n >> (8 * k)) & 0xFFU);
  out.write(reinterpret_cast<const char*>(len), 4);
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  out.write(reinterpret_cast<const char*>(payload.data()), static_cast<std::streamsize>(payload.size()));
  if (!out) throw ContainerError{ContainerFault::Io, "write failed for " + path.string()};
}

Container read_container(const std::filesystem::path& path, const char (&magic)[5]) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ContainerError{ContainerFault::Io, "cannot open " + path.string()};
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (bytes.size() < 4 || std::memcmp(bytes.data(), magic, 4) != 0) {
    throw ContainerError{ContainerFault::BadMagic,
                         path.string() + ": bad magic (expected " + std::string(magic, 4) + ")"};
  }
  if (bytes.size() < 8) throw ContainerError{ContainerFault::TruncatedHeader, path.string() + ": truncated header"};
  std::uint32_t n = 0;
  for (int k = 0; k < 4; ++k) n |= static_cast<std::uint32_t>(bytes[4 + k]) << (8 * k);
  if (bytes.size() < 8 + static_cast<std::size_t>(n)) {
    throw ContainerError{ContainerFault::TruncatedHeader, path.string() + ": truncated header"};
  }
  Container c;
  try {
    c.header = nlohmann::json::parse(bytes.begin() + 8, bytes.begin() + 8 + n);
  } catch (const nlohmann::json::exception& e) {
    throw ContainerError{ContainerFault::BadHeader, path.string() + ": malformed header: " + e.what()};
  }
  if (!c.header.is_object()) throw ContainerError{ContainerFault::BadHeader, path.string() + ": header is not an object"};
  c.payload.assign(bytes.begin() + 8 + n, bytes.end());
  return c;
}

}  // namespace hyperking::detail
