#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

namespace pnr {

//! FNV-1a 64-bit content hash, hex-encoded; used by the run manifest.
std::uint64_t fnv1a64(const void* data, std::size_t size);
std::string hash_file(const std::filesystem::path& path);
std::string hash_string(const std::string& text);

}  // namespace pnr
