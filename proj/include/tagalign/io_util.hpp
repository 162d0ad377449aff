#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace tagalign {

std::vector<std::uint8_t> read_file_bytes(const std::string& path);
std::string read_file_text(const std::string& path);

/// Writes to <path>.tmp and renames, so readers never see partial output.
void write_file_atomic(const std::string& path, std::span<const std::uint8_t> bytes);
void write_file_atomic(const std::string& path, const std::string& text);

}  // namespace tagalign
