#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace reinvoke {

/// Lowercase hex SHA-256 of the bytes.
std::string sha256_hex(std::string_view bytes);

/// Stable 64-bit digest (first 8 bytes of SHA-256), used to seed mocks.
std::uint64_t stable_hash64(std::string_view bytes);

std::string read_file(const std::filesystem::path& path);

/// Writes through a temporary sibling and renames, so readers never see a
/// partially written file.
void write_file_atomic(const std::filesystem::path& path, std::string_view contents);

/// Splits on '\n'; a trailing "\r" on each line is removed. The final empty
/// segment after a terminating newline is not returned.
std::vector<std::string> split_lines(std::string_view text);

std::string trim(std::string_view s);

/// Round-trippable rendering of a double ("%.17g").
std::string format_double(double v);

}  // namespace reinvoke
