#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

namespace probdet {

// Shortest decimal string that round-trips the exact 64-bit value.
std::string double_to_string(double value);

// Strict inverse of double_to_string; rejects trailing junk.
double string_to_double(std::string_view text);

std::string read_file(const std::filesystem::path& path);

// Write to a sibling temp file, then rename over the target, so a failed
// run never leaves a partially written output.
void write_file_atomic(const std::filesystem::path& path, std::string_view content);

// FNV-1a over the bytes, as a 16-digit hex string. Used for corpus digests.
std::string fnv1a_hex(std::string_view bytes);

}  // namespace probdet
