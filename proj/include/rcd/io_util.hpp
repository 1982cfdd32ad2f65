#pragma once

#include <filesystem>
#include <string>
#include <string_view>

namespace rcd {

/// Writes `contents` to a sibling temp file and renames it over `path`,
/// creating parent directories as needed.
void write_file_atomic(const std::filesystem::path& path, std::string_view contents);

std::string read_file(const std::filesystem::path& path);

}  // namespace rcd
