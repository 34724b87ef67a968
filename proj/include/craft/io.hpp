#pragma once

#include <filesystem>
#include <string>
#include <string_view>

namespace craft::io {

/// Writes via a sibling temporary file and rename, so readers never observe a
/// partial file. Throws std::runtime_error when the target is not writable.
void write_atomic(const std::filesystem::path& path, std::string_view content);

std::string read_file(const std::filesystem::path& path);

}  // namespace craft::io
