#pragma once

#include <filesystem>
#include <string>
#include <string_view>

namespace cpb::io {

std::string read_file(const std::filesystem::path& path);

/// Writes `bytes` to `path`, creating parent directories.
void write_file(const std::filesystem::path& path, std::string_view bytes);

}  // namespace cpb::io
