#pragma once

#include <filesystem>
#include <string>
#include <string_view>

namespace faqpilot::detail {

/// Writes to "<path>.tmp" and renames over `path`. Throws storage-io.
void write_file_atomic(const std::filesystem::path& path, std::string_view data);
/// Whole file as bytes. Throws storage-io.
std::string read_file(const std::filesystem::path& path);

}  // namespace faqpilot::detail
