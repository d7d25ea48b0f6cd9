#pragma once

#include <string>

namespace par {

/// Writes `content` to a sibling temp file, then renames it over `path`.
void write_file_atomic(const std::string& path, const std::string& content);

/// Whole file as bytes; throws DataError when unreadable.
std::string read_file(const std::string& path);

}  // namespace par
