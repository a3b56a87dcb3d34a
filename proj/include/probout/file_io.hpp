#pragma once

#include <string>
#include <string_view>

namespace probout {

/// Whole file as bytes; throws FormatError if it cannot be opened.
std::string read_file(const std::string& path);

/// Writes to a sibling temporary file and renames it into place, so readers
/// never observe a partially written file.
void write_file(const std::string& path, std::string_view bytes);

}  // namespace probout
