#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace analogion::text {

/// Collapses runs of whitespace to one space and trims both ends.
std::string normalize_space(std::string_view s);

/// normalize_space + ASCII lower-casing. Used for duplicate detection and
/// frequency lookups.
std::string fold(std::string_view s);

std::vector<std::string> split_whitespace(std::string_view s);
std::vector<std::string> split(std::string_view s, char sep);

/// Minimal CSV field splitter; handles double-quoted fields with "" escapes.
std::vector<std::string> split_csv_line(std::string_view line);

bool is_ascii_punct(unsigned char c);

}  // namespace analogion::text
