#pragma once

#include <span>
#include <string>
#include <string_view>

namespace analogion {

std::string sha256_hex(std::span<const unsigned char> bytes);
std::string sha256_hex(std::string_view bytes);

}  // namespace analogion
