#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace craft::base64 {

std::string encode(std::span<const std::uint8_t> bytes);
// Standard alphabet with '=' padding; nullopt on any malformed input.
std::optional<std::vector<std::uint8_t>> decode(std::string_view text);

}  // namespace craft::base64
