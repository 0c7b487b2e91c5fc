#pragma once

#include <optional>
#include <string>
#include <string_view>

namespace fl {

std::string Base64Encode(std::string_view data);
// Returns nullopt on malformed input (bad alphabet or length).
std::optional<std::string> Base64Decode(std::string_view text);

}  // namespace fl
