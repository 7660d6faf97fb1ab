#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace vdcnn {

struct KeyValue {
  std::string key;
  std::string value;
  std::size_t line = 0;
};

/// Parses `key=value` lines. Blank lines and lines starting with '#' are skipped;
/// whitespace around keys and values is trimmed. Throws ConfigError on a line
/// without '=' or with an empty key, and on a repeated key.
std::vector<KeyValue> parse_key_values(std::string_view text);

std::string_view trim(std::string_view s);

}  // namespace vdcnn
