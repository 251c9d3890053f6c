#pragma once

#include <cstdint>
#include <string>

namespace m3r::timeutil {

/// Parses "YYYY-MM-DDTHH:MM:SSZ" into seconds since the Unix epoch (UTC).
/// Throws IoError on malformed input.
std::int64_t parse_iso8601(const std::string& text);

/// Formats seconds since the Unix epoch as "YYYY-MM-DDTHH:MM:SSZ".
std::string format_iso8601(std::int64_t seconds);

}  // namespace m3r::timeutil
