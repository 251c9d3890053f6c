#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <set>
#include <string>

#include "m3r/common.hpp"

namespace m3r::kvconfig {

/// Line-based `key=value` settings file. Blank lines and lines starting
/// with '#' are ignored. Keys must come from a known set; anything else is
/// rejected so typos cannot silently fall back to defaults.
class KeyValueFile {
 public:
  KeyValueFile() = default;

  static KeyValueFile parse_file(const std::filesystem::path& path,
                                 const std::set<std::string>& known_keys);
  static KeyValueFile parse_text(const std::string& text,
                                 const std::set<std::string>& known_keys,
                                 const std::string& origin = "<string>");

  bool has(const std::string& key) const { return values_.count(key) > 0; }

  std::string get_string(const std::string& key, const std::string& fallback) const;
  double get_double(const std::string& key, double fallback) const;
  std::int64_t get_int(const std::string& key, std::int64_t fallback) const;
  std::uint64_t get_uint(const std::string& key, std::uint64_t fallback) const;

  const std::map<std::string, std::string>& values() const { return values_; }

 private:
  std::map<std::string, std::string> values_;
};

}  // namespace m3r::kvconfig
