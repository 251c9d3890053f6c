#include "m3r/common.hpp"

#include <cstdio>
#include <cstdlib>
#include <cinttypes>
#include <fstream>
#include <sstream>

#include "m3r/kvconfig.hpp"
#include "m3r/timeutil.hpp"

namespace m3r {

namespace {

LogLevel parse_level(const char* text) {
  if (text == nullptr) return LogLevel::warn;
  std::string s(text);
  if (s == "error") return LogLevel::error;
  if (s == "warn") return LogLevel::warn;
  if (s == "info") return LogLevel::info;
  if (s == "debug") return LogLevel::debug;
  return LogLevel::warn;
}

const char* level_tag(LogLevel level) {
  switch (level) {
    case LogLevel::error: return "error";
    case LogLevel::warn: return "warn";
    case LogLevel::info: return "info";
    case LogLevel::debug: return "debug";
  }
  return "?";
}

}  // namespace

LogLevel log_level() {
  static const LogLevel level = parse_level(std::getenv("M3R_LOG"));
  return level;
}

void log_message(LogLevel level, const std::string& message) {
  if (static_cast<int>(level) > static_cast<int>(log_level())) return;
  std::fprintf(stderr, "m3r [%s] %s\n", level_tag(level), message.c_str());
}

}  // namespace m3r

namespace m3r::timeutil {

namespace {

// Civil-date <-> day-count conversions (proleptic Gregorian), valid far
// beyond any plausible radar timestamp.
std::int64_t days_from_civil(std::int64_t y, int m, int d) {
  y -= m <= 2;
  const std::int64_t era = (y >= 0 ? y : y - 399) / 400;
  const unsigned yoe = static_cast<unsigned>(y - era * 400);
  const unsigned doy = (153u * static_cast<unsigned>(m + (m > 2 ? -3 : 9)) + 2u) / 5u +
                       static_cast<unsigned>(d) - 1u;
  const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
  return era * 146097 + static_cast<std::int64_t>(doe) - 719468;
}

void civil_from_days(std::int64_t z, std::int64_t& y, int& m, int& d) {
  z += 719468;
  const std::int64_t era = (z >= 0 ? z : z - 146096) / 146097;
  const unsigned doe = static_cast<unsigned>(z - era * 146097);
  const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
  y = static_cast<std::int64_t>(yoe) + era * 400;
  const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
  const unsigned mp = (5 * doy + 2) / 153;
  d = static_cast<int>(doy - (153 * mp + 2) / 5 + 1);
  m = static_cast<int>(mp + (mp < 10 ? 3 : -9));
  y += (m <= 2);
}

}  // namespace

std::int64_t parse_iso8601(const std::string& text) {
  int year = 0, month = 0, day = 0, hour = 0, minute = 0, second = 0;
  char tee = 0, zed = 0;
  const int n = std::sscanf(text.c_str(), "%4d-%2d-%2d%c%2d:%2d:%2d%c", &year,
                            &month, &day, &tee, &hour, &minute, &second, &zed);
  if (n != 8 || (tee != 'T' && tee != ' ') || zed != 'Z' || month < 1 ||
      month > 12 || day < 1 || day > 31 || hour > 23 || minute > 59 ||
      second > 60)
    throw IoError("malformed ISO-8601 timestamp: '" + text + "'");
  return days_from_civil(year, month, day) * 86400 + hour * 3600 + minute * 60 +
         second;
}

std::string format_iso8601(std::int64_t seconds) {
  std::int64_t days = seconds / 86400;
  std::int64_t rem = seconds % 86400;
  if (rem < 0) {
    rem += 86400;
    days -= 1;
  }
  std::int64_t year;
  int month, day;
  civil_from_days(days, year, month, day);
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%04" PRId64 "-%02d-%02dT%02" PRId64 ":%02" PRId64 ":%02" PRId64 "Z",
                year, month, day, rem / 3600, (rem % 3600) / 60, rem % 60);
  return buf;
}

}  // namespace m3r::timeutil

namespace m3r::kvconfig {

KeyValueFile KeyValueFile::parse_file(const std::filesystem::path& path,
                                      const std::set<std::string>& known_keys) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file: " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_text(buf.str(), known_keys, path.string());
}

KeyValueFile KeyValueFile::parse_text(const std::string& text,
                                      const std::set<std::string>& known_keys,
                                      const std::string& origin) {
  KeyValueFile kv;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  auto trim = [](std::string s) {
    const char* ws = " \t\r";
    const auto b = s.find_first_not_of(ws);
    if (b == std::string::npos) return std::string();
    const auto e = s.find_last_not_of(ws);
    return s.substr(b, e - b + 1);
  };
  while (std::getline(in, line)) {
    ++lineno;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos)
      throw ConfigError(origin + ":" + std::to_string(lineno) +
                        ": expected key=value, got '" + t + "'");
    const std::string key = trim(t.substr(0, eq));
    const std::string value = trim(t.substr(eq + 1));
    if (key.empty())
      throw ConfigError(origin + ":" + std::to_string(lineno) + ": empty key");
    if (!known_keys.empty() && known_keys.count(key) == 0)
      throw ConfigError(origin + ":" + std::to_string(lineno) +
                        ": unknown key '" + key + "'");
    kv.values_[key] = value;
  }
  return kv;
}

std::string KeyValueFile::get_string(const std::string& key,
                                     const std::string& fallback) const {
  auto it = values_.find(key);
  return it == values_.end() ? fallback : it->second;
}

double KeyValueFile::get_double(const std::string& key, double fallback) const {
  auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  try {
    std::size_t pos = 0;
    const double v = std::stod(it->second, &pos);
    if (pos != it->second.size()) throw std::invalid_argument(it->second);
    return v;
  } catch (const std::exception&) {
    throw ConfigError("key '" + key + "': not a number: '" + it->second + "'");
  }
}

std::int64_t KeyValueFile::get_int(const std::string& key,
                                   std::int64_t fallback) const {
  auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  try {
    std::size_t pos = 0;
    const std::int64_t v = std::stoll(it->second, &pos);
    if (pos != it->second.size()) throw std::invalid_argument(it->second);
    return v;
  } catch (const std::exception&) {
    throw ConfigError("key '" + key + "': not an integer: '" + it->second + "'");
  }
}

std::uint64_t KeyValueFile::get_uint(const std::string& key,
                                     std::uint64_t fallback) const {
  auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  try {
    std::size_t pos = 0;
    const std::uint64_t v = std::stoull(it->second, &pos);
    if (pos != it->second.size()) throw std::invalid_argument(it->second);
    return v;
  } catch (const std::exception&) {
    throw ConfigError("key '" + key + "': not an unsigned integer: '" +
                      it->second + "'");
  }
}

}  // namespace m3r::kvconfig
