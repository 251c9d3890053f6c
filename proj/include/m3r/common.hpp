#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace m3r {

/// Error categories map 1:1 onto CLI exit codes.
enum class ErrorCategory : int {
  config = 2,
  io = 3,
  data = 4,
  internal = 5,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorCategory category, std::string message)
      : std::runtime_error(std::move(message)), category_(category) {}

  ErrorCategory category() const noexcept { return category_; }
  int exit_code() const noexcept { return static_cast<int>(category_); }

 private:
  ErrorCategory category_;
};

#define M3R_DEFINE_ERROR(Name, Category)                 \
  class Name : public Error {                            \
   public:                                               \
    explicit Name(std::string message)                   \
        : Error(ErrorCategory::Category, std::move(message)) {} \
  }

// gridproc
M3R_DEFINE_ERROR(TargetOutsideGrid, data);
M3R_DEFINE_ERROR(RoiOutOfBounds, data);
M3R_DEFINE_ERROR(InsufficientFrames, data);
// stationproc
M3R_DEFINE_ERROR(TooFewKnots, data);
M3R_DEFINE_ERROR(NegativeSpeed, data);
// aligner
M3R_DEFINE_ERROR(NoMatchWithinWindow, data);
M3R_DEFINE_ERROR(SeriesTooShort, data);
M3R_DEFINE_ERROR(EmptyDataset, data);
M3R_DEFINE_ERROR(InvalidCode, data);
// m3rnet
M3R_DEFINE_ERROR(ShapeMismatch, data);
M3R_DEFINE_ERROR(NoCache, internal);
// evalkit
M3R_DEFINE_ERROR(LengthMismatch, data);
M3R_DEFINE_ERROR(EmptyInput, data);
// synth
M3R_DEFINE_ERROR(CellOutOfBounds, data);
// plumbing
M3R_DEFINE_ERROR(IoError, io);
M3R_DEFINE_ERROR(ConfigError, config);

#undef M3R_DEFINE_ERROR

/// Verbosity levels selected through the M3R_LOG environment variable.
enum class LogLevel : int { error = 0, warn = 1, info = 2, debug = 3 };

LogLevel log_level();
void log_message(LogLevel level, const std::string& message);

inline void log_error(const std::string& m) { log_message(LogLevel::error, m); }
inline void log_warn(const std::string& m) { log_message(LogLevel::warn, m); }
inline void log_info(const std::string& m) { log_message(LogLevel::info, m); }
inline void log_debug(const std::string& m) { log_message(LogLevel::debug, m); }

}  // namespace m3r
