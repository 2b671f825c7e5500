#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace evimg {

/// Bad argument to a numeric or rendering routine (negative pT, log of zero, ...).
class InvalidInput : public std::invalid_argument {
public:
  using std::invalid_argument::invalid_argument;
};

/// Inconsistent or out-of-range configuration (overlapping windows, bad ratios, ...).
class ConfigError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Filesystem failure while emitting artifacts.
class IoError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// A record in an event file could not be turned into an Event.
class ParseError : public std::runtime_error {
public:
  ParseError(const std::string& what, std::size_t byte_offset, std::size_t line,
             std::size_t event_index)
      : std::runtime_error("line " + std::to_string(line) + " (byte " +
                           std::to_string(byte_offset) + ", event " +
                           std::to_string(event_index) + "): " + what),
        byte_offset_(byte_offset), line_(line), event_index_(event_index), reason_(what) {}

  std::size_t byte_offset() const noexcept { return byte_offset_; }
  /// 1-based line number in the file.
  std::size_t line() const noexcept { return line_; }
  /// 0-based index among event records (the header line is not counted).
  std::size_t event_index() const noexcept { return event_index_; }
  const std::string& reason() const noexcept { return reason_; }

private:
  std::size_t byte_offset_;
  std::size_t line_;
  std::size_t event_index_;
  std::string reason_;
};

} // namespace evimg
