#pragma once

// Line-delimited JSON event wire format:
//   {"name": "hmac", "args": ["7365", "00ff"], "ret": "a1b2"}
// Optional "ts" and "tid" members are accepted and ignored.

#include <istream>
#include <mutex>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "msrmon/engine.hpp"
#include "msrmon/term.hpp"

namespace msrmon {

class EventParseError : public std::runtime_error {
 public:
  EventParseError(const std::string& msg, std::size_t line);
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

/// Decodes one event line. `line_no` is only used in error messages.
ProgramEvent parse_event_line(std::string_view line, std::size_t line_no = 0);
std::string format_event_line(const ProgramEvent& e);
/// JSON line for an output event; natural values are written as "%n".
std::string format_output_line(const OutputEvent& e);

/// Reads events until end of stream, skipping blank lines.
std::vector<ProgramEvent> read_events(std::istream& in);

/// Writes whole event lines under a lock so concurrent producers never
/// interleave partial lines. Optionally keeps a copy in memory.
class EventWriter {
 public:
  explicit EventWriter(std::ostream* out = nullptr, bool record = false) : out_(out), record_(record) {}
  void write(const ProgramEvent& e);
  std::vector<ProgramEvent> recorded() const;

 private:
  mutable std::mutex mu_;
  std::ostream* out_;
  bool record_;
  std::vector<ProgramEvent> events_;
};

}  // namespace msrmon
