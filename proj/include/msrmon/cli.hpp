#pragma once

// Monitor driver shared by the msrmon executable and the tests.

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "msrmon/engine.hpp"

namespace msrmon {

struct RunConfig {
  std::string spec_path;
  std::optional<std::string> role;
  bool online = false;     // read events from the supplied input stream
  std::string trace_path;  // offline
  std::vector<std::string> layers;
  std::optional<std::string> setup;
  std::optional<long> kill_pid;
  std::optional<std::string> emit_trace;
  int verbosity = 0;
  std::size_t max_configs = 10000;
  bool dump_decomposed = false;
  ExecPolicy policy = ExecPolicy::serial;
  std::set<std::string> flags;  // extra preprocessor flags; MONITOR is implied
};

enum ExitCode { kAccepted = 0, kRejected = 1, kUsageError = 2 };

struct RunSummary {
  std::size_t events = 0;
  std::size_t configs = 0;
  std::optional<Rejection> rejection;
  std::vector<std::vector<OutputEvent>> traces;
};

/// Loads the specification, runs the setup script and then the event stream
/// (`in` when online, otherwise cfg.trace_path). Returns an ExitCode.
int run(const RunConfig& cfg, std::istream* in, std::ostream& out, std::ostream& err,
        RunSummary* summary = nullptr);

/// Flags from a MONITOR_FLAGS value, separated by commas or whitespace.
std::set<std::string> split_flags(const std::string& text);

}  // namespace msrmon
