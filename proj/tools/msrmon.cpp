// msrmon: checks a stream of program events against a protocol specification.

#include <cstdlib>
#include <iostream>

#include <CLI11.hpp>

#include "msrmon/cli.hpp"

int main(int argc, char** argv) {
  msrmon::RunConfig cfg;
  CLI::App app{"Runtime compliance monitor for security protocol implementations"};
  app.add_option("--spec", cfg.spec_path, "Protocol specification")->required();
  std::string role;
  app.add_option("--role", role, "Role to monitor (default: all rules)");
  auto* trace = app.add_option("--trace", cfg.trace_path, "Recorded event trace");
  auto* online = app.add_flag("--stdin", cfg.online, "Read events from standard input");
  trace->excludes(online);
  app.add_option("--layer", cfg.layers, "Rewrite layer specification, applied in order");
  std::string setup;
  app.add_option("--setup", setup, "Executable whose output events are processed first");
  long kill_pid = 0;
  app.add_option("--kill-pid", kill_pid, "Process to terminate on rejection");
  std::string emit;
  app.add_option("--emit-trace", emit, "Write the output traces as JSON lines");
  app.add_option("--max-configs", cfg.max_configs, "Configuration limit")->capture_default_str();
  app.add_flag("--dump-decomposed", cfg.dump_decomposed, "Print the decomposed rules and exit");
  bool parallel = false;
  app.add_flag("--parallel", parallel, "Process configurations in parallel");
  app.add_flag("-v", cfg.verbosity, "Verbose output; repeat for per-event notes");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);
    return rc == 0 ? 0 : msrmon::kUsageError;
  }
  if (!role.empty()) cfg.role = role;
  if (!setup.empty()) cfg.setup = setup;
  if (kill_pid > 0) cfg.kill_pid = kill_pid;
  if (!emit.empty()) cfg.emit_trace = emit;
  if (parallel) cfg.policy = msrmon::ExecPolicy::parallel;
  if (const char* flags = std::getenv("MONITOR_FLAGS")) cfg.flags = msrmon::split_flags(flags);

  std::ios::sync_with_stdio(false);
  return msrmon::run(cfg, &std::cin, std::cout, std::cerr);
}
