#include "msrmon/cli.hpp"

#include <cctype>
#include <csignal>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>

#include <sys/types.h>
#include <sys/wait.h>

#include "msrmon/decompose.hpp"
#include "msrmon/event_io.hpp"
#include "msrmon/rewrite.hpp"

namespace msrmon {

std::set<std::string> split_flags(const std::string& text) {
  std::set<std::string> out;
  std::string cur;
  for (char c : text) {
    if (c == ',' || std::isspace(static_cast<unsigned char>(c))) {
      if (!cur.empty()) out.insert(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  if (!cur.empty()) out.insert(cur);
  return out;
}

namespace {

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::vector<std::string> run_setup(const std::string& path) {
  std::unique_ptr<FILE, int (*)(FILE*)> pipe(popen(path.c_str(), "r"), pclose);
  if (!pipe) throw UsageError("cannot run setup script " + path);
  std::vector<std::string> lines;
  std::string cur;
  char buf[4096];
  std::size_t n;
  while ((n = fread(buf, 1, sizeof buf, pipe.get())) > 0) cur.append(buf, n);
  int status = pclose(pipe.release());
  if (status == -1 || !WIFEXITED(status) || WEXITSTATUS(status) != 0) {
    throw UsageError("setup script " + path + " failed");
  }
  std::istringstream in(cur);
  std::string line;
  while (std::getline(in, line)) lines.push_back(line);
  return lines;
}

void write_traces(const std::string& path, const std::vector<std::vector<OutputEvent>>& traces) {
  std::ofstream out(path);
  if (!out) throw UsageError("cannot write " + path);
  for (std::size_t i = 0; i < traces.size(); ++i) {
    if (traces.size() > 1) out << "{\"trace\":" << i << "}\n";
    for (const auto& e : traces[i]) out << format_output_line(e) << "\n";
  }
}

}  // namespace

int run(const RunConfig& cfg, std::istream* in, std::ostream& out, std::ostream& err, RunSummary* summary) {
  try {
    if (cfg.spec_path.empty()) throw UsageError("--spec is required");
    if (!cfg.online && cfg.trace_path.empty() && !cfg.dump_decomposed) {
      throw UsageError("either --trace or --stdin is required");
    }
    ParseOptions popts;
    popts.flags.insert(cfg.flags.begin(), cfg.flags.end());
    SpecFile spec = parse_spec_file(cfg.spec_path, popts);
    if (spec.mode == SpecMode::rewrite) throw UsageError(cfg.spec_path + " is a rewrite layer, not a protocol");

    std::vector<std::string> warnings = spec.warnings;
    std::vector<RuleAst> selected = cfg.role ? select_role(spec, *cfg.role, &warnings) : spec.rules;
    Elaboration el = elaborate(spec, selected);
    warnings.insert(warnings.end(), el.warnings.begin(), el.warnings.end());
    std::vector<ExtendedRule> rules = split_ruleset(el.rules);

    if (cfg.dump_decomposed) {
      out << print_rules(rules);
      return kAccepted;
    }

    std::vector<RewriteLayer> layers;
    for (const auto& path : cfg.layers) {
      SpecFile ls = parse_spec_file(path, popts);
      layers.emplace_back(ls, cfg.max_configs);
      warnings.insert(warnings.end(), layers.back().warnings().begin(), layers.back().warnings().end());
    }
    if (cfg.verbosity > 0) {
      for (const auto& w : warnings) err << "warning: " << w << "\n";
    }

    MonitorOptions mopts;
    mopts.max_configs = cfg.max_configs;
    mopts.policy = cfg.policy;
    Pipeline pipeline(std::move(layers), Monitor(RuleSet(std::move(rules), spec.formats), mopts));

    std::unique_ptr<std::istream> file;
    std::istream* source = in;
    if (!cfg.online) {
      file = std::make_unique<std::ifstream>(cfg.trace_path);
      if (!*file) throw UsageError("cannot open trace " + cfg.trace_path);
      source = file.get();
    }
    if (!source) throw UsageError("no event input");

    std::optional<PipelineVerdict> verdict;
    std::size_t line_no = 0;
    auto feed_line = [&](const std::string& line, const std::string& origin) {
      ++line_no;
      if (line.find_first_not_of(" \t\r") == std::string::npos) return;
      ProgramEvent e;
      try {
        e = parse_event_line(line, line_no);
      } catch (const EventParseError& ex) {
        throw UsageError(origin + ": " + ex.what());
      }
      verdict = pipeline.feed(e);
      if (cfg.verbosity > 0) {
        err << "event " << pipeline.fed() - 1 << ": " << to_string(e) << " [" << pipeline.sink().configs().size()
            << " configurations]\n";
        if (cfg.verbosity > 1) {
          for (const auto& n : pipeline.sink().last_diagnostics()) err << "  note: " << n << "\n";
        }
      }
    };

    if (cfg.setup) {
      for (const auto& line : run_setup(*cfg.setup)) {
        feed_line(line, "setup script");
        if (verdict) break;
      }
      line_no = 0;
    }
    if (!verdict) {
      std::string line;
      while (std::getline(*source, line)) {
        feed_line(line, cfg.online ? "stdin" : cfg.trace_path);
        if (verdict) break;
      }
    }

    const Monitor& sink = pipeline.sink();
    if (summary) {
      summary->events = pipeline.fed();
      summary->configs = sink.configs().size();
      summary->traces = sink.output_traces();
      if (verdict) summary->rejection = verdict->rejection;
    }
    if (verdict) {
      if (verdict->stage < pipeline.layer_count()) {
        out << "layer " << verdict->stage << " rejected input event " << verdict->input_index << "\n";
      }
      out << verdict->rejection->report();
      if (cfg.kill_pid) {
        if (::kill(static_cast<pid_t>(*cfg.kill_pid), SIGTERM) != 0) {
          err << "warning: could not signal process " << *cfg.kill_pid << "\n";
        } else if (cfg.verbosity > 0) {
          err << "sent SIGTERM to process " << *cfg.kill_pid << "\n";
        }
      }
      return kRejected;
    }
    if (cfg.emit_trace) write_traces(*cfg.emit_trace, sink.output_traces());
    out << "accepted " << pipeline.fed() << " events; " << sink.configs().size() << " configurations\n";
    return kAccepted;
  } catch (const UsageError& e) {
    err << "error: " << e.what() << "\n";
  } catch (const SpecError& e) {
    err << "error: " << e.what() << "\n";
  } catch (const EvalError& e) {
    err << "error: " << e.what() << "\n";
  }
  return kUsageError;
}

}  // namespace msrmon
