// simplemac: reference client/server with event logging and trace generation.

#include <fstream>
#include <iostream>
#include <memory>

#include <CLI11.hpp>

#include "msrmon/event_io.hpp"
#include "msrmon/simplemac.hpp"

namespace sm = msrmon::simplemac;

namespace {

msrmon::Bytes parse_key(const std::string& hex) {
  if (hex.empty()) return sm::default_key();
  auto k = msrmon::from_hex(hex);
  if (!k) throw CLI::ValidationError("--key", "invalid hex");
  return *k;
}

std::map<std::size_t, sm::Fault> parse_faults(const std::vector<std::string>& specs) {
  std::map<std::size_t, sm::Fault> out;
  for (const auto& s : specs) {
    auto colon = s.find(':');
    if (colon == std::string::npos) throw CLI::ValidationError("--fault", "expected SESSION:KIND, got " + s);
    auto f = sm::parse_fault(s.substr(colon + 1));
    if (!f) throw CLI::ValidationError("--fault", "unknown fault " + s.substr(colon + 1));
    out[std::stoul(s.substr(0, colon))] = *f;
  }
  return out;
}

struct Sink {
  std::unique_ptr<std::ofstream> file;
  std::ostream* stream = &std::cout;
  explicit Sink(const std::string& path) {
    if (!path.empty() && path != "-") {
      file = std::make_unique<std::ofstream>(path);
      if (!*file) throw std::runtime_error("cannot write " + path);
      stream = file.get();
    }
  }
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"SimpleMAC reference protocol"};
  app.require_subcommand(1);

  std::string key_hex, events_path = "-";
  std::uint16_t port = 0;
  std::size_t sessions = 1;

  auto* server = app.add_subcommand("server", "Accept sessions and print one verdict per line");
  server->add_option("--port", port, "Listening port")->required();
  server->add_option("--sessions", sessions, "Sessions to serve")->capture_default_str();
  server->add_option("--key", key_hex, "Pre-shared key as hex (default: the model literal)");
  server->add_option("--events", events_path, "Event log file ('-' for stdout)");

  sm::ClientOptions copts;
  std::vector<std::string> faults;
  auto* client = app.add_subcommand("client", "Run client sessions");
  client->add_option("--port", port, "Server port")->required();
  client->add_option("--sessions", copts.sessions)->capture_default_str();
  client->add_option("--concurrency", copts.concurrency)->capture_default_str();
  client->add_option("--message-size", copts.message_size)->capture_default_str();
  client->add_option("--seed", copts.seed)->capture_default_str();
  client->add_option("--key", key_hex);
  client->add_option("--fault", faults, "SESSION:KIND with KIND one of corrupt-hmac, truncate, replay");
  client->add_option("--events", events_path);

  sm::TraceOptions topts;
  std::string role = "server", out_path = "-";
  auto* gen = app.add_subcommand("gen-trace", "Write a deterministic offline trace");
  gen->add_option("--sessions", topts.sessions)->capture_default_str();
  gen->add_option("--seed", topts.seed)->capture_default_str();
  gen->add_option("--role", role)->check(CLI::IsMember({"server", "client"}))->capture_default_str();
  gen->add_option("--interleave", topts.interleave)->capture_default_str();
  gen->add_option("--message-size", topts.message_size)->capture_default_str();
  gen->add_option("--key", key_hex);
  gen->add_option("--fault", faults);
  gen->add_option("--out", out_path);

  auto* setup = app.add_subcommand("setup-event", "Print the key-loading event");
  setup->add_option("--key", key_hex)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    msrmon::Bytes key = parse_key(key_hex);
    if (*server) {
      Sink sink(events_path);
      msrmon::EventWriter log(sink.stream);
      sm::Server s(port, key, log);
      for (bool v : s.serve(sessions)) std::cerr << (v ? 1 : 0) << "\n";
    } else if (*client) {
      Sink sink(events_path);
      msrmon::EventWriter log(sink.stream);
      copts.key = key;
      copts.faults = parse_faults(faults);
      for (bool v : sm::run_clients(port, copts, log)) std::cerr << (v ? 1 : 0) << "\n";
    } else if (*gen) {
      topts.key = key;
      topts.role = role == "client" ? sm::Role::client : sm::Role::server;
      topts.faults = parse_faults(faults);
      Sink sink(out_path);
      for (const auto& e : sm::gen_trace(topts)) *sink.stream << msrmon::format_event_line(e) << "\n";
    } else if (*setup) {
      std::cout << msrmon::format_event_line(sm::load_key_event(key)) << "\n";
    }
  } catch (const CLI::ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
