#pragma once

// SimpleMAC reference protocol: a client sends tag, message and an HMAC over
// both; the server recomputes the HMAC and answers '1' on a match, '0'
// otherwise. Both sides log their library calls as monitor events.

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "msrmon/event_io.hpp"
#include "msrmon/term.hpp"

namespace msrmon::simplemac {

enum class Fault { none, corrupt_hmac, truncate_payload, replay };

const char* to_string(Fault f);
/// Accepts "none", "corrupt-hmac", "truncate"/"truncate-payload" and "replay".
std::optional<Fault> parse_fault(std::string_view text);

inline constexpr std::uint8_t kTag = 0x02;

/// The key literal of the bundled model.
Bytes default_key();

struct SessionParams {
  Bytes key = default_key();
  std::uint8_t tag = kTag;
  Bytes message;  // at most 65536 bytes
  Fault fault = Fault::none;
};

Bytes hmac_sha256(std::span<const std::uint8_t> key, std::span<const std::uint8_t> data);

/// 8-byte big-endian length, tag byte, message.
Bytes encode_data(std::uint8_t tag, std::span<const std::uint8_t> message);
/// encode_data followed by the MAC.
Bytes encode_payload(std::uint8_t tag, std::span<const std::uint8_t> message, std::span<const std::uint8_t> mac);

struct Payload {
  std::uint8_t tag = 0;
  Bytes message;
  Bytes mac;
};
std::optional<Payload> decode_payload(std::span<const std::uint8_t> wire);

/// Builds the wire messages of one client session, logging random, hmac and
/// send events. Faults mutate the bytes after the MAC is computed; replay
/// yields the same payload twice.
std::vector<Bytes> client_session(const SessionParams& p, EventWriter& log);

/// Logs receive and hmac events for one received payload and returns the
/// verdict. Payloads too short to decode log only the receive event.
bool server_session(std::span<const std::uint8_t> key, std::span<const std::uint8_t> wire, EventWriter& log);

// Sockets ------------------------------------------------------------------

/// TCP server on 127.0.0.1. Each connection carries one payload, terminated
/// by the client half-closing; the reply is a single '1' or '0' byte.
class Server {
 public:
  /// Port 0 picks a free port.
  Server(std::uint16_t port, Bytes key, EventWriter& log);
  ~Server();
  Server(const Server&) = delete;
  Server& operator=(const Server&) = delete;

  std::uint16_t port() const { return port_; }
  /// Accepts `sessions` connections, one thread per connection, and returns
  /// the verdicts in completion order.
  std::vector<bool> serve(std::size_t sessions);

 private:
  int fd_ = -1;
  std::uint16_t port_ = 0;
  Bytes key_;
  EventWriter& log_;
};

/// Sends one payload and returns the server's verdict.
bool send_payload(std::uint16_t port, std::span<const std::uint8_t> wire);

struct ClientOptions {
  std::size_t sessions = 1;
  std::size_t concurrency = 1;
  Bytes key = default_key();
  std::size_t message_size = 16;
  std::uint64_t seed = 1;
  std::map<std::size_t, Fault> faults;  // by session index
};

/// Runs the client sessions against `port`, `concurrency` at a time. Returns
/// one verdict per connection, ordered by session.
std::vector<bool> run_clients(std::uint16_t port, const ClientOptions& opts, EventWriter& log);

struct LocalRun {
  std::vector<ProgramEvent> server_events;
  std::vector<ProgramEvent> client_events;
  std::vector<bool> server_verdicts;
  std::vector<bool> client_verdicts;
};

/// Server and clients in one process over the loopback interface.
LocalRun run_local(const ClientOptions& opts);

// Offline traces -----------------------------------------------------------

enum class Role { server, client };

struct TraceOptions {
  std::size_t sessions = 0;
  std::uint64_t seed = 1;
  Role role = Role::server;
  /// Groups of this many sessions run side by side.
  std::size_t interleave = 1;
  std::size_t message_size = 16;
  Bytes key = default_key();
  std::map<std::size_t, Fault> faults;  // by session index
};

/// Deterministic event trace for the chosen role.
std::vector<ProgramEvent> gen_trace(const TraceOptions& opts);

/// Event that loads `key` for the keyed model.
ProgramEvent load_key_event(std::span<const std::uint8_t> key);

}  // namespace msrmon::simplemac
