#include "msrmon/simplemac.hpp"

#include <algorithm>
#include <cerrno>
#include <cstring>
#include <exception>
#include <mutex>
#include <random>
#include <sstream>
#include <stdexcept>
#include <thread>

#include <arpa/inet.h>
#include <netinet/in.h>
#include <sys/socket.h>
#include <unistd.h>

#include <openssl/evp.h>
#include <openssl/hmac.h>

namespace msrmon::simplemac {

const char* to_string(Fault f) {
  switch (f) {
    case Fault::none: return "none";
    case Fault::corrupt_hmac: return "corrupt-hmac";
    case Fault::truncate_payload: return "truncate-payload";
    case Fault::replay: return "replay";
  }
  return "?";
}

std::optional<Fault> parse_fault(std::string_view text) {
  if (text == "none") return Fault::none;
  if (text == "corrupt-hmac") return Fault::corrupt_hmac;
  if (text == "truncate" || text == "truncate-payload") return Fault::truncate_payload;
  if (text == "replay") return Fault::replay;
  return std::nullopt;
}

Bytes default_key() { return to_bytes("secret"); }

Bytes hmac_sha256(std::span<const std::uint8_t> key, std::span<const std::uint8_t> data) {
  Bytes out(EVP_MAX_MD_SIZE);
  unsigned int len = 0;
  static const std::uint8_t kEmpty = 0;
  if (!HMAC(EVP_sha256(), key.empty() ? &kEmpty : key.data(), static_cast<int>(key.size()),
            data.empty() ? &kEmpty : data.data(), data.size(), out.data(), &len)) {
    throw std::runtime_error("HMAC computation failed");
  }
  out.resize(len);
  return out;
}

Bytes encode_data(std::uint8_t tag, std::span<const std::uint8_t> message) {
  Bytes out(8);
  std::uint64_t n = message.size();
  for (int i = 7; i >= 0; --i, n >>= 8) out[i] = static_cast<std::uint8_t>(n & 0xff);
  out.push_back(tag);
  out.insert(out.end(), message.begin(), message.end());
  return out;
}

Bytes encode_payload(std::uint8_t tag, std::span<const std::uint8_t> message, std::span<const std::uint8_t> mac) {
  Bytes out = encode_data(tag, message);
  out.insert(out.end(), mac.begin(), mac.end());
  return out;
}

std::optional<Payload> decode_payload(std::span<const std::uint8_t> wire) {
  if (wire.size() < 9) return std::nullopt;
  std::uint64_t n = 0;
  for (int i = 0; i < 8; ++i) n = (n << 8) | wire[i];
  if (n > wire.size() - 9) return std::nullopt;
  Payload p;
  p.tag = wire[8];
  p.message.assign(wire.begin() + 9, wire.begin() + 9 + static_cast<std::ptrdiff_t>(n));
  p.mac.assign(wire.begin() + 9 + static_cast<std::ptrdiff_t>(n), wire.end());
  return p;
}

std::vector<Bytes> client_session(const SessionParams& p, EventWriter& log) {
  log.write({"random", {}, p.message});
  Bytes data = encode_data(p.tag, p.message);
  Bytes mac = hmac_sha256(p.key, data);
  log.write({"hmac", {p.key, data}, mac});
  Bytes wire = encode_payload(p.tag, p.message, mac);
  switch (p.fault) {
    case Fault::corrupt_hmac: wire.back() ^= 0x01; break;
    case Fault::truncate_payload: wire.pop_back(); break;
    default: break;
  }
  std::vector<Bytes> out{wire};
  if (p.fault == Fault::replay) out.push_back(wire);
  for (const auto& w : out) log.write({"send", {w}, {}});
  return out;
}

bool server_session(std::span<const std::uint8_t> key, std::span<const std::uint8_t> wire, EventWriter& log) {
  log.write({"receive", {}, Bytes(wire.begin(), wire.end())});
  auto p = decode_payload(wire);
  if (!p) return false;
  Bytes data = encode_data(p->tag, p->message);
  Bytes mac = hmac_sha256(key, data);
  log.write({"hmac", {Bytes(key.begin(), key.end()), data}, mac});
  return p->tag == kTag && mac == p->mac;
}

// Sockets ------------------------------------------------------------------

namespace {

[[noreturn]] void sys_fail(const std::string& what) {
  throw std::runtime_error(what + ": " + std::strerror(errno));
}

struct Fd {
  int fd;
  explicit Fd(int f) : fd(f) {}
  ~Fd() {
    if (fd >= 0) ::close(fd);
  }
  Fd(const Fd&) = delete;
  Fd& operator=(const Fd&) = delete;
};

Bytes read_all(int fd) {
  Bytes out;
  std::uint8_t buf[4096];
  for (;;) {
    ssize_t n = ::read(fd, buf, sizeof buf);
    if (n < 0) {
      if (errno == EINTR) continue;
      sys_fail("read");
    }
    if (n == 0) return out;
    out.insert(out.end(), buf, buf + n);
  }
}

void write_all(int fd, std::span<const std::uint8_t> data) {
  std::size_t off = 0;
  while (off < data.size()) {
    ssize_t n = ::send(fd, data.data() + off, data.size() - off, MSG_NOSIGNAL);
    if (n < 0) {
      if (errno == EINTR) continue;
      sys_fail("send");
    }
    off += static_cast<std::size_t>(n);
  }
}

constexpr std::size_t kMaxWire = 9 + 65536 + 64;

}  // namespace

Server::Server(std::uint16_t port, Bytes key, EventWriter& log) : key_(std::move(key)), log_(log) {
  fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
  if (fd_ < 0) sys_fail("socket");
  int one = 1;
  ::setsockopt(fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
  addr.sin_port = htons(port);
  if (::bind(fd_, reinterpret_cast<sockaddr*>(&addr), sizeof addr) != 0) {
    ::close(fd_);
    sys_fail("bind");
  }
  if (::listen(fd_, 512) != 0) {
    ::close(fd_);
    sys_fail("listen");
  }
  socklen_t len = sizeof addr;
  ::getsockname(fd_, reinterpret_cast<sockaddr*>(&addr), &len);
  port_ = ntohs(addr.sin_port);
}

Server::~Server() {
  if (fd_ >= 0) ::close(fd_);
}

std::vector<bool> Server::serve(std::size_t sessions) {
  std::vector<bool> verdicts;
  std::mutex mu;
  std::exception_ptr error;
  std::vector<std::thread> workers;
  for (std::size_t i = 0; i < sessions; ++i) {
    int conn = ::accept(fd_, nullptr, nullptr);
    if (conn < 0) {
      if (errno == EINTR) {
        --i;
        continue;
      }
      sys_fail("accept");
    }
    workers.emplace_back([this, conn, &verdicts, &mu, &error] {
      Fd c(conn);
      try {
        Bytes wire = read_all(c.fd);
        if (wire.size() > kMaxWire) wire.resize(kMaxWire);
        bool ok = server_session(key_, wire, log_);
        std::uint8_t reply = ok ? '1' : '0';
        write_all(c.fd, std::span(&reply, 1));
        std::lock_guard lock(mu);
        verdicts.push_back(ok);
      } catch (...) {
        std::lock_guard lock(mu);
        if (!error) error = std::current_exception();
      }
    });
  }
  for (auto& t : workers) t.join();
  if (error) std::rethrow_exception(error);
  return verdicts;
}

bool send_payload(std::uint16_t port, std::span<const std::uint8_t> wire) {
  Fd s(::socket(AF_INET, SOCK_STREAM, 0));
  if (s.fd < 0) sys_fail("socket");
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
  addr.sin_port = htons(port);
  if (::connect(s.fd, reinterpret_cast<sockaddr*>(&addr), sizeof addr) != 0) sys_fail("connect");
  write_all(s.fd, wire);
  ::shutdown(s.fd, SHUT_WR);
  Bytes reply = read_all(s.fd);
  if (reply.size() != 1 || (reply[0] != '0' && reply[0] != '1')) {
    throw std::runtime_error("unexpected server reply");
  }
  return reply[0] == '1';
}

namespace {

std::vector<Bytes> make_messages(std::size_t count, std::size_t size, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<Bytes> out(count, Bytes(size));
  for (auto& m : out) {
    for (std::size_t i = 0; i < size; i += 8) {
      std::uint64_t r = rng();
      for (std::size_t j = 0; j < 8 && i + j < size; ++j) m[i + j] = static_cast<std::uint8_t>(r >> (8 * j));
    }
  }
  return out;
}

Fault fault_at(const std::map<std::size_t, Fault>& faults, std::size_t i) {
  auto it = faults.find(i);
  return it == faults.end() ? Fault::none : it->second;
}

}  // namespace

std::vector<bool> run_clients(std::uint16_t port, const ClientOptions& opts, EventWriter& log) {
  auto messages = make_messages(opts.sessions, opts.message_size, opts.seed);
  std::vector<std::vector<bool>> per_session(opts.sessions);
  std::size_t width = std::max<std::size_t>(1, opts.concurrency);
  for (std::size_t base = 0; base < opts.sessions; base += width) {
    std::size_t end = std::min(opts.sessions, base + width);
    std::vector<std::thread> threads;
    std::exception_ptr error;
    std::mutex mu;
    for (std::size_t i = base; i < end; ++i) {
      threads.emplace_back([&, i] {
        try {
          SessionParams p{opts.key, kTag, messages[i], fault_at(opts.faults, i)};
          for (const auto& wire : client_session(p, log)) per_session[i].push_back(send_payload(port, wire));
        } catch (...) {
          std::lock_guard lock(mu);
          if (!error) error = std::current_exception();
        }
      });
    }
    for (auto& t : threads) t.join();
    if (error) std::rethrow_exception(error);
  }
  std::vector<bool> out;
  for (const auto& v : per_session) out.insert(out.end(), v.begin(), v.end());
  return out;
}

LocalRun run_local(const ClientOptions& opts) {
  EventWriter server_log(nullptr, true);
  EventWriter client_log(nullptr, true);
  Server server(0, opts.key, server_log);
  std::size_t connections = opts.sessions;
  for (const auto& [i, f] : opts.faults) {
    if (f == Fault::replay && i < opts.sessions) ++connections;
  }
  LocalRun out;
  std::exception_ptr server_error;
  std::thread st([&] {
    try {
      out.server_verdicts = server.serve(connections);
    } catch (...) {
      server_error = std::current_exception();
    }
  });
  try {
    out.client_verdicts = run_clients(server.port(), opts, client_log);
  } catch (...) {
    // Unblock the accept loop before propagating.
    for (std::size_t i = out.client_verdicts.size(); i < connections; ++i) {
      try {
        send_payload(server.port(), Bytes{});
      } catch (...) {
      }
    }
    st.join();
    throw;
  }
  st.join();
  if (server_error) std::rethrow_exception(server_error);
  out.server_events = server_log.recorded();
  out.client_events = client_log.recorded();
  return out;
}

// Offline traces -----------------------------------------------------------

std::vector<ProgramEvent> gen_trace(const TraceOptions& opts) {
  auto messages = make_messages(opts.sessions, opts.message_size, opts.seed);
  std::vector<ProgramEvent> out;
  std::size_t width = std::max<std::size_t>(1, opts.interleave);
  for (std::size_t base = 0; base < opts.sessions; base += width) {
    std::size_t end = std::min(opts.sessions, base + width);
    // Per session, the events it would log in order.
    std::vector<std::vector<ProgramEvent>> logs;
    for (std::size_t i = base; i < end; ++i) {
      EventWriter w(nullptr, true);
      SessionParams p{opts.key, kTag, messages[i], fault_at(opts.faults, i)};
      auto wires = client_session(p, w);
      if (opts.role == Role::client) {
        logs.push_back(w.recorded());
      } else {
        for (const auto& wire : wires) {
          EventWriter sw(nullptr, true);
          server_session(opts.key, wire, sw);
          logs.push_back(sw.recorded());
        }
      }
    }
    // Round-robin: first events of every session, then second events, ...
    std::size_t longest = 0;
    for (const auto& l : logs) longest = std::max(longest, l.size());
    for (std::size_t k = 0; k < longest; ++k) {
      for (const auto& l : logs) {
        if (k < l.size()) out.push_back(l[k]);
      }
    }
  }
  return out;
}

ProgramEvent load_key_event(std::span<const std::uint8_t> key) {
  return {"load_key", {}, Bytes(key.begin(), key.end())};
}

}  // namespace msrmon::simplemac
