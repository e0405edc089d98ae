#pragma once

#include <arpa/inet.h>
#include <netinet/in.h>
#include <openssl/evp.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <algorithm>
#include <atomic>
#include <cctype>
#include <chrono>
#include <cstdint>
#include <cstring>
#include <deque>
#include <memory>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include "diffnav/protocol.hpp"
#include "diffnav/session.hpp"

namespace diffnav::teleop {

namespace ws {

inline constexpr std::string_view kGuid = "258EAFA5-E914-47DA-95CA-C5AB0DC85B11";

/// Sec-WebSocket-Accept value for a client key.
inline std::string accept_key(std::string_view client_key) {
  const std::string input = std::string(client_key) + std::string(kGuid);
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int digest_len = 0;
  if (EVP_Digest(input.data(), input.size(), digest, &digest_len, EVP_sha1(), nullptr) != 1) {
    throw std::runtime_error("websocket: SHA-1 failed");
  }
  std::string out(4 * ((digest_len + 2) / 3) + 1, '\0');
  const int n = EVP_EncodeBlock(reinterpret_cast<unsigned char*>(out.data()), digest,
                                static_cast<int>(digest_len));
  out.resize(static_cast<std::size_t>(n));
  return out;
}

enum Opcode : std::uint8_t {
  kContinuation = 0x0,
  kText = 0x1,
  kBinary = 0x2,
  kClose = 0x8,
  kPing = 0x9,
  kPong = 0xA
};

/// Single unfragmented frame. Server frames are never masked.
inline std::string encode_frame(std::string_view payload, Opcode opcode = kText,
                                std::optional<std::uint32_t> mask = std::nullopt) {
  std::string out;
  out.push_back(static_cast<char>(0x80 | opcode));
  const std::uint8_t mask_bit = mask ? 0x80 : 0x00;
  const std::uint64_t len = payload.size();
  if (len < 126) {
    out.push_back(static_cast<char>(mask_bit | len));
  } else if (len <= 0xFFFF) {
    out.push_back(static_cast<char>(mask_bit | 126));
    out.push_back(static_cast<char>((len >> 8) & 0xFF));
    out.push_back(static_cast<char>(len & 0xFF));
  } else {
    out.push_back(static_cast<char>(mask_bit | 127));
    for (int shift = 56; shift >= 0; shift -= 8) {
      out.push_back(static_cast<char>((len >> shift) & 0xFF));
    }
  }
  std::uint8_t key[4] = {0, 0, 0, 0};
  if (mask) {
    for (int i = 0; i < 4; ++i) key[i] = static_cast<std::uint8_t>((*mask >> (24 - 8 * i)) & 0xFF);
    out.append(reinterpret_cast<const char*>(key), 4);
  }
  for (std::size_t i = 0; i < payload.size(); ++i) {
    out.push_back(static_cast<char>(payload[i] ^ (mask ? key[i % 4] : 0)));
  }
  return out;
}

}  // namespace ws

/// Blocking byte-stream reader over a socket with an internal buffer.
class SocketReader {
 public:
  explicit SocketReader(int fd) : fd_(fd) {}

  /// Fills the buffer with at least `n` bytes; false on EOF or error.
  bool fill(std::size_t n) {
    while (buffer_.size() < n) {
      char chunk[4096];
      const ssize_t got = ::recv(fd_, chunk, sizeof chunk, 0);
      if (got <= 0) return false;
      buffer_.append(chunk, static_cast<std::size_t>(got));
    }
    return true;
  }

  /// Reads through `delim`; returns the text before it.
  std::optional<std::string> read_until(std::string_view delim) {
    std::size_t scanned = 0;
    while (true) {
      const auto pos = buffer_.find(delim, scanned > delim.size() ? scanned - delim.size() : 0);
      if (pos != std::string::npos) {
        std::string out = buffer_.substr(0, pos);
        buffer_.erase(0, pos + delim.size());
        return out;
      }
      scanned = buffer_.size();
      if (!fill(buffer_.size() + 1)) return std::nullopt;
    }
  }

  std::optional<std::string> read_exact(std::size_t n) {
    if (!fill(n)) return std::nullopt;
    std::string out = buffer_.substr(0, n);
    buffer_.erase(0, n);
    return out;
  }

  /// Peeks at the first `n` bytes without consuming them.
  std::optional<std::string_view> peek(std::size_t n) {
    if (!fill(n)) return std::nullopt;
    return std::string_view(buffer_).substr(0, n);
  }

 private:
  int fd_;
  std::string buffer_;
};

/// One client link, either raw newline-delimited JSON or WebSocket text
/// frames carrying the same JSON lines.
class Connection {
 public:
  explicit Connection(int fd) : fd_(fd), reader_(fd) {}
  ~Connection() { close(); }
  Connection(const Connection&) = delete;
  Connection& operator=(const Connection&) = delete;

  /// Detects the transport and completes the WebSocket handshake if needed.
  bool open(int sniff_ms = 250) {
    // raw clients may wait for telemetry before writing anything
    pollfd p{fd_, POLLIN, 0};
    const int ready = ::poll(&p, 1, sniff_ms);
    if (ready < 0) return false;
    if (ready == 0) return true;
    auto first = reader_.peek(1);
    if (!first) return false;
    if ((*first)[0] != 'G') return true;
    auto head = reader_.peek(4);
    if (!head) return false;
    if (*head != "GET ") return true;
    auto request = reader_.read_until("\r\n\r\n");
    if (!request) return false;
    auto key = header_value(*request, "sec-websocket-key");
    if (!key) {
      send_raw("HTTP/1.1 400 Bad Request\r\nContent-Length: 0\r\n\r\n");
      return false;
    }
    websocket_ = true;
    return send_raw("HTTP/1.1 101 Switching Protocols\r\n"
                    "Upgrade: websocket\r\n"
                    "Connection: Upgrade\r\n"
                    "Sec-WebSocket-Accept: " +
                    ws::accept_key(*key) + "\r\n\r\n");
  }

  bool websocket() const { return websocket_; }

  /// Next JSON line from the client; nullopt once the link is gone.
  std::optional<std::string> read_line() {
    while (true) {
      if (!pending_.empty()) {
        std::string line = std::move(pending_.front());
        pending_.pop_front();
        return line;
      }
      if (!websocket_) {
        auto line = reader_.read_until("\n");
        if (!line) return std::nullopt;
        if (!line->empty() && line->back() == '\r') line->pop_back();
        if (line->empty()) continue;
        return line;
      }
      auto message = read_ws_message();
      if (!message) return std::nullopt;
      std::size_t begin = 0;
      while (begin <= message->size()) {
        const auto end = std::min(message->find('\n', begin), message->size());
        std::string part = message->substr(begin, end - begin);
        if (!part.empty() && part.back() == '\r') part.pop_back();
        if (!part.empty()) pending_.push_back(std::move(part));
        begin = end + 1;
      }
    }
  }

  bool send_line(std::string_view json_line) {
    if (websocket_) return send_raw(ws::encode_frame(json_line));
    std::string framed(json_line);
    framed.push_back('\n');
    return send_raw(framed);
  }

  /// Unblocks a reader and makes further sends fail.
  void shutdown() {
    std::lock_guard lock(write_mutex_);
    if (fd_ >= 0) ::shutdown(fd_, SHUT_RDWR);
  }

  void close() {
    std::lock_guard lock(write_mutex_);
    if (fd_ >= 0) {
      ::shutdown(fd_, SHUT_RDWR);
      ::close(fd_);
      fd_ = -1;
    }
  }

 private:
  static std::optional<std::string> header_value(const std::string& request, std::string name) {
    std::size_t pos = 0;
    while (pos < request.size()) {
      auto end = request.find("\r\n", pos);
      if (end == std::string::npos) end = request.size();
      const std::string line = request.substr(pos, end - pos);
      const auto colon = line.find(':');
      if (colon != std::string::npos) {
        std::string key = line.substr(0, colon);
        std::transform(key.begin(), key.end(), key.begin(),
                       [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
        if (key == name) {
          std::string value = line.substr(colon + 1);
          const auto first = value.find_first_not_of(" \t");
          const auto last = value.find_last_not_of(" \t");
          if (first == std::string::npos) return std::string{};
          return value.substr(first, last - first + 1);
        }
      }
      pos = end + 2;
    }
    return std::nullopt;
  }

  std::optional<std::string> read_ws_message() {
    std::string message;
    while (true) {
      auto head = reader_.read_exact(2);
      if (!head) return std::nullopt;
      const auto b0 = static_cast<std::uint8_t>((*head)[0]);
      const auto b1 = static_cast<std::uint8_t>((*head)[1]);
      const bool fin = b0 & 0x80;
      const std::uint8_t opcode = b0 & 0x0F;
      const bool masked = b1 & 0x80;
      std::uint64_t len = b1 & 0x7F;
      if (len == 126 || len == 127) {
        auto ext = reader_.read_exact(len == 126 ? 2 : 8);
        if (!ext) return std::nullopt;
        len = 0;
        for (char c : *ext) len = (len << 8) | static_cast<std::uint8_t>(c);
      }
      if (len > (1u << 24)) return std::nullopt;
      std::uint8_t key[4] = {0, 0, 0, 0};
      if (masked) {
        auto k = reader_.read_exact(4);
        if (!k) return std::nullopt;
        std::memcpy(key, k->data(), 4);
      }
      auto payload = reader_.read_exact(static_cast<std::size_t>(len));
      if (!payload) return std::nullopt;
      for (std::size_t i = 0; i < payload->size(); ++i) (*payload)[i] ^= static_cast<char>(key[i % 4]);

      switch (opcode) {
        case ws::kClose:
          send_raw(ws::encode_frame({}, ws::kClose));
          return std::nullopt;
        case ws::kPing:
          send_raw(ws::encode_frame(*payload, ws::kPong));
          continue;
        case ws::kPong:
          continue;
        default:
          message += *payload;
          if (fin) return message;
      }
    }
  }

  bool send_raw(std::string_view bytes) {
    std::lock_guard lock(write_mutex_);
    std::size_t sent = 0;
    while (sent < bytes.size()) {
      if (fd_ < 0) return false;
      const ssize_t n = ::send(fd_, bytes.data() + sent, bytes.size() - sent, MSG_NOSIGNAL);
      if (n <= 0) return false;
      sent += static_cast<std::size_t>(n);
    }
    return true;
  }

  int fd_;
  SocketReader reader_;
  bool websocket_ = false;
  std::deque<std::string> pending_;
  std::mutex write_mutex_;
};

struct ServerConfig {
  std::string bind_address = "0.0.0.0";
  std::uint16_t port = 0;  // 0 picks an ephemeral port
};

/// Serves one TeleopSession over TCP. The session loop thread is the only
/// writer of session state and of the telemetry stream; a reader thread per
/// connection enqueues decoded lines to it. A second concurrent client is
/// refused with an error frame.
class TeleopServer {
 public:
  TeleopServer(TeleopSession session, ServerConfig cfg)
      : session_(std::move(session)), cfg_(std::move(cfg)) {}

  ~TeleopServer() { stop(); }
  TeleopServer(const TeleopServer&) = delete;
  TeleopServer& operator=(const TeleopServer&) = delete;

  void start() {
    listen_fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
    if (listen_fd_ < 0) throw std::runtime_error("socket() failed");
    int yes = 1;
    ::setsockopt(listen_fd_, SOL_SOCKET, SO_REUSEADDR, &yes, sizeof yes);
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_port = htons(cfg_.port);
    if (::inet_pton(AF_INET, cfg_.bind_address.c_str(), &addr.sin_addr) != 1) {
      throw std::invalid_argument("invalid bind address '" + cfg_.bind_address + "'");
    }
    if (::bind(listen_fd_, reinterpret_cast<sockaddr*>(&addr), sizeof addr) != 0) {
      ::close(listen_fd_);
      throw std::runtime_error("bind() failed on port " + std::to_string(cfg_.port) + ": " +
                               std::strerror(errno));
    }
    if (::listen(listen_fd_, 4) != 0) throw std::runtime_error("listen() failed");
    socklen_t len = sizeof addr;
    ::getsockname(listen_fd_, reinterpret_cast<sockaddr*>(&addr), &len);
    port_ = ntohs(addr.sin_port);

    running_ = true;
    accept_thread_ = std::thread([this] { accept_loop(); });
    session_thread_ = std::thread([this] { session_loop(); });
  }

  std::uint16_t port() const { return port_; }

  void stop() {
    if (!running_.exchange(false)) return;
    ::shutdown(listen_fd_, SHUT_RDWR);
    ::close(listen_fd_);
    {
      std::lock_guard lock(inbox_mutex_);
      if (active_) active_->shutdown();
    }
    if (accept_thread_.joinable()) accept_thread_.join();
    if (session_thread_.joinable()) session_thread_.join();
    std::vector<std::thread> readers;
    {
      std::lock_guard lock(inbox_mutex_);
      readers.swap(readers_);
    }
    for (auto& t : readers) t.join();
    std::lock_guard lock(inbox_mutex_);
    if (active_) active_->close();
    active_.reset();
  }

  /// Number of telemetry messages written so far.
  std::size_t telemetry_sent() const { return telemetry_sent_.load(); }

 private:
  struct Inbound {
    enum class Kind { connected, line, disconnected } kind;
    std::shared_ptr<Connection> conn;
    std::string line;
  };

  void accept_loop() {
    while (running_) {
      const int fd = ::accept(listen_fd_, nullptr, nullptr);
      if (fd < 0) {
        if (!running_) return;
        continue;
      }
      auto conn = std::make_shared<Connection>(fd);
      std::lock_guard lock(inbox_mutex_);
      if (busy_) {
        // Refusal happens off the accept path so a slow client cannot stall it.
        readers_.emplace_back([conn] {
          if (conn->open()) {
            conn->send_line(encode(ServerMessage::error_of("session busy: another operator is connected")));
          }
          conn->close();
        });
        continue;
      }
      busy_ = true;
      active_ = conn;
      readers_.emplace_back([this, conn] { read_loop(conn); });
    }
  }

  void read_loop(std::shared_ptr<Connection> conn) {
    if (!conn->open()) {
      post({Inbound::Kind::disconnected, conn, {}});
      return;
    }
    post({Inbound::Kind::connected, conn, {}});
    while (auto line = conn->read_line()) post({Inbound::Kind::line, conn, std::move(*line)});
    post({Inbound::Kind::disconnected, conn, {}});
  }

  void post(Inbound in) {
    std::lock_guard lock(inbox_mutex_);
    inbox_.push_back(std::move(in));
  }

  void session_loop() {
    using clock = std::chrono::steady_clock;
    const auto period = std::chrono::duration_cast<clock::duration>(
        std::chrono::duration<double, std::milli>(session_.config().tick_ms));
    auto next = clock::now() + period;
    std::shared_ptr<Connection> client;

    while (running_) {
      std::deque<Inbound> batch;
      {
        std::lock_guard lock(inbox_mutex_);
        batch.swap(inbox_);
      }
      for (auto& in : batch) {
        switch (in.kind) {
          case Inbound::Kind::connected:
            client = in.conn;
            session_.connect();
            break;
          case Inbound::Kind::line:
            if (client == in.conn) {
              for (const auto& reply : session_.handle_frame(in.line)) send(client, reply);
            }
            break;
          case Inbound::Kind::disconnected:
            if (client == in.conn || !client) {
              session_.disconnect();
              in.conn->close();
              client.reset();
              std::lock_guard lock(inbox_mutex_);
              if (active_ == in.conn) active_.reset();
              busy_ = false;
            }
            break;
        }
      }
      if (client) {
        for (const auto& msg : session_.tick()) send(client, msg);
      }
      std::this_thread::sleep_until(next);
      next += period;
    }
  }

  void send(const std::shared_ptr<Connection>& client, const ServerMessage& msg) {
    if (client->send_line(encode(msg)) && msg.type == ServerType::telemetry) ++telemetry_sent_;
  }

  TeleopSession session_;
  ServerConfig cfg_;
  int listen_fd_ = -1;
  std::uint16_t port_ = 0;
  std::atomic<bool> running_{false};
  std::atomic<std::size_t> telemetry_sent_{0};

  std::mutex inbox_mutex_;
  std::deque<Inbound> inbox_;
  std::shared_ptr<Connection> active_;
  bool busy_ = false;
  std::vector<std::thread> readers_;

  std::thread accept_thread_;
  std::thread session_thread_;
};

}  // namespace diffnav::teleop
