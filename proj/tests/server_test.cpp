#include <gtest/gtest.h>

#include <arpa/inet.h>
#include <netinet/in.h>
#include <sys/socket.h>
#include <sys/time.h>
#include <unistd.h>

#include <chrono>
#include <optional>
#include <string>
#include <thread>

#include "diffnav/planner.hpp"
#include "diffnav/server.hpp"

using namespace diffnav;
using namespace diffnav::teleop;

namespace {

class Client {
 public:
  explicit Client(std::uint16_t port) {
    fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_port = htons(port);
    ::inet_pton(AF_INET, "127.0.0.1", &addr.sin_addr);
    timeval tv{5, 0};
    ::setsockopt(fd_, SOL_SOCKET, SO_RCVTIMEO, &tv, sizeof tv);
    connected_ = ::connect(fd_, reinterpret_cast<sockaddr*>(&addr), sizeof addr) == 0;
  }
  ~Client() { ::close(fd_); }

  bool connected() const { return connected_; }

  void write(const std::string& bytes) { ::send(fd_, bytes.data(), bytes.size(), MSG_NOSIGNAL); }

  std::optional<std::string> read_exact(std::size_t n) {
    while (buf_.size() < n) {
      char chunk[4096];
      const ssize_t got = ::recv(fd_, chunk, sizeof chunk, 0);
      if (got <= 0) return std::nullopt;
      buf_.append(chunk, static_cast<std::size_t>(got));
    }
    std::string out = buf_.substr(0, n);
    buf_.erase(0, n);
    return out;
  }

  std::optional<std::string> read_until(const std::string& delim) {
    while (true) {
      if (auto pos = buf_.find(delim); pos != std::string::npos) {
        std::string out = buf_.substr(0, pos);
        buf_.erase(0, pos + delim.size());
        return out;
      }
      char chunk[4096];
      const ssize_t got = ::recv(fd_, chunk, sizeof chunk, 0);
      if (got <= 0) return std::nullopt;
      buf_.append(chunk, static_cast<std::size_t>(got));
    }
  }

  // Unmasked server frame payload.
  std::optional<std::string> read_ws() {
    auto head = read_exact(2);
    if (!head) return std::nullopt;
    std::size_t len = static_cast<unsigned char>((*head)[1]) & 0x7F;
    if (len == 126) {
      auto ext = read_exact(2);
      len = (static_cast<unsigned char>((*ext)[0]) << 8) | static_cast<unsigned char>((*ext)[1]);
    } else if (len == 127) {
      auto ext = read_exact(8);
      len = 0;
      for (char c : *ext) len = (len << 8) | static_cast<unsigned char>(c);
    }
    return read_exact(len);
  }

 private:
  int fd_ = -1;
  bool connected_ = false;
  std::string buf_;
};

std::optional<ServerMessage> next_of(Client& c, ServerType type, bool ws = false) {
  for (int i = 0; i < 500; ++i) {
    auto line = ws ? c.read_ws() : c.read_until("\n");
    if (!line) return std::nullopt;
    auto msg = decode_server(*line);
    if (msg.type == type) return msg;
  }
  return std::nullopt;
}

TeleopServer make_server() {
  SessionConfig cfg;
  cfg.tick_ms = 20;
  return TeleopServer(TeleopSession(sim::make_world(planner::parse_map("M.........E")), cfg),
                      ServerConfig{"127.0.0.1", 0});
}

}  // namespace

TEST(WebSocket, AcceptKeyMatchesHandshakeExample) {
  EXPECT_EQ(ws::accept_key("dGhlIHNhbXBsZSBub25jZQ=="), "s3pPLMBiTxaQ9kYGzzhZRbK+xOo=");
}

TEST(WebSocket, FrameLengths) {
  EXPECT_EQ(ws::encode_frame("hi"), std::string("\x81\x02hi", 4));
  EXPECT_EQ(ws::encode_frame(std::string(200, 'a')).size(), 204u);
  EXPECT_EQ(ws::encode_frame(std::string(70000, 'a')).size(), 70010u);
  const std::string masked = ws::encode_frame("abcd", ws::kText, 0x01020304u);
  EXPECT_EQ(masked.substr(2, 4), std::string("\x01\x02\x03\x04", 4));
  EXPECT_EQ(masked[6], 'a' ^ 0x01);
}

TEST(Server, RawLinesCarryTelemetryAndReplies) {
  auto server = make_server();
  server.start();
  Client c(server.port());
  ASSERT_TRUE(c.connected());
  ASSERT_TRUE(next_of(c, ServerType::telemetry));
  c.write(encode(ControlMessage::set_mode(Mode::odometry)) + "\n");
  const auto ack = next_of(c, ServerType::ack);
  ASSERT_TRUE(ack);
  EXPECT_EQ(*ack->echo, ControlMessage::set_mode(Mode::odometry));
  auto ev = next_of(c, ServerType::event);
  while (ev && *ev->event == EventKind::waypoint_reached) ev = next_of(c, ServerType::event);
  ASSERT_TRUE(ev);
  EXPECT_EQ(*ev->event, EventKind::goal_reached);
  c.write("{oops\n");
  EXPECT_TRUE(next_of(c, ServerType::error));
  server.stop();
  EXPECT_GT(server.telemetry_sent(), 0u);
}

TEST(Server, SecondClientIsRefused) {
  auto server = make_server();
  server.start();
  Client first(server.port());
  ASSERT_TRUE(next_of(first, ServerType::telemetry));
  Client second(server.port());
  const auto err = next_of(second, ServerType::error);
  ASSERT_TRUE(err);
  EXPECT_NE(err->message->find("busy"), std::string::npos);
  EXPECT_TRUE(next_of(first, ServerType::telemetry));
  server.stop();
}

TEST(Server, ReconnectAfterDisconnect) {
  auto server = make_server();
  server.start();
  {
    Client first(server.port());
    ASSERT_TRUE(next_of(first, ServerType::telemetry));
  }
  std::optional<ServerMessage> got;
  for (int attempt = 0; attempt < 50 && !got; ++attempt) {
    Client again(server.port());
    auto msg = again.read_until("\n");
    if (msg && decode_server(*msg).type == ServerType::telemetry) got = decode_server(*msg);
    if (!got) std::this_thread::sleep_for(std::chrono::milliseconds(20));
  }
  EXPECT_TRUE(got);
  server.stop();
}

TEST(Server, WebSocketUpgrade) {
  auto server = make_server();
  server.start();
  Client c(server.port());
  c.write(
      "GET /ws HTTP/1.1\r\nHost: localhost\r\nUpgrade: websocket\r\nConnection: Upgrade\r\n"
      "Sec-WebSocket-Key: dGhlIHNhbXBsZSBub25jZQ==\r\nSec-WebSocket-Version: 13\r\n\r\n");
  const auto head = c.read_until("\r\n\r\n");
  ASSERT_TRUE(head);
  EXPECT_NE(head->find("101"), std::string::npos);
  EXPECT_NE(head->find("s3pPLMBiTxaQ9kYGzzhZRbK+xOo="), std::string::npos);
  ASSERT_TRUE(next_of(c, ServerType::telemetry, true));
  c.write(ws::encode_frame(encode(ControlMessage::set_mode(Mode::manual)), ws::kText, 0xA1B2C3D4u));
  const auto ack = next_of(c, ServerType::ack, true);
  ASSERT_TRUE(ack);
  EXPECT_EQ(*ack->echo, ControlMessage::set_mode(Mode::manual));
  server.stop();
}
