// Copyright 2026 The CMA Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "cma/bus/mqtt_net.hpp"

#include <arpa/inet.h>
#include <fcntl.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>

#include "cma/bus/mqtt.hpp"
#include "cma/common/errors.hpp"

namespace cma::bus::mqtt {

namespace {

sockaddr_in make_addr(const std::string& host, std::uint16_t port) {
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_port = htons(port);
  if (::inet_pton(AF_INET, host.c_str(), &addr.sin_addr) != 1) {
    throw MqttError(MqttError::Kind::kConnectionRefused,
                    "unresolvable host: " + host);
  }
  return addr;
}

}  // namespace

TcpSocket& TcpSocket::operator=(TcpSocket&& other) noexcept {
  if (this != &other) {
    close();
    fd_ = other.fd_;
    other.fd_ = -1;
  }
  return *this;
}

void TcpSocket::connect(const std::string& host, std::uint16_t port,
                        int timeout_ms) {
  close();
  fd_ = ::socket(AF_INET, SOCK_STREAM | SOCK_CLOEXEC, 0);
  if (fd_ < 0) {
    throw MqttError(MqttError::Kind::kConnectionRefused,
                    std::string("socket: ") + std::strerror(errno));
  }
  sockaddr_in addr = make_addr(host, port);
  // Non-blocking connect so a dead host honors the timeout.
  if (::fcntl(fd_, F_SETFL, O_NONBLOCK) != 0) {
    close();
    throw MqttError(MqttError::Kind::kConnectionRefused, "fcntl failed");
  }
  int rc = ::connect(fd_, reinterpret_cast<sockaddr*>(&addr), sizeof(addr));
  if (rc != 0 && errno != EINPROGRESS) {
    int err = errno;
    close();
    if (err == ECONNREFUSED) {
      throw MqttError(MqttError::Kind::kConnectionRefused,
                      "connection refused");
    }
    throw MqttError(MqttError::Kind::kConnectionRefused,
                    std::string("connect: ") + std::strerror(err));
  }
  if (rc != 0) {
    pollfd pfd{fd_, POLLOUT, 0};
    int ready = ::poll(&pfd, 1, timeout_ms);
    if (ready == 0) {
      close();
      throw MqttError(MqttError::Kind::kTimeout, "connect timed out");
    }
    int so_error = 0;
    socklen_t len = sizeof(so_error);
    if (ready < 0 ||
        ::getsockopt(fd_, SOL_SOCKET, SO_ERROR, &so_error, &len) != 0 ||
        so_error != 0) {
      int err = so_error != 0 ? so_error : errno;
      close();
      if (err == ECONNREFUSED) {
        throw MqttError(MqttError::Kind::kConnectionRefused,
                        "connection refused");
      }
      throw MqttError(MqttError::Kind::kConnectionRefused,
                      std::string("connect: ") + std::strerror(err));
    }
  }
  // Back to blocking; reads are paced with poll().
  int flags = ::fcntl(fd_, F_GETFL, 0);
  ::fcntl(fd_, F_SETFL, flags & ~O_NONBLOCK);
  int one = 1;
  ::setsockopt(fd_, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
}

bool TcpSocket::send_all(const std::string& bytes) {
  std::size_t sent = 0;
  while (sent < bytes.size()) {
    ssize_t n =
        ::send(fd_, bytes.data() + sent, bytes.size() - sent, MSG_NOSIGNAL);
    if (n <= 0) {
      if (n < 0 && (errno == EINTR)) continue;
      return false;
    }
    sent += static_cast<std::size_t>(n);
  }
  return true;
}

int TcpSocket::recv_some(std::string& out, int timeout_ms) {
  pollfd pfd{fd_, POLLIN, 0};
  int ready = ::poll(&pfd, 1, timeout_ms);
  if (ready == 0) return 0;
  if (ready < 0) return -1;
  char buf[4096];
  ssize_t n = ::recv(fd_, buf, sizeof(buf), 0);
  if (n <= 0) return -1;
  out.append(buf, static_cast<std::size_t>(n));
  return static_cast<int>(n);
}

void TcpSocket::shutdown_both() {
  if (fd_ >= 0) ::shutdown(fd_, SHUT_RDWR);
}

void TcpSocket::close() {
  if (fd_ >= 0) {
    ::close(fd_);
    fd_ = -1;
  }
}

void TcpListener::listen(const std::string& host, std::uint16_t port) {
  fd_ = ::socket(AF_INET, SOCK_STREAM | SOCK_CLOEXEC, 0);
  if (fd_ < 0) {
    throw MqttError(MqttError::Kind::kConnectionRefused,
                    std::string("socket: ") + std::strerror(errno));
  }
  int one = 1;
  ::setsockopt(fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));
  sockaddr_in addr = make_addr(host, port);
  if (::bind(fd_, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) != 0 ||
      ::listen(fd_, 16) != 0) {
    int err = errno;
    close();
    throw MqttError(MqttError::Kind::kConnectionRefused,
                    std::string("bind/listen: ") + std::strerror(err));
  }
  socklen_t len = sizeof(addr);
  ::getsockname(fd_, reinterpret_cast<sockaddr*>(&addr), &len);
  port_ = ntohs(addr.sin_port);
}

TcpSocket TcpListener::accept(int timeout_ms) {
  if (fd_ < 0) return TcpSocket{};
  pollfd pfd{fd_, POLLIN, 0};
  int ready = ::poll(&pfd, 1, timeout_ms);
  if (ready <= 0) return TcpSocket{};
  int client = ::accept4(fd_, nullptr, nullptr, SOCK_CLOEXEC);
  if (client < 0) return TcpSocket{};
  int one = 1;
  ::setsockopt(client, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
  return TcpSocket{client};
}

void TcpListener::close() {
  if (fd_ >= 0) {
    ::close(fd_);
    fd_ = -1;
  }
}

struct MiniBroker::Session {
  TcpSocket socket;
  std::thread thread;
  std::mutex write_mutex;
  std::mutex sub_mutex;
  std::vector<std::string> filters;
  std::atomic<bool> open{true};

  bool subscribed_to(const std::string& topic) {
    std::lock_guard<std::mutex> lock(sub_mutex);
    for (const auto& filter : filters) {
      if (topic_matches(filter, topic)) return true;
    }
    return false;
  }

  void deliver(const std::string& bytes) {
    std::lock_guard<std::mutex> lock(write_mutex);
    if (open.load() && !socket.send_all(bytes)) open.store(false);
  }
};

MiniBroker::MiniBroker(DiagnosticLog* log) : log_(log) {}

MiniBroker::~MiniBroker() { stop(); }

std::uint16_t MiniBroker::start(const std::string& host, std::uint16_t port) {
  listener_.listen(host, port);
  running_.store(true);
  accept_thread_ = std::thread([this] { accept_loop(); });
  return listener_.port();
}

void MiniBroker::stop() {
  if (!running_.exchange(false)) return;
  listener_.close();
  if (accept_thread_.joinable()) accept_thread_.join();
  std::vector<std::shared_ptr<Session>> sessions;
  {
    std::lock_guard<std::mutex> lock(mutex_);
    sessions.swap(sessions_);
  }
  for (auto& session : sessions) {
    session->open.store(false);
    session->socket.shutdown_both();
    if (session->thread.joinable()) session->thread.join();
  }
}

void MiniBroker::accept_loop() {
  while (running_.load()) {
    TcpSocket client = listener_.accept(100);
    if (!client.valid()) continue;
    auto session = std::make_shared<Session>();
    session->socket = std::move(client);
    {
      std::lock_guard<std::mutex> lock(mutex_);
      sessions_.push_back(session);
    }
    session->thread = std::thread([this, session] { session_loop(session); });
  }
}

void MiniBroker::session_loop(std::shared_ptr<Session> session) {
  std::string buffer;
  bool connected = false;
  while (running_.load() && session->open.load()) {
    std::optional<Packet> packet;
    try {
      packet = read_packet(buffer);
    } catch (const MqttError&) {
      break;  // Unframeable stream; drop the connection.
    }
    if (!packet.has_value()) {
      int n = session->socket.recv_some(buffer, 100);
      if (n < 0) break;
      continue;
    }
    try {
      switch (packet->type()) {
        case PacketType::kConnect: {
          parse_connect(*packet);
          connected = true;
          session->deliver(encode_connack(false, 0));
          break;
        }
        case PacketType::kSubscribe: {
          if (!connected) throw MqttError(MqttError::Kind::kProtocol,
                                          "SUBSCRIBE before CONNECT");
          SubscribeData sub = parse_subscribe(*packet);
          {
            std::lock_guard<std::mutex> lock(session->sub_mutex);
            session->filters.push_back(sub.topic_filter);
          }
          session->deliver(encode_suback(sub.packet_id, 0));
          break;
        }
        case PacketType::kPublish: {
          if (!connected) throw MqttError(MqttError::Kind::kProtocol,
                                          "PUBLISH before CONNECT");
          PublishData pub = parse_publish(*packet);
          route(pub.topic, pub.payload);
          break;
        }
        case PacketType::kPingreq:
          session->deliver(encode_pingresp());
          break;
        case PacketType::kDisconnect:
          session->open.store(false);
          break;
        default:
          throw MqttError(MqttError::Kind::kProtocol, "unsupported packet");
      }
    } catch (const MqttError& e) {
      if (log_ != nullptr) {
        log_->warn("mqtt.broker.protocol", e.what());
      }
      break;
    }
  }
  session->open.store(false);
  session->socket.close();
}

void MiniBroker::route(const std::string& topic, const std::string& payload) {
  std::vector<std::shared_ptr<Session>> sessions;
  {
    std::lock_guard<std::mutex> lock(mutex_);
    sessions = sessions_;
  }
  std::string bytes = encode_publish(topic, payload);
  for (auto& session : sessions) {
    if (session->open.load() && session->subscribed_to(topic)) {
      session->deliver(bytes);
    }
  }
}

}  // namespace cma::bus::mqtt
