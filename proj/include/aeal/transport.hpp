#pragma once

#include "aeal/error.hpp"
#include "aeal/wire.hpp"

#include <arpa/inet.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <chrono>
#include <condition_variable>
#include <cstring>
#include <deque>
#include <memory>
#include <mutex>
#include <string>
#include <thread>
#include <utility>
#include <vector>

namespace aeal {

struct TranscriptEntry {
  bool sent = false;  // true: this endpoint sent it; false: received
  std::string line;
};

using Transcript = std::vector<TranscriptEntry>;

/// Ordered, reliable, blocking message pipe between the two agents. Every
/// message crosses as one encoded JSON line, whatever the backing transport,
/// so byte counts and transcripts are identical in-process and over sockets.
class Channel {
 public:
  virtual ~Channel() = default;

  void send(const Message& m) {
    std::string line = encode(m);
    write_line(line);
    bytes_sent_ += line.size() + 1;
    if (std::holds_alternative<msg::Offset>(m)) ++offsets_;
    log_.push_back({true, std::move(line)});
  }

  Message recv() {
    std::string line = read_line();
    bytes_received_ += line.size() + 1;
    Message m = decode(line);
    if (std::holds_alternative<msg::Offset>(m)) ++offsets_;
    log_.push_back({false, std::move(line)});
    if (const auto* a = std::get_if<msg::Abort>(&m)) fail(Errc::ProtocolError, "peer aborted: " + a->reason);
    return m;
  }

  /// Receives and insists on a specific variant.
  template <typename T>
  T expect() {
    Message m = recv();
    if (auto* v = std::get_if<T>(&m)) return std::move(*v);
    const std::string got(message_type(m));
    fail(Errc::ProtocolError, "unexpected message '" + got + "'");
  }

  /// Best effort: tells the peer why this side is giving up.
  void abort(const std::string& reason) noexcept {
    try {
      send(msg::Abort{reason});
    } catch (...) {
    }
  }

  virtual void close() noexcept {}

  const Transcript& transcript() const { return log_; }
  std::size_t bytes_sent() const { return bytes_sent_; }
  std::size_t bytes_received() const { return bytes_received_; }
  std::size_t bytes_total() const { return bytes_sent_ + bytes_received_; }
  std::size_t offsets_seen() const { return offsets_; }

 protected:
  virtual void write_line(const std::string& line) = 0;
  virtual std::string read_line() = 0;

 private:
  Transcript log_;
  std::size_t bytes_sent_ = 0;
  std::size_t bytes_received_ = 0;
  std::size_t offsets_ = 0;
};

namespace detail {

struct LineQueue {
  std::mutex mu;
  std::condition_variable cv;
  std::deque<std::string> lines;
  bool closed = false;
};

}  // namespace detail

/// One end of an in-process pipe; create both ends with memory_pair().
class MemoryChannel : public Channel {
 public:
  MemoryChannel(std::shared_ptr<detail::LineQueue> in, std::shared_ptr<detail::LineQueue> out)
      : in_(std::move(in)), out_(std::move(out)) {}

  ~MemoryChannel() override { close(); }

  void close() noexcept override {
    for (auto* q : {in_.get(), out_.get()}) {
      std::lock_guard lock(q->mu);
      q->closed = true;
      q->cv.notify_all();
    }
  }

 protected:
  void write_line(const std::string& line) override {
    std::lock_guard lock(out_->mu);
    if (out_->closed) fail(Errc::TransportFailure, "in-process channel closed");
    out_->lines.push_back(line);
    out_->cv.notify_one();
  }

  std::string read_line() override {
    std::unique_lock lock(in_->mu);
    in_->cv.wait(lock, [&] { return !in_->lines.empty() || in_->closed; });
    if (in_->lines.empty()) fail(Errc::TransportFailure, "in-process channel closed by peer");
    std::string line = std::move(in_->lines.front());
    in_->lines.pop_front();
    return line;
  }

 private:
  std::shared_ptr<detail::LineQueue> in_;
  std::shared_ptr<detail::LineQueue> out_;
};

inline std::pair<std::unique_ptr<MemoryChannel>, std::unique_ptr<MemoryChannel>> memory_pair() {
  auto ab = std::make_shared<detail::LineQueue>();
  auto ba = std::make_shared<detail::LineQueue>();
  return {std::make_unique<MemoryChannel>(ba, ab), std::make_unique<MemoryChannel>(ab, ba)};
}

/// Plays back the received half of a recorded transcript. Sent messages are
/// compared with the recording; any divergence is a ProtocolError.
class ReplayChannel : public Channel {
 public:
  explicit ReplayChannel(Transcript recording, bool check_sent = true)
      : rec_(std::move(recording)), check_sent_(check_sent) {}

 protected:
  void write_line(const std::string& line) override {
    const TranscriptEntry* e = next(true);
    if (check_sent_ && (!e || e->line != line)) fail(Errc::ProtocolError, "replay diverged from the recorded transcript");
  }

  std::string read_line() override {
    const TranscriptEntry* e = next(false);
    if (!e) fail(Errc::TransportFailure, "replay transcript exhausted");
    return e->line;
  }

 private:
  const TranscriptEntry* next(bool sent) {
    auto& pos = sent ? sent_pos_ : recv_pos_;
    while (pos < rec_.size() && rec_[pos].sent != sent) ++pos;
    return pos < rec_.size() ? &rec_[pos++] : nullptr;
  }

  Transcript rec_;
  bool check_sent_;
  std::size_t sent_pos_ = 0;
  std::size_t recv_pos_ = 0;
};

/// Newline-delimited JSON over a connected TCP socket.
class TcpChannel : public Channel {
 public:
  explicit TcpChannel(int fd) : fd_(fd) {
    int one = 1;
    ::setsockopt(fd_, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
  }
  TcpChannel(const TcpChannel&) = delete;
  TcpChannel& operator=(const TcpChannel&) = delete;
  ~TcpChannel() override { close(); }

  void close() noexcept override {
    if (fd_ >= 0) {
      ::shutdown(fd_, SHUT_RDWR);
      ::close(fd_);
      fd_ = -1;
    }
  }

 protected:
  void write_line(const std::string& line) override {
    std::string buf = line + '\n';
    std::size_t off = 0;
    while (off < buf.size()) {
      const ssize_t k = ::send(fd_, buf.data() + off, buf.size() - off, MSG_NOSIGNAL);
      if (k < 0 && errno == EINTR) continue;
      if (k <= 0) fail(Errc::TransportFailure, std::string("send failed: ") + std::strerror(errno));
      off += static_cast<std::size_t>(k);
    }
  }

  std::string read_line() override {
    for (;;) {
      if (const auto nl = buf_.find('\n', scan_); nl != std::string::npos) {
        std::string line = buf_.substr(0, nl);
        buf_.erase(0, nl + 1);
        scan_ = 0;
        return line;
      }
      scan_ = buf_.size();
      char chunk[65536];
      const ssize_t k = ::recv(fd_, chunk, sizeof(chunk), 0);
      if (k < 0 && errno == EINTR) continue;
      if (k < 0) fail(Errc::TransportFailure, std::string("recv failed: ") + std::strerror(errno));
      if (k == 0) fail(Errc::TransportFailure, "connection closed by peer");
      buf_.append(chunk, static_cast<std::size_t>(k));
    }
  }

 private:
  int fd_;
  std::string buf_;
  std::size_t scan_ = 0;
};

namespace detail {

inline std::pair<std::string, std::string> split_host_port(const std::string& hp) {
  const auto colon = hp.rfind(':');
  require(colon != std::string::npos && colon + 1 < hp.size(), Errc::InvalidArgument,
          "expected host:port, got '" + hp + "'");
  return {hp.substr(0, colon), hp.substr(colon + 1)};
}

inline addrinfo* resolve(const std::string& host, const std::string& port, bool passive) {
  addrinfo hints{};
  hints.ai_family = AF_INET;
  hints.ai_socktype = SOCK_STREAM;
  if (passive) hints.ai_flags = AI_PASSIVE;
  addrinfo* res = nullptr;
  const int rc = ::getaddrinfo(host.empty() ? nullptr : host.c_str(), port.c_str(), &hints, &res);
  if (rc != 0) fail(Errc::TransportFailure, "cannot resolve '" + host + ":" + port + "': " + ::gai_strerror(rc));
  return res;
}

}  // namespace detail

/// Listening socket; port 0 picks a free port, readable through port().
class TcpListener {
 public:
  explicit TcpListener(const std::string& host_port) {
    const auto [host, port] = detail::split_host_port(host_port);
    addrinfo* res = detail::resolve(host, port, true);
    fd_ = ::socket(res->ai_family, res->ai_socktype, res->ai_protocol);
    if (fd_ < 0) {
      ::freeaddrinfo(res);
      fail(Errc::TransportFailure, "socket() failed");
    }
    int one = 1;
    ::setsockopt(fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));
    const int rc = ::bind(fd_, res->ai_addr, res->ai_addrlen);
    ::freeaddrinfo(res);
    if (rc != 0 || ::listen(fd_, 1) != 0) {
      const std::string why = std::strerror(errno);
      ::close(fd_);
      fail(Errc::TransportFailure, "cannot listen on " + host_port + ": " + why);
    }
  }
  TcpListener(const TcpListener&) = delete;
  TcpListener& operator=(const TcpListener&) = delete;
  ~TcpListener() {
    if (fd_ >= 0) ::close(fd_);
  }

  int port() const {
    sockaddr_in addr{};
    socklen_t len = sizeof(addr);
    ::getsockname(fd_, reinterpret_cast<sockaddr*>(&addr), &len);
    return ntohs(addr.sin_port);
  }

  std::unique_ptr<TcpChannel> accept() {
    for (;;) {
      const int c = ::accept(fd_, nullptr, nullptr);
      if (c >= 0) return std::make_unique<TcpChannel>(c);
      if (errno != EINTR) fail(Errc::TransportFailure, std::string("accept failed: ") + std::strerror(errno));
    }
  }

 private:
  int fd_ = -1;
};

/// Connects, retrying until `timeout` so the two agents may start in any order.
inline std::unique_ptr<TcpChannel> tcp_connect(const std::string& host_port,
                                               std::chrono::milliseconds timeout = std::chrono::seconds(30)) {
  const auto [host, port] = detail::split_host_port(host_port);
  const auto deadline = std::chrono::steady_clock::now() + timeout;
  for (;;) {
    addrinfo* res = detail::resolve(host, port, false);
    const int fd = ::socket(res->ai_family, res->ai_socktype, res->ai_protocol);
    const int rc = fd >= 0 ? ::connect(fd, res->ai_addr, res->ai_addrlen) : -1;
    ::freeaddrinfo(res);
    if (rc == 0) return std::make_unique<TcpChannel>(fd);
    if (fd >= 0) ::close(fd);
    if (std::chrono::steady_clock::now() > deadline)
      fail(Errc::TransportFailure, "cannot connect to " + host_port + ": " + std::strerror(errno));
    std::this_thread::sleep_for(std::chrono::milliseconds(50));
  }
}

}  // namespace aeal
