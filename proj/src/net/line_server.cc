#include "petastore/net/line_server.h"

#include <arpa/inet.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>

namespace petastore::net {
namespace {

Error sys_error(const std::string& what) {
  return Error(ErrorCode::kIoError, what + ": " + std::strerror(errno));
}

}  // namespace

Result<std::pair<std::string, std::uint16_t>> split_address(std::string_view address) {
  const auto colon = address.rfind(':');
  if (colon == std::string_view::npos || colon == 0) {
    return Error(ErrorCode::kInvalidArgument, "expected host:port");
  }
  const std::string port_text(address.substr(colon + 1));
  char* end = nullptr;
  const unsigned long port = std::strtoul(port_text.c_str(), &end, 10);
  if (port_text.empty() || *end != '\0' || port > 65535) {
    return Error(ErrorCode::kInvalidArgument, "bad port in " + std::string(address));
  }
  return std::make_pair(std::string(address.substr(0, colon)), static_cast<std::uint16_t>(port));
}

Result<std::uint16_t> LineServer::start(const std::string& host, std::uint16_t port) {
  if (running_) return Error(ErrorCode::kInvalidArgument, "already started");
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_port = htons(port);
  if (inet_pton(AF_INET, host.c_str(), &addr.sin_addr) != 1) {
    return Error(ErrorCode::kInvalidArgument, "bad IPv4 address " + host);
  }
  listen_fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
  if (listen_fd_ < 0) return sys_error("socket");
  const int one = 1;
  ::setsockopt(listen_fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
  if (::bind(listen_fd_, reinterpret_cast<sockaddr*>(&addr), sizeof addr) != 0 ||
      ::listen(listen_fd_, 64) != 0) {
    auto err = sys_error("bind/listen");
    ::close(listen_fd_);
    listen_fd_ = -1;
    return err;
  }
  socklen_t len = sizeof addr;
  ::getsockname(listen_fd_, reinterpret_cast<sockaddr*>(&addr), &len);
  port_ = ntohs(addr.sin_port);
  running_ = true;
  acceptor_ = std::thread([this] { accept_loop(); });
  return port_;
}

void LineServer::accept_loop() {
  while (running_) {
    sockaddr_in peer{};
    socklen_t len = sizeof peer;
    const int fd = ::accept(listen_fd_, reinterpret_cast<sockaddr*>(&peer), &len);
    if (fd < 0) {
      if (errno == EINTR) continue;
      return;
    }
    const int one = 1;
    ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
    char host[INET_ADDRSTRLEN] = {};
    ::inet_ntop(AF_INET, &peer.sin_addr, host, sizeof host);
    std::string name = std::string(host) + ":" + std::to_string(ntohs(peer.sin_port));
    std::lock_guard lk(mu_);
    if (!running_) {
      ::close(fd);
      return;
    }
    conns_.push_back(fd);
    workers_.emplace_back([this, fd, name] { serve(fd, name); });
  }
}

void LineServer::serve(int fd, std::string peer) {
  LineHandler handler = factory_(peer);
  std::string buf;
  char chunk[4096];
  for (;;) {
    const ssize_t n = ::recv(fd, chunk, sizeof chunk, 0);
    if (n <= 0) break;
    buf.append(chunk, static_cast<std::size_t>(n));
    std::size_t nl;
    bool ok = true;
    while (ok && (nl = buf.find('\n')) != std::string::npos) {
      std::string line = buf.substr(0, nl);
      buf.erase(0, nl + 1);
      if (!line.empty() && line.back() == '\r') line.pop_back();
      const std::string reply = handler(line);
      std::size_t sent = 0;
      while (sent < reply.size()) {
        const ssize_t w = ::send(fd, reply.data() + sent, reply.size() - sent, MSG_NOSIGNAL);
        if (w <= 0) {
          ok = false;
          break;
        }
        sent += static_cast<std::size_t>(w);
      }
    }
    if (!ok) break;
  }
  std::lock_guard lk(mu_);
  for (auto it = conns_.begin(); it != conns_.end(); ++it) {
    if (*it == fd) {
      conns_.erase(it);
      ::close(fd);
      break;
    }
  }
}

void LineServer::stop() {
  if (!running_.exchange(false)) return;
  ::shutdown(listen_fd_, SHUT_RDWR);
  ::close(listen_fd_);
  listen_fd_ = -1;
  if (acceptor_.joinable()) acceptor_.join();
  std::list<std::thread> workers;
  {
    std::lock_guard lk(mu_);
    for (int fd : conns_) ::shutdown(fd, SHUT_RDWR);
    workers.swap(workers_);
  }
  for (auto& t : workers) t.join();
}

Status LineClient::connect(const std::string& host, std::uint16_t port) {
  close();
  addrinfo hints{};
  hints.ai_family = AF_INET;
  hints.ai_socktype = SOCK_STREAM;
  addrinfo* res = nullptr;
  if (::getaddrinfo(host.c_str(), std::to_string(port).c_str(), &hints, &res) != 0 || !res) {
    return Error(ErrorCode::kIoError, "cannot resolve " + host);
  }
  fd_ = ::socket(res->ai_family, res->ai_socktype, res->ai_protocol);
  const bool ok = fd_ >= 0 && ::connect(fd_, res->ai_addr, res->ai_addrlen) == 0;
  ::freeaddrinfo(res);
  if (!ok) {
    auto err = sys_error("connect " + host + ":" + std::to_string(port));
    close();
    return err;
  }
  const int one = 1;
  ::setsockopt(fd_, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
  return Status::OK();
}

void LineClient::close() {
  if (fd_ >= 0) ::close(fd_);
  fd_ = -1;
  buf_.clear();
}

Status LineClient::send_all(std::string_view data) {
  if (fd_ < 0) return Error(ErrorCode::kIoError, "not connected");
  std::size_t sent = 0;
  while (sent < data.size()) {
    const ssize_t w = ::send(fd_, data.data() + sent, data.size() - sent, MSG_NOSIGNAL);
    if (w <= 0) return sys_error("send");
    sent += static_cast<std::size_t>(w);
  }
  return Status::OK();
}

Result<std::string> LineClient::read_line() {
  std::size_t nl;
  while ((nl = buf_.find('\n')) == std::string::npos) {
    char chunk[4096];
    const ssize_t n = ::recv(fd_, chunk, sizeof chunk, 0);
    if (n <= 0) return Error(ErrorCode::kIoError, "connection closed");
    buf_.append(chunk, static_cast<std::size_t>(n));
  }
  std::string line = buf_.substr(0, nl);
  buf_.erase(0, nl + 1);
  return line;
}

Result<std::string> LineClient::request(std::string_view line) {
  std::string msg(line);
  msg += '\n';
  PETASTORE_RETURN_IF_ERROR(send_all(msg));
  return read_line();
}

Result<Bytes> LineClient::read_exact(std::size_t n) {
  while (buf_.size() < n) {
    char chunk[4096];
    const ssize_t r = ::recv(fd_, chunk, sizeof chunk, 0);
    if (r <= 0) return Error(ErrorCode::kIoError, "connection closed");
    buf_.append(chunk, static_cast<std::size_t>(r));
  }
  Bytes out(buf_.begin(), buf_.begin() + static_cast<std::ptrdiff_t>(n));
  buf_.erase(0, n);
  return out;
}

}  // namespace petastore::net
