#pragma once

#include <atomic>
#include <cstdint>
#include <functional>
#include <list>
#include <mutex>
#include <string>
#include <string_view>
#include <thread>

#include "petastore/core/bytes.h"
#include "petastore/core/result.h"

namespace petastore::net {

// Handles one connection: each request line (without the newline) maps to
// the exact bytes written back, newline included.
using LineHandler = std::function<std::string(std::string_view line)>;
// Called once per accepted connection with the peer's "host:port".
using HandlerFactory = std::function<LineHandler(const std::string& peer)>;

// TCP server for the line protocols: one thread per connection.
class LineServer {
 public:
  explicit LineServer(HandlerFactory factory) : factory_(std::move(factory)) {}
  ~LineServer() { stop(); }
  LineServer(const LineServer&) = delete;
  LineServer& operator=(const LineServer&) = delete;

  // Port 0 picks a free port. Returns the bound port.
  Result<std::uint16_t> start(const std::string& host, std::uint16_t port);
  void stop();
  std::uint16_t port() const { return port_; }

 private:
  void accept_loop();
  void serve(int fd, std::string peer);

  HandlerFactory factory_;
  int listen_fd_ = -1;
  std::uint16_t port_ = 0;
  std::atomic<bool> running_{false};
  std::thread acceptor_;
  std::mutex mu_;
  std::list<int> conns_;
  std::list<std::thread> workers_;
};

// Blocking client side of a line protocol connection.
class LineClient {
 public:
  LineClient() = default;
  ~LineClient() { close(); }
  LineClient(const LineClient&) = delete;
  LineClient& operator=(const LineClient&) = delete;

  Status connect(const std::string& host, std::uint16_t port);
  // Sends `line` plus a newline and returns the reply line without it.
  Result<std::string> request(std::string_view line);
  // Reads exactly n bytes following a reply line.
  Result<Bytes> read_exact(std::size_t n);
  void close();

 private:
  Status send_all(std::string_view data);
  Result<std::string> read_line();

  int fd_ = -1;
  std::string buf_;
};

// Splits "host:port".
Result<std::pair<std::string, std::uint16_t>> split_address(std::string_view address);

}  // namespace petastore::net
