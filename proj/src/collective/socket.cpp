#include <arpa/inet.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <bit>
#include <cerrno>
#include <cmath>
#include <cstring>
#include <fstream>
#include <string>
#include <thread>

#include "halfsync/collective/transport.hpp"
#include "halfsync/errors.hpp"

namespace halfsync::collective {

namespace {

std::string errno_text() { return std::strerror(errno); }

void write_all(int rank, int fd, const std::uint8_t* data, std::size_t n) {
  while (n > 0) {
    const ssize_t w = ::send(fd, data, n, MSG_NOSIGNAL);
    if (w < 0) {
      if (errno == EINTR) continue;
      throw CommError(rank, "socket send failed: " + errno_text());
    }
    data += w;
    n -= static_cast<std::size_t>(w);
  }
}

void read_all(int rank, int peer, int fd, std::uint8_t* data, std::size_t n) {
  while (n > 0) {
    const ssize_t r = ::recv(fd, data, n, 0);
    if (r == 0) {
      throw CommError(rank, "connection to rank " + std::to_string(peer) + " closed");
    }
    if (r < 0) {
      if (errno == EINTR) continue;
      throw CommError(rank, "socket recv from rank " + std::to_string(peer) + " failed: " + errno_text());
    }
    data += r;
    n -= static_cast<std::size_t>(r);
  }
}

sockaddr_in resolve(int rank, const std::string& endpoint) {
  const auto [host, port] = split_endpoint(endpoint);
  addrinfo hints{};
  hints.ai_family = AF_INET;
  hints.ai_socktype = SOCK_STREAM;
  addrinfo* res = nullptr;
  if (::getaddrinfo(host.c_str(), nullptr, &hints, &res) != 0 || res == nullptr) {
    throw CommError(rank, "cannot resolve host '" + host + "'");
  }
  sockaddr_in addr{};
  std::memcpy(&addr, res->ai_addr, sizeof(addr));
  ::freeaddrinfo(res);
  addr.sin_port = htons(port);
  return addr;
}

void tune(int fd) {
  int one = 1;
  ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
}

}  // namespace

std::pair<std::string, std::uint16_t> split_endpoint(const std::string& endpoint) {
  const auto colon = endpoint.rfind(':');
  if (colon == std::string::npos || colon == 0 || colon + 1 == endpoint.size()) {
    throw ConfigError("endpoint '" + endpoint + "' is not host:port");
  }
  const std::string port_text = endpoint.substr(colon + 1);
  std::size_t used = 0;
  unsigned long port = 0;
  try {
    port = std::stoul(port_text, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != port_text.size() || port == 0 || port > 65535) {
    throw ConfigError("endpoint '" + endpoint + "' has an invalid port");
  }
  return {endpoint.substr(0, colon), static_cast<std::uint16_t>(port)};
}

std::vector<std::string> read_rendezvous_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw ConfigError("cannot open rendezvous file '" + path + "'");
  }
  std::vector<std::string> endpoints;
  std::string line;
  while (std::getline(in, line)) {
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    const auto b = line.find_first_not_of(" \t\r");
    if (b == std::string::npos) continue;
    const auto e = line.find_last_not_of(" \t\r");
    endpoints.push_back(line.substr(b, e - b + 1));
    split_endpoint(endpoints.back());
  }
  if (endpoints.empty()) {
    throw ConfigError("rendezvous file '" + path + "' lists no endpoints");
  }
  return endpoints;
}

SocketTransport::SocketTransport(int rank, std::vector<std::string> endpoints,
                                 std::chrono::milliseconds connect_timeout)
    : rank_(rank), peers_(endpoints.size(), -1) {
  const int n = static_cast<int>(endpoints.size());
  if (rank < 0 || rank >= n) {
    throw ConfigError("rank " + std::to_string(rank) + " outside rendezvous list of " + std::to_string(n));
  }
  const auto deadline = Clock::now() + connect_timeout;
  int listener = -1;
  try {
    if (rank < n - 1) {
      listener = ::socket(AF_INET, SOCK_STREAM, 0);
      if (listener < 0) throw CommError(rank, "socket() failed: " + errno_text());
      int one = 1;
      ::setsockopt(listener, SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));
      sockaddr_in addr = resolve(rank, endpoints[static_cast<std::size_t>(rank)]);
      if (::bind(listener, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) != 0) {
        throw CommError(rank, "bind to " + endpoints[static_cast<std::size_t>(rank)] + " failed: " + errno_text());
      }
      if (::listen(listener, n) != 0) throw CommError(rank, "listen failed: " + errno_text());
    }
    for (int peer = 0; peer < rank; ++peer) {
      const sockaddr_in addr = resolve(rank, endpoints[static_cast<std::size_t>(peer)]);
      for (;;) {
        const int fd = ::socket(AF_INET, SOCK_STREAM, 0);
        if (fd < 0) throw CommError(rank, "socket() failed: " + errno_text());
        if (::connect(fd, reinterpret_cast<const sockaddr*>(&addr), sizeof(addr)) == 0) {
          tune(fd);
          peers_[static_cast<std::size_t>(peer)] = fd;
          std::uint8_t hello[4];
          for (int i = 0; i < 4; ++i) hello[i] = static_cast<std::uint8_t>(static_cast<std::uint32_t>(rank) >> (8 * i));
          write_all(rank, fd, hello, 4);
          break;
        }
        ::close(fd);
        if (Clock::now() >= deadline) {
          throw CommError(rank, "could not connect to rank " + std::to_string(peer) + " at " +
                                    endpoints[static_cast<std::size_t>(peer)]);
        }
        std::this_thread::sleep_for(std::chrono::milliseconds(20));
      }
    }
    for (int accepted = 0; accepted < n - 1 - rank; ++accepted) {
      if (!wait_readable(listener, deadline)) {
        throw CommError(rank, "timed out waiting for higher ranks to connect");
      }
      const int fd = ::accept(listener, nullptr, nullptr);
      if (fd < 0) throw CommError(rank, "accept failed: " + errno_text());
      tune(fd);
      std::uint8_t hello[4];
      read_all(rank, -1, fd, hello, 4);
      const std::uint32_t peer = hello[0] | (hello[1] << 8) | (hello[2] << 16) | (static_cast<std::uint32_t>(hello[3]) << 24);
      if (peer <= static_cast<std::uint32_t>(rank) || peer >= static_cast<std::uint32_t>(n) ||
          peers_[peer] != -1) {
        ::close(fd);
        throw CommError(rank, "unexpected handshake from rank " + std::to_string(peer));
      }
      peers_[peer] = fd;
    }
  } catch (...) {
    if (listener >= 0) ::close(listener);
    for (int fd : peers_) {
      if (fd >= 0) ::close(fd);
    }
    throw;
  }
  if (listener >= 0) ::close(listener);
}

SocketTransport::~SocketTransport() {
  for (int fd : peers_) {
    if (fd >= 0) ::close(fd);
  }
}

bool SocketTransport::wait_readable(int fd, Clock::time_point deadline) {
  for (;;) {
    const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - Clock::now()).count();
    if (left <= 0) return false;
    pollfd p{fd, POLLIN, 0};
    const int rc = ::poll(&p, 1, static_cast<int>(std::min<long long>(left, 1000)));
    if (rc > 0) return true;
    if (rc < 0 && errno != EINTR) throw CommError(rank_, "poll failed: " + errno_text());
  }
}

void SocketTransport::send(int dest, std::vector<std::uint8_t> bytes, double send_time_ms) {
  if (dest < 0 || dest >= size() || dest == rank_) {
    throw CommError(rank_, "send to invalid rank " + std::to_string(dest));
  }
  std::uint8_t head[16];
  const std::uint64_t n = bytes.size();
  const auto t = std::bit_cast<std::uint64_t>(send_time_ms);
  for (int i = 0; i < 8; ++i) {
    head[i] = static_cast<std::uint8_t>(n >> (8 * i));
    head[8 + i] = static_cast<std::uint8_t>(t >> (8 * i));
  }
  const int fd = peers_[static_cast<std::size_t>(dest)];
  write_all(rank_, fd, head, sizeof head);
  write_all(rank_, fd, bytes.data(), bytes.size());
}

Envelope SocketTransport::read_frame(int source) {
  const int fd = peers_[static_cast<std::size_t>(source)];
  std::uint8_t head[16];
  read_all(rank_, source, fd, head, sizeof head);
  std::uint64_t n = 0;
  std::uint64_t t = 0;
  for (int i = 0; i < 8; ++i) {
    n |= static_cast<std::uint64_t>(head[i]) << (8 * i);
    t |= static_cast<std::uint64_t>(head[8 + i]) << (8 * i);
  }
  if (n > (std::uint64_t{1} << 36)) {
    throw CommError(rank_, "frame of " + std::to_string(n) + " bytes from rank " + std::to_string(source));
  }
  Envelope env;
  env.source = source;
  env.bytes.resize(n);
  read_all(rank_, source, fd, env.bytes.data(), n);
  env.send_time_ms = std::bit_cast<double>(t);
  return env;
}

std::optional<Envelope> SocketTransport::recv(int source, Clock::time_point deadline) {
  if (source < 0 || source >= size() || source == rank_) {
    throw CommError(rank_, "receive from invalid rank " + std::to_string(source));
  }
  if (!wait_readable(peers_[static_cast<std::size_t>(source)], deadline)) return std::nullopt;
  return read_frame(source);
}

std::optional<Envelope> SocketTransport::recv_any(Clock::time_point deadline) {
  std::vector<pollfd> fds;
  std::vector<int> owners;
  for (int r = 0; r < size(); ++r) {
    if (r == rank_) continue;
    fds.push_back(pollfd{peers_[static_cast<std::size_t>(r)], POLLIN, 0});
    owners.push_back(r);
  }
  if (fds.empty()) return std::nullopt;
  for (;;) {
    const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - Clock::now()).count();
    if (left <= 0) return std::nullopt;
    const int rc = ::poll(fds.data(), fds.size(), static_cast<int>(std::min<long long>(left, 1000)));
    if (rc < 0 && errno != EINTR) throw CommError(rank_, "poll failed: " + errno_text());
    for (std::size_t i = 0; rc > 0 && i < fds.size(); ++i) {
      if (fds[i].revents != 0) return read_frame(owners[i]);
    }
  }
}

}  // namespace halfsync::collective
