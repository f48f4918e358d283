#pragma once

#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

namespace halfsync::collective {

using Clock = std::chrono::steady_clock;

/// A serialized WireMessage plus delivery metadata.
struct Envelope {
  int source = -1;
  std::vector<std::uint8_t> bytes;
  /// Sender's virtual clock at send time; NaN when the transport has none.
  double send_time_ms = 0.0;
};

/// Point-to-point byte transport between the ranks of one job.
///
/// Messages between a given pair of ranks are delivered in order. Receives
/// return nullopt when `deadline` passes and throw CommError once the
/// transport has been aborted or the peer is gone.
class Transport {
 public:
  virtual ~Transport() = default;
  virtual int rank() const = 0;
  virtual int size() const = 0;
  virtual void send(int dest, std::vector<std::uint8_t> bytes, double send_time_ms) = 0;
  virtual std::optional<Envelope> recv(int source, Clock::time_point deadline) = 0;
  virtual std::optional<Envelope> recv_any(Clock::time_point deadline) = 0;
  /// True when envelopes carry the sender's virtual time.
  virtual bool carries_virtual_time() const = 0;
};

/// Shared mailboxes for ranks running as threads of one process.
class InProcessHub {
 public:
  explicit InProcessHub(int size);

  int size() const { return static_cast<int>(boxes_.size()); }
  void post(int dest, Envelope env);
  std::optional<Envelope> take(int dest, int source, Clock::time_point deadline);
  /// Wakes every waiter; all later receives throw.
  void abort(const std::string& reason);
  bool aborted() const;

 private:
  struct Mailbox {
    std::deque<Envelope> queue;
  };
  mutable std::mutex mutex_;
  std::condition_variable cv_;
  std::vector<Mailbox> boxes_;
  bool aborted_ = false;
  std::string reason_;
};

class InProcessTransport final : public Transport {
 public:
  InProcessTransport(std::shared_ptr<InProcessHub> hub, int rank);

  int rank() const override { return rank_; }
  int size() const override { return hub_->size(); }
  void send(int dest, std::vector<std::uint8_t> bytes, double send_time_ms) override;
  std::optional<Envelope> recv(int source, Clock::time_point deadline) override;
  std::optional<Envelope> recv_any(Clock::time_point deadline) override;
  bool carries_virtual_time() const override { return true; }

 private:
  std::shared_ptr<InProcessHub> hub_;
  int rank_;
};

/// Full TCP mesh between OS processes.
///
/// Frames are an 8-byte little-endian length and the sender's clock as
/// little-endian binary64, followed by the serialized WireMessage. Rank r listens on endpoints[r], accepts connections from
/// higher ranks and dials lower ones; each dialer announces its rank first.
class SocketTransport final : public Transport {
 public:
  SocketTransport(int rank, std::vector<std::string> endpoints, std::chrono::milliseconds connect_timeout);
  ~SocketTransport() override;
  SocketTransport(const SocketTransport&) = delete;
  SocketTransport& operator=(const SocketTransport&) = delete;

  int rank() const override { return rank_; }
  int size() const override { return static_cast<int>(peers_.size()); }
  void send(int dest, std::vector<std::uint8_t> bytes, double send_time_ms) override;
  std::optional<Envelope> recv(int source, Clock::time_point deadline) override;
  std::optional<Envelope> recv_any(Clock::time_point deadline) override;
  bool carries_virtual_time() const override { return true; }

 private:
  bool wait_readable(int fd, Clock::time_point deadline);
  Envelope read_frame(int source);

  int rank_;
  std::vector<int> peers_;  // socket per rank, -1 for self
};

/// "host:port" split; throws ConfigError on a malformed endpoint.
std::pair<std::string, std::uint16_t> split_endpoint(const std::string& endpoint);

/// One endpoint per non-empty, non-comment line, in rank order.
std::vector<std::string> read_rendezvous_file(const std::string& path);

}  // namespace halfsync::collective
