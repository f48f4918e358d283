#include <algorithm>
#include <string>

#include "halfsync/collective/transport.hpp"
#include "halfsync/errors.hpp"

namespace halfsync::collective {

InProcessHub::InProcessHub(int size) : boxes_(static_cast<std::size_t>(size)) {
  if (size < 1) {
    throw ConfigError("in-process hub needs at least one rank");
  }
}

void InProcessHub::post(int dest, Envelope env) {
  {
    std::lock_guard lock(mutex_);
    if (aborted_) return;
    boxes_.at(static_cast<std::size_t>(dest)).queue.push_back(std::move(env));
  }
  cv_.notify_all();
}

std::optional<Envelope> InProcessHub::take(int dest, int source, Clock::time_point deadline) {
  std::unique_lock lock(mutex_);
  auto& queue = boxes_.at(static_cast<std::size_t>(dest)).queue;
  for (;;) {
    if (aborted_) {
      throw CommError(dest, "transport aborted: " + reason_);
    }
    auto it = source < 0 ? queue.begin()
                         : std::find_if(queue.begin(), queue.end(),
                                        [source](const Envelope& e) { return e.source == source; });
    if (it != queue.end()) {
      Envelope env = std::move(*it);
      queue.erase(it);
      return env;
    }
    if (cv_.wait_until(lock, deadline) == std::cv_status::timeout && Clock::now() >= deadline) {
      return std::nullopt;
    }
  }
}

void InProcessHub::abort(const std::string& reason) {
  {
    std::lock_guard lock(mutex_);
    if (aborted_) return;
    aborted_ = true;
    reason_ = reason;
  }
  cv_.notify_all();
}

bool InProcessHub::aborted() const {
  std::lock_guard lock(mutex_);
  return aborted_;
}

InProcessTransport::InProcessTransport(std::shared_ptr<InProcessHub> hub, int rank)
    : hub_(std::move(hub)), rank_(rank) {
  if (rank < 0 || rank >= hub_->size()) {
    throw ConfigError("rank " + std::to_string(rank) + " outside hub of size " + std::to_string(hub_->size()));
  }
}

void InProcessTransport::send(int dest, std::vector<std::uint8_t> bytes, double send_time_ms) {
  if (dest < 0 || dest >= size()) {
    throw CommError(rank_, "send to invalid rank " + std::to_string(dest));
  }
  hub_->post(dest, Envelope{rank_, std::move(bytes), send_time_ms});
}

std::optional<Envelope> InProcessTransport::recv(int source, Clock::time_point deadline) {
  return hub_->take(rank_, source, deadline);
}

std::optional<Envelope> InProcessTransport::recv_any(Clock::time_point deadline) {
  return hub_->take(rank_, -1, deadline);
}

}  // namespace halfsync::collective
