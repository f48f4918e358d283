#include "halfsync/collective/communicator.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <string>
#include <thread>

#include "halfsync/errors.hpp"

namespace halfsync::collective {

using numerics::Precision;

namespace {

constexpr std::uint32_t kReduce = 0;
constexpr std::uint32_t kBroadcast = 1;
constexpr std::uint32_t kGather = 2;
constexpr std::uint32_t kResult = 3;
constexpr std::uint32_t kResultRanks = 4;

std::vector<double> rounded_copy(std::span<const double> values, Precision dtype) {
  std::vector<double> out(values.begin(), values.end());
  for (double& x : out) x = numerics::round_to(x, dtype);
  return out;
}

}  // namespace

CommOptions CommOptions::from_env() {
  CommOptions o;
  if (const char* env = std::getenv("HALFSYNC_TIMEOUT_MS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end == env || *end != '\0' || v <= 0) {
      throw ConfigError(std::string("HALFSYNC_TIMEOUT_MS must be a positive integer, got '") + env + "'");
    }
    o.timeout_ms = v;
  }
  return o;
}

Communicator::Communicator(Transport& transport, CommOptions options)
    : transport_(transport),
      options_(options),
      virtual_(options.virtual_clock && transport.carries_virtual_time()),
      epoch_(Clock::now()) {
  if (!(options_.latency_ms >= 0.0) || !(options_.bandwidth_bytes_per_ms > 0.0) || options_.timeout_ms <= 0) {
    throw ConfigError("communicator needs latency >= 0, bandwidth > 0 and a positive timeout");
  }
}

double Communicator::now_ms() const {
  if (virtual_) return clock_ms_;
  return std::chrono::duration<double, std::milli>(Clock::now() - epoch_).count();
}

void Communicator::advance(double ms) {
  if (virtual_ && ms > 0.0) clock_ms_ += ms;
}

void Communicator::begin() {
  ++seq_;
  timing_ = SyncTiming{};
}

void Communicator::finish(double start_ms) { timing_.elapsed_ms = now_ms() - start_ms; }

void Communicator::send(int dest, const WireMessage& msg) {
  timing_.bytes += msg.payload.size();
  transport_.send(dest, serialize(msg), virtual_ ? clock_ms_ : std::nan(""));
}

Communicator::Received Communicator::admit(Envelope env) {
  Received rec{env.source, {}, 0.0};
  try {
    rec.msg = deserialize(env.bytes);
  } catch (const DataError& e) {
    throw CommError(rank(), "malformed message from rank " + std::to_string(env.source) + ": " + e.what());
  }
  if (virtual_) {
    rec.arrival_ms = env.send_time_ms + options_.latency_ms +
                     static_cast<double>(env.bytes.size()) / options_.bandwidth_bytes_per_ms;
  }
  return rec;
}

Communicator::Received Communicator::expect(int source, std::uint32_t want) {
  auto hit = std::find_if(pending_.begin(), pending_.end(),
                          [&](const Received& r) { return r.source == source && r.msg.tag == want; });
  Received rec;
  if (hit != pending_.end()) {
    rec = std::move(*hit);
    pending_.erase(hit);
  } else {
    const auto deadline = Clock::now() + std::chrono::milliseconds(options_.timeout_ms);
    for (;;) {
      auto env = transport_.recv(source, deadline);
      if (!env) {
        throw CommError(rank(), "timed out after " + std::to_string(options_.timeout_ms) + " ms waiting for rank " +
                                    std::to_string(source));
      }
      Received r = admit(std::move(*env));
      if (r.msg.tag == want) {
        rec = std::move(r);
        break;
      }
      if (stale(r.msg.tag)) {
        ++stale_dropped_;
      } else {
        pending_.push_back(std::move(r));
      }
    }
  }
  if (virtual_) clock_ms_ = std::max(clock_ms_, rec.arrival_ms);
  timing_.bytes += rec.msg.payload.size();
  return rec;
}

std::optional<Communicator::Received> Communicator::expect_any(std::uint32_t want, Clock::time_point deadline) {
  auto hit = std::find_if(pending_.begin(), pending_.end(), [&](const Received& r) { return r.msg.tag == want; });
  if (hit != pending_.end()) {
    Received rec = std::move(*hit);
    pending_.erase(hit);
    return rec;
  }
  for (;;) {
    auto env = transport_.recv_any(deadline);
    if (!env) return std::nullopt;
    Received r = admit(std::move(*env));
    if (r.msg.tag == want) return r;
    if (stale(r.msg.tag)) {
      ++stale_dropped_;
    } else {
      pending_.push_back(std::move(r));
    }
  }
}

void Communicator::check_count(const Received& r, std::size_t expected) const {
  if (r.msg.count != expected) {
    throw CommError(rank(), "length mismatch: local buffer has " + std::to_string(expected) + " elements, rank " +
                                std::to_string(r.source) + " sent " + std::to_string(r.msg.count));
  }
}

void Communicator::broadcast(std::span<double> buffer, Precision dtype, int root) {
  const int n = size();
  if (root < 0 || root >= n) {
    throw CommError(rank(), "broadcast root " + std::to_string(root) + " outside 0.." + std::to_string(n - 1));
  }
  begin();
  const double start = now_ms();
  const int vr = (rank() - root + n) % n;
  WireMessage msg;
  int mask = 1;
  if (vr == 0) {
    msg = pack(tag(kBroadcast), buffer, dtype);
  }
  while (mask < n) {
    if (vr & mask) {
      Received r = expect((vr - mask + root) % n, tag(kBroadcast));
      check_count(r, buffer.size());
      msg = std::move(r.msg);
      ++timing_.rounds;
      break;
    }
    mask <<= 1;
  }
  mask >>= 1;
  while (mask > 0) {
    if (vr + mask < n) {
      send((vr + mask + root) % n, msg);
      ++timing_.rounds;
    }
    mask >>= 1;
  }
  const std::vector<double> values = unpack(msg);
  std::copy(values.begin(), values.end(), buffer.begin());
  finish(start);
}

void Communicator::allreduce_sum(std::span<double> buffer, Precision dtype, Precision accumulator) {
  begin();
  const double start = now_ms();
  const int n = size();
  const int me = rank();
  std::vector<double> acc = rounded_copy(buffer, dtype);
  std::size_t rounds = 0;
  for (int mask = 1; mask < n; mask <<= 1) {
    if (me & mask) {
      send(me - mask, pack(tag(kReduce), acc, dtype));
      ++rounds;
      break;
    }
    if (me + mask < n) {
      Received r = expect(me + mask, tag(kReduce));
      check_count(r, acc.size());
      const std::vector<double> part = unpack(r.msg);
      for (std::size_t i = 0; i < acc.size(); ++i) {
        acc[i] = numerics::round_to(acc[i] + part[i], accumulator);
      }
      ++rounds;
    }
  }

  // Broadcast of the rounded root sum along the same tree.
  WireMessage msg;
  int mask = 1;
  if (me == 0) msg = pack(tag(kBroadcast), acc, dtype);
  while (mask < n) {
    if (me & mask) {
      Received r = expect(me - mask, tag(kBroadcast));
      check_count(r, acc.size());
      msg = std::move(r.msg);
      break;
    }
    mask <<= 1;
  }
  mask >>= 1;
  while (mask > 0) {
    if (me + mask < n) send(me + mask, msg);
    mask >>= 1;
  }
  const std::vector<double> values = unpack(msg);
  std::copy(values.begin(), values.end(), buffer.begin());
  timing_.rounds = rounds;
  finish(start);
}

PartialResult Communicator::partial_allreduce(std::span<double> buffer, Precision dtype, Precision accumulator,
                                              double fraction, const StragglerModel& stragglers) {
  if (!(fraction > 0.0 && fraction <= 1.0)) {
    throw ConfigError("partial collection fraction must lie in (0, 1]");
  }
  begin();
  const double start = now_ms();
  const int n = size();
  const int me = rank();
  // The small slack keeps products such as 0.9 * 10 from rounding up past an integer.
  const auto need = static_cast<std::size_t>(
      std::clamp(std::ceil(fraction * static_cast<double>(n) - 1e-9), 1.0, static_cast<double>(n)));

  PartialResult result;
  if (me != 0) {
    const double delay = stragglers.delay(me);
    if (std::isfinite(delay)) {
      if (delay > 0.0) {
        std::this_thread::sleep_for(std::chrono::duration<double, std::milli>(delay));
        advance(delay);
      }
      send(0, pack(tag(kGather), buffer, dtype));
    }
    Received sum = expect(0, tag(kResult));
    check_count(sum, buffer.size());
    Received ranks = expect(0, tag(kResultRanks));
    const std::vector<double> values = unpack(sum.msg);
    std::copy(values.begin(), values.end(), buffer.begin());
    for (double r : unpack(ranks.msg)) result.ranks.push_back(static_cast<int>(r));
    result.contributors = result.ranks.size();
    timing_.rounds = 2;
    finish(start);
    return result;
  }

  std::vector<std::vector<double>> held(static_cast<std::size_t>(n));
  std::vector<const std::vector<double>*> present(static_cast<std::size_t>(n), nullptr);
  held[0] = rounded_copy(buffer, dtype);
  present[0] = &held[0];
  std::size_t got = 1;
  const auto deadline = Clock::now() + std::chrono::milliseconds(options_.timeout_ms);
  while (got < need) {
    auto r = expect_any(tag(kGather), deadline);
    if (!r) {
      throw CommError(me, "partial collection timed out with " + std::to_string(got) + " of " +
                              std::to_string(need) + " required contributions");
    }
    check_count(*r, buffer.size());
    const auto src = static_cast<std::size_t>(r->source);
    if (present[src] != nullptr) {
      throw CommError(me, "duplicate contribution from rank " + std::to_string(r->source));
    }
    if (virtual_) clock_ms_ = std::max(clock_ms_, r->arrival_ms);
    timing_.bytes += r->msg.payload.size();
    held[src] = unpack(r->msg);
    present[src] = &held[src];
    ++got;
  }
  const std::vector<double> sum = binomial_tree_sum(present, dtype, accumulator);
  for (int r = 0; r < n; ++r) {
    if (present[static_cast<std::size_t>(r)] != nullptr) result.ranks.push_back(r);
  }
  result.contributors = result.ranks.size();
  const std::vector<double> rank_list(result.ranks.begin(), result.ranks.end());
  const WireMessage sum_msg = pack(tag(kResult), sum, dtype);
  const WireMessage ranks_msg = pack(tag(kResultRanks), rank_list, Precision::fp64);
  for (int r = 1; r < n; ++r) {
    send(r, sum_msg);
    send(r, ranks_msg);
  }
  const std::vector<double> values = unpack(sum_msg);
  std::copy(values.begin(), values.end(), buffer.begin());
  timing_.rounds = 2;
  finish(start);
  return result;
}

std::vector<double> binomial_tree_sum(const std::vector<const std::vector<double>*>& contributions,
                                      Precision dtype, Precision accumulator) {
  const std::size_t n = contributions.size();
  std::vector<std::vector<double>> state(n);
  std::vector<bool> has(n, false);
  std::size_t len = 0;
  bool any = false;
  for (std::size_t r = 0; r < n; ++r) {
    if (contributions[r] == nullptr) continue;
    if (any && contributions[r]->size() != len) {
      throw DimensionError("contributions differ in length");
    }
    len = contributions[r]->size();
    any = true;
    state[r] = rounded_copy(*contributions[r], dtype);
    has[r] = true;
  }
  if (!any) {
    throw DimensionError("binomial_tree_sum needs at least one contribution");
  }
  for (std::size_t mask = 1; mask < n; mask <<= 1) {
    for (std::size_t r = 0; r + mask < n; r += 2 * mask) {
      const std::size_t from = r + mask;
      if (!has[from]) continue;
      std::vector<double> sent = rounded_copy(state[from], dtype);
      if (!has[r]) {
        state[r] = std::move(sent);
        has[r] = true;
        continue;
      }
      for (std::size_t i = 0; i < len; ++i) {
        state[r][i] = numerics::round_to(state[r][i] + sent[i], accumulator);
      }
    }
  }
  return rounded_copy(state[0], dtype);
}

void run_in_process(int workers, const CommOptions& options, const std::function<void(Communicator&)>& body) {
  auto hub = std::make_shared<InProcessHub>(workers);
  std::mutex mutex;
  std::exception_ptr primary;
  std::exception_ptr secondary;
  std::vector<std::thread> threads;
  threads.reserve(static_cast<std::size_t>(workers));
  for (int r = 0; r < workers; ++r) {
    threads.emplace_back([&, r] {
      try {
        InProcessTransport transport(hub, r);
        Communicator comm(transport, options);
        body(comm);
      } catch (...) {
        std::lock_guard lock(mutex);
        // Failures caused by the abort below are reported only if nothing else was.
        if (!hub->aborted()) {
          if (!primary) primary = std::current_exception();
        } else if (!secondary) {
          secondary = std::current_exception();
        }
        hub->abort("rank " + std::to_string(r) + " failed");
      }
    });
  }
  for (auto& t : threads) t.join();
  if (primary) std::rethrow_exception(primary);
  if (secondary) std::rethrow_exception(secondary);
}

}  // namespace halfsync::collective
