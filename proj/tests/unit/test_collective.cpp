#include <doctest.h>

#include <sys/socket.h>
#include <netinet/in.h>
#include <unistd.h>

#include <bit>
#include <cmath>
#include <cstring>
#include <limits>
#include <mutex>
#include <thread>
#include <vector>

#include "halfsync/collective/communicator.hpp"
#include "halfsync/collective/transport.hpp"
#include "halfsync/collective/wire.hpp"
#include "halfsync/errors.hpp"
#include "halfsync/numerics/half.hpp"
#include "halfsync/util/rng.hpp"
#include "support/collective_oracle.hpp"

using namespace halfsync::collective;
using halfsync::numerics::Precision;
using halfsync::util::Rng;

namespace {

bool same_bits(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (std::bit_cast<std::uint64_t>(a[i]) != std::bit_cast<std::uint64_t>(b[i])) return false;
  }
  return true;
}

CommOptions fast_options() {
  CommOptions o;
  o.timeout_ms = 20000;
  return o;
}

std::vector<std::vector<double>> random_payloads(Rng& rng, std::size_t n, std::size_t len, double scale) {
  std::vector<std::vector<double>> out(n, std::vector<double>(len));
  for (auto& v : out) {
    for (auto& x : v) x = rng.uniform(-scale, scale) * std::exp2(static_cast<double>(rng.between(-8, 8)));
  }
  return out;
}

// Runs one allreduce per rank and returns every rank's result.
std::vector<std::vector<double>> run_allreduce(const std::vector<std::vector<double>>& inputs, Precision wire,
                                               Precision acc, std::vector<SyncTiming>* timings = nullptr) {
  const int n = static_cast<int>(inputs.size());
  std::vector<std::vector<double>> out(inputs.size());
  std::vector<SyncTiming> t(inputs.size());
  run_in_process(n, fast_options(), [&](Communicator& c) {
    std::vector<double> buf = inputs[static_cast<std::size_t>(c.rank())];
    c.allreduce_sum(buf, wire, acc);
    out[static_cast<std::size_t>(c.rank())] = buf;
    t[static_cast<std::size_t>(c.rank())] = c.last_timing();
  });
  if (timings) *timings = t;
  return out;
}

std::vector<std::uint16_t> free_ports(int count) {
  std::vector<int> fds;
  std::vector<std::uint16_t> ports;
  for (int i = 0; i < count; ++i) {
    const int fd = ::socket(AF_INET, SOCK_STREAM, 0);
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
    addr.sin_port = 0;
    REQUIRE(::bind(fd, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) == 0);
    socklen_t len = sizeof(addr);
    ::getsockname(fd, reinterpret_cast<sockaddr*>(&addr), &len);
    ports.push_back(ntohs(addr.sin_port));
    fds.push_back(fd);
  }
  for (int fd : fds) ::close(fd);
  return ports;
}

}  // namespace

TEST_CASE("wire byte layout") {
  const WireMessage msg = pack(0x01020304u, std::vector<double>{1.5, -2.0}, Precision::fp32);
  const std::vector<std::uint8_t> expect{0x04, 0x03, 0x02, 0x01, 0x01, 0x02, 0, 0, 0, 0, 0, 0, 0,
                                         0x00, 0x00, 0xC0, 0x3F, 0x00, 0x00, 0x00, 0xC0};
  CHECK(serialize(msg) == expect);

  const WireMessage h = pack(7, std::vector<double>{1.0, 65504.0}, Precision::fp16);
  const std::vector<std::uint8_t> hexpect{7, 0, 0, 0, 0, 2, 0, 0, 0, 0, 0, 0, 0, 0x00, 0x3C, 0xFF, 0x7B};
  CHECK(serialize(h) == hexpect);
  CHECK(serialize(pack(1, std::vector<double>{1.0}, Precision::fp64)).size() == kWireHeaderBytes + 8);
}

TEST_CASE("wire round trip over every binary16 pattern") {
  WireMessage msg;
  msg.tag = 0xFFFFFFF0u;
  msg.dtype = Precision::fp16;
  msg.count = 65536;
  for (std::uint32_t b = 0; b < 65536; ++b) {
    msg.payload.push_back(static_cast<std::uint8_t>(b & 0xFF));
    msg.payload.push_back(static_cast<std::uint8_t>(b >> 8));
  }
  const auto bytes = serialize(msg);
  CHECK(deserialize(bytes) == msg);
  CHECK(serialize(deserialize(bytes)) == bytes);
}

TEST_CASE("wire round trip of random messages") {
  Rng rng(5);
  for (int trial = 0; trial < 300; ++trial) {
    WireMessage msg;
    msg.tag = static_cast<std::uint32_t>(rng.next_u64());
    msg.dtype = static_cast<Precision>(rng.below(3));
    msg.count = rng.below(50);
    msg.payload.resize(msg.count * halfsync::numerics::byte_size(msg.dtype));
    for (auto& b : msg.payload) b = static_cast<std::uint8_t>(rng.below(256));
    REQUIRE(deserialize(serialize(msg)) == msg);
  }
}

TEST_CASE("pack and unpack agree with rounding") {
  Rng rng(9);
  std::vector<double> v(1000);
  for (auto& x : v) x = rng.normal() * 100.0;
  for (Precision p : {Precision::fp16, Precision::fp32, Precision::fp64}) {
    const auto back = unpack(pack(0, v, p));
    for (std::size_t i = 0; i < v.size(); ++i) REQUIRE(back[i] == halfsync::numerics::round_to(v[i], p));
  }
  halfsync::numerics::RoundingStats st;
  pack(0, std::vector<double>{1e6, 1e-9, 0.0, 1.0}, Precision::fp16, &st);
  CHECK(st.overflow == 1);
  CHECK(st.underflow == 1);
  CHECK(st.zeros == 2);
}

TEST_CASE("malformed wire messages are rejected") {
  auto bytes = serialize(pack(3, std::vector<double>{1.0, 2.0}, Precision::fp32));
  CHECK_THROWS_AS(deserialize(std::span<const std::uint8_t>(bytes.data(), 10)), halfsync::DataError);
  auto bad_dtype = bytes;
  bad_dtype[4] = 9;
  CHECK_THROWS_AS(deserialize(bad_dtype), halfsync::DataError);
  auto short_payload = bytes;
  short_payload.pop_back();
  CHECK_THROWS_AS(deserialize(short_payload), halfsync::DataError);
  auto huge_count = bytes;
  huge_count[12] = 0xFF;
  CHECK_THROWS_AS(deserialize(huge_count), halfsync::DataError);
}

TEST_CASE("broadcast") {
  SUBCASE("single rank is a no-op") {
    run_in_process(1, fast_options(), [](Communicator& c) {
      std::vector<double> b{3.25, -1.0};
      c.broadcast(b, Precision::fp32);
      CHECK(b == std::vector<double>{3.25, -1.0});
      CHECK(c.last_timing().rounds == 0);
    });
  }
  SUBCASE("four ranks receive the root buffer") {
    std::vector<std::vector<double>> got(4);
    run_in_process(4, fast_options(), [&](Communicator& c) {
      std::vector<double> b = c.rank() == 0 ? std::vector<double>{1.5, -2.0} : std::vector<double>{0.0, 0.0};
      c.broadcast(b, Precision::fp32);
      got[static_cast<std::size_t>(c.rank())] = b;
    });
    for (const auto& g : got) CHECK(same_bits(g, {1.5, -2.0}));
  }
  SUBCASE("rounds and bit identity for many sizes and roots") {
    Rng rng(77);
    for (int n = 1; n <= 16; ++n) {
      const int root = static_cast<int>(rng.below(static_cast<std::uint64_t>(n)));
      std::vector<double> src(33);
      for (auto& x : src) x = rng.normal();
      std::vector<std::vector<double>> got(static_cast<std::size_t>(n));
      std::vector<std::size_t> rounds(static_cast<std::size_t>(n));
      run_in_process(n, fast_options(), [&](Communicator& c) {
        std::vector<double> b = c.rank() == root ? src : std::vector<double>(src.size(), 0.0);
        c.broadcast(b, Precision::fp16, root);
        got[static_cast<std::size_t>(c.rank())] = b;
        rounds[static_cast<std::size_t>(c.rank())] = c.last_timing().rounds;
      });
      std::vector<double> expect = src;
      for (auto& x : expect) x = halfsync::numerics::round_to_half(x);
      for (const auto& g : got) REQUIRE(same_bits(g, expect));
      REQUIRE(rounds[static_cast<std::size_t>(root)] == oracle::ceil_log2(static_cast<std::size_t>(n)));
    }
  }
  SUBCASE("eight ranks take three rounds") {
    std::size_t root_rounds = 0;
    run_in_process(8, fast_options(), [&](Communicator& c) {
      std::vector<double> b(4, static_cast<double>(c.rank()));
      c.broadcast(b, Precision::fp32);
      if (c.rank() == 0) root_rounds = c.last_timing().rounds;
    });
    CHECK(root_rounds == 3);
  }
}

TEST_CASE("allreduce reference values") {
  const auto three = run_allreduce({{1, 2, 3}, {1, 2, 3}, {1, 2, 3}}, Precision::fp32, Precision::fp32);
  for (const auto& r : three) CHECK(r == std::vector<double>{3, 6, 9});

  const auto one = run_allreduce({{0.1, -7.0}}, Precision::fp64, Precision::fp64);
  CHECK(one[0] == std::vector<double>{0.1, -7.0});

  const auto strict = run_allreduce({{65504.0}, {65504.0}}, Precision::fp16, Precision::fp16);
  for (const auto& r : strict) {
    CHECK(std::isinf(r[0]));
    CHECK(r[0] > 0);
  }
  // Widened accumulation still has to transmit the total as binary16.
  const auto widened = run_allreduce({{65504.0}, {65504.0}}, Precision::fp16, Precision::fp32);
  CHECK(std::isinf(widened[0][0]));
}

TEST_CASE("allreduce matches the serial oracle bit for bit") {
  Rng rng(2024);
  const std::pair<Precision, Precision> modes[] = {{Precision::fp32, Precision::fp32},
                                                   {Precision::fp64, Precision::fp64},
                                                   {Precision::fp32, Precision::fp64},
                                                   {Precision::fp16, Precision::fp32},
                                                   {Precision::fp16, Precision::fp16}};
  for (const auto& [wire, acc] : modes) {
    for (std::size_t n = 1; n <= 16; ++n) {
      const auto inputs = random_payloads(rng, n, 257, 3.0);
      const auto expect = oracle::serial_allreduce(inputs, wire, acc);
      const auto got = run_allreduce(inputs, wire, acc);
      for (std::size_t r = 0; r < n; ++r) {
        REQUIRE_MESSAGE(same_bits(got[r], expect), "N=" << n << " rank " << r);
      }
    }
  }
}

TEST_CASE("allreduce hop count and traffic") {
  Rng rng(31);
  for (std::size_t n = 2; n <= 16; ++n) {
    const std::size_t len = 100;
    std::vector<SyncTiming> t;
    run_allreduce(random_payloads(rng, n, len, 1.0), Precision::fp16, Precision::fp32, &t);
    const std::size_t hops = oracle::ceil_log2(n);
    CHECK(t[0].rounds == hops);
    const std::size_t payload = len * 2;
    for (const auto& tr : t) CHECK(tr.bytes <= 2 * payload * hops);
    CHECK(t[0].bytes == 2 * payload * hops);
  }
}

TEST_CASE("virtual clock charges latency per hop") {
  CommOptions o = fast_options();
  o.latency_ms = 2.0;
  o.bandwidth_bytes_per_ms = 1000.0;
  const std::size_t len = 10;
  const double hop = 2.0 + static_cast<double>(kWireHeaderBytes + len * 4) / 1000.0;
  std::vector<double> end(8);
  double root_elapsed = 0.0;
  run_in_process(8, o, [&](Communicator& c) {
    std::vector<double> b(len, 1.0);
    c.allreduce_sum(b, Precision::fp32, Precision::fp32);
    end[static_cast<std::size_t>(c.rank())] = c.now_ms();
    if (c.rank() == 0) root_elapsed = c.last_timing().elapsed_ms;
  });
  CHECK(root_elapsed == doctest::Approx(3 * hop));
  CHECK(*std::max_element(end.begin(), end.end()) == doctest::Approx(6 * hop));
}

TEST_CASE("allreduce length mismatch fails with rank attribution") {
  try {
    run_in_process(4, fast_options(), [](Communicator& c) {
      std::vector<double> b(c.rank() == 3 ? 5 : 4, 1.0);
      c.allreduce_sum(b, Precision::fp32, Precision::fp32);
    });
    FAIL("expected an error");
  } catch (const halfsync::CommError& e) {
    CHECK(std::string(e.what()).find("length mismatch") != std::string::npos);
    CHECK(e.rank() == 2);
  }
}

TEST_CASE("a failing rank aborts its peers") {
  CHECK_THROWS_WITH_AS(run_in_process(3, fast_options(),
                                      [](Communicator& c) {
                                        if (c.rank() == 1) throw halfsync::NumericFault("boom");
                                        std::vector<double> b(3, 1.0);
                                        c.allreduce_sum(b, Precision::fp32, Precision::fp32);
                                      }),
                       "boom", halfsync::NumericFault);
}

TEST_CASE("partial collection") {
  SUBCASE("full fraction equals allreduce") {
    Rng rng(8);
    for (std::size_t n : {1u, 2u, 5u, 9u, 16u}) {
      const auto inputs = random_payloads(rng, n, 64, 2.0);
      const auto full = run_allreduce(inputs, Precision::fp16, Precision::fp32);
      std::vector<std::vector<double>> got(n);
      std::vector<std::size_t> counts(n);
      run_in_process(static_cast<int>(n), fast_options(), [&](Communicator& c) {
        std::vector<double> b = inputs[static_cast<std::size_t>(c.rank())];
        const auto res = c.partial_allreduce(b, Precision::fp16, Precision::fp32, 1.0);
        got[static_cast<std::size_t>(c.rank())] = b;
        counts[static_cast<std::size_t>(c.rank())] = res.contributors;
      });
      for (std::size_t r = 0; r < n; ++r) {
        CHECK(same_bits(got[r], full[r]));
        CHECK(counts[r] == n);
      }
    }
  }
  SUBCASE("one infinite straggler among ten") {
    StragglerModel model;
    model.delay_ms.assign(10, 0.0);
    model.delay_ms[6] = std::numeric_limits<double>::infinity();
    std::vector<std::vector<double>> got(10);
    std::vector<PartialResult> res(10);
    run_in_process(10, fast_options(), [&](Communicator& c) {
      std::vector<double> b{static_cast<double>(1 << c.rank())};
      res[static_cast<std::size_t>(c.rank())] = c.partial_allreduce(b, Precision::fp32, Precision::fp32, 0.9, model);
      got[static_cast<std::size_t>(c.rank())] = b;
    });
    for (std::size_t r = 0; r < 10; ++r) {
      CHECK(res[r].contributors == 9);
      CHECK(res[r].ranks == std::vector<int>{0, 1, 2, 3, 4, 5, 7, 8, 9});
      CHECK(got[r][0] == 1023.0 - 64.0);
    }
  }
  SUBCASE("two ranks at 0.95 wait for both") {
    StragglerModel model{{0.0, 30.0}};
    std::size_t count = 0;
    run_in_process(2, fast_options(), [&](Communicator& c) {
      std::vector<double> b{1.0};
      const auto r = c.partial_allreduce(b, Precision::fp32, Precision::fp32, 0.95, model);
      if (c.rank() == 0) count = r.contributors;
      CHECK(b[0] == 2.0);
    });
    CHECK(count == 2);
  }
  SUBCASE("late contributions are discarded") {
    StragglerModel model{{0.0, 0.0, 150.0}};
    std::size_t dropped = 0;
    std::vector<double> second(3);
    run_in_process(3, fast_options(), [&](Communicator& c) {
      std::vector<double> b{1.0};
      const auto r = c.partial_allreduce(b, Precision::fp32, Precision::fp32, 0.6, model);
      if (c.rank() == 0) CHECK(r.contributors == 2);
      std::vector<double> again{static_cast<double>(c.rank() + 1)};
      c.allreduce_sum(again, Precision::fp32, Precision::fp32);
      second[static_cast<std::size_t>(c.rank())] = again[0];
      if (c.rank() == 0) dropped = c.stale_dropped();
    });
    CHECK(dropped == 1);
    for (double v : second) CHECK(v == 6.0);
  }
  SUBCASE("too few contributions before the timeout") {
    CommOptions o = fast_options();
    o.timeout_ms = 200;
    StragglerModel model{{0.0, std::numeric_limits<double>::infinity(), 0.0}};
    CHECK_THROWS_AS(run_in_process(3, o,
                                   [&](Communicator& c) {
                                     std::vector<double> b{1.0};
                                     c.partial_allreduce(b, Precision::fp32, Precision::fp32, 1.0, model);
                                   }),
                    halfsync::CommError);
  }
  SUBCASE("fraction must lie in (0, 1]") {
    CHECK_THROWS_AS(run_in_process(1, fast_options(),
                                   [](Communicator& c) {
                                     std::vector<double> b{1.0};
                                     c.partial_allreduce(b, Precision::fp32, Precision::fp32, 0.0);
                                   }),
                    halfsync::ConfigError);
  }
}

TEST_CASE("receive timeout names the silent peer") {
  CommOptions o = fast_options();
  o.timeout_ms = 100;
  try {
    run_in_process(2, o, [](Communicator& c) {
      if (c.rank() == 1) return;
      std::vector<double> b{1.0};
      c.allreduce_sum(b, Precision::fp32, Precision::fp32);
    });
    FAIL("expected a timeout");
  } catch (const halfsync::CommError& e) {
    CHECK(e.rank() == 0);
    CHECK(std::string(e.what()).find("waiting for rank 1") != std::string::npos);
  }
}

TEST_CASE("socket transport runs the same collectives") {
  const int n = 3;
  const auto ports = free_ports(n);
  std::vector<std::string> endpoints;
  for (auto p : ports) endpoints.push_back("127.0.0.1:" + std::to_string(p));
  Rng rng(99);
  const auto inputs = random_payloads(rng, n, 1000, 4.0);
  const auto expect = oracle::serial_allreduce(inputs, Precision::fp16, Precision::fp32);
  std::vector<std::vector<double>> got(n), bcast(n);
  std::vector<std::string> errors;
  std::mutex mu;
  std::vector<std::thread> threads;
  for (int r = 0; r < n; ++r) {
    threads.emplace_back([&, r] {
      try {
        SocketTransport t(r, endpoints, std::chrono::milliseconds(10000));
        Communicator c(t, fast_options());
        std::vector<double> b = inputs[static_cast<std::size_t>(r)];
        c.allreduce_sum(b, Precision::fp16, Precision::fp32);
        got[static_cast<std::size_t>(r)] = b;
        std::vector<double> p = r == 0 ? std::vector<double>{0.5, 0.25} : std::vector<double>{0, 0};
        c.broadcast(p, Precision::fp32);
        bcast[static_cast<std::size_t>(r)] = p;
        std::vector<double> q{1.0};
        const auto res = c.partial_allreduce(q, Precision::fp32, Precision::fp32, 1.0);
        CHECK(res.contributors == 3);
      } catch (const std::exception& e) {
        std::lock_guard lock(mu);
        errors.push_back(e.what());
      }
    });
  }
  for (auto& t : threads) t.join();
  REQUIRE(errors.empty());
  for (int r = 0; r < n; ++r) {
    CHECK(same_bits(got[static_cast<std::size_t>(r)], expect));
    CHECK(bcast[static_cast<std::size_t>(r)] == std::vector<double>{0.5, 0.25});
  }
}

TEST_CASE("endpoint parsing") {
  CHECK(split_endpoint("localhost:8080") == std::pair<std::string, std::uint16_t>{"localhost", 8080});
  CHECK_THROWS_AS(split_endpoint("localhost"), halfsync::ConfigError);
  CHECK_THROWS_AS(split_endpoint("host:99999"), halfsync::ConfigError);
  CHECK_THROWS_AS(split_endpoint(":80"), halfsync::ConfigError);
  CHECK_THROWS_AS(read_rendezvous_file("/nonexistent/rendezvous"), halfsync::ConfigError);
}
