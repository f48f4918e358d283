#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "halfsync/data/shots.hpp"
#include "halfsync/model/params.hpp"
#include "halfsync/numerics/precision.hpp"
#include "halfsync/optim/schedule.hpp"

namespace halfsync::trainer {

enum class TransportKind { in_process, socket };

struct ClusterSpec {
  std::size_t workers = 1;
  TransportKind transport = TransportKind::in_process;
  std::vector<std::string> endpoints;  // socket transport, rank order

  friend bool operator==(const ClusterSpec&, const ClusterSpec&) = default;
};

/// Cost model fed to the communicator's clock.
struct TimingModel {
  bool virtual_clock = true;
  double latency_ms = 0.01;
  double bandwidth_bytes_per_ms = 1.0e7;
  /// Virtual compute time charged per mini-batch.
  double batch_ms = 1.0;

  friend bool operator==(const TimingModel&, const TimingModel&) = default;
};

struct RunConfig {
  model::ModelConfig model;
  numerics::PrecisionPolicy precision;
  optim::LrSchedule schedule;
  double momentum = 0.9;
  double alpha = 1.0;              // loss scale
  std::size_t batch_size = 256;    // per worker
  std::size_t epochs = 10;
  std::size_t patience = 0;        // 0 disables early stopping
  std::uint64_t seed = 1;
  std::uint32_t horizon_ms = 200;
  double fraction = 1.0;           // share of ranks a step waits for
  std::string data_dir;            // empty: generate from `generator`
  std::uint64_t data_seed = 1;
  data::GeneratorParams generator;
  ClusterSpec cluster;
  TimingModel timing;

  /// Cross-field checks; throws ConfigError.
  void validate() const;

  friend bool operator==(const RunConfig&, const RunConfig&) = default;
};

/// Parses `dotted.key = value` lines ('#' starts a comment) into `cfg`.
/// Unknown keys, duplicate keys and malformed values throw ConfigError
/// naming the line.
void apply_config_text(RunConfig& cfg, const std::string& text, const std::string& origin = "config");

RunConfig load_config(const std::string& path);

/// Applies one `key=value` override.
void apply_override(RunConfig& cfg, const std::string& assignment);

/// Every key with its resolved value, one per line, in a stable order.
/// apply_config_text on a default RunConfig reproduces `cfg` exactly.
std::string render_config(const RunConfig& cfg);

std::vector<std::string> config_keys();

}  // namespace halfsync::trainer
