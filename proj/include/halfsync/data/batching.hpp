#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "halfsync/data/shots.hpp"
#include "halfsync/numerics/tensor.hpp"

namespace halfsync::data {

/// A seq_len window of one shot.
struct ChunkRef {
  std::size_t shot = 0;     // index into the shot list
  std::uint32_t offset = 0; // first timestep

  friend bool operator==(const ChunkRef&, const ChunkRef&) = default;
  friend auto operator<=>(const ChunkRef&, const ChunkRef&) = default;
};

/// Non-overlapping windows aligned to the end of each shot, so the
/// pre-disruption stretch is always covered; the leading remainder of
/// length % seq_len timesteps is not used.
std::vector<ChunkRef> chunk_shots(const std::vector<Shot>& shots, std::uint32_t seq_len);

/// One epoch's work: per rank, a list of mini-batches of chunk references.
struct EpochPlan {
  std::vector<std::vector<std::vector<ChunkRef>>> ranks;
  std::size_t total_chunks = 0;
  std::size_t used_chunks = 0;

  std::size_t batches_per_rank() const { return ranks.empty() ? 0 : ranks.front().size(); }
};

/// Shuffles every chunk with `epoch_seed`, deals chunk k to rank k % N and
/// cuts each rank's stream into batches of `batch_size`. Every rank gets
/// the same number of batches; leftover chunks are dropped. Throws
/// ConfigError when there are fewer than N * batch_size chunks.
EpochPlan shard_epoch(const std::vector<Shot>& shots, std::uint32_t seq_len, std::size_t batch_size,
                      std::size_t workers, std::uint64_t epoch_seed);

struct Batch {
  numerics::Tensor features;  // [B, seq_len, channels] at fp32
  numerics::Tensor targets;   // [B, seq_len] of +-1
  std::vector<ChunkRef> chunks;
};

Batch make_batch(const std::vector<Shot>& shots, std::size_t channels, const std::vector<ChunkRef>& chunks,
                 std::uint32_t seq_len, std::uint32_t horizon_ms);

}  // namespace halfsync::data
