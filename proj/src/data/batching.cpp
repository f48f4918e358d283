#include "halfsync/data/batching.hpp"

#include <string>

#include "halfsync/errors.hpp"
#include "halfsync/util/rng.hpp"

namespace halfsync::data {

std::vector<ChunkRef> chunk_shots(const std::vector<Shot>& shots, std::uint32_t seq_len) {
  if (seq_len == 0) throw ConfigError("sequence length must be positive");
  std::vector<ChunkRef> out;
  for (std::size_t i = 0; i < shots.size(); ++i) {
    const std::uint32_t len = shots[i].length;
    const std::uint32_t lead = len % seq_len;
    for (std::uint32_t off = lead; off + seq_len <= len; off += seq_len) out.push_back(ChunkRef{i, off});
  }
  return out;
}

EpochPlan shard_epoch(const std::vector<Shot>& shots, std::uint32_t seq_len, std::size_t batch_size,
                      std::size_t workers, std::uint64_t epoch_seed) {
  if (workers == 0) throw ConfigError("worker count must be >= 1");
  if (batch_size == 0) throw ConfigError("batch size must be >= 1");
  std::vector<ChunkRef> chunks = chunk_shots(shots, seq_len);
  const std::size_t per_step = workers * batch_size;
  if (chunks.size() < per_step) {
    throw ConfigError(std::to_string(chunks.size()) + " chunks cannot fill one step of " + std::to_string(workers) +
                      " workers x " + std::to_string(batch_size));
  }
  util::Rng rng(epoch_seed);
  rng.shuffle(chunks);

  EpochPlan plan;
  plan.total_chunks = chunks.size();
  const std::size_t batches = chunks.size() / per_step;
  plan.used_chunks = batches * per_step;
  plan.ranks.assign(workers, std::vector<std::vector<ChunkRef>>(batches));
  for (std::size_t k = 0; k < plan.used_chunks; ++k) {
    const std::size_t rank = k % workers;
    const std::size_t pos = k / workers;  // position in this rank's stream
    plan.ranks[rank][pos / batch_size].push_back(chunks[k]);
  }
  return plan;
}

Batch make_batch(const std::vector<Shot>& shots, std::size_t channels, const std::vector<ChunkRef>& chunks,
                 std::uint32_t seq_len, std::uint32_t horizon_ms) {
  const std::size_t b = chunks.size();
  std::vector<double> feat(b * seq_len * channels);
  std::vector<double> targ(b * seq_len);
  for (std::size_t i = 0; i < b; ++i) {
    const ChunkRef& ref = chunks[i];
    const Shot& s = shots.at(ref.shot);
    if (ref.offset + seq_len > s.length) {
      throw DimensionError("chunk at " + std::to_string(ref.offset) + " overruns shot " + std::to_string(s.id));
    }
    const std::vector<double> t = shot_targets(s, horizon_ms);
    for (std::uint32_t k = 0; k < seq_len; ++k) {
      for (std::size_t c = 0; c < channels; ++c) {
        feat[(i * seq_len + k) * channels + c] = s.at(ref.offset + k, c, channels);
      }
      targ[i * seq_len + k] = t[ref.offset + k];
    }
  }
  Batch batch;
  batch.features = numerics::Tensor({b, seq_len, channels}, std::move(feat), numerics::Precision::fp32);
  batch.targets = numerics::Tensor({b, seq_len}, std::move(targ), numerics::Precision::fp32);
  batch.chunks = chunks;
  return batch;
}

}  // namespace halfsync::data
