#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace halfsync::model {

/// Stacked LSTM -> FC(ReLU) -> linear(1) network, applied at every timestep.
struct ModelConfig {
  std::size_t feature_dim = 9;
  std::size_t hidden = 200;
  std::size_t lstm_layers = 2;
  std::size_t fc_hidden = 200;
  std::size_t seq_len = 128;
  std::size_t output_dim = 1;
  double l2 = 0.0;
  double dropout_keep = 1.0;

  /// Throws ConfigError when a dimension is zero, output_dim != 1,
  /// l2 < 0 or dropout_keep is outside (0, 1].
  void validate() const;

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

enum class BlockKind { lstm_input, lstm_recurrent, lstm_bias, fc_weight, fc_bias, head_weight, head_bias };

std::string to_string(BlockKind kind);

/// One contiguous row-major block inside the flat parameter vector.
struct ParamBlock {
  BlockKind kind;
  std::size_t layer;  // LSTM layer index, 0 for the FC and head blocks
  std::size_t offset;
  std::size_t rows;
  std::size_t cols;

  std::size_t size() const noexcept { return rows * cols; }
  bool is_weight() const noexcept {
    return kind == BlockKind::lstm_input || kind == BlockKind::lstm_recurrent || kind == BlockKind::fc_weight ||
           kind == BlockKind::head_weight;
  }
};

/// Maps (layer, block) to offsets. LSTM gate blocks stack the gates as rows
/// in the order input, forget, candidate, output.
class ParamLayout {
 public:
  explicit ParamLayout(const ModelConfig& config);

  const ModelConfig& config() const noexcept { return config_; }
  std::span<const ParamBlock> blocks() const noexcept { return blocks_; }
  std::size_t size() const noexcept { return size_; }

  const ParamBlock& lstm_input(std::size_t layer) const { return blocks_.at(3 * layer); }
  const ParamBlock& lstm_recurrent(std::size_t layer) const { return blocks_.at(3 * layer + 1); }
  const ParamBlock& lstm_bias(std::size_t layer) const { return blocks_.at(3 * layer + 2); }
  const ParamBlock& fc_weight() const { return blocks_.at(blocks_.size() - 4); }
  const ParamBlock& fc_bias() const { return blocks_.at(blocks_.size() - 3); }
  const ParamBlock& head_weight() const { return blocks_.at(blocks_.size() - 2); }
  const ParamBlock& head_bias() const { return blocks_.back(); }

  friend bool operator==(const ParamLayout& a, const ParamLayout& b) { return a.config_ == b.config_; }

 private:
  ModelConfig config_;
  std::vector<ParamBlock> blocks_;
  std::size_t size_ = 0;
};

struct Parameters {
  ParamLayout layout;
  std::vector<double> values;

  explicit Parameters(const ModelConfig& config) : layout(config), values(layout.size(), 0.0) {}

  std::span<double> block(const ParamBlock& b) { return std::span<double>(values).subspan(b.offset, b.size()); }
  std::span<const double> block(const ParamBlock& b) const {
    return std::span<const double>(values).subspan(b.offset, b.size());
  }
};

/// Flat gradient vector congruent with a ParamLayout. `scale_applied` is the
/// loss-scale factor currently multiplied into the values.
struct Gradients {
  std::vector<double> values;
  double scale_applied = 1.0;
};

/// Closed-form parameter count.
std::size_t count_params(const ModelConfig& config);

/// Weights ~ U(-1/sqrt(fan_in), +1/sqrt(fan_in)) per block, fan_in being the
/// block's column count. Forget-gate biases are 1, all other biases 0.
/// Deterministic in (config, seed).
Parameters init_params(const ModelConfig& config, std::uint64_t seed);

/// Sum of squares over the weight blocks (biases excluded).
double weight_norm_squared(const Parameters& params);

}  // namespace halfsync::model
