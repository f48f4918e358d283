#include "halfsync/model/params.hpp"

#include <cmath>

#include "halfsync/errors.hpp"
#include "halfsync/util/rng.hpp"

namespace halfsync::model {

void ModelConfig::validate() const {
  if (feature_dim == 0 || hidden == 0 || lstm_layers == 0 || fc_hidden == 0 || seq_len == 0) {
    throw ConfigError("model dimensions must all be positive");
  }
  if (output_dim != 1) {
    throw ConfigError("output_dim must be 1 for the disruptivity head");
  }
  if (!(l2 >= 0.0)) {
    throw ConfigError("l2 coefficient must be >= 0");
  }
  if (!(dropout_keep > 0.0 && dropout_keep <= 1.0)) {
    throw ConfigError("dropout_keep must lie in (0, 1]");
  }
}

std::string to_string(BlockKind kind) {
  switch (kind) {
    case BlockKind::lstm_input:
      return "lstm_input";
    case BlockKind::lstm_recurrent:
      return "lstm_recurrent";
    case BlockKind::lstm_bias:
      return "lstm_bias";
    case BlockKind::fc_weight:
      return "fc_weight";
    case BlockKind::fc_bias:
      return "fc_bias";
    case BlockKind::head_weight:
      return "head_weight";
    case BlockKind::head_bias:
      return "head_bias";
  }
  return "?";
}

ParamLayout::ParamLayout(const ModelConfig& config) : config_(config) {
  config_.validate();
  const std::size_t h = config_.hidden;
  auto push = [this](BlockKind kind, std::size_t layer, std::size_t rows, std::size_t cols) {
    blocks_.push_back(ParamBlock{kind, layer, size_, rows, cols});
    size_ += rows * cols;
  };
  for (std::size_t l = 0; l < config_.lstm_layers; ++l) {
    const std::size_t in = l == 0 ? config_.feature_dim : h;
    push(BlockKind::lstm_input, l, 4 * h, in);
    push(BlockKind::lstm_recurrent, l, 4 * h, h);
    push(BlockKind::lstm_bias, l, 4 * h, 1);
  }
  push(BlockKind::fc_weight, 0, config_.fc_hidden, h);
  push(BlockKind::fc_bias, 0, config_.fc_hidden, 1);
  push(BlockKind::head_weight, 0, config_.output_dim, config_.fc_hidden);
  push(BlockKind::head_bias, 0, config_.output_dim, 1);
}

std::size_t count_params(const ModelConfig& c) {
  const std::size_t h = c.hidden;
  std::size_t n = 4 * (c.feature_dim * h + h * h + h);
  n += (c.lstm_layers - 1) * 4 * (h * h + h * h + h);
  n += h * c.fc_hidden + c.fc_hidden;
  n += c.fc_hidden * c.output_dim + c.output_dim;
  return n;
}

Parameters init_params(const ModelConfig& config, std::uint64_t seed) {
  Parameters p(config);
  const auto blocks = p.layout.blocks();
  for (std::size_t i = 0; i < blocks.size(); ++i) {
    const ParamBlock& b = blocks[i];
    auto values = p.block(b);
    if (b.is_weight()) {
      util::Rng rng(util::Rng::derive(seed, i));
      const double bound = 1.0 / std::sqrt(static_cast<double>(b.cols));
      for (double& v : values) {
        v = rng.uniform(-bound, bound);
      }
    } else if (b.kind == BlockKind::lstm_bias) {
      const std::size_t h = config.hidden;
      for (std::size_t r = h; r < 2 * h; ++r) {
        values[r] = 1.0;
      }
    }
  }
  return p;
}

double weight_norm_squared(const Parameters& params) {
  double s = 0.0;
  for (const ParamBlock& b : params.layout.blocks()) {
    if (!b.is_weight()) {
      continue;
    }
    for (double v : params.block(b)) {
      s += v * v;
    }
  }
  return s;
}

}  // namespace halfsync::model
