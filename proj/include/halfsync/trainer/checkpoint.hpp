#pragma once

#include <string>

#include "halfsync/model/params.hpp"

namespace halfsync::trainer {

/// Layout: "HSCK", u16 version, u32 feature_dim, hidden, lstm_layers,
/// fc_hidden, seq_len, u64 parameter count, then count fp32 values; all
/// little-endian.
void save_checkpoint(const std::string& path, const model::Parameters& params);

/// Rebuilds Parameters from the header dimensions (l2 and dropout take their
/// defaults). Throws DataError on a malformed file.
model::Parameters load_checkpoint(const std::string& path);

}  // namespace halfsync::trainer
