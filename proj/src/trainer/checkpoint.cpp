#include "halfsync/trainer/checkpoint.hpp"

#include <bit>
#include <fstream>

#include "halfsync/errors.hpp"

namespace halfsync::trainer {

namespace {

constexpr char kMagic[4] = {'H', 'S', 'C', 'K'};
constexpr std::uint16_t kVersion = 1;

template <typename U>
void put(std::ostream& out, U v) {
  char b[sizeof(U)];
  for (std::size_t i = 0; i < sizeof(U); ++i) b[i] = static_cast<char>(static_cast<std::uint8_t>(v >> (8 * i)));
  out.write(b, sizeof(U));
}

template <typename U>
U get(std::istream& in, const std::string& path) {
  unsigned char b[sizeof(U)];
  if (!in.read(reinterpret_cast<char*>(b), sizeof(U))) throw DataError("checkpoint '" + path + "' is truncated");
  U v = 0;
  for (std::size_t i = 0; i < sizeof(U); ++i) v |= static_cast<U>(b[i]) << (8 * i);
  return v;
}

}  // namespace

void save_checkpoint(const std::string& path, const model::Parameters& params) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write checkpoint '" + path + "'");
  const auto& c = params.layout.config();
  out.write(kMagic, 4);
  put<std::uint16_t>(out, kVersion);
  for (std::size_t d : {c.feature_dim, c.hidden, c.lstm_layers, c.fc_hidden, c.seq_len}) {
    put<std::uint32_t>(out, static_cast<std::uint32_t>(d));
  }
  put<std::uint64_t>(out, params.values.size());
  for (double v : params.values) put<std::uint32_t>(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
  if (!out) throw Error("failed writing checkpoint '" + path + "'");
}

model::Parameters load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint '" + path + "'");
  char magic[4];
  if (!in.read(magic, 4) || std::string(magic, 4) != std::string(kMagic, 4)) {
    throw DataError("'" + path + "' is not a checkpoint");
  }
  if (const auto v = get<std::uint16_t>(in, path); v != kVersion) {
    throw DataError("checkpoint '" + path + "' has unsupported version " + std::to_string(v));
  }
  model::ModelConfig c;
  c.feature_dim = get<std::uint32_t>(in, path);
  c.hidden = get<std::uint32_t>(in, path);
  c.lstm_layers = get<std::uint32_t>(in, path);
  c.fc_hidden = get<std::uint32_t>(in, path);
  c.seq_len = get<std::uint32_t>(in, path);
  try {
    c.validate();
  } catch (const ConfigError& e) {
    throw DataError("checkpoint '" + path + "' has an invalid header: " + e.what());
  }
  model::Parameters p(c);
  const auto count = get<std::uint64_t>(in, path);
  if (count != p.values.size()) {
    throw DataError("checkpoint '" + path + "' holds " + std::to_string(count) + " values, layout needs " +
                    std::to_string(p.values.size()));
  }
  for (double& v : p.values) v = std::bit_cast<float>(get<std::uint32_t>(in, path));
  if (in.peek() != std::char_traits<char>::eof()) throw DataError("checkpoint '" + path + "' has trailing bytes");
  return p;
}

}  // namespace halfsync::trainer
