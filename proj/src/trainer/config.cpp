#include "halfsync/trainer/config.hpp"

#include <fmt/format.h>

#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>

#include "halfsync/errors.hpp"

namespace halfsync::trainer {

namespace {

struct Field {
  std::string key;
  std::function<std::string(const RunConfig&)> get;
  std::function<void(RunConfig&, const std::string&)> set;
};

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

double to_double(const std::string& v) {
  double out = 0.0;
  const auto* end = v.data() + v.size();
  const auto [ptr, ec] = std::from_chars(v.data(), end, out);
  if (ec != std::errc{} || ptr != end) throw ConfigError("'" + v + "' is not a number");
  return out;
}

std::uint64_t to_u64(const std::string& v) {
  std::uint64_t out = 0;
  const auto* end = v.data() + v.size();
  const auto [ptr, ec] = std::from_chars(v.data(), end, out);
  if (ec != std::errc{} || ptr != end) throw ConfigError("'" + v + "' is not a non-negative integer");
  return out;
}

bool to_bool(const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw ConfigError("'" + v + "' is not a boolean");
}

std::string fmt_double(double v) { return fmt::format("{:.17g}", v); }

template <typename T>
Field number(std::string key, T RunConfig::*member) {
  return {key, [member](const RunConfig& c) { return fmt_double(c.*member); },
          [member](RunConfig& c, const std::string& v) { c.*member = to_double(v); }};
}

template <typename T>
Field integer(std::string key, T RunConfig::*member) {
  return {key, [member](const RunConfig& c) { return std::to_string(c.*member); },
          [member](RunConfig& c, const std::string& v) { c.*member = static_cast<T>(to_u64(v)); }};
}

// Same as above for a member of a nested struct.
template <typename S, typename T>
Field nested_number(std::string key, S RunConfig::*outer, T S::*member) {
  return {key, [=](const RunConfig& c) { return fmt_double((c.*outer).*member); },
          [=](RunConfig& c, const std::string& v) { (c.*outer).*member = to_double(v); }};
}

template <typename S, typename T>
Field nested_integer(std::string key, S RunConfig::*outer, T S::*member) {
  return {key, [=](const RunConfig& c) { return std::to_string((c.*outer).*member); },
          [=](RunConfig& c, const std::string& v) { (c.*outer).*member = static_cast<T>(to_u64(v)); }};
}

Field precision(std::string key, numerics::Precision numerics::PrecisionPolicy::*member) {
  return {key, [=](const RunConfig& c) { return std::string(numerics::to_string(c.precision.*member)); },
          [=](RunConfig& c, const std::string& v) { c.precision.*member = numerics::parse_precision(v); }};
}

std::string join(const std::vector<std::string>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? "," : "") + v[i];
  return out;
}

std::vector<std::string> split_list(const std::string& v) {
  std::vector<std::string> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

const std::vector<Field>& fields() {
  using M = model::ModelConfig;
  using G = data::GeneratorParams;
  using L = optim::LrSchedule;
  using T = TimingModel;
  using P = numerics::PrecisionPolicy;
  static const std::vector<Field> table = {
      nested_integer("model.feature_dim", &RunConfig::model, &M::feature_dim),
      nested_integer("model.hidden", &RunConfig::model, &M::hidden),
      nested_integer("model.lstm_layers", &RunConfig::model, &M::lstm_layers),
      nested_integer("model.fc_hidden", &RunConfig::model, &M::fc_hidden),
      nested_integer("model.seq_len", &RunConfig::model, &M::seq_len),
      nested_number("model.l2", &RunConfig::model, &M::l2),
      nested_number("model.dropout_keep", &RunConfig::model, &M::dropout_keep),
      precision("precision.math", &P::math),
      precision("precision.sync", &P::sync),
      precision("precision.update", &P::update),
      precision("precision.accumulator", &P::accumulator),
      nested_number("lr.base", &RunConfig::schedule, &L::base_lr),
      nested_number("lr.decay", &RunConfig::schedule, &L::decay),
      nested_number("lr.halving_workers", &RunConfig::schedule, &L::halving_workers),
      nested_number("lr.clip", &RunConfig::schedule, &L::clip),
      number("optim.momentum", &RunConfig::momentum),
      number("train.alpha", &RunConfig::alpha),
      integer("train.batch_size", &RunConfig::batch_size),
      integer("train.epochs", &RunConfig::epochs),
      integer("train.patience", &RunConfig::patience),
      integer("train.seed", &RunConfig::seed),
      integer("train.horizon_ms", &RunConfig::horizon_ms),
      number("train.fraction", &RunConfig::fraction),
      {"data.dir", [](const RunConfig& c) { return c.data_dir; },
       [](RunConfig& c, const std::string& v) { c.data_dir = v; }},
      integer("data.seed", &RunConfig::data_seed),
      nested_integer("data.shots", &RunConfig::generator, &G::shots),
      nested_integer("data.channels", &RunConfig::generator, &G::channels),
      nested_integer("data.min_length", &RunConfig::generator, &G::min_length),
      nested_integer("data.max_length", &RunConfig::generator, &G::max_length),
      nested_number("data.disruptive_fraction", &RunConfig::generator, &G::disruptive_fraction),
      nested_integer("data.lead_min_ms", &RunConfig::generator, &G::lead_min_ms),
      nested_integer("data.lead_max_ms", &RunConfig::generator, &G::lead_max_ms),
      nested_integer("data.precursor_channels", &RunConfig::generator, &G::precursor_channels),
      nested_number("data.noise_scale", &RunConfig::generator, &G::noise_scale),
      nested_number("data.ar_coefficient", &RunConfig::generator, &G::ar_coefficient),
      nested_number("data.drift_scale", &RunConfig::generator, &G::drift_scale),
      nested_number("data.ramp_amplitude", &RunConfig::generator, &G::ramp_amplitude),
      nested_number("data.validation_fraction", &RunConfig::generator, &G::validation_fraction),
      nested_integer("data.test_shots", &RunConfig::generator, &G::test_shots),
      nested_number("data.test_noise_multiplier", &RunConfig::generator, &G::test_noise_multiplier),
      nested_number("data.test_ramp_multiplier", &RunConfig::generator, &G::test_ramp_multiplier),
      nested_number("data.test_offset_shift", &RunConfig::generator, &G::test_offset_shift),
      {"cluster.n", [](const RunConfig& c) { return std::to_string(c.cluster.workers); },
       [](RunConfig& c, const std::string& v) { c.cluster.workers = static_cast<std::size_t>(to_u64(v)); }},
      {"cluster.transport",
       [](const RunConfig& c) {
         return std::string(c.cluster.transport == TransportKind::socket ? "socket" : "in-process");
       },
       [](RunConfig& c, const std::string& v) {
         if (v == "in-process") {
           c.cluster.transport = TransportKind::in_process;
         } else if (v == "socket") {
           c.cluster.transport = TransportKind::socket;
         } else {
           throw ConfigError("transport must be in-process or socket, got '" + v + "'");
         }
       }},
      {"cluster.endpoints", [](const RunConfig& c) { return join(c.cluster.endpoints); },
       [](RunConfig& c, const std::string& v) { c.cluster.endpoints = split_list(v); }},
      {"timing.clock", [](const RunConfig& c) { return std::string(c.timing.virtual_clock ? "virtual" : "wall"); },
       [](RunConfig& c, const std::string& v) {
         if (v != "virtual" && v != "wall") throw ConfigError("clock must be virtual or wall, got '" + v + "'");
         c.timing.virtual_clock = v == "virtual";
       }},
      nested_number("timing.latency_ms", &RunConfig::timing, &T::latency_ms),
      nested_number("timing.bandwidth_bytes_per_ms", &RunConfig::timing, &T::bandwidth_bytes_per_ms),
      nested_number("timing.batch_ms", &RunConfig::timing, &T::batch_ms),
  };
  return table;
}

const Field& find_field(const std::string& key) {
  for (const auto& f : fields()) {
    if (f.key == key) return f;
  }
  throw ConfigError("unknown config key '" + key + "'");
}

void assign(RunConfig& cfg, const std::string& key, const std::string& value) {
  const Field& f = find_field(key);
  try {
    f.set(cfg, value);
  } catch (const ConfigError& e) {
    throw ConfigError(key + ": " + e.what());
  }
}

}  // namespace

void RunConfig::validate() const {
  model.validate();
  schedule.validate();
  generator.validate();
  if (!(momentum >= 0.0 && momentum < 1.0)) throw ConfigError("optim.momentum must lie in [0, 1)");
  if (!(alpha > 0.0) || !std::isfinite(alpha)) throw ConfigError("train.alpha must be positive and finite");
  if (batch_size == 0) throw ConfigError("train.batch_size must be >= 1");
  if (epochs == 0) throw ConfigError("train.epochs must be >= 1");
  if (!(fraction > 0.0 && fraction <= 1.0)) throw ConfigError("train.fraction must lie in (0, 1]");
  if (cluster.workers == 0) throw ConfigError("cluster.n must be >= 1");
  if (data_dir.empty() && generator.channels != model.feature_dim) {
    throw ConfigError("data.channels (" + std::to_string(generator.channels) + ") must equal model.feature_dim (" +
                      std::to_string(model.feature_dim) + ")");
  }
  if (cluster.transport == TransportKind::socket && cluster.endpoints.size() != cluster.workers) {
    throw ConfigError("socket transport needs one endpoint per worker (" + std::to_string(cluster.endpoints.size()) +
                      " for " + std::to_string(cluster.workers) + ")");
  }
  if (!(timing.latency_ms >= 0.0) || !(timing.bandwidth_bytes_per_ms > 0.0) || !(timing.batch_ms >= 0.0)) {
    throw ConfigError("timing values must be non-negative (bandwidth positive)");
  }
}

void apply_config_text(RunConfig& cfg, const std::string& text, const std::string& origin) {
  std::istringstream in(text);
  std::string line;
  std::set<std::string> seen;
  for (int lineno = 1; std::getline(in, line); ++lineno) {
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    const std::string where = origin + ":" + std::to_string(lineno) + ": ";
    if (eq == std::string::npos) throw ConfigError(where + "expected 'key = value'");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (!seen.insert(key).second) throw ConfigError(where + "duplicate key '" + key + "'");
    try {
      assign(cfg, key, value);
    } catch (const ConfigError& e) {
      throw ConfigError(where + e.what());
    }
  }
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  RunConfig cfg;
  apply_config_text(cfg, buf.str(), path);
  return cfg;
}

void apply_override(RunConfig& cfg, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos) throw ConfigError("override '" + assignment + "' is not key=value");
  assign(cfg, trim(assignment.substr(0, eq)), trim(assignment.substr(eq + 1)));
}

std::string render_config(const RunConfig& cfg) {
  std::string out;
  for (const auto& f : fields()) out += f.key + " = " + f.get(cfg) + "\n";
  return out;
}

std::vector<std::string> config_keys() {
  std::vector<std::string> keys;
  for (const auto& f : fields()) keys.push_back(f.key);
  return keys;
}

}  // namespace halfsync::trainer
