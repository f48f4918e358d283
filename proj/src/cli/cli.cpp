#include "halfsync/cli/cli.hpp"

#include <CLI11.hpp>
#include <fmt/format.h>

#include <algorithm>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include "halfsync/bench/cost_model.hpp"
#include "halfsync/bench/scaling.hpp"
#include "halfsync/collective/communicator.hpp"
#include "halfsync/collective/transport.hpp"
#include "halfsync/data/shots.hpp"
#include "halfsync/errors.hpp"
#include "halfsync/eval/inference.hpp"
#include "halfsync/eval/roc.hpp"
#include "halfsync/trainer/checkpoint.hpp"
#include "halfsync/trainer/config.hpp"
#include "halfsync/trainer/trainer.hpp"
#include "halfsync/util/log.hpp"
#include "halfsync/util/plot.hpp"

namespace halfsync::cli {

namespace fs = std::filesystem;
using numerics::Precision;

namespace {

struct ConfigArgs {
  std::string config;
  std::vector<std::string> overrides;
};

void add_config_flags(CLI::App* cmd, ConfigArgs& args) {
  cmd->add_option("--config", args.config, "Run configuration file (dotted key = value lines)")
      ->required()
      ->check(CLI::ExistingFile);
  cmd->add_option("--set", args.overrides, "Override one key, e.g. --set cluster.n=4 (repeatable)");
}

trainer::RunConfig resolve(const ConfigArgs& args) {
  trainer::RunConfig cfg = trainer::load_config(args.config);
  for (const auto& o : args.overrides) trainer::apply_override(cfg, o);
  cfg.validate();
  return cfg;
}

fs::path prepare_out(const std::string& out) {
  const fs::path dir(out);
  fs::create_directories(dir);
  return dir;
}

std::ofstream open_out(const fs::path& path) {
  std::ofstream f(path);
  if (!f) throw Error("cannot write '" + path.string() + "'");
  return f;
}

void write_manifest(const fs::path& path, const std::string& command, const trainer::RunConfig& cfg,
                    std::optional<int> rank) {
  auto f = open_out(path);
  f << "# halfsync " << command << " manifest; rerun with --config on this file\n";
  if (rank) f << "# rank " << *rank << "\n";
  f << "# seeds: train.seed=" << cfg.seed << " data.seed=" << cfg.data_seed << "\n";
  f << trainer::render_config(cfg);
}

void write_roc_svg(const fs::path& path, const eval::RocResult& roc, const std::string& title) {
  util::Series curve{fmt::format("AUC {:.4f}", roc.auc), {}};
  for (const auto& p : roc.curve) curve.points.emplace_back(p.fpr, p.tpr);
  util::write_svg(path.string(), {title, "false positive rate", "true positive rate", false}, {curve});
}

void write_scores_csv(const fs::path& path, const eval::ShotEvaluation& ev) {
  auto f = open_out(path);
  f << "shot_id,score,label\n";
  for (std::size_t i = 0; i < ev.scores.size(); ++i) {
    f << fmt::format("{},{:.17g},{}\n", ev.shot_ids[i], ev.scores[i].score, ev.scores[i].positive ? 1 : 0);
  }
}

std::vector<eval::ScoredShot> read_scores_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot read '" + path + "'");
  std::vector<eval::ScoredShot> scores;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line.rfind("shot_id", 0) == 0) continue;
    std::stringstream ss(line);
    std::string id, score, label;
    if (!std::getline(ss, id, ',') || !std::getline(ss, score, ',') || !std::getline(ss, label)) {
      throw DataError(fmt::format("{}:{}: expected shot_id,score,label", path, lineno));
    }
    try {
      scores.push_back({std::stod(score), std::stoi(label) != 0});
    } catch (const std::exception&) {
      throw DataError(fmt::format("{}:{}: malformed row '{}'", path, lineno, line));
    }
  }
  return scores;
}

int cmd_gen_data(const ConfigArgs& args, const std::string& out, std::ostream& os) {
  const auto cfg = resolve(args);
  const auto dir = prepare_out(out);
  const auto ds = data::generate(cfg.generator, cfg.data_seed);
  data::save_shots((dir / "train.shots").string(), ds.channels, ds.train);
  data::save_shots((dir / "val.shots").string(), ds.channels, ds.validation);
  data::save_shots((dir / "test.shots").string(), ds.channels, ds.test);
  write_manifest(dir / "manifest.cfg", "gen-data", cfg, std::nullopt);
  os << fmt::format("wrote {} train, {} validation, {} test shots ({} channels) to {}\n", ds.train.size(),
                    ds.validation.size(), ds.test.size(), ds.channels, dir.string());
  return kExitOk;
}

struct TrainArgs {
  ConfigArgs config;
  std::string out;
  std::optional<int> rank;
  std::string rendezvous;
};

int cmd_train(const TrainArgs& args, std::ostream& os) {
  auto cfg = resolve(args.config);
  if (!args.rendezvous.empty()) {
    cfg.cluster.transport = trainer::TransportKind::socket;
    cfg.cluster.endpoints = collective::read_rendezvous_file(args.rendezvous);
    cfg.cluster.workers = cfg.cluster.endpoints.size();
    cfg.validate();
  }
  const bool socket = cfg.cluster.transport == trainer::TransportKind::socket;
  if (socket && !args.rank) throw ConfigError("socket transport needs --rank");
  if (!socket && args.rank) throw ConfigError("--rank needs cluster.transport=socket or --rendezvous");

  const auto dir = prepare_out(args.out);
  write_manifest(dir / "manifest.cfg", "train", cfg, args.rank);
  const auto dataset = trainer::prepare_data(cfg);

  const bool root = !socket || *args.rank == 0;
  std::ofstream metrics;
  if (root) {
    metrics = open_out(dir / "metrics.csv");
    metrics << trainer::metrics_header() << "\n" << std::flush;
  }
  const auto on_epoch = [&](const trainer::EpochRecord& r) {
    metrics << trainer::metrics_row(r) << "\n" << std::flush;
  };

  const auto train_socket = [&] {
    const auto opts = trainer::comm_options(cfg);
    collective::SocketTransport transport(*args.rank, cfg.cluster.endpoints,
                                          std::chrono::milliseconds(opts.timeout_ms));
    collective::Communicator comm(transport, opts);
    return trainer::run_training(cfg, dataset, comm, root ? trainer::EpochCallback(on_epoch) : nullptr);
  };
  const trainer::TrainResult result = socket ? train_socket() : trainer::train_in_process(cfg, dataset, on_epoch);
  if (!root) {
    os << fmt::format("rank {} finished {} epochs\n", *args.rank, result.history.size());
    return kExitOk;
  }

  trainer::save_checkpoint((dir / "final.hsck").string(), result.final_params);
  trainer::save_checkpoint((dir / "best.hsck").string(), result.best_params);

  util::Series auc{"validation AUC", {}};
  util::Series loss{"training loss", {}};
  for (const auto& r : result.history) {
    auc.points.emplace_back(static_cast<double>(r.epoch), r.val_auc);
    loss.points.emplace_back(static_cast<double>(r.epoch), r.loss);
  }
  util::write_svg((dir / "val_auc.svg").string(), {"Validation AUC", "epoch", "AUC", false}, {auc});
  util::write_svg((dir / "loss.svg").string(), {"Training loss", "epoch", "hinge loss", false}, {loss});

  const auto& last = result.history.back();
  os << fmt::format("epochs {} best_epoch {} final_val_auc {:.6f}{}\n", result.history.size(), result.best_epoch,
                    last.val_auc, result.stopped_early ? " (stopped early)" : "");
  if (!dataset.test.empty()) {
    const auto ev = eval::evaluate_shots(result.best_params, dataset.test, dataset.channels, cfg.precision,
                                         static_cast<std::uint32_t>(cfg.model.seq_len));
    eval::write_roc_csv((dir / "test_roc.csv").string(), ev.roc);
    os << fmt::format("test_auc {:.6f} ({} shots, {} excluded)\n", ev.roc.auc, ev.scores.size(), ev.excluded);
  }
  return kExitOk;
}

struct EvalArgs {
  ConfigArgs config;
  std::string out;
  std::string checkpoint;
  std::string split = "test";
};

int cmd_evaluate(const EvalArgs& args, std::ostream& os) {
  const auto cfg = resolve(args.config);
  const auto params = trainer::load_checkpoint(args.checkpoint);
  const auto& pc = params.layout.config();
  if (pc.feature_dim != cfg.model.feature_dim || pc.hidden != cfg.model.hidden ||
      pc.lstm_layers != cfg.model.lstm_layers || pc.fc_hidden != cfg.model.fc_hidden) {
    throw ConfigError("checkpoint '" + args.checkpoint + "' does not match the configured model");
  }
  const auto dataset = trainer::prepare_data(cfg);
  const auto& shots = args.split == "val" ? dataset.validation : dataset.test;
  if (shots.empty()) throw DataError("split '" + args.split + "' is empty");

  const auto dir = prepare_out(args.out);
  write_manifest(dir / "manifest.cfg", "evaluate", cfg, std::nullopt);
  const auto ev = eval::evaluate_shots(params, shots, dataset.channels, cfg.precision,
                                       static_cast<std::uint32_t>(cfg.model.seq_len));
  write_scores_csv(dir / "scores.csv", ev);
  eval::write_roc_csv((dir / "roc.csv").string(), ev.roc);
  write_roc_svg(dir / "roc.svg", ev.roc, "ROC (" + args.split + ")");
  os << fmt::format("{}_auc {:.6f} ({} shots, {} excluded)\n", args.split, ev.roc.auc, ev.scores.size(),
                    ev.excluded);
  return kExitOk;
}

int cmd_roc(const std::string& scores_path, const std::string& out, std::ostream& os) {
  const auto scores = read_scores_csv(scores_path);
  const auto roc = eval::roc_auc(scores);
  const auto dir = prepare_out(out);
  eval::write_roc_csv((dir / "roc.csv").string(), roc);
  write_roc_svg(dir / "roc.svg", roc, "ROC");
  os << fmt::format("auc {:.6f} ({} shots)\n", roc.auc, scores.size());
  return kExitOk;
}

struct ScalingArgs {
  bench::ScalingOptions options;
  std::size_t max_workers = 128;
  std::string sync = "fp32";
  std::string out;
};

int cmd_bench_scaling(ScalingArgs args, std::ostream& os) {
  auto& o = args.options;
  o.sync = numerics::parse_precision(args.sync);
  o.workers.clear();
  for (std::size_t n = 2; n <= args.max_workers; n *= 2) o.workers.push_back(n);
  if (o.workers.size() < 3) throw ConfigError("--max-n must be at least 8 to fit the cost model");

  const auto points = bench::run_strong_scaling(o);
  const auto step = bench::fit_cost_model(bench::step_records(points, o.sync));
  const auto iso = bench::fit_cost_model(bench::allreduce_records(points, o.sync));
  const double batches = static_cast<double>(o.batches);

  const auto dir = prepare_out(args.out);
  bench::write_scaling_csv((dir / "scaling.csv").string(), points);
  bench::write_epoch_csv((dir / "epoch_time.csv").string(), points, step.model, batches);
  bench::write_scaling_plots(dir.string(), points, step.model, batches);
  {
    auto f = open_out(dir / "manifest.cfg");
    f << "# halfsync bench-scaling manifest\n";
    f << fmt::format("latency_ms = {:.17g}\nbandwidth_bytes_per_ms = {:.17g}\nbatch_ms = {:.17g}\n", o.latency_ms,
                     o.bandwidth_bytes_per_ms, o.batch_ms);
    f << fmt::format("batches = {}\npayload = {}\nsync = {}\nmax_n = {}\n", o.batches, o.payload,
                     numerics::to_string(o.sync), args.max_workers);
  }
  os << "N,t_batch_ms,t_sync_ms,t_epoch_ms\n";
  for (const auto& p : points) {
    os << fmt::format("{},{:.6g},{:.6g},{:.6g}\n", p.workers, p.t_batch_ms, p.t_sync_ms, p.t_epoch_ms);
  }
  os << fmt::format("step fit: A {:.6g} ms, B {:.6g} ms per log2 N, R2 {:.6f}\n", step.model.a_ms, step.model.b_ms,
                    step.r_squared);
  os << fmt::format("allreduce fit: B {:.6g} ms per log2 N, R2 {:.6f}\n", iso.model.b_ms, iso.r_squared);
  return kExitOk;
}

int cmd_estimate(double npar, double batch, double bytes, double bw, std::ostream& os) {
  const double seconds = bench::iteration_time_estimate(npar, batch, bytes, bw);
  os << fmt::format("gradient volume {:.4f} GB/iter\n", bench::gradient_volume_bytes(npar, batch, bytes) / 1e9);
  os << fmt::format("iteration time {:.4f} s ({:.1f} ms/iter)\n", seconds, seconds * 1e3);
  return kExitOk;
}

int cmd_capacity(double mem, const std::string& out, std::ostream& os) {
  const auto rows = bench::capacity_table(mem);
  std::ofstream csv;
  if (!out.empty()) {
    csv = open_out(prepare_out(out) / "capacity.csv");
    csv << "precision,batch,layers,params\n";
  }
  os << fmt::format("{:<9} {:>5} {:>7} {:>12}\n", "precision", "batch", "layers", "params");
  for (const auto& r : rows) {
    os << fmt::format("{:<9} {:>5} {:>7} {:>12}\n", numerics::to_string(r.precision), r.batch, r.layers, r.params);
    if (csv.is_open()) csv << fmt::format("{},{},{},{}\n", numerics::to_string(r.precision), r.batch, r.layers, r.params);
  }
  return kExitOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  util::init_logging();
  CLI::App app{"Synchronous data-parallel LSTM training with emulated half precision"};
  app.name("halfsync");
  app.require_subcommand(1);

  ConfigArgs gen_cfg;
  std::string gen_out;
  auto* gen = app.add_subcommand("gen-data", "Generate synthetic shot files");
  add_config_flags(gen, gen_cfg);
  gen->add_option("--out", gen_out, "Output directory")->required();

  TrainArgs train_args;
  auto* train = app.add_subcommand("train", "Train on an in-process or socket cluster");
  add_config_flags(train, train_args.config);
  train->add_option("--out", train_args.out, "Output directory")->required();
  train->add_option("--rank", train_args.rank, "This process's rank (socket transport)")->check(CLI::NonNegativeNumber);
  train->add_option("--rendezvous", train_args.rendezvous, "File with one host:port per rank")
      ->check(CLI::ExistingFile);

  EvalArgs eval_args;
  auto* evaluate = app.add_subcommand("evaluate", "Score a checkpoint on a data split");
  add_config_flags(evaluate, eval_args.config);
  evaluate->add_option("--out", eval_args.out, "Output directory")->required();
  evaluate->add_option("--checkpoint", eval_args.checkpoint, "Checkpoint file")->required()->check(CLI::ExistingFile);
  evaluate->add_option("--split", eval_args.split, "val or test")->check(CLI::IsMember({"val", "test"}));

  std::string roc_scores;
  std::string roc_out;
  auto* roc = app.add_subcommand("roc", "ROC curve and AUC from a shot_id,score,label CSV");
  roc->add_option("--scores", roc_scores, "Scores CSV")->required()->check(CLI::ExistingFile);
  roc->add_option("--out", roc_out, "Output directory")->required();

  ScalingArgs scaling_args;
  auto* scaling = app.add_subcommand("bench-scaling", "Strong-scaling run on a virtual-latency cluster");
  scaling->add_option("--out", scaling_args.out, "Output directory")->required();
  scaling->add_option("--latency-ms", scaling_args.options.latency_ms, "Per-hop latency")->capture_default_str();
  scaling->add_option("--bandwidth", scaling_args.options.bandwidth_bytes_per_ms, "Bytes per ms")
      ->capture_default_str();
  scaling->add_option("--batch-ms", scaling_args.options.batch_ms, "Compute per mini-batch")->capture_default_str();
  scaling->add_option("--batches", scaling_args.options.batches, "Mini-batches per epoch at N=1")
      ->capture_default_str();
  scaling->add_option("--payload", scaling_args.options.payload, "Elements exchanged per step")
      ->capture_default_str();
  scaling->add_option("--max-n", scaling_args.max_workers, "Largest worker count (powers of two from 2)")
      ->capture_default_str();
  scaling->add_option("--sync", scaling_args.sync, "Wire precision")->capture_default_str();

  double npar = 0, batch = 0, bytes = 0, bw = 0;
  auto* estimate = app.add_subcommand("estimate", "Per-iteration synchronization time estimate");
  estimate->add_option("--npar", npar, "Trainable parameters")->required();
  estimate->add_option("--batch", batch, "Batch size")->required();
  estimate->add_option("--bytes", bytes, "Bytes per value")->required();
  estimate->add_option("--bw", bw, "Bandwidth in bytes per second")->required();

  double mem = 16e9;
  std::string capacity_out;
  auto* capacity = app.add_subcommand("capacity", "Model capacity that fits a memory budget");
  capacity->add_option("--mem", mem, "Device memory in bytes")->capture_default_str();
  capacity->add_option("--out", capacity_out, "Optional output directory for capacity.csv");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    if (code != 0) {
      for (const auto* sub : app.get_subcommands()) err << sub->help();
    }
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*gen) return cmd_gen_data(gen_cfg, gen_out, out);
    if (*train) return cmd_train(train_args, out);
    if (*evaluate) return cmd_evaluate(eval_args, out);
    if (*roc) return cmd_roc(roc_scores, roc_out, out);
    if (*scaling) return cmd_bench_scaling(scaling_args, out);
    if (*estimate) return cmd_estimate(npar, batch, bytes, bw, out);
    if (*capacity) return cmd_capacity(mem, capacity_out, out);
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitUsage;
}

int main(int argc, char** argv) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return run(args, std::cout, std::cerr);
}

}  // namespace halfsync::cli
