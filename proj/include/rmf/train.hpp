#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "rmf/config.hpp"
#include "rmf/data.hpp"
#include "rmf/net.hpp"

namespace rmf {

/// One optimizer step. grad_cosine and pcgrad_applied are empty for single-loss objectives.
struct LogRow {
  std::uint64_t step = 0;
  int epoch = 0;
  double lr = 0.0;
  double l1 = 0.0;
  std::optional<double> l2;
  double total = 0.0;
  std::optional<double> grad_cosine;
  std::optional<bool> pcgrad_applied;
  double wallclock_ms = 0.0;
};

inline constexpr const char* kLogHeader = "step,epoch,lr,l1,l2,total,grad_cosine,pcgrad_applied,wallclock_ms";
std::string format_log_row(const LogRow& row);
/// Throws ParseError with the line number on malformed rows.
std::vector<LogRow> read_log(const std::string& path);

struct TrainOptions {
  /// Directory for checkpoints and train_log.csv; empty keeps everything in memory.
  std::string out_dir;
  bool resume = false;
  /// Called after every step (progress output, tests).
  std::function<void(const LogRow&)> on_step;
  /// Called after every epoch with the 1-based epoch count.
  std::function<void(int, const VelocityNet&)> on_epoch;
};

struct TrainResult {
  VelocityNet net;
  std::vector<LogRow> log;
  std::optional<double> best_val_mmd;
};

/// The training loop: per step make_batch, losses, backward, gradient combination
/// (PCGrad for rmf_mt and cfg), AdamW with cosine LR over epochs * ceil(n_train / batch).
/// Writes last.ckpt after every epoch and final.ckpt at the end when out_dir is set.
/// A NonFinite gradient saves the current (still finite) weights as last.ckpt and rethrows.
TrainResult train(const RunConfig& cfg, const Splits& data, const TrainOptions& opts = {});

}  // namespace rmf
