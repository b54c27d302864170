#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "rmf/data.hpp"
#include "rmf/eval.hpp"
#include "rmf/net.hpp"
#include "rmf/sampler.hpp"

namespace rmf {

enum class Objective { RmfMt, RmfSum, RmfDirect, AlphaRmf, Imf, Rfm, Cfg };

std::string to_string(Objective o);
Objective parse_objective(std::string_view text);

struct TrainConfig {
  int epochs = 700;
  int batch_size = 4096;
  double lr = 5e-4;
  double weight_decay = 0.01;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double p_eq = 0.75;
  std::uint64_t seed = 0;
  std::string schedule = "linear";
  /// Objective parameters: alpha for alpha_rmf, p_drop for cfg.
  double alpha = 0.5;
  double p_drop = 0.1;
  /// Keep best.ckpt by validation 1-NFE MMD (checked once per epoch).
  bool track_val = false;
  int val_samples = 1000;
};

struct EvalConfig {
  MmdConfig mmd;
  std::vector<std::uint64_t> seeds = {0, 1, 2, 3, 4};
  std::vector<int> steps = {1};
  int n_samples = 10000;
};

struct RunConfig {
  DatasetSpec dataset;
  NetConfig net;
  Objective objective = Objective::RmfMt;
  TrainConfig train;
  SamplePlan sample;
  EvalConfig eval;
  std::string output_dir = "runs/default";

  void validate() const;
};

/// Architecture and optimizer defaults for a manifold (hidden/layers/batch/epochs/p_eq).
void apply_manifold_defaults(const Manifold& m, NetConfig& net, TrainConfig& train);

/// Dataset first, then per-manifold defaults, then the remaining user keys.
/// Unknown keys and type errors raise ConfigError naming the key and its line in
/// `source_text` when that is given.
RunConfig run_config_from_json(const nlohmann::json& j, std::string_view source_text = {});

/// Reads and parses a JSON config file. Syntax errors report the line number.
RunConfig load_run_config(const std::string& path);

/// Fully defaulted form; run_config_from_json(to_json(c)) == c.
nlohmann::json to_json(const RunConfig& c);

}  // namespace rmf
