#pragma once

#include <cstdint>
#include <vector>

#include "rmf/geometry.hpp"
#include "rmf/net.hpp"
#include "rmf/sampler.hpp"

namespace rmf {

struct MmdConfig {
  /// Kernel k(x, y) = exp(-lambda d(x, y)^2).
  double lambda = 1.0;
  /// Sets larger than this (or than the other set) are subsampled.
  int max_points = 10000;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Biased (V-statistic) MMD^2 of two equal-size sets, before clamping.
double mmd2(const Manifold& m, const Mat& x, const Mat& y, double lambda);

/// sqrt(max(0, MMD^2)) after seeded subsampling of both sets to
/// n = min(|x|, |y|, max_points).
double mmd_v(const Manifold& m, const Mat& x, const Mat& y, const MmdConfig& cfg);

/// Seeded choice of n distinct columns (order follows a partial Fisher-Yates shuffle).
Mat subsample(const Mat& x, int n, Rng& rng);

struct CosineStats {
  std::size_t count = 0;
  double mean = 0.0;
  double fraction_negative = 0.0;
  /// Cumulative mean after each iteration.
  std::vector<double> running_mean;
};

/// Empty input is InvalidArgument.
CosineStats grad_cosine_stats(const std::vector<double>& cosines);

struct EvalRow {
  int steps = 1;
  std::uint64_t seed = 0;
  double mmd = 0.0;
};

struct EvalSummary {
  int steps = 1;
  double mean = 0.0;
  /// Sample standard deviation over seeds; 0 for a single seed.
  double std = 0.0;
};

struct EvalReport {
  int n = 0;
  std::vector<EvalRow> rows;
  std::vector<EvalSummary> summary;
};

struct EvalOptions {
  int n_samples = 10000;
  std::vector<int> steps = {1};
  std::vector<std::uint64_t> seeds = {0, 1, 2, 3, 4};
  int label = kNullLabel;
  double omega = 0.0;
  MmdConfig mmd;
};

/// For every K in opts.steps and every seed: sample with that seed, then MMD against
/// the test set. Summary rows follow the order of opts.steps.
EvalReport eval_run(const VelocityNet& net, const Mat& test_set, const EvalOptions& opts);

/// Mean and sample standard deviation (0 when fewer than two values).
void mean_std(const std::vector<double>& v, double& mean, double& std);

}  // namespace rmf
