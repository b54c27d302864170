#include "rmf/eval.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "rmf/error.hpp"
#include "rmf/parallel.hpp"

namespace rmf {
namespace {

// Sum over i of the kernel row sums; rows are computed in parallel and added in order.
double kernel_sum(const Manifold& m, const Mat& a, const Mat& b, double lambda, bool symmetric) {
  const int n = static_cast<int>(a.cols());
  std::vector<double> rows(n, 0.0);
  parallel_for(n, [&](int i) {
    double s = 0.0;
    if (symmetric) {
      for (int j = i + 1; j < n; ++j) {
        const double d = m.distance(a.col(i), b.col(j));
        s += 2.0 * std::exp(-lambda * d * d);
      }
      s += 1.0;
    } else {
      for (int j = 0; j < n; ++j) {
        const double d = m.distance(a.col(i), b.col(j));
        s += std::exp(-lambda * d * d);
      }
    }
    rows[i] = s;
  });
  double total = 0.0;
  for (double r : rows) total += r;
  return total;
}

}  // namespace

void MmdConfig::validate() const {
  if (!(lambda > 0.0)) throw Error(ErrorCode::InvalidArgument, "MMD lambda must be positive");
  if (max_points < 2) throw Error(ErrorCode::InvalidArgument, "MMD max_points must be >= 2");
}

double mmd2(const Manifold& m, const Mat& x, const Mat& y, double lambda) {
  if (x.rows() != m.ambient_dim() || y.rows() != m.ambient_dim()) {
    throw Error(ErrorCode::InvalidArgument, "MMD: point dimension does not match " + m.name());
  }
  if (x.cols() != y.cols()) throw Error(ErrorCode::InvalidArgument, "MMD: sets must have equal size");
  if (x.cols() < 2) throw Error(ErrorCode::InvalidArgument, "MMD: need at least 2 points per set");
  const double n = static_cast<double>(x.cols());
  const double kxx = kernel_sum(m, x, x, lambda, true);
  const double kyy = kernel_sum(m, y, y, lambda, true);
  const double kxy = kernel_sum(m, x, y, lambda, false);
  return (kxx + kyy - 2.0 * kxy) / (n * n);
}

Mat subsample(const Mat& x, int n, Rng& rng) {
  const int total = static_cast<int>(x.cols());
  if (n > total || n < 0) throw Error(ErrorCode::InvalidArgument, "subsample size exceeds the set");
  std::vector<int> idx(total);
  std::iota(idx.begin(), idx.end(), 0);
  Mat out(x.rows(), n);
  for (int i = 0; i < n; ++i) {
    const int j = i + static_cast<int>(rng.below(static_cast<std::uint64_t>(total - i)));
    std::swap(idx[i], idx[j]);
    out.col(i) = x.col(idx[i]);
  }
  return out;
}

double mmd_v(const Manifold& m, const Mat& x, const Mat& y, const MmdConfig& cfg) {
  cfg.validate();
  const int n = static_cast<int>(std::min<Eigen::Index>({x.cols(), y.cols(), cfg.max_points}));
  if (n < 2) throw Error(ErrorCode::InvalidArgument, "MMD: need at least 2 points per set");
  Rng rng_x = Rng::substream(cfg.seed, 0);
  Rng rng_y = Rng::substream(cfg.seed, 1);
  const Mat xs = x.cols() > n ? subsample(x, n, rng_x) : x;
  const Mat ys = y.cols() > n ? subsample(y, n, rng_y) : y;
  return std::sqrt(std::max(0.0, mmd2(m, xs, ys, cfg.lambda)));
}

CosineStats grad_cosine_stats(const std::vector<double>& cosines) {
  if (cosines.empty()) throw Error(ErrorCode::InvalidArgument, "no cosine values to summarize");
  CosineStats s;
  s.count = cosines.size();
  s.running_mean.reserve(cosines.size());
  double sum = 0.0;
  std::size_t negative = 0;
  for (std::size_t i = 0; i < cosines.size(); ++i) {
    sum += cosines[i];
    if (cosines[i] < 0.0) ++negative;
    s.running_mean.push_back(sum / static_cast<double>(i + 1));
  }
  s.mean = sum / static_cast<double>(s.count);
  s.fraction_negative = static_cast<double>(negative) / static_cast<double>(s.count);
  return s;
}

void mean_std(const std::vector<double>& v, double& mean, double& std) {
  mean = 0.0;
  std = 0.0;
  if (v.empty()) return;
  for (double x : v) mean += x;
  mean /= static_cast<double>(v.size());
  if (v.size() < 2) return;
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  std = std::sqrt(ss / static_cast<double>(v.size() - 1));
}

EvalReport eval_run(const VelocityNet& net, const Mat& test_set, const EvalOptions& opts) {
  if (test_set.cols() < 2) throw Error(ErrorCode::InvalidArgument, "eval: test set needs >= 2 points");
  if (opts.seeds.empty() || opts.steps.empty()) {
    throw Error(ErrorCode::InvalidArgument, "eval: seed and step lists must be nonempty");
  }
  EvalReport report;
  report.n = static_cast<int>(std::min<Eigen::Index>(
      {static_cast<Eigen::Index>(opts.n_samples), test_set.cols(), opts.mmd.max_points}));
  for (int k : opts.steps) {
    std::vector<double> values;
    for (std::uint64_t seed : opts.seeds) {
      SamplePlan plan;
      plan.steps = k;
      plan.label = opts.label;
      plan.omega = opts.omega;
      Rng rng(seed);
      const Mat samples = sample_k_step(net, plan, report.n, rng);
      MmdConfig mc = opts.mmd;
      mc.seed = seed;
      const double v = mmd_v(net.manifold(), samples, test_set, mc);
      report.rows.push_back({k, seed, v});
      values.push_back(v);
    }
    EvalSummary s;
    s.steps = k;
    mean_std(values, s.mean, s.std);
    report.summary.push_back(s);
  }
  return report;
}

}  // namespace rmf
