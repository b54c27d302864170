#include "rmf/sampler.hpp"

#include <string>

#include "rmf/error.hpp"

namespace rmf {
namespace {

void check_n(int n) {
  if (n < 1) throw Error(ErrorCode::InvalidArgument, "sample count must be >= 1");
}

Mat velocity(const VelocityNet& net, const Mat& x, double r, double t, int label, double omega) {
  const int n = static_cast<int>(x.cols());
  const Vec rv = Vec::Constant(n, r), tv = Vec::Constant(n, t);
  std::vector<int> labels;
  if (label != kNullLabel) labels.assign(n, label);
  Mat u = net.forward(x, rv, tv, labels);
  if (omega != 0.0) {
    const Mat u_null = net.forward(x, rv, tv, {});
    u = (1.0 + omega) * u - omega * u_null;
  }
  if (!u.allFinite()) throw Error(ErrorCode::NonFinite, "network produced a non-finite velocity");
  return u;
}

void step(const Manifold& m, Mat& x, const Mat& u, double scale) {
  for (Eigen::Index j = 0; j < x.cols(); ++j) x.col(j) = m.exp(x.col(j), scale * u.col(j));
}

}  // namespace

std::vector<double> SamplePlan::knots() const {
  if (!grid.empty()) return grid;
  std::vector<double> k(static_cast<std::size_t>(steps) + 1);
  for (int i = 0; i <= steps; ++i) k[i] = static_cast<double>(i) / steps;
  return k;
}

void SamplePlan::validate() const {
  if (steps < 1) throw Error(ErrorCode::InvalidArgument, "steps must be >= 1");
  if (!(omega >= 0.0)) throw Error(ErrorCode::InvalidArgument, "guidance scale must be >= 0");
  if (grid.empty()) return;
  if (static_cast<int>(grid.size()) != steps + 1) {
    throw Error(ErrorCode::InvalidArgument, "grid needs steps + 1 knots");
  }
  if (grid.front() != 0.0 || grid.back() != 1.0) {
    throw Error(ErrorCode::InvalidArgument, "grid must start at 0 and end at 1");
  }
  for (std::size_t i = 1; i < grid.size(); ++i) {
    if (!(grid[i] > grid[i - 1])) throw Error(ErrorCode::InvalidArgument, "grid knots must increase");
  }
}

Mat sample_k_step(const VelocityNet& net, const SamplePlan& plan, int n, Rng& rng) {
  plan.validate();
  check_n(n);
  if (plan.label != kNullLabel && net.config().num_classes == 0) {
    throw Error(ErrorCode::UnconditionalNet, "label given for an unconditional net");
  }
  const Manifold& m = net.manifold();
  const std::vector<double> k = plan.knots();
  const int steps = plan.steps;
  Mat x = m.random_uniform(n, rng);
  if (net.config().orientation == TimeOrientation::NoiseToData) {
    for (int i = 0; i < steps; ++i) {
      step(m, x, velocity(net, x, k[i], k[i + 1], plan.label, plan.omega), k[i + 1] - k[i]);
    }
  } else {
    for (int i = steps; i > 0; --i) {
      step(m, x, velocity(net, x, k[i - 1], k[i], plan.label, plan.omega), -(k[i] - k[i - 1]));
    }
  }
  return x;
}

Mat sample_one_step(const VelocityNet& net, int n, Rng& rng, int label) {
  SamplePlan plan;
  plan.label = label;
  return sample_k_step(net, plan, n, rng);
}

Mat sample_cfg(const VelocityNet& net, int n, Rng& rng, int label, double omega) {
  if (net.config().num_classes == 0) {
    throw Error(ErrorCode::UnconditionalNet, "guided sampling needs a conditional net");
  }
  SamplePlan plan;
  plan.label = label;
  plan.omega = omega;
  return sample_k_step(net, plan, n, rng);
}

Mat sample_rfm_euler(const VelocityNet& net, int steps, int n, Rng& rng) {
  if (steps < 1) throw Error(ErrorCode::InvalidArgument, "steps must be >= 1");
  check_n(n);
  const Manifold& m = net.manifold();
  const double h = 1.0 / steps;
  Mat x = m.random_uniform(n, rng);
  const bool forward = net.config().orientation == TimeOrientation::NoiseToData;
  for (int i = 0; i < steps; ++i) {
    const double t = forward ? i * h : 1.0 - i * h;
    step(m, x, velocity(net, x, t, t, kNullLabel, 0.0), forward ? h : -h);
  }
  return x;
}

}  // namespace rmf
