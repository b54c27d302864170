#pragma once

#include <vector>

#include "rmf/geometry.hpp"
#include "rmf/net.hpp"
#include "rmf/rng.hpp"

namespace rmf {

struct TimeSampler {
  /// Probability of forcing r = t.
  double p_eq = 0.75;
  /// Upper clamp on t keeps kappa(t) away from 0.
  double t_max = 1.0 - 1e-4;

  /// t ~ U(0, t_max), r ~ U(0, t), then r = t with probability p_eq.
  void draw(Rng& rng, double& r, double& t) const;
};

/// Path endpoints follow the interpolation convention: x_t = Exp_{x1}(kappa(t) Log_{x1}(x0)).
/// Under NoiseToData x0 is the source draw and x1 the data; under DataToNoise the
/// roles swap.
struct TrainBatch {
  Mat x0;
  Mat x1;
  Vec r;
  Vec t;
  /// One entry per column (kNullLabel for none), or empty for unconditional runs.
  std::vector<int> labels;
  Mat xt;
  Mat xdot;

  int size() const { return static_cast<int>(xt.cols()); }
};

/// Builds a batch from data columns. Pairs on the cut locus get a fresh source
/// draw (up to 100 tries per row, then CutLocus).
TrainBatch make_batch(const Manifold& m, const Mat& data, const std::vector<int>& labels, Rng& rng,
                      const TimeSampler& sampler, const Schedule& schedule = {},
                      TimeOrientation orientation = TimeOrientation::DataToNoise);

/// Fills x_t and xdot from x0, x1, t.
void complete_batch(const Manifold& m, TrainBatch& b, const Schedule& schedule = {});

/// A scalar loss seen from the network output: value and dL/du.
struct LossGraph {
  double value = 0.0;
  Mat grad_u;
};

/// Decomposed objective sharing one recorded forward at (x_t, r, t).
struct RmfTerms {
  Tape tape;
  Mat u;
  Mat xi;  ///< detached JVP along (xdot, 0, 1)
  LossGraph l1;
  LossGraph l2;
};

struct SingleLoss {
  Tape tape;
  LossGraph loss;
};

/// l1 = mean |u - xdot|_g^2, l2 = mean 2 <u, (t - r) sg(xi)>_g.
RmfTerms rmf_losses(const VelocityNet& net, const TrainBatch& batch);

/// mean |u - sg(xdot - (t - r) xi)|_g^2.
SingleLoss rmf_direct_loss(const VelocityNet& net, const TrainBatch& batch);

/// Replaces each label by kNullLabel with probability p_drop.
std::vector<int> drop_labels(const std::vector<int>& labels, double p_drop, Rng& rng);

/// rmf_losses after label dropout; throws UnconditionalNet for num_classes == 0.
RmfTerms cfg_losses(const VelocityNet& net, TrainBatch batch, double p_drop, Rng& rng);

/// s = alpha r + (1 - alpha) t; target = alpha v(x_s, s) + (1 - alpha) sg(u(x_s, r, s));
/// loss = mean |u(x_t, r, t) - target|_g^2 / alpha.
SingleLoss alpha_rmf_loss(const VelocityNet& net, const TrainBatch& batch, double alpha,
                          const Schedule& schedule = {});

/// Direct loss with the JVP direction u(x_t, t, t) in place of xdot.
SingleLoss imf_loss(const VelocityNet& net, const TrainBatch& batch);

/// mean |u(x_t, t, t) - xdot|_g^2.
SingleLoss rfm_loss(const VelocityNet& net, const TrainBatch& batch);

struct PcgradResult {
  Vec g;
  double cosine = 0.0;
  bool applied = false;
};

/// Projects each gradient off the other when <g1, g2> < 0, then sums.
PcgradResult pcgrad_combine(const Vec& g1, const Vec& g2, double eps = 1e-12);

/// One half of the surgery: g with its component along `other` removed when they conflict.
Vec pcgrad_project(const Vec& g, const Vec& other, double eps = 1e-12);

/// Cosine similarity, 0 when either vector is zero.
double cosine_similarity(const Vec& a, const Vec& b);

}  // namespace rmf
