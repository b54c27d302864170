#pragma once

#include <vector>

#include "rmf/net.hpp"
#include "rmf/rng.hpp"

namespace rmf {

struct SamplePlan {
  int steps = 1;
  /// Explicit knots 0 = t_0 < ... < t_K = 1; empty means a uniform grid.
  std::vector<double> grid;
  /// Guidance scale; 0 is the plain conditional prediction.
  double omega = 0.0;
  int label = kNullLabel;

  std::vector<double> knots() const;
  void validate() const;
};

/// Interval sampler. Under NoiseToData: x <- Exp_x((t_{k+1} - t_k) u(x, t_k, t_{k+1}))
/// from a source draw at t = 0. Under DataToNoise the walk starts at t = 1 and
/// steps backward, x <- Exp_x(-(t_{k+1} - t_k) u(x, t_k, t_{k+1})) with x anchored
/// at t_{k+1}. With omega != 0 each velocity is (1 + omega) u(.|label) - omega u(.|null).
Mat sample_k_step(const VelocityNet& net, const SamplePlan& plan, int n, Rng& rng);

/// One network evaluation per sample; identical to sample_k_step with K = 1.
Mat sample_one_step(const VelocityNet& net, int n, Rng& rng, int label = kNullLabel);

/// Guided one-step sampling; throws UnconditionalNet for num_classes == 0.
Mat sample_cfg(const VelocityNet& net, int n, Rng& rng, int label, double omega);

/// Geodesic Euler on the instantaneous field u(x, t, t) with h = 1 / steps.
Mat sample_rfm_euler(const VelocityNet& net, int steps, int n, Rng& rng);

}  // namespace rmf
