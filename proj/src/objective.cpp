#include "rmf/objective.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "rmf/error.hpp"

namespace rmf {
namespace {

constexpr int kCutLocusRetries = 100;

void check_finite(double v, const char* what) {
  if (!std::isfinite(v)) throw Error(ErrorCode::NonFinite, std::string(what) + " is not finite");
}

// Mean squared metric norm of (u - target) and its gradient w.r.t. u.
LossGraph mean_sq_loss(const Manifold& m, const Mat& u, const Mat& target, double scale = 1.0) {
  const double b = static_cast<double>(u.cols());
  const double s = m.metric_scale();
  LossGraph g;
  const Mat diff = u - target;
  g.value = scale * s * diff.squaredNorm() / b;
  g.grad_u = (2.0 * scale * s / b) * diff;
  check_finite(g.value, "loss");
  return g;
}

Mat weight_columns(const Mat& v, const Vec& w) {
  Mat out = v;
  for (Eigen::Index j = 0; j < v.cols(); ++j) out.col(j) *= w(j);
  return out;
}

}  // namespace

void TimeSampler::draw(Rng& rng, double& r, double& t) const {
  t = rng.uniform(0.0, t_max);
  r = rng.uniform(0.0, t);
  if (rng.bernoulli(p_eq)) r = t;
}

void complete_batch(const Manifold& m, TrainBatch& b, const Schedule& schedule) {
  const int n = static_cast<int>(b.x0.cols());
  b.xt.resize(m.ambient_dim(), n);
  b.xdot.resize(m.ambient_dim(), n);
  for (int j = 0; j < n; ++j) {
    b.xt.col(j) = m.interpolate(b.x0.col(j), b.x1.col(j), schedule.kappa(b.t(j)));
    b.xdot.col(j) = path_velocity(m, b.xt.col(j), b.x1.col(j), b.t(j), schedule);
  }
}

TrainBatch make_batch(const Manifold& m, const Mat& data, const std::vector<int>& labels, Rng& rng,
                      const TimeSampler& sampler, const Schedule& schedule,
                      TimeOrientation orientation) {
  const int n = static_cast<int>(data.cols());
  if (n == 0) throw Error(ErrorCode::InvalidArgument, "make_batch: empty data batch");
  if (data.rows() != m.ambient_dim()) {
    throw Error(ErrorCode::InvalidArgument, "make_batch: data dimension does not match " + m.name());
  }
  if (!labels.empty() && static_cast<int>(labels.size()) != n) {
    throw Error(ErrorCode::InvalidArgument, "make_batch: label count does not match the data");
  }
  if (!(sampler.p_eq >= 0.0 && sampler.p_eq <= 1.0)) {
    throw Error(ErrorCode::InvalidArgument, "p_eq must lie in [0, 1]");
  }
  const bool data_first = orientation == TimeOrientation::DataToNoise;
  TrainBatch b;
  b.x0.resize(m.ambient_dim(), n);
  b.x1.resize(m.ambient_dim(), n);
  b.r.resize(n);
  b.t.resize(n);
  b.labels = labels;
  b.xt.resize(m.ambient_dim(), n);
  b.xdot.resize(m.ambient_dim(), n);
  for (int j = 0; j < n; ++j) {
    double r, t;
    sampler.draw(rng, r, t);
    b.r(j) = r;
    b.t(j) = t;
    for (int attempt = 0;; ++attempt) {
      const Vec noise = m.random_point(rng);
      b.x0.col(j) = data_first ? Vec(data.col(j)) : noise;
      b.x1.col(j) = data_first ? noise : Vec(data.col(j));
      try {
        b.xt.col(j) = m.interpolate(b.x0.col(j), b.x1.col(j), schedule.kappa(t));
        b.xdot.col(j) = path_velocity(m, b.xt.col(j), b.x1.col(j), t, schedule);
        break;
      } catch (const Error& e) {
        if (e.code() != ErrorCode::CutLocus || attempt + 1 >= kCutLocusRetries) throw;
      }
    }
  }
  return b;
}

RmfTerms rmf_losses(const VelocityNet& net, const TrainBatch& batch) {
  RmfTerms out;
  JvpOutput j = net.jvp(batch.xt, batch.r, batch.t, batch.labels, batch.xdot, 0.0, 1.0, &out.tape);
  out.u = std::move(j.u);
  out.xi = std::move(j.xi);
  const Manifold& m = net.manifold();
  const double b = static_cast<double>(batch.size());
  const double s = m.metric_scale();
  out.l1 = mean_sq_loss(m, out.u, batch.xdot);
  const Mat w = weight_columns(out.xi, batch.t - batch.r);
  out.l2.value = 2.0 * s * (out.u.cwiseProduct(w)).sum() / b;
  out.l2.grad_u = (2.0 * s / b) * w;
  check_finite(out.l2.value, "l2");
  return out;
}

SingleLoss rmf_direct_loss(const VelocityNet& net, const TrainBatch& batch) {
  SingleLoss out;
  JvpOutput j = net.jvp(batch.xt, batch.r, batch.t, batch.labels, batch.xdot, 0.0, 1.0, &out.tape);
  const Mat target = batch.xdot - weight_columns(j.xi, batch.t - batch.r);
  out.loss = mean_sq_loss(net.manifold(), j.u, target);
  return out;
}

std::vector<int> drop_labels(const std::vector<int>& labels, double p_drop, Rng& rng) {
  if (!(p_drop >= 0.0 && p_drop <= 1.0)) throw Error(ErrorCode::InvalidArgument, "p_drop must lie in [0, 1]");
  std::vector<int> out = labels;
  for (int& c : out) {
    if (rng.bernoulli(p_drop)) c = kNullLabel;
  }
  return out;
}

RmfTerms cfg_losses(const VelocityNet& net, TrainBatch batch, double p_drop, Rng& rng) {
  if (net.config().num_classes == 0) {
    throw Error(ErrorCode::UnconditionalNet, "CFG training needs a conditional net");
  }
  if (batch.labels.empty()) batch.labels.assign(batch.size(), kNullLabel);
  batch.labels = drop_labels(batch.labels, p_drop, rng);
  return rmf_losses(net, batch);
}

SingleLoss alpha_rmf_loss(const VelocityNet& net, const TrainBatch& batch, double alpha,
                          const Schedule& schedule) {
  if (!(alpha > 0.0 && alpha <= 1.0)) throw Error(ErrorCode::InvalidArgument, "alpha must lie in (0, 1]");
  const Manifold& m = net.manifold();
  const int n = batch.size();
  Vec s = alpha * batch.r + (1.0 - alpha) * batch.t;
  Mat xs(m.ambient_dim(), n), vs(m.ambient_dim(), n);
  for (int j = 0; j < n; ++j) {
    xs.col(j) = m.interpolate(batch.x0.col(j), batch.x1.col(j), schedule.kappa(s(j)));
    vs.col(j) = path_velocity(m, xs.col(j), batch.x1.col(j), s(j), schedule);
  }
  Mat target = alpha * vs;
  if (alpha < 1.0) target += (1.0 - alpha) * net.forward(xs, batch.r, s, batch.labels);
  SingleLoss out;
  const Mat u = net.forward(batch.xt, batch.r, batch.t, batch.labels, &out.tape);
  out.loss = mean_sq_loss(m, u, target, 1.0 / alpha);
  return out;
}

SingleLoss imf_loss(const VelocityNet& net, const TrainBatch& batch) {
  const Mat direction = net.forward(batch.xt, batch.t, batch.t, batch.labels);
  SingleLoss out;
  JvpOutput j = net.jvp(batch.xt, batch.r, batch.t, batch.labels, direction, 0.0, 1.0, &out.tape);
  const Mat target = batch.xdot - weight_columns(j.xi, batch.t - batch.r);
  out.loss = mean_sq_loss(net.manifold(), j.u, target);
  return out;
}

SingleLoss rfm_loss(const VelocityNet& net, const TrainBatch& batch) {
  SingleLoss out;
  const Mat u = net.forward(batch.xt, batch.t, batch.t, batch.labels, &out.tape);
  out.loss = mean_sq_loss(net.manifold(), u, batch.xdot);
  return out;
}

double cosine_similarity(const Vec& a, const Vec& b) {
  const double na = a.norm(), nb = b.norm();
  if (na == 0.0 || nb == 0.0) return 0.0;
  return std::clamp(a.dot(b) / (na * nb), -1.0, 1.0);
}

PcgradResult pcgrad_combine(const Vec& g1, const Vec& g2, double eps) {
  if (g1.size() != g2.size()) throw Error(ErrorCode::InvalidArgument, "pcgrad: gradient lengths differ");
  if (!(eps > 0.0)) throw Error(ErrorCode::InvalidArgument, "pcgrad: eps must be positive");
  PcgradResult out;
  out.cosine = cosine_similarity(g1, g2);
  const double dot = g1.dot(g2);
  if (!(dot < 0.0)) {
    out.g = g1 + g2;
    return out;
  }
  out.applied = true;
  out.g = pcgrad_project(g1, g2, eps) + pcgrad_project(g2, g1, eps);
  return out;
}

Vec pcgrad_project(const Vec& g, const Vec& other, double eps) {
  if (g.size() != other.size()) throw Error(ErrorCode::InvalidArgument, "pcgrad: gradient lengths differ");
  const double dot = g.dot(other);
  if (!(dot < 0.0)) return g;
  const double n2 = other.squaredNorm() + eps;
  Vec p = g - (dot / n2) * other;
  // When g is nearly antiparallel the subtraction cancels and leaves a residual
  // component along `other` of order ulp(|g|); a second pass removes it.
  const double residual = p.dot(other);
  if (residual < 0.0) p -= (residual / n2) * other;
  return p;
}

}  // namespace rmf
