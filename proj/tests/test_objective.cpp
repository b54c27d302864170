#include <doctest.h>

#include <cmath>

#include "rmf/error.hpp"
#include "rmf/objective.hpp"
#include "support.hpp"

using namespace rmf;
using namespace rmf::test;

namespace {

TrainBatch batch_for(const Manifold& m, int n, std::uint64_t seed, double p_eq = 0.3,
                     TimeOrientation o = TimeOrientation::NoiseToData) {
  Rng rng(seed);
  const Mat data = m.random_uniform(n, rng);
  return make_batch(m, data, {}, rng, TimeSampler{p_eq}, {}, o);
}

// Per-row loops over the definitions; independent of the vectorized code.
struct Oracle {
  double l1 = 0, l2 = 0, direct = 0;
};

Oracle brute_force(const VelocityNet& net, const TrainBatch& b, const std::vector<int>& labels = {}) {
  const Manifold& m = net.manifold();
  Oracle o;
  for (int j = 0; j < b.size(); ++j) {
    const Mat x = b.xt.col(j);
    const Vec r = b.r.segment(j, 1), t = b.t.segment(j, 1);
    std::vector<int> lab;
    if (!labels.empty()) lab = {labels[j]};
    const JvpOutput out = net.jvp(x, r, t, lab, b.xdot.col(j), 0.0, 1.0);
    const Vec u = out.u.col(0), xi = out.xi.col(0), xd = b.xdot.col(j);
    const double dt = b.t(j) - b.r(j);
    o.l1 += m.inner(u - xd, u - xd);
    o.l2 += 2.0 * m.inner(u, dt * xi);
    const Vec target = xd - dt * xi;
    o.direct += m.inner(u - target, u - target);
  }
  o.l1 /= b.size();
  o.l2 /= b.size();
  o.direct /= b.size();
  return o;
}

}  // namespace

TEST_CASE("time sampler") {
  Rng rng(0);
  TimeSampler s{1.0};
  for (int i = 0; i < 1000; ++i) {
    double r, t;
    s.draw(rng, r, t);
    CHECK(r == t);
    CHECK(t <= 1.0 - 1e-4);
  }
  s.p_eq = 0.0;
  int equal = 0;
  for (int i = 0; i < 1000; ++i) {
    double r, t;
    s.draw(rng, r, t);
    CHECK(r <= t);
    CHECK(t >= 0.0);
    equal += r == t;
  }
  CHECK(equal == 0);
}

TEST_CASE("make_batch on Euclidean is affine interpolation") {
  const Manifold m = Manifold::euclidean(3);
  const TrainBatch b = batch_for(m, 50, 3);
  for (int j = 0; j < 50; ++j) {
    const double t = b.t(j);
    CHECK((b.xt.col(j) - ((1 - t) * b.x0.col(j) + t * b.x1.col(j))).norm() < 1e-12);
    CHECK((b.xdot.col(j) - (b.x1.col(j) - b.x0.col(j))).norm() < 1e-11);
  }
}

TEST_CASE("make_batch invariants on every manifold") {
  for (const Manifold& m : all_manifolds()) {
    for (TimeOrientation o : {TimeOrientation::NoiseToData, TimeOrientation::DataToNoise}) {
      Rng rng(4);
      const Mat data = m.random_uniform(40, rng);
      const TrainBatch b = make_batch(m, data, {}, rng, TimeSampler{0.5}, {}, o);
      const Mat& data_side = o == TimeOrientation::NoiseToData ? b.x1 : b.x0;
      CHECK(data_side == data);
      for (int j = 0; j < 40; ++j) {
        CHECK(b.r(j) <= b.t(j));
        CHECK(m.distance(b.xt.col(j), m.interpolate(b.x0.col(j), b.x1.col(j), 1.0 - b.t(j))) <= 1e-8);
        CHECK(m.is_tangent(b.xt.col(j), b.xdot.col(j)));
      }
    }
  }
}

TEST_CASE("make_batch validates input") {
  const Manifold m = Manifold::sphere(3);
  Rng rng(1);
  CHECK_THROWS_AS(make_batch(m, Mat(3, 0), {}, rng, {}), Error);
  CHECK_THROWS_AS(make_batch(m, Mat::Zero(4, 2), {}, rng, {}), Error);
  CHECK_THROWS_AS(make_batch(m, m.random_uniform(2, rng), {0}, rng, {}), Error);
}

TEST_CASE("losses match the per-row oracle") {
  for (const Manifold& m : all_manifolds()) {
    const VelocityNet net = tiny_net(m, 3);
    const TrainBatch b = batch_for(m, 9, 7);
    const RmfTerms terms = rmf_losses(net, b);
    const Oracle o = brute_force(net, b);
    CAPTURE(m.name());
    CHECK(rel_err(terms.l1.value, o.l1) < 1e-12);
    CHECK(rel_err(terms.l2.value, o.l2) < 1e-12);
    CHECK(rel_err(rmf_direct_loss(net, b).loss.value, o.direct) < 1e-12);
  }
}

TEST_CASE("r == t zeroes l2 and the direct loss reduces to l1") {
  const Manifold m = Manifold::so3();
  const VelocityNet net = tiny_net(m, 5);
  const TrainBatch b = batch_for(m, 6, 2, 1.0);
  const RmfTerms terms = rmf_losses(net, b);
  CHECK(terms.l2.value == 0.0);
  CHECK(rmf_direct_loss(net, b).loss.value == doctest::Approx(terms.l1.value).epsilon(1e-14));
  CHECK(rfm_loss(net, b).loss.value == doctest::Approx(terms.l1.value).epsilon(1e-14));
}

TEST_CASE("zero net: direct loss is mean |xdot|^2") {
  const Manifold m = Manifold::sphere(3);
  const VelocityNet net = zero_net(m);
  const TrainBatch b = batch_for(m, 10, 9);
  double expect = 0;
  for (int j = 0; j < 10; ++j) expect += m.inner(b.xdot.col(j), b.xdot.col(j));
  CHECK(rmf_direct_loss(net, b).loss.value == doctest::Approx(expect / 10).epsilon(1e-13));
}

TEST_CASE("decomposed and direct gradients agree") {
  for (const Manifold& m : all_manifolds()) {
    const VelocityNet net = tiny_net(m, 6);
    const TrainBatch b = batch_for(m, 12, 8);
    const RmfTerms terms = rmf_losses(net, b);
    const Vec g = net.backward(terms.tape, terms.l1.grad_u) + net.backward(terms.tape, terms.l2.grad_u);
    const SingleLoss d = rmf_direct_loss(net, b);
    const Vec gd = net.backward(d.tape, d.loss.grad_u);
    CHECK(rel_err(g, gd) < 1e-8);
  }
}

TEST_CASE("stop-gradient: perturbing xi changes l2 but not the parameter path through it") {
  const Manifold m = Manifold::euclidean(3);
  VelocityNet net = tiny_net(m, 13);
  const TrainBatch b = batch_for(m, 5, 1, 0.0);
  const RmfTerms terms = rmf_losses(net, b);
  const Vec g = net.backward(terms.tape, terms.l2.grad_u);
  // FD of <u(theta), w> with w = (t - r) xi held fixed
  const Mat w = terms.l2.grad_u;
  Vec& p = net.parameters();
  const Eigen::Index i = 4;
  const double keep = p(i), h = 1e-6;
  p(i) = keep + h;
  const double up = net.forward(b.xt, b.r, b.t).cwiseProduct(w).sum();
  p(i) = keep - h;
  const double down = net.forward(b.xt, b.r, b.t).cwiseProduct(w).sum();
  p(i) = keep;
  CHECK(g(i) == doctest::Approx((up - down) / (2 * h)).epsilon(1e-6));
}

TEST_CASE("losses are permutation invariant") {
  const Manifold m = Manifold::torus(2);
  const VelocityNet net = tiny_net(m, 2);
  TrainBatch b = batch_for(m, 8, 5);
  const RmfTerms a = rmf_losses(net, b);
  TrainBatch p = b;
  for (int j = 0; j < 8; ++j) {
    const int k = 7 - j;
    p.x0.col(j) = b.x0.col(k);
    p.x1.col(j) = b.x1.col(k);
    p.xt.col(j) = b.xt.col(k);
    p.xdot.col(j) = b.xdot.col(k);
    p.r(j) = b.r(k);
    p.t(j) = b.t(k);
  }
  const RmfTerms c = rmf_losses(net, p);
  CHECK(rel_err(a.l1.value, c.l1.value) < 1e-13);
  CHECK(rel_err(a.l2.value, c.l2.value) < 1e-13);
}

TEST_CASE("SO3 losses use the half-trace metric") {
  const Manifold m = Manifold::so3();
  const VelocityNet net = tiny_net(m, 4);
  const TrainBatch b = batch_for(m, 4, 3);
  const RmfTerms t = rmf_losses(net, b);
  const double frob = (t.u - b.xdot).squaredNorm() / 4;
  CHECK(t.l1.value == doctest::Approx(0.5 * frob).epsilon(1e-14));
}

TEST_CASE("pcgrad hand cases") {
  SUBCASE("orthogonal: no projection") {
    const PcgradResult r = pcgrad_combine(Eigen::Vector2d(1, 0), Eigen::Vector2d(0, 1));
    CHECK(r.g == Vec(Eigen::Vector2d(1, 1)));
    CHECK_FALSE(r.applied);
    CHECK(r.cosine == 0.0);
  }
  SUBCASE("conflict") {
    const PcgradResult r = pcgrad_combine(Eigen::Vector2d(1, 0), Eigen::Vector2d(-1, 1));
    CHECK(r.applied);
    CHECK(r.g(0) == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(r.g(1) == doctest::Approx(1.5).epsilon(1e-12));
    CHECK(r.cosine == doctest::Approx(-1 / std::sqrt(2.0)));
  }
  SUBCASE("opposite") {
    const PcgradResult r = pcgrad_combine(Eigen::Vector2d(2, -1), Eigen::Vector2d(-2, 1));
    CHECK(r.g.norm() < 1e-11);
  }
  SUBCASE("zero vectors pass through") {
    const PcgradResult r = pcgrad_combine(Vec::Zero(3), Vec::Zero(3));
    CHECK(r.g == Vec::Zero(3));
    CHECK_FALSE(r.applied);
  }
  SUBCASE("aligned is a bitwise sum") {
    Rng rng(1);
    Vec a(5), b(5);
    for (int i = 0; i < 5; ++i) {
      a(i) = rng.normal();
      b(i) = a(i) + 0.1 * rng.normal();
    }
    CHECK(pcgrad_combine(a, b).g == Vec(a + b));
  }
}

TEST_CASE("cfg dropout") {
  const Manifold m = Manifold::sphere(3);
  const VelocityNet net = tiny_net(m, 3, 6, 2);
  Rng rng(2);
  const Mat data = m.random_uniform(6, rng);
  const std::vector<int> labels = {0, 1, 0, 1, 1, 0};
  const TrainBatch b = make_batch(m, data, labels, rng, TimeSampler{0.2});

  Rng d0(5);
  CHECK(drop_labels(labels, 0.0, d0) == labels);
  Rng d1(5);
  CHECK(drop_labels(labels, 1.0, d1) == std::vector<int>(6, kNullLabel));

  Rng a(9);
  const RmfTerms all_null = cfg_losses(net, b, 1.0, a);
  TrainBatch nb = b;
  nb.labels.clear();
  const RmfTerms uncond = rmf_losses(net, nb);
  CHECK(all_null.l1.value == uncond.l1.value);
  CHECK(all_null.l2.value == uncond.l2.value);

  Rng c1(3), c2(3);
  const std::vector<int> mask = drop_labels(labels, 0.5, c1);
  const RmfTerms with_mask = cfg_losses(net, b, 0.5, c2);
  const Oracle o = brute_force(net, b, mask);
  CHECK(rel_err(with_mask.l1.value, o.l1) < 1e-12);
  CHECK(rel_err(with_mask.l2.value, o.l2) < 1e-12);

  const VelocityNet plain = tiny_net(m, 3);
  Rng z(0);
  try {
    cfg_losses(plain, b, 0.1, z);
    FAIL("expected UnconditionalNet");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::UnconditionalNet);
  }
}

TEST_CASE("alpha rmf") {
  const Manifold e = Manifold::euclidean(2);
  const VelocityNet net = tiny_net(e, 17);
  Rng rng(3);
  const Mat data = e.random_uniform(1, rng);
  TrainBatch b = make_batch(e, data, {}, rng, TimeSampler{0.0});

  SUBCASE("alpha = 1 regresses the path velocity at r") {
    const SingleLoss l = alpha_rmf_loss(net, b, 1.0);
    const Vec u = net.forward(b.xt, b.r, b.t);
    const Vec v = b.x1.col(0) - b.x0.col(0);
    CHECK(l.loss.value == doctest::Approx((u - v).squaredNorm()).epsilon(1e-13));
  }
  SUBCASE("alpha = 0.5 hand evaluation") {
    const double r = b.r(0), t = b.t(0), s = 0.5 * r + 0.5 * t;
    const Vec xs = (1 - s) * b.x0.col(0) + s * b.x1.col(0);
    const Vec us = net.forward(xs, b.r, Vec::Constant(1, s));
    const Vec target = 0.5 * (b.x1.col(0) - b.x0.col(0)) + 0.5 * us;
    const Vec u = net.forward(b.xt, b.r, b.t);
    CHECK(alpha_rmf_loss(net, b, 0.5).loss.value == doctest::Approx((u - target).squaredNorm() / 0.5).epsilon(1e-12));
  }
  SUBCASE("point mass: loss is mean |u|^2") {
    b.x1 = b.x0;
    complete_batch(e, b);
    const Vec u = net.forward(b.xt, b.r, b.t);
    CHECK(alpha_rmf_loss(net, b, 1.0).loss.value == doctest::Approx(u.squaredNorm()).epsilon(1e-13));
  }
  CHECK_THROWS_AS(alpha_rmf_loss(net, b, 0.0), Error);
}

TEST_CASE("imf loss") {
  const Manifold m = Manifold::sphere(3);
  const VelocityNet net = tiny_net(m, 19);
  const TrainBatch b = batch_for(m, 5, 4, 0.0);
  double expect = 0;
  for (int j = 0; j < 5; ++j) {
    const Mat x = b.xt.col(j);
    const Vec r = b.r.segment(j, 1), t = b.t.segment(j, 1);
    const Mat dir = net.forward(x, t, t);
    const JvpOutput o = net.jvp(x, r, t, {}, dir, 0.0, 1.0);
    const Vec target = b.xdot.col(j) - (b.t(j) - b.r(j)) * o.xi.col(0);
    expect += m.inner(o.u.col(0) - target, o.u.col(0) - target);
  }
  CHECK(imf_loss(net, b).loss.value == doctest::Approx(expect / 5).epsilon(1e-12));

  // with u(x, t, t) = xdot the direction equals the direct loss's
  const Manifold e = Manifold::euclidean(2);
  const VelocityNet zero = zero_net(e, 4);
  TrainBatch z = batch_for(e, 3, 1, 0.0);
  z.x1 = z.x0;
  complete_batch(e, z);
  CHECK(imf_loss(zero, z).loss.value == rmf_direct_loss(zero, z).loss.value);
}

TEST_CASE("rfm loss on Euclidean is mean |u - (x1 - x0)|^2") {
  const Manifold e = Manifold::euclidean(3);
  const VelocityNet net = tiny_net(e, 23);
  const TrainBatch b = batch_for(e, 7, 6);
  const Mat u = net.forward(b.xt, b.t, b.t);
  const double expect = (u - (b.x1 - b.x0)).squaredNorm() / 7;
  CHECK(rfm_loss(net, b).loss.value == doctest::Approx(expect).epsilon(1e-12));
}
