// Acceptance run: one PASS/FAIL line per criterion. Pass criterion numbers as
// arguments to run a subset.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <set>
#include <sstream>
#include <string>

#include "rmf/commands.hpp"
#include "rmf/config.hpp"
#include "rmf/data.hpp"
#include "rmf/eval.hpp"
#include "rmf/objective.hpp"
#include "rmf/sampler.hpp"
#include "rmf/train.hpp"
#include "support.hpp"

using namespace rmf;
using namespace rmf::test;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double a) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

// ---------------------------------------------------------------- 1

Outcome geometry_suite() {
  const auto t0 = Clock::now();
  Rng rng(2024);
  double worst_rt = 0, worst_norm = 0, worst_pt = 0, worst_id = 0;
  int cases = 0;
  for (const Manifold& m : all_manifolds()) {
    for (int i = 0; i < 10000; ++i, ++cases) {
      const GeoCase c = random_case(m, rng);
      const Vec l = m.log(c.x, c.y);
      worst_rt = std::max(worst_rt, m.distance(m.exp(c.x, l), c.y));
      worst_rt = std::max(worst_rt, m.norm(m.log(c.x, m.exp(c.x, c.v)) - c.v));
      worst_norm = std::max(worst_norm, std::abs(m.norm(l) - m.distance(c.x, c.y)));
      worst_pt = std::max(worst_pt, std::abs(m.norm(m.transport(c.x, c.y, c.v)) - m.norm(c.v)));
      // Log_{gamma(s)}(x) = -s P(v) along gamma(s) = Exp_x(s v)
      const double s = rng.uniform(0.05, 0.95);
      const Vec g = m.exp(c.x, s * c.v);
      worst_id = std::max(worst_id, m.norm(m.log(g, c.x) + s * m.transport(c.x, g, c.v)));
    }
  }
  const double secs = seconds_since(t0);
  Outcome o;
  o.pass = worst_rt <= 1e-8 && worst_norm <= 1e-9 && worst_pt <= 1e-9 && worst_id <= 1e-7 && secs < 10.0;
  std::ostringstream d;
  d << cases << " cases; round trip " << worst_rt << ", norm/distance " << worst_norm << ", transport isometry "
    << worst_pt << ", log/transport identity " << worst_id << "; " << fmt("%.2f", secs) << " s";
  o.detail = d.str();
  return o;
}

// ---------------------------------------------------------------- 2

Outcome autodiff_suite() {
  const auto t0 = Clock::now();
  double worst_jvp = 0, worst_grad = 0;
  std::size_t max_params = 0;
  for (const Manifold& m : all_manifolds()) {
    for (int classes : {0, 2}) {
      VelocityNet net = tiny_net(m, 31 + classes, 5, classes);
      max_params = std::max(max_params, net.parameter_count());
      Rng rng(17);
      const int b = 4;
      const Mat x = random_points(m, b, rng);
      const Mat dx = random_tangents(m, x, 0.7, rng);
      Vec r(b), t(b);
      for (int i = 0; i < b; ++i) {
        t(i) = rng.uniform();
        r(i) = rng.uniform(0.0, t(i));
      }
      std::vector<int> labels;
      if (classes) labels = {0, kNullLabel, 1, 0};

      // JVP against a central difference at h = 1e-5
      const double h = 1e-5, dr = 0.3, dt = 1.0;
      const JvpOutput j = net.jvp(x, r, t, labels, dx, dr, dt);
      const Vec rp = r.array() + h * dr, rm = r.array() - h * dr;
      const Vec tp = t.array() + h * dt, tm = t.array() - h * dt;
      const Mat fd = (net.forward(x + h * dx, rp, tp, labels) - net.forward(x - h * dx, rm, tm, labels)) / (2 * h);
      worst_jvp = std::max(worst_jvp, rel_err(j.xi, fd));

      // reverse mode against per-parameter central differences
      Mat w(x.rows(), b);
      for (Eigen::Index k = 0; k < w.size(); ++k) w.data()[k] = rng.uniform(-1.0, 1.0);
      Tape tape;
      net.forward(x, r, t, labels, &tape);
      const Vec g = net.backward(tape, w);
      Vec& p = net.parameters();
      for (Eigen::Index i = 0; i < p.size(); ++i) {
        const double keep = p(i), e = 1e-4;
        auto loss_at = [&](double v) {
          p(i) = v;
          return net.forward(x, r, t, labels).cwiseProduct(w).sum();
        };
        const double d = (-loss_at(keep + 2 * e) + 8 * loss_at(keep + e) - 8 * loss_at(keep - e) +
                          loss_at(keep - 2 * e)) / (12 * e);
        p(i) = keep;
        worst_grad = std::max(worst_grad, std::abs(d - g(i)) / std::max({1e-6, std::abs(d), std::abs(g(i))}));
      }
    }
  }
  const double secs = seconds_since(t0);
  Outcome o;
  o.pass = worst_jvp <= 1e-4 && worst_grad <= 1e-5 && max_params <= 500 && secs < 30.0;
  std::ostringstream d;
  d << "JVP rel err " << worst_jvp << ", gradient rel err " << worst_grad << ", largest net " << max_params
    << " params; " << fmt("%.2f", secs) << " s";
  o.detail = d.str();
  return o;
}

// ---------------------------------------------------------------- 3

Outcome decomposition() {
  double worst = 0;
  const std::vector<Manifold> ms = all_manifolds();
  for (int draw = 0; draw < 100; ++draw) {
    const Manifold& m = ms[draw % ms.size()];
    const VelocityNet net = tiny_net(m, 1000 + draw, 6);
    Rng rng(5000 + draw);
    const Mat data = m.random_uniform(12, rng);
    const TrainBatch b = make_batch(m, data, {}, rng, TimeSampler{0.25});
    const RmfTerms terms = rmf_losses(net, b);
    const Vec split = net.backward(terms.tape, terms.l1.grad_u) + net.backward(terms.tape, terms.l2.grad_u);
    const SingleLoss direct = rmf_direct_loss(net, b);
    const Vec whole = net.backward(direct.tape, direct.loss.grad_u);
    worst = std::max(worst, rel_err(split, whole));
  }
  return {worst <= 1e-8, "100 draws, worst relative gap " + fmt("%.3g", worst)};
}

// ---------------------------------------------------------------- 4

Outcome pcgrad_suite() {
  const double eps = 1e-12;
  std::ostringstream d;
  bool ok = true;

  // conflicting hand case: expected (0.5, 1.5); the eps in each denominator moves it by < 1e-12
  const Vec g1 = Eigen::Vector2d(1, 0), g2 = Eigen::Vector2d(-1, 1);
  const PcgradResult r = pcgrad_combine(g1, g2, eps);
  ok = ok && r.applied && (r.g - Vec(Eigen::Vector2d(0.5, 1.5))).cwiseAbs().maxCoeff() <= 1e-12;
  ok = ok && pcgrad_project(g1, g2, eps).isApprox(Vec(Eigen::Vector2d(0.5, 0.5)), 1e-12) &&
       pcgrad_project(g2, g1, eps).isApprox(Vec(Eigen::Vector2d(0, 1)), 1e-12);
  // no conflict: a bitwise sum
  const PcgradResult orth = pcgrad_combine(Eigen::Vector2d(1, 0), Eigen::Vector2d(0, 1), eps);
  ok = ok && !orth.applied && orth.g == Vec(Eigen::Vector2d(1, 1));
  // opposite gradients annihilate
  ok = ok && pcgrad_combine(Eigen::Vector2d(3, -2), Eigen::Vector2d(-3, 2), eps).g.norm() <= 1e-10;
  d << "hand cases " << (ok ? "ok" : "wrong") << " (conflict case off (0.5, 1.5) by "
    << (r.g - Vec(Eigen::Vector2d(0.5, 1.5))).cwiseAbs().maxCoeff() << ")";

  Rng rng(77);
  int violations = 0, conflicts = 0;
  for (int i = 0; i < 10000; ++i) {
    const int n = 2 + static_cast<int>(rng.below(40));
    Vec a(n), b(n);
    for (int k = 0; k < n; ++k) {
      a(k) = rng.normal() * std::exp(rng.uniform(-3, 3));
      b(k) = rng.normal() * std::exp(rng.uniform(-3, 3));
    }
    if (rng.bernoulli(0.1)) b = -rng.uniform(0.1, 10.0) * a + 1e-3 * b;  // near-opposite pairs
    const Vec pa = pcgrad_project(a, b, eps), pb = pcgrad_project(b, a, eps);
    const PcgradResult c = pcgrad_combine(a, b, eps);
    conflicts += c.applied ? 1 : 0;
    if (pa.dot(b) < -eps * pa.norm() * b.norm()) ++violations;
    if (pb.dot(a) < -eps * pb.norm() * a.norm()) ++violations;
    if (c.g.dot(a) < -eps * c.g.norm() * a.norm() || c.g.dot(b) < -eps * c.g.norm() * b.norm()) ++violations;
  }
  ok = ok && violations == 0;
  d << "; 10000 random pairs (" << conflicts << " conflicting), " << violations << " negative inner products";
  return {ok, d.str()};
}

// ---------------------------------------------------------------- 5

double naive_mmd2(const Manifold& m, const Mat& x, const Mat& y) {
  double s = 0;
  for (Eigen::Index i = 0; i < x.cols(); ++i) {
    for (Eigen::Index j = 0; j < x.cols(); ++j) {
      const double dxx = m.distance(x.col(i), x.col(j));
      const double dyy = m.distance(y.col(i), y.col(j));
      const double dxy = m.distance(x.col(i), y.col(j));
      s += std::exp(-dxx * dxx) + std::exp(-dyy * dyy) - 2 * std::exp(-dxy * dxy);
    }
  }
  return s / static_cast<double>(x.cols() * x.cols());
}

Outcome mmd_oracle() {
  Rng rng(55);
  double worst = 0, worst_self = 0;
  for (const Manifold& m : all_manifolds()) {
    for (int n : {2, 8, 33, 64, 128}) {
      const Mat x = random_points(m, n, rng), y = random_points(m, n, rng);
      const double slow = naive_mmd2(m, x, y);
      worst = std::max(worst, std::abs(mmd_v(m, x, y, {}) - std::sqrt(std::max(0.0, slow))));
      worst = std::max(worst, std::abs(mmd2(m, x, y, 1.0) - slow));
      worst_self = std::max(worst_self, std::abs(mmd2(m, x, x, 1.0)));
    }
  }
  std::ostringstream d;
  d << "optimized vs naive " << worst << ", MMD^2(X,X) " << worst_self;
  return {worst <= 1e-12 && worst_self <= 1e-12, d.str()};
}

// ---------------------------------------------------------------- 6, 7

RunConfig ring_config(Objective objective) {
  RunConfig c = run_config_from_json(nlohmann::json::parse(R"({
    "dataset": {"generator": "sphere_ring", "dim": 3, "n": 10000, "seed": 0},
    "net": {"hidden_dim": 512, "num_layers": 4},
    "train": {"epochs": 30, "batch_size": 1024, "seed": 0}
  })"));
  c.objective = objective;
  return c;
}

struct RingRun {
  EvalSummary summary;
  std::vector<double> cosines;
  double seconds = 0;
};

RingRun ring_run(Objective objective) {
  const auto t0 = Clock::now();
  const RunConfig cfg = ring_config(objective);
  const Splits data = make_splits(cfg.dataset);
  const TrainResult tr = train(cfg, data);
  EvalOptions opts;
  opts.n_samples = cfg.eval.n_samples;
  opts.seeds = cfg.eval.seeds;
  opts.mmd = cfg.eval.mmd;
  const EvalReport rep = eval_run(tr.net, data.test.points, opts);
  RingRun out;
  out.summary = rep.summary.front();
  for (const LogRow& r : tr.log) {
    if (r.grad_cosine) out.cosines.push_back(*r.grad_cosine);
  }
  out.seconds = seconds_since(t0);
  std::printf("  [%s] 1-NFE MMD over seeds 0-4 (n=%d): mean %.4f, std %.4f; %.0f s\n", to_string(objective).c_str(),
              rep.n, out.summary.mean, out.summary.std, out.seconds);
  std::fflush(stdout);
  return out;
}

// ---------------------------------------------------------------- 8

Outcome cfg_smoke() {
  const auto t0 = Clock::now();
  const RunConfig cfg = run_config_from_json(nlohmann::json::parse(R"({
    "dataset": {"generator": "sphere_vmf_mixture", "dim": 3, "n": 4000, "seed": 3,
                "centers": [[1, 0, 0], [0, 0, 1]], "concentration": 20},
    "net": {"hidden_dim": 256, "num_layers": 4},
    "objective": {"name": "cfg", "p_drop": 0.1},
    "train": {"epochs": 20, "batch_size": 512, "seed": 0}
  })"));
  const Splits data = make_splits(cfg.dataset);
  const TrainResult tr = train(cfg, data);
  std::vector<int> idx[2];
  for (int j = 0; j < data.test.size(); ++j) idx[data.test.labels[j]].push_back(j);
  const Mat comp[2] = {data.test.select(idx[0]).points, data.test.select(idx[1]).points};
  bool ok = true;
  std::ostringstream d;
  for (std::uint64_t seed : {0, 1, 2}) {
    for (int c = 0; c < 2; ++c) {
      Rng rng(seed);
      SamplePlan plan;
      plan.label = c;
      const Mat s = sample_k_step(tr.net, plan, static_cast<int>(comp[c].cols()), rng);
      MmdConfig mc;
      mc.seed = seed;
      const double match = mmd_v(tr.net.manifold(), s, comp[c], mc);
      const double other = mmd_v(tr.net.manifold(), s, comp[1 - c], mc);
      ok = ok && match < other;
      d << "seed " << seed << " label " << c << ": " << fmt("%.3f", match) << " vs " << fmt("%.3f", other) << "; ";
    }
  }
  d << fmt("%.0f s", seconds_since(t0));
  return {ok, d.str()};
}

// ---------------------------------------------------------------- 9

std::string log_without_wallclock(const std::string& path) {
  std::istringstream in(read_text(path));
  std::string line, out;
  while (std::getline(in, line)) out += line.substr(0, line.rfind(',')) + "\n";
  return out;
}

Outcome determinism() {
  TempDir dir;
  write_text(dir.file("config.json"), R"({
    "dataset": {"generator": "sphere_ring", "n": 600, "seed": 4},
    "net": {"hidden_dim": 64, "num_layers": 3},
    "train": {"epochs": 3, "batch_size": 128, "seed": 9}
  })");
  std::string ckpt[2], log[2];
  for (int i = 0; i < 2; ++i) {
    TrainArgs a;
    a.config = dir.file("config.json");
    a.out = dir.file("run" + std::to_string(i));
    a.quiet = true;
    std::ostringstream out, err;
    if (cmd_train(a, out, err) != kExitOk) return {false, "cmd_train failed: " + err.str()};
    ckpt[i] = read_text(*a.out + "/final.ckpt");
    log[i] = log_without_wallclock(*a.out + "/train_log.csv");
  }
  const bool ok = !ckpt[0].empty() && ckpt[0] == ckpt[1] && log[0] == log[1];
  return {ok, "final.ckpt " + std::string(ckpt[0] == ckpt[1] ? "identical" : "differs") + " (" +
                  std::to_string(ckpt[0].size()) + " bytes), log " + (log[0] == log[1] ? "identical" : "differs") +
                  " apart from wallclock_ms"};
}

}  // namespace

int main(int argc, char** argv) {
  std::set<int> only;
  for (int i = 1; i < argc; ++i) only.insert(std::atoi(argv[i]));
  auto wanted = [&](int k) { return only.empty() || only.count(k) > 0; };
  int failures = 0;
  auto report = [&](int k, const Outcome& o) {
    std::printf("criterion %d: %s - %s\n", k, o.pass ? "PASS" : "FAIL", o.detail.c_str());
    std::fflush(stdout);
    if (!o.pass) ++failures;
  };

  if (wanted(1)) report(1, geometry_suite());
  if (wanted(2)) report(2, autodiff_suite());
  if (wanted(3)) report(3, decomposition());
  if (wanted(4)) report(4, pcgrad_suite());
  if (wanted(5)) report(5, mmd_oracle());
  if (wanted(6) || wanted(7)) {
    const RingRun mt = ring_run(Objective::RmfMt);
    if (wanted(6)) {
      report(6, {mt.summary.mean <= 0.10 && mt.seconds < 20 * 60,
                 "rmf_mt, 30 epochs: mean 1-NFE MMD " + fmt("%.4f", mt.summary.mean) + " (target <= 0.10)"});
    }
    if (wanted(7)) {
      const RingRun sum = ring_run(Objective::RmfSum);
      const CosineStats cs = grad_cosine_stats(sum.cosines);
      const bool ok = cs.fraction_negative > 0.0 && mt.summary.mean <= sum.summary.mean + 0.02;
      report(7, {ok, "rmf_sum negative-cosine fraction " + fmt("%.3f", cs.fraction_negative) + " over " +
                         std::to_string(cs.count) + " steps; MMD rmf_mt " + fmt("%.4f", mt.summary.mean) +
                         " vs rmf_sum " + fmt("%.4f", sum.summary.mean) + " + 0.02"});
    }
  }
  if (wanted(8)) report(8, cfg_smoke());
  if (wanted(9)) report(9, determinism());
  std::printf("%s\n", failures == 0 ? "ALL PASS" : (std::to_string(failures) + " FAILED").c_str());
  return failures == 0 ? 0 : 1;
}
