#pragma once

#include <atomic>
#include <filesystem>
#include <fstream>
#include <string>
#include <unistd.h>
#include <vector>

#include "rmf/geometry.hpp"
#include "rmf/net.hpp"
#include "rmf/rng.hpp"

namespace rmf::test {

inline std::vector<Manifold> all_manifolds() {
  return {Manifold::euclidean(3), Manifold::sphere(3), Manifold::torus(2), Manifold::so3()};
}

/// Small net with every parameter drawn from U(-0.6, 0.6).
// Net whose parameters are all zero, so u = 0 everywhere.
inline VelocityNet zero_net(const Manifold& m, int hidden = 8) {
  NetConfig c;
  c.ambient_dim = m.ambient_dim();
  c.hidden_dim = hidden;
  VelocityNet net(m, c);
  net.parameters().setZero();
  return net;
}

inline VelocityNet tiny_net(const Manifold& m, std::uint64_t seed, int hidden = 6, int classes = 0,
                            Activation act = Activation::SiLU) {
  NetConfig c;
  c.ambient_dim = m.ambient_dim();
  c.hidden_dim = hidden;
  c.num_layers = 3;
  c.time_embed_dim = 4;
  c.num_classes = classes;
  c.activation = act;
  c.seed = seed;
  VelocityNet net(m, c);
  Rng rng(seed + 1000);
  net.randomize(rng, 0.6);
  return net;
}

inline Mat random_points(const Manifold& m, int n, Rng& rng) { return m.random_uniform(n, rng); }

inline Mat random_tangents(const Manifold& m, const Mat& x, double sigma, Rng& rng) {
  Mat v(x.rows(), x.cols());
  for (Eigen::Index j = 0; j < x.cols(); ++j) v.col(j) = m.random_tangent(x.col(j), sigma, rng);
  return v;
}

inline double rel_err(double a, double b) { return std::abs(a - b) / std::max({1e-8, std::abs(a), std::abs(b)}); }

inline double rel_err(const Mat& a, const Mat& b) {
  return (a - b).norm() / std::max({1e-8, a.norm(), b.norm()});
}

/// Random (x, y, v): y within distance pi - 0.1 of x on the sphere and SO3 (off the
/// cut locus), v a tangent at x with |v|_g below pi - 0.1.
struct GeoCase {
  Vec x, y, v;
};

inline GeoCase random_case(const Manifold& m, Rng& rng) {
  constexpr double kMaxNorm = 3.141592653589793 - 0.1;
  GeoCase c;
  c.x = m.random_point(rng);
  auto bounded_tangent = [&](double scale) {
    Vec v = m.random_tangent(c.x, scale, rng);
    const double n = m.norm(v);
    if ((m.kind() == ManifoldKind::Sphere || m.kind() == ManifoldKind::SO3) && n > kMaxNorm) {
      v *= kMaxNorm * rng.uniform() / n;
    }
    // torus: each angle increment must stay inside the principal range
    if (m.kind() == ManifoldKind::Torus && v.cwiseAbs().maxCoeff() > kMaxNorm) {
      v *= kMaxNorm * rng.uniform() / v.cwiseAbs().maxCoeff();
    }
    return v;
  };
  if (m.kind() == ManifoldKind::Sphere || m.kind() == ManifoldKind::SO3) {
    c.y = m.exp(c.x, bounded_tangent(1.2));
  } else {
    c.y = m.random_point(rng);
  }
  c.v = bounded_tangent(1.0);
  return c;
}

/// Schild's ladder along the geodesic x -> y with n rungs: an independent transport
/// oracle built from Exp and Log only.
inline Vec schild_transport(const Manifold& m, const Vec& x, const Vec& y, const Vec& v, int n = 400,
                            double eps = 1e-3) {
  const Vec step = m.log(x, y) / n;
  Vec p = x, w = v;
  for (int k = 0; k < n; ++k) {
    const Vec q = m.exp(x, (k + 1) * step);
    const Vec a = m.exp(p, eps * w);
    const Vec mid = m.exp(a, 0.5 * m.log(a, q));
    const Vec b = m.exp(p, 2.0 * m.log(p, mid));
    w = m.log(q, b) / eps;
    p = q;
  }
  return w;
}

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  TempDir() {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("rmf_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  std::string file(const std::string& name) const { return (path_ / name).string(); }
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

inline void write_text(const std::string& path, const std::string& text) {
  std::ofstream(path) << text;
}

inline std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace rmf::test
