#include "rmf/geometry.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "rmf/error.hpp"

namespace rmf {
namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;
constexpr double kPi = std::numbers::pi;
constexpr double kZeroTangent = 1e-12;
constexpr double kSphereAntipodeGuard = 1e-9;
constexpr double kSo3HalfTurnGuard = 1e-6;

double wrap_angle(double a) {
  double r = std::fmod(a, kTwoPi);
  if (r < 0.0) r += kTwoPi;
  if (r >= kTwoPi) r = 0.0;
  return r;
}

double principal_angle(double d) { return std::atan2(std::sin(d), std::cos(d)); }

int parse_dim(std::string_view text, std::string_view prefix) {
  // expects prefix "(" digits ")"
  if (text.size() < prefix.size() + 3 || text.substr(0, prefix.size()) != prefix ||
      text[prefix.size()] != '(' || text.back() != ')') {
    return -1;
  }
  std::string digits(text.substr(prefix.size() + 1, text.size() - prefix.size() - 2));
  if (digits.empty() || digits.find_first_not_of("0123456789") != std::string::npos) return -1;
  return std::stoi(digits);
}

}  // namespace

namespace so3 {

Mat3 from_flat(const VecRef& v) {
  Mat3 m;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) m(i, j) = v(3 * i + j);
  return m;
}

Vec to_flat(const Mat3& m) {
  Vec v(9);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) v(3 * i + j) = m(i, j);
  return v;
}

Mat3 hat(const Eigen::Vector3d& w) {
  Mat3 m;
  m << 0.0, -w.z(), w.y(),
       w.z(), 0.0, -w.x(),
       -w.y(), w.x(), 0.0;
  return m;
}

Eigen::Vector3d vee(const Mat3& m) {
  return {0.5 * (m(2, 1) - m(1, 2)), 0.5 * (m(0, 2) - m(2, 0)), 0.5 * (m(1, 0) - m(0, 1))};
}

Mat3 exp(const Mat3& omega) {
  const double theta = omega.norm() / std::sqrt(2.0);
  double a, b;
  if (theta < 1e-4) {
    const double t2 = theta * theta;
    a = 1.0 - t2 / 6.0;
    b = 0.5 - t2 / 24.0;
  } else {
    a = std::sin(theta) / theta;
    b = (1.0 - std::cos(theta)) / (theta * theta);
  }
  return Mat3::Identity() + a * omega + b * omega * omega;
}

double angle(const Mat3& q) {
  const double s = vee(q).norm();  // sin(theta) for a rotation
  const double c = 0.5 * (q.trace() - 1.0);
  return std::atan2(s, c);
}

Mat3 log(const Mat3& q) {
  const Eigen::Vector3d axis_sin = vee(q);  // sin(theta) * axis
  const double s = axis_sin.norm();
  const double c = 0.5 * (q.trace() - 1.0);
  const double theta = std::atan2(s, c);
  if (theta >= kPi - kSo3HalfTurnGuard) {
    throw Error(ErrorCode::CutLocus, "SO3 log: relative rotation angle " + std::to_string(theta) +
                                         " is at the half-turn cut locus");
  }
  if (theta < 1e-4) {
    // theta / sin(theta) = 1 + theta^2 / 6 + O(theta^4)
    return hat((1.0 + theta * theta / 6.0) * axis_sin);
  }
  if (c > 0.0) {
    return hat((theta / s) * axis_sin);
  }
  // Near pi the skew part is small; read the axis off the symmetric part instead.
  const Mat3 sym = 0.5 * (q + q.transpose()) - c * Mat3::Identity();  // (1 - c) a a^T
  int k = 0;
  sym.diagonal().maxCoeff(&k);
  Eigen::Vector3d a = sym.col(k) / std::sqrt(sym(k, k) * (1.0 - c));
  if (a.dot(axis_sin) < 0.0) a = -a;
  return hat(theta * a.normalized());
}

Mat3 orthogonalize(const Mat3& m) {
  Eigen::JacobiSVD<Mat3> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Mat3 r = svd.matrixU() * svd.matrixV().transpose();
  if (r.determinant() < 0.0) {
    Mat3 u = svd.matrixU();
    u.col(2) = -u.col(2);
    r = u * svd.matrixV().transpose();
  }
  return r;
}

}  // namespace so3

Manifold Manifold::euclidean(int d) {
  if (d < 1) throw Error(ErrorCode::InvalidArgument, "Euclidean dimension must be >= 1");
  return {ManifoldKind::Euclidean, d};
}

Manifold Manifold::sphere(int d) {
  if (d < 2) throw Error(ErrorCode::InvalidArgument, "Sphere requires ambient dimension >= 2");
  return {ManifoldKind::Sphere, d};
}

Manifold Manifold::torus(int n) {
  if (n < 1) throw Error(ErrorCode::InvalidArgument, "Torus requires N >= 1");
  return {ManifoldKind::Torus, n};
}

Manifold Manifold::so3() { return {ManifoldKind::SO3, 9}; }

Manifold Manifold::parse(std::string_view text) {
  if (text == "so3" || text == "SO3" || text == "so(3)") return so3();
  if (int d = parse_dim(text, "euclidean"); d >= 0) return euclidean(d);
  if (int d = parse_dim(text, "sphere"); d >= 0) return sphere(d);
  if (int d = parse_dim(text, "torus"); d >= 0) return torus(d);
  throw Error(ErrorCode::InvalidArgument, "unknown manifold '" + std::string(text) + "'");
}

std::string Manifold::name() const {
  switch (kind_) {
    case ManifoldKind::Euclidean: return "euclidean(" + std::to_string(dim_) + ")";
    case ManifoldKind::Sphere: return "sphere(" + std::to_string(dim_) + ")";
    case ManifoldKind::Torus: return "torus(" + std::to_string(dim_) + ")";
    case ManifoldKind::SO3: return "so3";
  }
  return "?";
}

void Manifold::check_dim(const VecRef& v, const char* what) const {
  if (v.size() != dim_) {
    throw Error(ErrorCode::InvalidArgument, std::string(what) + " has length " +
                                                std::to_string(v.size()) + ", expected " +
                                                std::to_string(dim_) + " for " + name());
  }
}

double Manifold::inner(const VecRef& a, const VecRef& b) const {
  check_dim(a, "tangent");
  check_dim(b, "tangent");
  return metric_scale() * a.dot(b);
}

double Manifold::norm(const VecRef& v) const { return std::sqrt(inner(v, v)); }

Vec Manifold::retract_point(const VecRef& x) const {
  check_dim(x, "point");
  switch (kind_) {
    case ManifoldKind::Euclidean: return x;
    case ManifoldKind::Sphere: return x / x.norm();
    case ManifoldKind::Torus: {
      Vec y(dim_);
      for (int i = 0; i < dim_; ++i) y(i) = wrap_angle(x(i));
      return y;
    }
    case ManifoldKind::SO3: return so3::to_flat(so3::orthogonalize(so3::from_flat(x)));
  }
  return x;
}

Vec Manifold::exp(const VecRef& x, const VecRef& v) const {
  check_dim(x, "point");
  check_dim(v, "tangent");
  if (norm(v) < kZeroTangent) return retract_point(x);
  switch (kind_) {
    case ManifoldKind::Euclidean: return x + v;
    case ManifoldKind::Sphere: {
      const double n = v.norm();
      Vec y = std::cos(n) * x + (std::sin(n) / n) * v;
      return y / y.norm();
    }
    case ManifoldKind::Torus: return retract_point(x + v);
    case ManifoldKind::SO3: {
      const so3::Mat3 r = so3::from_flat(x);
      so3::Mat3 omega = r.transpose() * so3::from_flat(v);
      omega = 0.5 * (omega - omega.transpose()).eval();
      return so3::to_flat(so3::orthogonalize(r * so3::exp(omega)));
    }
  }
  return x;
}

Vec Manifold::log(const VecRef& x, const VecRef& y) const {
  check_dim(x, "point");
  check_dim(y, "point");
  switch (kind_) {
    case ManifoldKind::Euclidean: return y - x;
    case ManifoldKind::Sphere: {
      const double c = x.dot(y);
      if (!(c > -1.0 + kSphereAntipodeGuard)) {
        throw Error(ErrorCode::CutLocus, "sphere log: points are antipodal (x.y = " +
                                             std::to_string(c) + ")");
      }
      Vec w = y - c * x;
      const double s = w.norm();
      if (s < 1e-300) return Vec::Zero(dim_);
      return (std::atan2(s, c) / s) * w;
    }
    case ManifoldKind::Torus: {
      Vec d(dim_);
      for (int i = 0; i < dim_; ++i) d(i) = principal_angle(y(i) - x(i));
      return d;
    }
    case ManifoldKind::SO3: {
      const so3::Mat3 r = so3::from_flat(x);
      return so3::to_flat(r * so3::log(r.transpose() * so3::from_flat(y)));
    }
  }
  return y;
}

double Manifold::distance(const VecRef& x, const VecRef& y) const {
  check_dim(x, "point");
  check_dim(y, "point");
  switch (kind_) {
    case ManifoldKind::Euclidean: return (y - x).norm();
    case ManifoldKind::Sphere: {
      // 2*atan2(|x-y|, |x+y|) stays accurate at both ends of [0, pi].
      return 2.0 * std::atan2((x - y).norm(), (x + y).norm());
    }
    case ManifoldKind::Torus: {
      double s = 0.0;
      for (int i = 0; i < dim_; ++i) {
        const double d = principal_angle(y(i) - x(i));
        s += d * d;
      }
      return std::sqrt(s);
    }
    case ManifoldKind::SO3:
      return so3::angle(so3::from_flat(x).transpose() * so3::from_flat(y));
  }
  return 0.0;
}

Vec Manifold::project_tangent(const VecRef& x, const VecRef& w) const {
  check_dim(x, "point");
  check_dim(w, "ambient vector");
  switch (kind_) {
    case ManifoldKind::Euclidean:
    case ManifoldKind::Torus: return w;
    case ManifoldKind::Sphere: return w - x.dot(w) * x;
    case ManifoldKind::SO3: {
      const so3::Mat3 r = so3::from_flat(x);
      const so3::Mat3 a = so3::from_flat(w);
      return so3::to_flat(0.5 * (a - r * a.transpose() * r));
    }
  }
  return w;
}

Vec Manifold::transport(const VecRef& x, const VecRef& y, const VecRef& v) const {
  check_dim(x, "point");
  check_dim(y, "point");
  check_dim(v, "tangent");
  switch (kind_) {
    case ManifoldKind::Euclidean:
    case ManifoldKind::Torus: return v;
    case ManifoldKind::Sphere: {
      const Vec u = log(x, y);
      const double theta = u.norm();
      if (theta < kZeroTangent) return v;
      const Vec e = u / theta;
      const double a = e.dot(v);
      return v + (std::cos(theta) - 1.0) * a * e - std::sin(theta) * a * x;
    }
    case ManifoldKind::SO3: {
      // Bi-invariant metric: along R*exp(s*Omega) the body-frame field A(s)
      // solves A' = -[Omega, A]/2, so P(R*A) = R exp(Omega/2) A exp(Omega/2).
      const so3::Mat3 r = so3::from_flat(x);
      const so3::Mat3 omega = so3::log(r.transpose() * so3::from_flat(y));
      const so3::Mat3 half = so3::exp(0.5 * omega);
      const so3::Mat3 a = r.transpose() * so3::from_flat(v);
      return so3::to_flat(r * half * a * half);
    }
  }
  return v;
}

Vec Manifold::interpolate(const VecRef& x0, const VecRef& x1, double kappa) const {
  return exp(x1, kappa * log(x1, x0));
}

bool Manifold::is_point(const VecRef& x, double tol) const {
  if (x.size() != dim_ || !x.allFinite()) return false;
  switch (kind_) {
    case ManifoldKind::Euclidean: return true;
    case ManifoldKind::Sphere: return std::abs(x.norm() - 1.0) <= tol;
    case ManifoldKind::Torus:
      for (int i = 0; i < dim_; ++i)
        if (x(i) < 0.0 || x(i) >= kTwoPi) return false;
      return true;
    case ManifoldKind::SO3: {
      const so3::Mat3 r = so3::from_flat(x);
      return (r.transpose() * r - so3::Mat3::Identity()).norm() <= tol &&
             std::abs(r.determinant() - 1.0) <= tol;
    }
  }
  return false;
}

bool Manifold::is_tangent(const VecRef& x, const VecRef& v, double tol) const {
  if (x.size() != dim_ || v.size() != dim_ || !v.allFinite()) return false;
  const double scaled = tol * std::max(1.0, v.norm());
  switch (kind_) {
    case ManifoldKind::Euclidean:
    case ManifoldKind::Torus: return true;
    case ManifoldKind::Sphere: return std::abs(x.dot(v)) <= scaled;
    case ManifoldKind::SO3: {
      const so3::Mat3 a = so3::from_flat(x).transpose() * so3::from_flat(v);
      return (a + a.transpose()).norm() <= scaled;
    }
  }
  return false;
}

Vec Manifold::random_point(Rng& rng) const {
  switch (kind_) {
    case ManifoldKind::Euclidean: {
      Vec x(dim_);
      for (int i = 0; i < dim_; ++i) x(i) = rng.normal();
      return x;
    }
    case ManifoldKind::Sphere: {
      Vec x(dim_);
      double n = 0.0;
      do {
        for (int i = 0; i < dim_; ++i) x(i) = rng.normal();
        n = x.norm();
      } while (n < 1e-12);
      return x / n;
    }
    case ManifoldKind::Torus: {
      Vec x(dim_);
      for (int i = 0; i < dim_; ++i) x(i) = wrap_angle(rng.uniform() * kTwoPi);
      return x;
    }
    case ManifoldKind::SO3: {
      // Normalized Gaussian quaternion is Haar-uniform on SO(3).
      Eigen::Vector4d q;
      do {
        for (int i = 0; i < 4; ++i) q(i) = rng.normal();
      } while (q.norm() < 1e-12);
      q.normalize();
      const Eigen::Quaterniond quat(q(0), q(1), q(2), q(3));
      return so3::to_flat(quat.toRotationMatrix());
    }
  }
  return {};
}

Mat Manifold::random_uniform(int n, Rng& rng) const {
  if (n < 1) throw Error(ErrorCode::InvalidArgument, "random_uniform needs n >= 1");
  Mat out(dim_, n);
  for (int i = 0; i < n; ++i) out.col(i) = random_point(rng);
  return out;
}

Vec Manifold::random_tangent(const VecRef& x, double sigma, Rng& rng) const {
  check_dim(x, "point");
  if (kind_ == ManifoldKind::SO3) {
    // sigma per axis of the body angular velocity, so |v|_g ~ sigma * sqrt(3).
    const Eigen::Vector3d w(rng.normal(), rng.normal(), rng.normal());
    return so3::to_flat(so3::from_flat(x) * so3::hat(sigma * w));
  }
  Vec w(dim_);
  for (int i = 0; i < dim_; ++i) w(i) = sigma * rng.normal();
  return project_tangent(x, w);
}

double Schedule::kappa(double t) const {
  switch (kind) {
    case Kind::Linear: return 1.0 - t;
    case Kind::Cosine: return std::cos(0.5 * kPi * t);
  }
  return 1.0 - t;
}

double Schedule::dkappa(double t) const {
  switch (kind) {
    case Kind::Linear: return -1.0;
    case Kind::Cosine: return -0.5 * kPi * std::sin(0.5 * kPi * t);
  }
  return -1.0;
}

Schedule Schedule::parse(std::string_view text) {
  if (text == "linear") return {Kind::Linear};
  if (text == "cosine") return {Kind::Cosine};
  throw Error(ErrorCode::InvalidArgument, "unknown schedule '" + std::string(text) + "'");
}

std::string Schedule::name() const { return kind == Kind::Cosine ? "cosine" : "linear"; }

Vec path_velocity(const Manifold& m, const VecRef& x_t, const VecRef& x1, double t,
                  const Schedule& schedule) {
  const double k = schedule.kappa(t);
  if (!(k > 1e-8)) {
    throw Error(ErrorCode::ScheduleSingularity,
                "kappa(" + std::to_string(t) + ") = " + std::to_string(k) + " is too close to 0");
  }
  return (-schedule.dkappa(t) / k) * m.log(x_t, x1);
}

}  // namespace rmf
