#pragma once

#include <Eigen/Dense>

#include <string>
#include <string_view>

#include "rmf/rng.hpp"

namespace rmf {

using Vec = Eigen::VectorXd;
/// Point and tangent batches store one element per column.
using Mat = Eigen::MatrixXd;
using VecRef = Eigen::Ref<const Eigen::VectorXd>;

enum class ManifoldKind { Euclidean, Sphere, Torus, SO3 };

/// Closed-form Riemannian geometry in ambient coordinates.
///
/// Layouts: Euclidean(d) and Sphere(d) use d-vectors (unit vectors on the
/// sphere), Torus(N) uses N angles in [0, 2*pi), SO3 uses a row-major flattened
/// 3x3 rotation matrix. Tangent vectors share the ambient layout; on SO3 a
/// tangent at R is R*Omega with Omega skew, and the metric is
/// <R*A, R*B> = tr(A^T B) / 2.
///
/// Every member is a pure function of its arguments.
class Manifold {
 public:
  static Manifold euclidean(int d);
  static Manifold sphere(int d);
  static Manifold torus(int n);
  static Manifold so3();

  /// Parses "euclidean(d)", "sphere(d)", "torus(n)" or "so3".
  static Manifold parse(std::string_view text);
  std::string name() const;

  ManifoldKind kind() const { return kind_; }
  int ambient_dim() const { return dim_; }
  bool operator==(const Manifold&) const = default;

  /// 1/2 on SO3 (Frobenius-to-metric factor), 1 elsewhere.
  double metric_scale() const { return kind_ == ManifoldKind::SO3 ? 0.5 : 1.0; }
  double inner(const VecRef& a, const VecRef& b) const;
  double norm(const VecRef& v) const;

  Vec exp(const VecRef& x, const VecRef& v) const;
  /// Throws CutLocus at sphere antipodes and SO3 half-turns.
  Vec log(const VecRef& x, const VecRef& y) const;
  double distance(const VecRef& x, const VecRef& y) const;
  Vec project_tangent(const VecRef& x, const VecRef& w) const;
  /// Levi-Civita transport along the minimizing geodesic from x to y.
  Vec transport(const VecRef& x, const VecRef& y, const VecRef& v) const;
  /// Exp_{x1}(kappa * Log_{x1}(x0)): kappa = 1 gives x0, kappa = 0 gives x1.
  Vec interpolate(const VecRef& x0, const VecRef& x1, double kappa) const;

  /// Nearest point on the manifold (normalize, wrap, or polar-orthogonalize).
  Vec retract_point(const VecRef& x) const;

  bool is_point(const VecRef& x, double tol = 1e-8) const;
  bool is_tangent(const VecRef& x, const VecRef& v, double tol = 1e-8) const;

  /// Draws from the volume-uniform source (standard Gaussian for Euclidean).
  Vec random_point(Rng& rng) const;
  Mat random_uniform(int n, Rng& rng) const;
  /// Isotropic Gaussian tangent vector at x with per-direction std sigma.
  Vec random_tangent(const VecRef& x, double sigma, Rng& rng) const;

 private:
  Manifold(ManifoldKind kind, int dim) : kind_(kind), dim_(dim) {}
  void check_dim(const VecRef& v, const char* what) const;

  ManifoldKind kind_;
  int dim_;
};

/// Interpolation schedule kappa(t): monotone, kappa(0) = 1, kappa(1) = 0.
struct Schedule {
  enum class Kind { Linear, Cosine };
  Kind kind = Kind::Linear;

  double kappa(double t) const;
  double dkappa(double t) const;

  static Schedule parse(std::string_view text);
  std::string name() const;
};

/// Velocity of the geodesic interpolation at x_t: -(kappa'/kappa) Log_{x_t}(x1).
Vec path_velocity(const Manifold& m, const VecRef& x_t, const VecRef& x1, double t,
                  const Schedule& schedule = {});

namespace so3 {

using Mat3 = Eigen::Matrix3d;

Mat3 from_flat(const VecRef& v);
Vec to_flat(const Mat3& m);
Mat3 hat(const Eigen::Vector3d& w);
Eigen::Vector3d vee(const Mat3& m);
/// Rodrigues exponential of a skew matrix.
Mat3 exp(const Mat3& omega);
/// Principal logarithm; throws CutLocus when the angle is within 1e-6 of pi.
Mat3 log(const Mat3& q);
/// Rotation angle in [0, pi].
double angle(const Mat3& q);
/// Closest rotation in Frobenius norm.
Mat3 orthogonalize(const Mat3& m);

}  // namespace so3

}  // namespace rmf
