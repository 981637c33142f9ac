#pragma once

#include "conalign/geometry.hpp"

#include <Eigen/Core>

#include <memory>
#include <string>
#include <vector>

namespace conalign::density {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using geometry::Vec3;

enum class DomainKind { Interval, Sphere, DualSphere };

/// Discretization of Omega: an interval grid, one icosphere, or two disjoint
/// icosphere copies (hemisphere 0 occupies nodes [0,V), hemisphere 1 [V,2V)).
class Domain {
 public:
  static Domain interval(std::size_t n);
  static Domain sphere(int level);
  static Domain dual_sphere(int level);
  /// Parses "interval:n", "sphere:G" or "dual:G".
  static Domain parse(const std::string& spec);

  DomainKind kind() const { return kind_; }
  std::size_t size() const { return static_cast<std::size_t>(weights_.size()); }
  const Vector& weights() const { return weights_; }
  const geometry::Grid1D& grid() const;
  const geometry::Icosphere& ico() const;
  std::shared_ptr<const geometry::Icosphere> ico_ptr() const { return ico_; }
  int level() const { return level_; }
  /// Vertices per hemisphere for sphere domains.
  std::size_t hemisphere_size() const;
  int hemisphere(std::size_t node) const;
  std::string describe() const;

  bool operator==(const Domain& other) const;
  bool operator!=(const Domain& other) const { return !(*this == other); }

 private:
  DomainKind kind_ = DomainKind::Interval;
  int level_ = 0;
  geometry::Grid1D grid_;
  std::shared_ptr<const geometry::Icosphere> ico_;
  Vector weights_;
};

/// Nonnegative symmetric density on Omega x Omega with unit integral.
struct DensityField {
  Domain domain;
  Matrix values;

  /// Throws ValidationError on asymmetry, negativity or bad normalization.
  void validate(double integral_tolerance = 1e-6) const;
};

/// Signed square root of a density; unit L2 norm.
struct HalfDensity {
  Domain domain;
  Matrix values;

  void validate(double norm_tolerance = 1e-6) const;
};

double q_transform(double s);
double q_inverse(double q);

HalfDensity q_map(const DensityField& f);
DensityField q_unmap(const HalfDensity& q);

/// Quadrature inner product sum_ij w_i w_j a_ij b_ij.
double inner(const Domain& d, const Matrix& a, const Matrix& b);
double integral(const Domain& d, const Matrix& a);
double l2_norm(const Domain& d, const Matrix& a);

/// Scales a to unit integral (density) and returns the old integral.
double normalize_integral(const Domain& d, Matrix& a);
/// Scales a to unit L2 norm and returns the old norm.
double normalize_l2(const Domain& d, Matrix& a);

/// Copies the upper triangle onto the lower one.
void mirror_upper(Matrix& a);

double riemannian_distance(const HalfDensity& q1, const HalfDensity& q2);
double alignment_cost(const HalfDensity& q1, const HalfDensity& q2);
double region_connectivity(const DensityField& f, const std::vector<std::size_t>& e1,
                           const std::vector<std::size_t>& e2);

/// Barycentric interpolation row: value = sum_k w[k] * data[idx[k]].
struct InterpRow {
  std::array<int, 3> idx{0, 0, 0};
  std::array<double, 3> w{1.0, 0.0, 0.0};
};

InterpRow interp_row(const geometry::Icosphere& ico, const Vec3& p, int offset = 0);

/// R(i,j) = sum_ab rx[i].w[a] * ry[j].w[b] * q(rx[i].idx[a], ry[j].idx[b]).
Matrix resample(const Matrix& q, const std::vector<InterpRow>& rx, const std::vector<InterpRow>& ry);

/// A_yy^T B A_xx evaluation of a single-sphere field at (x, y).
double interpolate_bivariate(const HalfDensity& q, const Vec3& x, const Vec3& y);

/// Directional derivative of the interpolated q along (bx, by) by forward
/// differences of step eps along the orthonormal tangent frames.
double spatial_derivative(const HalfDensity& q, const Vec3& x, const Vec3& y, const Vec3& bx, const Vec3& by,
                          double eps = 1e-3);

}  // namespace conalign::density
