#pragma once

#include "conalign/geometry.hpp"

#include <cmath>
#include <vector>

namespace conalign::basis {

using geometry::Vec3;

/// sqrt(2) sin(k pi x) sampled on a uniform grid, with its derivative.
struct BasisElement1D {
  int k = 1;
  std::vector<double> values;
  std::vector<double> derivative;
};

/// Requires 1 <= M <= n/2.
std::vector<BasisElement1D> sine_basis(const geometry::Grid1D& grid, int m);

/// Real harmonic psi_i: Y_l^0, or sqrt(2) times the real / imaginary part of Y_l^m.
struct HarmonicIndex {
  int l = 0;
  int m = 0;
  bool imaginary = false;
};

/// psi_0 = Y_0^0, psi_1 = Y_1^0, psi_2 = Re Y_1^1, psi_3 = Im Y_1^1, ...
std::vector<HarmonicIndex> harmonic_indices(int max_degree);

/// Value and surface gradient of one real harmonic, from its Cartesian
/// polynomial form (regular at the poles).
class RealHarmonic {
 public:
  explicit RealHarmonic(HarmonicIndex index);

  const HarmonicIndex& index() const { return index_; }
  double value(const Vec3& p) const;
  /// Tangential gradient at unit p.
  Vec3 gradient(const Vec3& p) const;

 private:
  HarmonicIndex index_;
  double scale_ = 0.0;
  std::vector<double> q_;   // d^m P_l / dz^m, ascending powers
  std::vector<double> dq_;  // its derivative
};

/// Table of psi_i at the points: rows are points, columns harmonics. L <= 20.
Eigen::MatrixXd real_spherical_harmonics(int max_degree, const std::vector<Vec3>& points);

enum class FieldKind { Gradient, Rotated };

/// Normalized gradient field grad(psi)/|grad psi| or its rotation
/// grad(psi) x n, sampled at the icosphere vertices.
struct HarmonicBasisElement {
  HarmonicIndex index;
  FieldKind kind = FieldKind::Gradient;
  double norm = 1.0;  // quadrature norm of grad psi
  std::vector<Vec3> field;
  std::vector<double> divergence;

  /// Analytic field and divergence at an arbitrary unit point.
  Vec3 evaluate(const Vec3& p) const;
  double divergence_at(const Vec3& p) const;
};

/// Gradient and rotated fields of every psi with 1 <= l <= L:
/// 2((L+1)^2 - 1) elements.
std::vector<HarmonicBasisElement> harmonic_tangent_basis(const geometry::Icosphere& ico, int max_degree);

/// Divergence of a tangent field at p as the outward flux through a small
/// geodesic circle of radius r divided by its area.
template <typename Field>
double flux_divergence(const Field& field, const Vec3& p, double r = 1e-2, int samples = 32) {
  const auto frame = geometry::tangent_frame(p);
  double flux = 0.0;
  for (int s = 0; s < samples; ++s) {
    const double a = 2.0 * M_PI * (s + 0.5) / samples;
    const Vec3 dir = std::cos(a) * frame[0] + std::sin(a) * frame[1];
    const Vec3 x = geometry::sphere_exp(p, r * dir);
    const Vec3 normal = geometry::parallel_transport(p, x, dir);
    flux += field(x).dot(normal);
  }
  const double circumference = 2.0 * M_PI * std::sin(r);
  const double area = 2.0 * M_PI * (1.0 - std::cos(r));
  return flux / samples * circumference / area;
}

}  // namespace conalign::basis
