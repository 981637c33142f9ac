#pragma once

#include "conalign/density.hpp"

#include <Eigen/Core>

#include <memory>
#include <vector>

namespace conalign::warp {

using density::DensityField;
using density::HalfDensity;
using geometry::Vec3;

/// Boundary-fixing increasing map of [0,1] sampled on the uniform grid,
/// together with its derivative at the nodes.
class Warp1D {
 public:
  /// Throws DiffeomorphismError unless the invariants hold.
  Warp1D(std::vector<double> values, std::vector<double> derivative);

  static Warp1D identity(std::size_t n);
  /// Derivative taken from the monotone cubic through the values.
  static Warp1D from_values(std::vector<double> values);

  std::size_t size() const { return values_.size(); }
  const std::vector<double>& values() const { return values_; }
  const std::vector<double>& derivative() const { return derivative_; }

  /// Monotone cubic evaluation between nodes.
  double operator()(double t) const;
  /// Monotone cubic interpolation of the node derivatives.
  double slope(double t) const;

 private:
  std::vector<double> values_;
  std::vector<double> derivative_;
};

/// outer o inner.
Warp1D compose(const Warp1D& outer, const Warp1D& inner);
Warp1D invert(const Warp1D& gamma);
/// gamma_id + sigma * g with derivative 1 + sigma * gdot.
Warp1D incremental_warp(const std::vector<double>& g, const std::vector<double>& gdot, double sigma);

HalfDensity act(const HalfDensity& q, const Warp1D& gamma);
/// Defined through the half-density action: unmap(act(map(f), gamma)).
DensityField act(const DensityField& f, const Warp1D& gamma);
/// d/dx along the first index of act(q, gamma), by the chain rule through the
/// interpolant of q rather than by differencing the warped samples.
density::Matrix action_slopes(const HalfDensity& q, const Warp1D& gamma);

/// How a sphere warp known at the vertices is evaluated inside a face.
enum class SphereInterpolation {
  Chordal,                 // normalize(sum_k lambda_k gamma(v_k))
  TransportedDisplacement  // exp_p(sum_k lambda_k PT_{v_k->p} log_{v_k} gamma(v_k))
};

/// Per-vertex target map of an icosphere onto itself.
class SphereWarp {
 public:
  SphereWarp(std::shared_ptr<const geometry::Icosphere> ico, std::vector<Vec3> targets,
             SphereInterpolation mode = SphereInterpolation::Chordal);

  static SphereWarp identity(std::shared_ptr<const geometry::Icosphere> ico,
                             SphereInterpolation mode = SphereInterpolation::Chordal);
  static SphereWarp rotation(std::shared_ptr<const geometry::Icosphere> ico, const Eigen::Matrix3d& r);

  const geometry::Icosphere& ico() const { return *ico_; }
  std::shared_ptr<const geometry::Icosphere> ico_ptr() const { return ico_; }
  const std::vector<Vec3>& targets() const { return targets_; }
  SphereInterpolation mode() const { return mode_; }

  Vec3 operator()(const Vec3& p) const;

  /// |J| at vertex v by central differences of step delta along the tangent
  /// frame. Throws DiffeomorphismError when nonpositive.
  double jacobian(std::size_t v, double delta = 1e-3) const;
  std::vector<double> jacobians(double delta = 1e-3) const;

 private:
  std::shared_ptr<const geometry::Icosphere> ico_;
  std::vector<Vec3> targets_;
  SphereInterpolation mode_;
};

SphereWarp compose(const SphereWarp& outer, const SphereWarp& inner);
/// Pointwise exp_v(sigma * g(v)).
SphereWarp incremental_warp(std::shared_ptr<const geometry::Icosphere> ico, const std::vector<Vec3>& g, double sigma,
                            SphereInterpolation mode = SphereInterpolation::Chordal);
/// Inverse of the piecewise map: each vertex is located in the warped mesh and
/// pulled back with the same barycentric weights. Exact for chordal warps.
SphereWarp invert(const SphereWarp& gamma);

/// Warps for the two hemispheres of a dual-sphere domain.
struct DualWarp {
  SphereWarp first;
  SphereWarp second;

  static DualWarp identity(std::shared_ptr<const geometry::Icosphere> ico,
                           SphereInterpolation mode = SphereInterpolation::Chordal);
};

struct SphereActionOptions {
  double jacobian_step = 1e-3;
  bool renormalize = true;
};

struct SphereActionReport {
  double raw_norm = 1.0;  // L2 norm before renormalization
  double min_jacobian = 1.0;
  double max_jacobian = 1.0;
};

HalfDensity act(const HalfDensity& q, const SphereWarp& gamma, const SphereActionOptions& opts = {},
                SphereActionReport* report = nullptr);
HalfDensity act(const HalfDensity& q, const DualWarp& gamma, const SphereActionOptions& opts = {},
                SphereActionReport* report = nullptr);
DensityField act(const DensityField& f, const SphereWarp& gamma, const SphereActionOptions& opts = {},
                 SphereActionReport* report = nullptr);
DensityField act(const DensityField& f, const DualWarp& gamma, const SphereActionOptions& opts = {},
                 SphereActionReport* report = nullptr);

}  // namespace conalign::warp
