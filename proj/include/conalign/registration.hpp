#pragma once

#include "conalign/basis.hpp"
#include "conalign/density.hpp"
#include "conalign/warp.hpp"

#include <Eigen/Core>

#include <array>
#include <memory>
#include <string>
#include <variant>
#include <vector>

namespace conalign::registration {

using density::DensityField;
using density::HalfDensity;
using density::Matrix;
using geometry::Vec3;

/// Linearization of the sphere action used for gradients.
enum class Linearization {
  Discrete,  // exact derivative of the resampled action: central differences along b, mesh divergence
  Frame      // forward differences along the tangent frame and the analytic divergence of b
};

/// How dq/dx is taken on the interval grid.
enum class SlopeScheme {
  Central,  // central differences, one-sided at the ends
  Pchip,    // node slopes of the monotone cubic used by the warp action
  Warped    // registration only: chain rule through the unwarped density and the accumulated warp
};

struct RegistrationConfig {
  double step_size = 0.0;  // sigma; 0 selects the domain default
  double tolerance = 0.0;  // epsilon; 0 selects the domain default
  int basis_size = 0;      // M on [0,1], max degree L on spheres; 0 selects the default
  int max_iterations = 200;
  double jacobian_step = 1e-3;
  double spatial_step = 1e-3;
  double step_decay = 0.5;
  int max_backoffs = 20;
  SlopeScheme slopes = SlopeScheme::Warped;
  Linearization linearization = Linearization::Discrete;
  warp::SphereInterpolation interpolation = warp::SphereInterpolation::Chordal;
  bool multires = false;
  bool renormalize = true;

  /// Fills zero fields with the defaults of the domain kind.
  RegistrationConfig resolved(density::DomainKind kind) const;
  /// Throws ValidationError.
  void validate() const;
};

struct Trace {
  std::vector<double> cost;           // H after each accepted step, starting with the initial value
  std::vector<double> gradient_norm;  // |grad H| at each iterate
  std::vector<double> step;           // accepted sigma per iteration
  int iterations = 0;
  bool converged = false;
  std::string stop_reason;
};

struct Result1D {
  warp::Warp1D warp;
  Trace trace;
};

struct ResultSphere {
  warp::SphereWarp warp;
  Trace trace;
};

struct ResultDual {
  warp::DualWarp warp;
  Trace trace;
};

/// dq/dx along the first index at every node pair. Warped falls back to Pchip,
/// which it equals at the identity warp.
Matrix spatial_slopes(const HalfDensity& q, SlopeScheme scheme);

Matrix dphi_1d(const HalfDensity& q, const basis::BasisElement1D& b, SlopeScheme scheme = SlopeScheme::Pchip);

/// Forward-difference shifts of q along the two tangent frame directions at
/// every node; D[k](i,j) is the derivative in the first argument.
struct SphereShifts {
  std::array<Matrix, 2> d;
  std::vector<std::array<Vec3, 2>> frame;  // per node
};
SphereShifts sphere_shifts(const HalfDensity& q, double eps = 1e-3);

/// dPhi(b) on a sphere domain. For a dual-sphere domain b acts on the given
/// hemisphere and is zero on the other one.
Matrix dphi_sphere(const HalfDensity& q, const basis::HarmonicBasisElement& b, double eps = 1e-3, int hemisphere = 0);
Matrix dphi_sphere(const SphereShifts& shifts, const HalfDensity& q, const basis::HarmonicBasisElement& b,
                   int hemisphere = 0);

/// -2 <q1 - q2, dphi>.
double directional_derivative(const HalfDensity& q1, const HalfDensity& q2, const Matrix& dphi);

struct Gradient1D {
  Eigen::VectorXd coefficients;
  std::vector<double> field;
  std::vector<double> derivative;
  double norm = 0.0;
};

struct GradientSphere {
  Eigen::VectorXd coefficients;
  std::vector<Vec3> field;
  double norm = 0.0;
};

/// Gradient of H(q1, q2 * gamma) at gamma_id, via row sums.
Gradient1D gradient_H(const HalfDensity& q1, const HalfDensity& q2, const std::vector<basis::BasisElement1D>& basis,
                      SlopeScheme scheme = SlopeScheme::Pchip);
/// Same, with dq2/dx supplied.
Gradient1D gradient_H(const HalfDensity& q1, const HalfDensity& q2, const Matrix& slopes,
                      const std::vector<basis::BasisElement1D>& basis);
/// Same quantity assembled element by element from dphi_1d.
Gradient1D gradient_H_explicit(const HalfDensity& q1, const HalfDensity& q2,
                               const std::vector<basis::BasisElement1D>& basis,
                               SlopeScheme scheme = SlopeScheme::Pchip);

/// Frame linearization: forward shifts along the tangent frame, analytic divergence.
GradientSphere gradient_H(const HalfDensity& q1, const HalfDensity& q2,
                          const std::vector<basis::HarmonicBasisElement>& basis, double eps = 1e-3,
                          int hemisphere = 0);
GradientSphere gradient_H_explicit(const HalfDensity& q1, const HalfDensity& q2,
                                   const std::vector<basis::HarmonicBasisElement>& basis, double eps = 1e-3,
                                   int hemisphere = 0);

/// Derivative at t = 0 of q * exp(t b), for every b of a harmonic basis, taken
/// through the same barycentric resampling and finite-difference Jacobian as
/// the warp action. The basis must outlive the object.
class SphereLinearizer {
 public:
  SphereLinearizer(std::shared_ptr<const geometry::Icosphere> ico, const std::vector<basis::HarmonicBasisElement>& basis,
                   double spatial_step = 1e-3, double jacobian_step = 1e-3,
                   warp::SphereInterpolation mode = warp::SphereInterpolation::Chordal);

  std::size_t size() const { return elements_.size(); }
  const std::vector<basis::HarmonicBasisElement>& basis() const { return *basis_; }
  const geometry::Icosphere& ico() const { return *ico_; }
  /// d/dt of the finite-difference Jacobian of exp(t b_k) at every vertex.
  const Eigen::VectorXd& mesh_divergence(std::size_t k) const { return elements_[k].divergence; }

  Matrix dphi(const HalfDensity& q, std::size_t k, int hemisphere = 0) const;
  /// All directional derivatives of H, via row sums over the stencils.
  Eigen::VectorXd gradient(const HalfDensity& q1, const HalfDensity& q2, int hemisphere = 0) const;

 private:
  struct Element {
    std::vector<std::array<int, 6>> slot;  // positions in neighbors_[i]
    std::vector<std::array<double, 6>> coef;
    Eigen::VectorXd divergence;
  };
  std::shared_ptr<const geometry::Icosphere> ico_;
  const std::vector<basis::HarmonicBasisElement>* basis_;
  std::vector<std::vector<int>> neighbors_;
  std::vector<Element> elements_;

  void check(const HalfDensity& q, int hemisphere) const;
};

GradientSphere gradient_H(const HalfDensity& q1, const HalfDensity& q2, const SphereLinearizer& lin,
                          int hemisphere = 0);
GradientSphere gradient_H_explicit(const HalfDensity& q1, const HalfDensity& q2, const SphereLinearizer& lin,
                                   int hemisphere = 0);

/// Cached linearizer of harmonic_basis(level, max_degree).
const SphereLinearizer& sphere_linearizer(int level, int max_degree, double spatial_step = 1e-3,
                                          double jacobian_step = 1e-3,
                                          warp::SphereInterpolation mode = warp::SphereInterpolation::Chordal);

/// Cached tangent basis of an icosphere level.
const std::vector<basis::HarmonicBasisElement>& harmonic_basis(int level, int max_degree);

Result1D register_interval(const HalfDensity& q1, const HalfDensity& q2, const RegistrationConfig& cfg,
                           const warp::Warp1D* init = nullptr);
ResultSphere register_sphere(const HalfDensity& q1, const HalfDensity& q2, const RegistrationConfig& cfg,
                             const warp::SphereWarp* init = nullptr);
ResultDual register_dual(const HalfDensity& q1, const HalfDensity& q2, const RegistrationConfig& cfg,
                         const warp::DualWarp* init = nullptr);

using AnyResult = std::variant<Result1D, ResultSphere, ResultDual>;

/// Aligns f2 to f1 on any domain kind.
AnyResult register_pair(const DensityField& f1, const DensityField& f2, const RegistrationConfig& cfg);

/// Restriction of a sphere or dual-sphere field to a coarser nested level.
HalfDensity restrict_level(const HalfDensity& q, int level);
/// Evaluates a coarse warp at the vertices of a finer icosphere.
warp::SphereWarp prolong(const warp::SphereWarp& coarse, int level);

}  // namespace conalign::registration
