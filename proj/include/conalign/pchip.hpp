#pragma once

#include <cstddef>
#include <span>
#include <vector>

// Shape-preserving piecewise cubic Hermite interpolation (Fritsch-Carlson
// slopes, identical to the classic PCHIP rule).
namespace conalign::pchip {

/// Node slopes for data y over strictly increasing abscissae x.
std::vector<double> slopes(std::span<const double> x, std::span<const double> y);

/// Slopes for data sampled on a uniform grid with spacing h, written to out.
void uniform_slopes(std::span<const double> y, double h, std::span<double> out);

class Interpolant {
 public:
  Interpolant(std::vector<double> x, std::vector<double> y);

  double operator()(double t) const;
  double derivative(double t) const;

  const std::vector<double>& knots() const { return x_; }
  const std::vector<double>& node_slopes() const { return d_; }

 private:
  std::size_t interval(double t) const;

  std::vector<double> x_;
  std::vector<double> y_;
  std::vector<double> d_;
};

/// Precomputed Hermite basis weights of one query point on a uniform grid:
/// value = w00*y[k] + w01*y[k+1] + w10*d[k] + w11*d[k+1].
struct Stencil {
  std::size_t k = 0;
  double w00 = 0.0, w01 = 0.0, w10 = 0.0, w11 = 0.0;
};

/// Stencils for query points in [0,1] on the uniform grid with n nodes.
std::vector<Stencil> uniform_stencils(std::size_t n, std::span<const double> queries);
/// Same, with the weights of the first derivative.
std::vector<Stencil> uniform_derivative_stencils(std::size_t n, std::span<const double> queries);

}  // namespace conalign::pchip
